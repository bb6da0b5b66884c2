import numpy as np
import pytest

from demandscope.synth import generate_world, world_spec, write_world


@pytest.fixture(scope="session")
def tiny_world():
    return generate_world(world_spec("realistic", seed=5, n_counties=3, buildings_per_ward=16))


@pytest.fixture(scope="session")
def tiny_dir(tmp_path_factory, tiny_world):
    d = tmp_path_factory.mktemp("tiny_world")
    write_world(tiny_world, d)
    return d


@pytest.fixture(scope="session")
def tiny_samples(tiny_dir):
    from demandscope.pipeline import build_samples

    return build_samples(tiny_dir)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


_CRITERIA: dict[int, tuple[str, str, str]] = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n, title): acceptance criterion number and title")


def pytest_runtest_logreport(report):
    mark = dict(report.user_properties).get("criterion")
    if mark is None or (report.when != "call" and report.passed):
        return
    n, title = mark
    detail = dict(report.user_properties).get("detail", "")
    status = "PASS" if report.passed else "FAIL"
    if n not in _CRITERIA or status == "FAIL":
        _CRITERIA[n] = (title, status, detail)


def pytest_runtest_setup(item):
    m = item.get_closest_marker("criterion")
    if m is not None:
        item.user_properties.append(("criterion", tuple(m.args)))


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(_CRITERIA):
        title, status, detail = _CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d} {status}  {title}: {detail}")
