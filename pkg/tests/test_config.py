import json

import pytest

from demandscope.config import PROFILES, encoder_config, load_config, profile_defaults, train_config
from demandscope.errors import InvalidConfig


def test_profiles():
    assert PROFILES == ("paper", "quick")
    paper = load_config()
    assert paper["profile"] == "paper"
    assert paper["classifier"]["lr"] == 1e-5 and paper["classifier"]["batch_size"] == 64
    assert encoder_config(paper).filters == 64
    quick = load_config(overrides={"profile": "quick"})
    assert encoder_config(quick).filters < encoder_config(paper).filters
    assert quick["classifier"]["batch_size"] == 64


def test_file_then_flags(tmp_path):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"profile": "quick", "seed": 3, "classifier": {"epochs": 4}}))
    cfg = load_config(p, {"seed": 9})
    assert cfg["profile"] == "quick" and cfg["seed"] == 9
    tc = train_config(cfg, "classifier")
    assert tc.epochs == 4 and tc.seed == 9 and tc.lr == profile_defaults("quick")["classifier"]["lr"]


@pytest.mark.parametrize("body", [
    {"schema_version": 99},
    {"surprise": 1},
    {"classifier": {"lr": -1}},
    {"encoder": {"filters": 0}},
    {"encoder": {"colour": "blue"}},
    [1, 2],
])
def test_rejects_bad_files(tmp_path, body):
    p = tmp_path / "c.json"
    p.write_text(json.dumps(body))
    with pytest.raises(InvalidConfig):
        load_config(p)


def test_unreadable_file(tmp_path):
    with pytest.raises(InvalidConfig):
        load_config(tmp_path / "missing.json")
    with pytest.raises(InvalidConfig):
        load_config(overrides={"profile": "fast"})
