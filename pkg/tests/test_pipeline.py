import json
import warnings
from dataclasses import dataclass

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from demandscope.errors import (
    CensusGroupWarning,
    DegenerateFeature,
    MissingCell,
    NoEligibleImage,
    NoStableBills,
    OutOfBounds,
    RecordError,
    TooFewSamples,
    UnknownWard,
    ValidationError,
)
from demandscope.pipeline.dataset import (
    augment,
    fit_image_stats,
    fit_standardizer,
    flip_h,
    flip_v,
    nested_indices,
    normalize,
    rot90,
    stratified_split,
    zoom,
)
from demandscope.pipeline.loaders import load_billing, load_survey
from demandscope.pipeline.patches import ImageIndex, Raster, extract_patch, match_pre_electrification_patch
from demandscope.pipeline.records import (
    BillingRecord,
    TierLabel,
    assign_label,
    binary_label,
    compute_stable_consumption,
    format_month,
    parse_month,
)
from demandscope.pipeline.tables import (
    CENSUS_INDICATORS,
    CellGrid,
    CensusTable,
    ViirsTable,
    attach_census,
    attach_nightlight,
    nightlight_year,
)

M = parse_month


# ------------------------------------------------------------- records

def _rec(conn, bills):
    return BillingRecord("c1", "b1", (36.0, 1.0), M(conn), tuple((M(m), k) for m, k in bills))


def test_stable_consumption_mean():
    s = compute_stable_consumption(_rec("2014-01", [("2015-01", 10), ("2015-02", 20), ("2015-03", 30)]))
    assert s.mean_kwh_per_month == 20.0 and s.n_months_used == 3


def test_stable_consumption_ignores_early_bills():
    s = compute_stable_consumption(_rec("2014-01", [("2014-06", 99), ("2015-02", 40)]))
    assert s.mean_kwh_per_month == 40.0 and s.n_months_used == 1


def test_no_stable_bills():
    with pytest.raises(NoStableBills):
        compute_stable_consumption(_rec("2014-01", [("2014-03", 5), ("2014-12", 7)]))


def test_bill_invariants():
    with pytest.raises(RecordError):
        _rec("2014-01", [("2015-02", 1), ("2015-01", 1)])
    with pytest.raises(RecordError):
        _rec("2014-01", [("2015-02", -1)])
    with pytest.raises(RecordError):
        _rec("2014-01", [("2015-02", float("nan"))])


def test_month_round_trip():
    assert format_month(M("2016-07")) == "2016-07"
    with pytest.raises(RecordError):
        M("2016-13")


def test_label_boundaries():
    assert assign_label(30.0) is TierLabel.LOW
    assert assign_label(60.0) is TierLabel.HIGH
    assert assign_label(45.0) is TierLabel.EXCLUDED_MID
    assert binary_label(31.0) is TierLabel.HIGH and binary_label(30.0) is TierLabel.LOW


@given(st.floats(0, 500, allow_nan=False))
def test_label_partition(kwh):
    lab = assign_label(kwh)
    assert (lab is TierLabel.LOW) == (kwh <= 30)
    assert (lab is TierLabel.HIGH) == (kwh >= 60)
    assert (lab is TierLabel.EXCLUDED_MID) == (30 < kwh < 60)


def test_billing_loader_reports_line(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("customer_id,building_id,lon,lat,connection_month,bill_month,kwh\n"
                 "c1,b1,36,1,2014-01,2015-01,10\n"
                 "c1,b1,36,1,2014-01,2015-02,oops\n")
    with pytest.raises(RecordError, match=":3:"):
        load_billing(p)


def test_billing_loader_drops_shared_buildings(tmp_path):
    p = tmp_path / "b.csv"
    p.write_text("customer_id,building_id,lon,lat,connection_month,bill_month,kwh\n"
                 "c1,b1,36,1,2014-01,2015-01,10\n"
                 "c2,b1,36,1,2014-01,2015-01,12\n"
                 "c3,b2,36,1,2014-01,2015-01,70\n")
    t = load_billing(p)
    assert set(t.records) == {"b2"} and t.dropped_multi_customer == ("b1",)


def test_survey_loader_missing_column(tmp_path):
    p = tmp_path / "s.csv"
    p.write_text("county_id,household_id,reported_kwh\nC00,h1,3\n")
    with pytest.raises(ValidationError):
        load_survey(p)


# -------------------------------------------------------------- imagery

def _raster(month="2013-05", size=256):
    px = np.arange(size * size * 3, dtype=np.uint32).reshape(size, size, 3).astype(np.uint8)
    return Raster("r", px, (36.0, 1.0), (1e-5, 1e-5), M(month))


def _lonlat(r, row, col):
    return r.origin[0] + (col + 0.5) * r.pixel_size[0], r.origin[1] - (row + 0.5) * r.pixel_size[1]


def test_patch_centering():
    r = _raster()
    patch = extract_patch(r, *_lonlat(r, 128, 128))
    assert patch.pixels.shape == (128, 128, 3)
    np.testing.assert_array_equal(patch.pixels[64, 64], r.pixels[128, 128])


def test_patch_near_edge_out_of_bounds():
    r = _raster()
    with pytest.raises(OutOfBounds):
        extract_patch(r, *_lonlat(r, 128, 10))


def test_patch_deterministic():
    r = _raster()
    a = extract_patch(r, *_lonlat(r, 100, 140)).pixels
    b = extract_patch(r, *_lonlat(r, 100, 140)).pixels
    assert a.tobytes() == b.tobytes()


@pytest.mark.parametrize("image_month,ok", [("2013-05", True), ("2014-06", True), ("2016-01", False)])
def test_image_eligibility(image_month, ok):
    r = _raster(image_month)
    pt = _lonlat(r, 128, 128)
    if ok:
        assert match_pre_electrification_patch(*pt, M("2014-01"), ImageIndex([r])).pixels.shape == (128, 128, 3)
    else:
        with pytest.raises(NoEligibleImage):
            match_pre_electrification_patch(*pt, M("2014-01"), ImageIndex([r]))


def test_strict_dates_reject_post_connection_image():
    r = _raster("2014-06")
    with pytest.raises(NoEligibleImage):
        match_pre_electrification_patch(*_lonlat(r, 128, 128), M("2014-01"), ImageIndex([r]), strict=True)


def test_no_image_covers_point():
    with pytest.raises(NoEligibleImage):
        match_pre_electrification_patch(10.0, 10.0, M("2014-01"), ImageIndex([_raster()]))


# -------------------------------------------------------- census, lights

def _census_row(**over):
    row = {n: 0.0 for n in CENSUS_INDICATORS}
    for first in ("water_surface", "sanitation_improved", "lightfuel_finished", "floor_finished",
                  "cookfuel_finished", "wall_finished", "roof_finished"):
        row[first] = 1.0
    row.update(over)
    return row


def test_census_same_ward_same_vector():
    t = CensusTable.from_rows({"W1": _census_row()})
    a, b = attach_census("W1", t), attach_census("W1", t)
    assert a.shape == (17,) and np.array_equal(a, b)
    with pytest.raises(UnknownWard):
        attach_census("W2", t)


def test_census_group_sum_warning():
    with pytest.warns(CensusGroupWarning):
        CensusTable.from_rows({"W1": _census_row(roof_rudimentary=0.5)})


@pytest.mark.parametrize("year,expected", [(2014, 2013), (2010, 2012), (2013, 2012), (2017, 2016)])
def test_nightlight_year(year, expected):
    assert nightlight_year(year) == expected


def test_attach_nightlight():
    grid = CellGrid(36.0, 1.0, 0.01, 2, 2)
    t = ViirsTable(grid, {(0, 2013): 1.5, (0, 2012): 0.5, (0, 2015): 3.0})
    assert attach_nightlight(36.005, 0.995, 2014, t) == 1.5
    assert attach_nightlight(36.005, 0.995, 2011, t) == 0.5
    assert attach_nightlight(36.005, 0.995, 2018, t) == 3.0
    with pytest.raises(MissingCell):
        attach_nightlight(37.0, 0.995, 2014, t)


# ------------------------------------------------------------- splitting

@dataclass
class _S:
    building_id: str
    label: TierLabel

    @property
    def y(self):
        return self.label.class_index


def _population(n, n_low):
    return [_S(f"b{i:05d}", TierLabel.LOW if i < n_low else TierLabel.HIGH) for i in range(n)]


def test_split_sizes():
    sp = stratified_split(_population(20000, 8000), seed=1)
    assert (len(sp.train), len(sp.val), len(sp.test)) == (15000, 3000, 2000)


@given(st.integers(20, 400), st.floats(0.1, 0.9), st.integers(0, 1000))
@settings(max_examples=40, deadline=None)
def test_split_invariants(n, low_frac, seed):
    n_low = min(max(int(n * low_frac), 10), n - 10)
    pop = _population(n, n_low)
    sp = stratified_split(pop, seed=seed)
    ids = [s.building_id for part in (sp.train, sp.val, sp.test) for s in part]
    assert sorted(ids) == sorted(s.building_id for s in pop)
    assert len(set(ids)) == len(ids)
    for part, frac in zip((sp.train, sp.val, sp.test), (0.75, 0.15, 0.10)):
        lows = sum(s.label is TierLabel.LOW for s in part)
        highs = len(part) - lows
        assert abs(lows - frac * n_low) <= 1
        assert abs(highs - frac * (n - n_low)) <= 1


def test_split_preserves_ratio():
    sp = stratified_split(_population(1000, 400), seed=3)
    assert abs(sum(s.label is TierLabel.LOW for s in sp.train) - 0.4 * len(sp.train)) <= 1


def test_split_deterministic_and_order_free():
    pop = _population(300, 120)
    a = stratified_split(pop, seed=9)
    b = stratified_split(list(reversed(pop)), seed=9)
    assert [s.building_id for s in a.train] == [s.building_id for s in b.train]
    assert [s.building_id for s in a.test] == [s.building_id for s in b.test]


def test_split_rejects_mid_and_tiny_strata():
    with pytest.raises(ValidationError):
        stratified_split(_population(50, 20) + [_S("m", TierLabel.EXCLUDED_MID)])
    with pytest.raises(TooFewSamples):
        stratified_split(_population(50, 5))


def test_nested_fractions():
    labels = np.array([0] * 60 + [1] * 40)
    idx = nested_indices(labels, [0.05, 0.2, 1.0], seed=2)
    assert set(idx[0.05]) <= set(idx[0.2]) <= set(idx[1.0])
    assert len(idx[1.0]) == 100 and len(idx[0.2]) == 20


# ---------------------------------------------------------- augmentation

patches = st.integers(0, 2**31).map(lambda s: np.random.default_rng(s).integers(0, 256, (16, 16, 3), dtype=np.uint8))


@given(patches)
@settings(max_examples=30)
def test_rotation_group(p):
    q = p
    for _ in range(4):
        q = rot90(q)
    assert np.array_equal(q, p)


@given(patches)
@settings(max_examples=30)
def test_flips_are_involutions(p):
    assert np.array_equal(flip_h(flip_h(p)), p)
    assert np.array_equal(flip_v(flip_v(p)), p)


@given(patches)
@settings(max_examples=30)
def test_unit_zoom_is_identity(p):
    assert np.array_equal(zoom(p, 1.0), p)


def test_augment_applies_same_transform_to_mask(rng):
    img = np.zeros((32, 32, 3), np.uint8)
    img[4:10, 6:20] = 255
    mask = (img[..., 0] > 0).astype(np.uint8)
    for _ in range(10):
        a, m = augment(img, rng, mask)
        assert a.shape == img.shape and m.shape == mask.shape
        np.testing.assert_array_equal(a[..., 0] > 127, m > 0)


# ---------------------------------------------------------- normalization

def test_constant_channel_normalizes_to_zero():
    imgs = np.full((4, 8, 8, 3), 128, np.uint8)
    imgs[..., 1] = np.arange(64, dtype=np.uint8).reshape(8, 8)
    with pytest.warns(DegenerateFeature):
        stats = fit_image_stats(imgs)
    out = normalize(imgs, stats)
    np.testing.assert_allclose(out[..., 0], 0.0, atol=1e-6)


def test_feature_at_train_mean_is_zero():
    x = np.array([[1.0, 10.0], [3.0, 30.0]])
    stats = fit_standardizer(x)
    np.testing.assert_allclose(normalize(np.array([[2.0, 20.0]]), stats, np.float64), 0.0)


def test_validation_uses_train_statistics():
    rng = np.random.default_rng(0)
    stats = fit_standardizer(rng.normal(0, 1, (100, 3)))
    val = normalize(rng.normal(5, 1, (50, 3)), stats, np.float64)
    assert np.all(val.mean(axis=0) > 3)


# --------------------------------------------------------- end-to-end join

def test_build_samples_from_world(tiny_samples, tiny_world):
    ss = tiny_samples
    truth = {b.building_id: b for b in tiny_world.buildings}
    assert ss.labeled and ss.mid
    for s in ss.labeled + ss.mid:
        assert s.patch.pixels.shape == (128, 128, 3)
        assert s.census.shape == (17,)
        assert s.patch.acquisition_month < s.connection_year * 12 + 12 + 12
        b = truth[s.building_id]
        assert s.ward_id == b.ward_id and s.county_id == b.county_id
        assert s.footprint_mask is not None and s.footprint_mask[64, 64] == 1
    assert sum(ss.report.dropped.values()) + len(ss.labeled) + len(ss.mid) >= ss.report.n_records


def test_census_roof_fraction_matches_world(tiny_dir, tiny_world):
    from demandscope.pipeline.loaders import load_census

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", CensusGroupWarning)
        census = load_census(tiny_dir / "census.csv")
    col = CENSUS_INDICATORS.index("roof_finished")
    for ward in {b.ward_id for b in tiny_world.buildings}:
        roofs = [b.roof == "metal" for b in tiny_world.buildings if b.ward_id == ward]
        assert census.wards[ward][col] == pytest.approx(np.mean(roofs), abs=1e-3)
