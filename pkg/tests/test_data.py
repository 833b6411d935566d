import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from dmvst.data import (DemandGrid, GridSpec, Normalizer, SynthConfig, TaxiRequest, aggregate_demand,
                        build_context, build_samples, dedup_filter, default_spec, fit_normalizer,
                        grid_to_requests, parse_requests, split_train_val, synth_generate)
from dmvst.data.context import recent_mean
from dmvst.data.store import load_bundle, load_grid, save_bundle, save_grid
from dmvst.errors import (DegenerateRangeError, FormatError, InputError, InsufficientHistoryError,
                          SplitError)
from dmvst.spatial import extract_patch

MONDAY = 1486339200  # 2017-02-06 00:00 UTC
SPEC = GridSpec(0.0, 2.0, 0.0, 2.0, 2, 2)


def grid_of(counts, spec=None, start=MONDAY):
    counts = np.asarray(counts, dtype=np.int64)
    if spec is None:
        spec = GridSpec(0.0, 1.0, 0.0, 1.0, counts.shape[1], counts.shape[2])
    return DemandGrid(spec, counts, start)


# -- grid spec ------------------------------------------------------------------

def test_gridspec_validation():
    with pytest.raises(InputError):
        GridSpec(0, 1, 0, 1, 0, 2)
    with pytest.raises(InputError):
        GridSpec(0, 1, 0, 1, 2, 2, interval_minutes=7)
    with pytest.raises(InputError):
        GridSpec(1, 1, 0, 1, 2, 2)


def test_cell_binning_and_upper_edge():
    x, y = SPEC.cell_of([0.0, 0.99, 1.0, 2.0], [0.0, 1.5, 1.0, 2.0])
    assert list(x) == [0, 1, 1, 1]
    assert list(y) == [0, 0, 1, 1]
    assert SPEC.region_of(1.5, 0.5) == 1  # x=0, y=1
    assert SPEC.region_cell(3) == (1, 1)


# -- parsing --------------------------------------------------------------------

def test_parse_empty_source():
    reqs, report = parse_requests([])
    assert reqs == [] and report.rejected == 0


def test_parse_three_rows_with_header():
    lines = ["timestamp,lat,lng,user_id", "10,0.5,0.5,a", "20,1.5,0.5,b", "30,0.1,1.9,c"]
    reqs, report = parse_requests(lines, SPEC)
    assert len(reqs) == 3 and report.rows == 3 and report.rejected == 0
    assert reqs[1] == TaxiRequest(20, 1.5, 0.5, "b")


def test_parse_out_of_bounds_is_counted():
    reqs, report = parse_requests(["10,0.5,0.5,a", "10,5.0,0.5,b"], SPEC)
    assert len(reqs) == 1 and report.out_of_bounds == 1 and report.rejected == 1


def test_parse_malformed_counted_then_fatal():
    reqs, report = parse_requests(["10,0.5,0.5,a", "x,0.5,0.5,b", "10,0.5,0.5,c"], SPEC)
    assert len(reqs) == 2 and report.malformed == 1
    with pytest.raises(FormatError):
        parse_requests(["bad", "10,0.5,0.5,a", "1,2", "q,q,q,q"], SPEC)


def test_parse_unreadable_path(tmp_path):
    with pytest.raises(OSError):
        parse_requests(tmp_path / "missing.csv")


# -- dedup ----------------------------------------------------------------------

def test_dedup_rules():
    same = [TaxiRequest(MONDAY + 5, 0.5, 0.5, "u"), TaxiRequest(MONDAY + 9, 0.6, 0.6, "u")]
    assert len(dedup_filter(same, SPEC)) == 1
    two_users = [TaxiRequest(MONDAY, 0.5, 0.5, "u"), TaxiRequest(MONDAY, 0.5, 0.5, "v")]
    assert len(dedup_filter(two_users, SPEC)) == 2
    # different intervals survive
    assert len(dedup_filter([TaxiRequest(MONDAY, 0.5, 0.5, "u"),
                             TaxiRequest(MONDAY + 1800, 0.5, 0.5, "u")], SPEC)) == 2


def test_dedup_spam_cap():
    spam = [TaxiRequest(MONDAY + 1800 * k, 0.5, 0.5, "s") for k in range(40)] * 3 \
        + [TaxiRequest(MONDAY + 86400, 0.5, 0.5, "s")]
    assert len(spam) == 121
    kept = dedup_filter(spam[:100] + spam[-1:], SPEC, daily_cap=100)
    assert len(kept) == 41
    kept = dedup_filter(spam[:101] + spam[-1:], SPEC, daily_cap=100)
    assert [r.timestamp for r in kept] == [MONDAY + 86400]


# -- aggregation ----------------------------------------------------------------

def test_aggregate_hand_count():
    reqs = [TaxiRequest(MONDAY + 1, 0.5, 0.5, "a"), TaxiRequest(MONDAY + 2, 0.4, 0.2, "b"),
            TaxiRequest(MONDAY + 3, 1.5, 1.5, "c")]
    grid = aggregate_demand(reqs, SPEC)
    assert grid.counts.shape == (1, 2, 2)
    assert grid.counts[0, 0, 0] == 2 and grid.counts[0, 1, 1] == 1 and grid.counts.sum() == 3


def test_aggregate_empty_and_boundary():
    grid = aggregate_demand([], SPEC, MONDAY, MONDAY + 3600)
    assert grid.counts.shape == (2, 2, 2) and grid.counts.sum() == 0
    grid = aggregate_demand([TaxiRequest(MONDAY + 1800, 0.5, 0.5, "a")], SPEC, MONDAY, MONDAY + 3600)
    assert grid.counts[1, 0, 0] == 1 and grid.counts[0].sum() == 0


def test_aggregate_excludes_out_of_range():
    reqs = [TaxiRequest(MONDAY - 1, 0.5, 0.5, "a"), TaxiRequest(MONDAY + 10, 0.5, 0.5, "b"),
            TaxiRequest(MONDAY + 3600, 0.5, 0.5, "c")]
    grid = aggregate_demand(reqs, SPEC, MONDAY, MONDAY + 3600)
    assert grid.counts.sum() == 1 and grid.excluded == 2


@settings(max_examples=40, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 86399), st.floats(0, 2), st.floats(0, 2)), max_size=60))
def test_aggregate_total_equals_in_range(rows):
    reqs = [TaxiRequest(MONDAY + t, lat, lng, f"u{k}") for k, (t, lat, lng) in enumerate(rows)]
    grid = aggregate_demand(reqs, SPEC, MONDAY, MONDAY + 86400)
    assert grid.counts.sum() + grid.excluded == len(reqs) and grid.excluded == 0


def test_synth_requests_roundtrip_through_ingest():
    grid, _ = synth_generate(3, default_spec(4, 3), days=2)
    reqs = grid_to_requests(grid, 3)
    kept = dedup_filter(reqs, grid.spec, daily_cap=10**9)
    back = aggregate_demand(kept, grid.spec, grid.start_time,
                            grid.start_time + grid.n_intervals * grid.spec.interval_seconds)
    np.testing.assert_array_equal(back.counts, grid.counts)


# -- normalizer -----------------------------------------------------------------

def test_normalizer_examples():
    n = Normalizer(0.0, 10.0)
    assert n.normalize(5) == 0.5
    assert n.normalize(12) == pytest.approx(1.2)
    with pytest.raises(DegenerateRangeError):
        fit_normalizer([3, 3, 3])


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e4, 1e4), st.floats(1e-3, 1e4), st.floats(0, 1))
def test_normalizer_roundtrip(lo, span, frac):
    n = Normalizer(lo, lo + span)
    x = lo + frac * span
    assert abs(n.denormalize(n.normalize(x)) - x) <= 1e-9 * max(1.0, abs(x))


# -- context --------------------------------------------------------------------

def test_context_layout_and_one_hots():
    counts = np.full((48 * 2, 2, 2), 10)
    grid = grid_of(counts)
    ctx = build_context(grid, holidays={dt.date(2017, 2, 7)}, recent_scale=Normalizer(0, 20))
    assert ctx.width == 1 + 48 + 7 + 2 + 0 + 1 == 59
    row = ctx.row(0, 0)
    tod, dow = ctx.block("time_of_day")[0, 0], ctx.block("day_of_week")[0, 0]
    assert tod[0] == 1 and tod.sum() == 1 and dow[0] == 1 and dow.sum() == 1
    assert row[ctx.layout["recent_demand"][0]] == 0.5
    hol = ctx.block("holiday")[:, 0, 0]
    assert hol[:48].sum() == 0 and hol[48:].sum() == 48
    assert np.all(ctx.block("location") >= 0) and np.all(ctx.block("location") <= 1)


def test_context_weather_block():
    grid = grid_of(np.ones((6, 1, 1)))
    ctx = build_context(grid, weather=[0, 1, 2, 0, 1, 2], weather_width=4)
    w = ctx.block("weather")[:, 0]
    assert w.shape == (6, 4) and np.all(w.sum(axis=1) == 1) and w[2, 2] == 1


def test_context_too_short():
    with pytest.raises(InsufficientHistoryError):
        build_context(grid_of(np.ones((3, 1, 1))))


def test_recent_mean_window():
    s = np.arange(6.0)[:, None]
    np.testing.assert_allclose(recent_mean(s)[:, 0], [0, 0.5, 1, 1.5, 2.5, 3.5])


# -- samples --------------------------------------------------------------------

def _samples(counts, h, threshold=10, s=3):
    grid = grid_of(counts)
    ctx = build_context(grid)
    norm = Normalizer(0.0, max(float(grid.counts.max()), 1.0))
    emb = np.zeros((grid.spec.n_regions, 2))
    return grid, norm, build_samples(grid, ctx, emb, h, norm, threshold=threshold, patch_size=s)


def test_samples_index_enumeration():
    counts = np.arange(10).reshape(10, 1, 1) + 20
    _, _, ss = _samples(counts, h=8)
    assert list(ss.t) == [8] and ss.target_raw[0] == counts[9, 0, 0]
    with pytest.raises(InsufficientHistoryError):
        _samples(counts, h=9)


def test_samples_threshold_and_count():
    counts = np.full((12, 2, 2), 15)
    counts[5, 1, 0] = 9
    _, _, ss = _samples(counts, h=3)
    assert len(ss) == 4 * (12 - 1 - 3) - 1
    assert not np.any((ss.t + 1 == 5) & (ss.region == 2))
    _, _, ss0 = _samples(np.zeros((12, 2, 2), dtype=int) + np.arange(12)[:, None, None], h=3, threshold=0)
    assert len(ss0) == 4 * (12 - 1 - 3)


def test_sample_patches_match_extract_patch_and_center():
    rng = np.random.default_rng(0)
    counts = rng.integers(0, 30, size=(20, 4, 3))
    grid, norm, ss = _samples(counts, h=4, threshold=0, s=5)
    normed = norm.normalize(grid.counts)
    for k in rng.choice(len(ss), 10, replace=False):
        smp = ss[k]
        for j in range(4):
            expected = extract_patch(normed[smp.t - 3 + j], smp.region, 5)
            np.testing.assert_array_equal(smp.patches[j], expected)
        x, y = grid.spec.region_cell(smp.region)
        assert smp.patches[-1, 2, 2, 0] == norm.normalize(grid.counts[smp.t, x, y])
        assert smp.target == norm.normalize(grid.counts[smp.t + 1, x, y])
        assert smp.contexts.shape == (4, 59)


def test_split_ratio_ties_and_order():
    counts = np.full((105, 1, 1), 20)
    _, _, ss = _samples(counts, h=4)
    ss = ss.subset(np.arange(100))
    tr, va = split_train_val(ss)
    assert (len(tr), len(va)) == (90, 10) and tr.t.max() < va.t.min()
    tr, va = split_train_val(ss.subset(np.arange(10)))
    assert (len(tr), len(va)) == (9, 1)
    with pytest.raises(SplitError):
        split_train_val(ss.subset(np.arange(9)))


def test_split_ties_go_to_validation():
    counts = np.full((30, 2, 2), 20)
    _, _, ss = _samples(counts, h=4)           # four samples per interval
    tr, va = split_train_val(ss.subset(np.arange(22)))
    assert tr.t.max() < va.t.min()
    assert len(tr) == 16                     # floor(0.9 * 22) = 19 falls inside the 5th interval


# -- synthetic generator --------------------------------------------------------

def test_synth_deterministic():
    a, ta = synth_generate(5, days=8)
    b, tb = synth_generate(5, days=8)
    np.testing.assert_array_equal(a.counts, b.counts)
    np.testing.assert_array_equal(ta.clusters, tb.clusters)
    c, _ = synth_generate(6, days=8)
    assert not np.array_equal(a.counts, c.counts)


def test_synth_noiseless_matches_profile():
    cfg = SynthConfig(kappa=0.0, noise=0.0, drift=0.0)
    grid, truth = synth_generate(1, days=14, config=cfg)
    per_week = 7 * 48
    for region in (0, 17, 99):
        expected = truth.profiles[truth.clusters[region]]
        np.testing.assert_array_equal(grid.series[:per_week, region], expected)
        np.testing.assert_array_equal(grid.series[per_week:, region], expected)


def test_synth_two_balanced_clusters_and_spatial_term():
    _, truth = synth_generate(2, days=7)
    assert sorted(np.bincount(truth.clusters)) == [50, 50]
    cfg = SynthConfig(kappa=0.5, noise=0.0, drift=0.0)
    grid, truth = synth_generate(2, days=7, config=cfg)
    prof = truth.profiles[truth.clusters].T.reshape(-1, 10, 10)
    # corner cell (0, 0) has neighbours (0,1), (1,0), (1,1)
    nb = (prof[:, 0, 1] + prof[:, 1, 0] + prof[:, 1, 1]) / 3
    np.testing.assert_array_equal(grid.counts[:, 0, 0], np.round(prof[:, 0, 0] + 0.5 * nb))


# -- persistence ----------------------------------------------------------------

def test_grid_bundle_roundtrip(tmp_path):
    grid, _ = synth_generate(0, default_spec(3, 2), days=1)
    path = save_grid(tmp_path / "g.json", grid, Normalizer(0, 5))
    back, meta = load_grid(path)
    np.testing.assert_array_equal(back.counts, grid.counts)
    assert back.spec == grid.spec and back.start_time == grid.start_time
    assert meta["normalizer"] == {"min": 0, "max": 5}
    raw = (tmp_path / "g.counts.bin").read_bytes()
    assert len(raw) == grid.counts.size * 8
    assert np.frombuffer(raw, "<i8")[1] == grid.counts.ravel()[1]


def test_bundle_size_mismatch(tmp_path):
    path = save_bundle(tmp_path / "b", "x", {"a": np.arange(4.0)})
    (tmp_path / "b.a.bin").write_bytes(b"\0" * 8)
    with pytest.raises(InputError):
        load_bundle(path)
    with pytest.raises(InputError):
        load_bundle(save_bundle(tmp_path / "c", "x", {"a": np.arange(2.0)}), kind="grid")
