import math
from types import SimpleNamespace

import pytest
from hypothesis import given
from hypothesis import strategies as st

from gridhaul.analytics import ViolationBand, count_violations, histogram, summarize, violations_vs_fleet

volts = st.floats(0.0, 2.0)


def rec(n_charging, n_violations):
    return SimpleNamespace(n_charging=n_charging, n_violations=n_violations)


def test_in_band_has_no_violations():
    assert count_violations([1.0, 1.0]).count == 0


def test_count_and_positions():
    c = count_violations([0.94, 0.96, 1.06])
    assert c.count == 2 and c.buses == [0, 2]


def test_band_edges_are_not_violations():
    assert count_violations([0.95, 1.05]).count == 0


def test_collapsed_export_all_violate():
    assert count_violations([0.01] * 2000).count == 2000


def test_mapping_reports_bus_ids():
    assert count_violations({7: 0.9, 9: 1.0}).buses == [7]


def test_band_validation():
    with pytest.raises(ValueError):
        ViolationBand(1.05, 0.95)


@given(st.lists(volts, max_size=50), st.floats(0.5, 0.99), st.floats(0.0, 0.2), st.floats(0.0, 0.2))
def test_tightening_band_never_lowers_count(v, lo, shrink_lo, width):
    wide = ViolationBand(lo, lo + 0.05 + width + shrink_lo)
    narrow = ViolationBand(lo + shrink_lo / 2, lo + 0.05 + width + shrink_lo / 2)
    assert count_violations(v, narrow).count >= count_violations(v, wide).count


def test_summary_of_singleton():
    s = summarize([5])
    assert (s.minimum, s.maximum, s.median, s.mean, s.std_dev) == (5, 5, 5, 5, 0)


def test_summary_schema_row():
    s = summarize([1400, 40800, 13100])
    assert list(s.as_row()) == ["Minimum", "Maximum", "Median", "Mean", "Standard Deviation"]
    assert (s.minimum, s.maximum, s.median) == (1400, 40800, 13100)


def test_summary_hand_computed():
    s = summarize([1, 2, 3, 4])
    assert s.median == 2.5 and s.mean == 2.5
    assert s.std_dev == pytest.approx(math.sqrt(1.25), abs=1e-12)


def test_summary_of_empty_rejected():
    with pytest.raises(ValueError):
        summarize([])


@given(st.floats(-1e6, 1e6), st.integers(1, 30))
def test_constant_series(x, n):
    s = summarize([x] * n)
    assert s.std_dev == 0
    assert s.minimum == s.maximum == s.median == x
    assert s.mean == pytest.approx(x)


def test_histogram_examples():
    assert histogram([], 1) == {}
    assert histogram([0, 0, 1, 5], 1) == {0: 2, 1: 1, 5: 1}


def test_histogram_bins_half_open():
    assert histogram([0.999, 1.0, 2.0], 1.0) == {0.0: 1, 1.0: 1, 2.0: 1}


@given(st.lists(st.floats(-1e5, 1e5), max_size=200), st.floats(0.01, 1000))
def test_histogram_counts_sum_to_length(xs, w):
    assert sum(histogram(xs, w).values()) == len(xs)


def test_fleet_bins_all_zero():
    bins = violations_vs_fleet([rec(0, 0)] * 5, 100)
    assert len(bins) == 1 and bins[0].median == 0 and bins[0].maximum == 0


def test_fleet_bin_median_of_two():
    (b,) = violations_vs_fleet([rec(10, 2), rec(20, 386)], 100)
    assert b.median == 194 and b.maximum == 386


def test_empty_fleet_bins_omitted():
    bins = violations_vs_fleet([rec(5, 1), rec(450, 3)], 100)
    assert [b.lower for b in bins] == [0, 400]


def test_fleet_bins_with_edges():
    bins = violations_vs_fleet([rec(5, 1), rec(15, 3), rec(99, 9)], [0, 10, 20])
    assert [(b.lower, b.upper, b.n_records) for b in bins] == [(0, 10, 1), (10, 20, 1)]


@given(st.lists(st.tuples(st.integers(0, 1000), st.integers(0, 500)), min_size=1, max_size=100), st.integers(1, 300))
def test_bin_max_at_least_median(pairs, w):
    for b in violations_vs_fleet([rec(n, v) for n, v in pairs], w):
        assert b.maximum >= b.median
