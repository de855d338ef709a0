import math

import numpy as np
import pytest

from app.core.errors import StatisticsError
from app.services.perfect import CoalescenceRecord, SampleSet
from app.services.statistics import (
    coalescence_summary,
    cross_set_correlation,
    hole_decay,
    ks_normal,
    serial_correlation,
    summarize_blocks,
    weighted_estimate,
)
from app.services.targets import indicator_state1
from app.services.unbiased import CoupledTrace, StringSample, sample_string, unbiased_estimate


def _string(values):
    return StringSample(entries=tuple((v, 1 if i % 2 == 0 else -1) for i, v in enumerate(values)))


def _set(values, index=0, blocks=None):
    points = [StringSample.single(v) for v in values]
    return SampleSet(
        set_index=index,
        points=points,
        blocks_to_coalesce=blocks or [1] * len(values),
        error=False,
        matrix_error=False,
        k_effective=len(values),
        record=CoalescenceRecord(a=[-1] * len(values)),
        cells_evaluated=0,
    )


def test_weighted_estimate_all_single():
    """Test semua string satu entri: adjusted = unadjusted, tanpa hole"""
    strings = [StringSample.single(v) for v in (1, 2, 1, 1)]
    summary = weighted_estimate(strings, indicator_state1)
    assert summary.unadjusted == 0.75
    assert summary.adjusted == summary.unadjusted
    assert summary.holes_per_sim == 0
    assert summary.prop_nu_gt1 == 0
    assert summary.sd_weight_sum == pytest.approx(np.std([1, 0, 1, 1], ddof=1))


def test_weighted_estimate_hand_computed():
    """Test tiga string dengan nu = 1, 1, 3"""
    strings = [_string([1]), _string([2]), _string([1, 1, 2])]
    summary = weighted_estimate(strings, indicator_state1)
    # (1 + 0 + (1 - 1 + 0)) / 3
    assert summary.adjusted == pytest.approx(1.0 / 3.0)
    assert summary.unadjusted == pytest.approx(2.0 / 3.0)
    assert summary.prop_nu_gt1 == pytest.approx(1.0 / 3.0)
    assert summary.holes_per_sim == pytest.approx(1.0 / 3.0)


def test_weighted_estimate_single_string_sd_nan():
    """Test n = 1: s.d. tidak terdefinisi"""
    summary = weighted_estimate([StringSample.single(1)], indicator_state1)
    assert summary.n == 1
    assert math.isnan(summary.sd_weight_sum)


def test_weighted_estimate_empty():
    """Test input kosong ditolak"""
    with pytest.raises(StatisticsError):
        weighted_estimate([], indicator_state1)


def test_weighted_estimate_linear():
    """Test linearitas dalam g"""
    rng = np.random.default_rng(3)
    strings = [_string(list(rng.integers(1, 4, size=2 * int(rng.integers(0, 3)) + 1))) for _ in range(200)]

    def g1(v):
        return {1: 0.5, 2: -1.0, 3: 2.0}[int(v)]

    def g2(v):
        return {1: 1.5, 2: 0.25, 3: -3.0}[int(v)]

    combined = weighted_estimate(strings, lambda v: 2.0 * g1(v) - 3.0 * g2(v)).adjusted
    separate = 2.0 * weighted_estimate(strings, g1).adjusted - 3.0 * weighted_estimate(strings, g2).adjusted
    assert combined == pytest.approx(separate, abs=1e-12)


def test_weighted_estimate_matches_unbiased():
    """Test rata-rata string sama persis dengan rata-rata estimator unbiased"""
    rng = np.random.default_rng(11)
    traces, k = [], 3
    for _ in range(500):
        tau = int(rng.integers(1, 10))
        length = max(tau - k, 1)
        traces.append(CoupledTrace(
            xs=[int(v) for v in rng.integers(1, 3, size=length)],
            ys=[int(v) for v in rng.integers(1, 3, size=max(length - 1, 0))],
            lag=1, tau=tau, x_origin=k, y_origin=k,
        ))
    strings = [sample_string(t, k) for t in traces]
    summary = weighted_estimate(strings, indicator_state1)
    estimates = np.array([unbiased_estimate(t, indicator_state1, k) for t in traces])
    assert summary.adjusted == float(np.mean(estimates))


def test_serial_correlation_pooled():
    """Test korelasi lag-1 gabungan, pasangan tidak melintasi set"""
    sets = [_set([1.0, 2.0, 3.0], 0), _set([3.0, 2.0, 1.0], 1)]
    result = serial_correlation(sets)
    assert result.n_pairs == 4
    # pusat global 2: pasangan (-1,0), (0,1), (1,0), (0,-1)
    assert result.rho == 0.0
    assert result.se == pytest.approx(0.5)


def test_serial_correlation_perfect_trend():
    """Test korelasi positif untuk deret naik"""
    sets = [_set([0.0, 0.0, 1.0, 1.0], i) for i in range(3)]
    assert serial_correlation(sets).rho > 0


def test_serial_correlation_errors():
    """Test input degenerate ditolak"""
    with pytest.raises(StatisticsError):
        serial_correlation([_set([1.0, 1.0, 1.0])])
    with pytest.raises(StatisticsError):
        serial_correlation([_set([1.0])])
    with pytest.raises(StatisticsError):
        serial_correlation([])
    broken = _set([1.0, 2.0])
    broken.points[0] = _string([1.0, 2.0, 1.0])
    with pytest.raises(StatisticsError):
        serial_correlation([broken])


def test_serial_correlation_coordinate():
    """Test pemilihan koordinat untuk titik vektor"""
    points = [np.array([float(i), 5.0]) for i in range(4)]
    sets = [_set(points, 0), _set(points[::-1], 1)]
    assert serial_correlation(sets, coordinate=0).n_pairs == 6
    with pytest.raises(StatisticsError):
        serial_correlation(sets, coordinate=1)


def test_cross_set_correlation():
    """Test korelasi titik terakhir set s dengan titik pertama set s+1"""
    sets = [_set([0.0, 1.0], 0), _set([1.0, 0.0], 1), _set([0.0, 1.0], 2)]
    result = cross_set_correlation(sets)
    assert result.n_pairs == 2
    assert result.rho == pytest.approx(1.0)
    with pytest.raises(StatisticsError):
        cross_set_correlation(sets[:1])


def test_coalescence_summary():
    """Test rata-rata, maksimum, histogram, rasio ekor"""
    sets = [_set([1, 1, 1], 0, blocks=[1, 1, 2]), _set([1, 1, 1], 1, blocks=[1, 3, 1])]
    summary = coalescence_summary(sets)
    assert summary.mean == pytest.approx(9.0 / 6.0)
    assert summary.max == 3
    assert summary.histogram == {1: 4, 2: 1, 3: 1}
    assert summary.tail_ratios[1] == pytest.approx(2.0 / 6.0)
    assert summary.tail_ratios[2] == pytest.approx(1.0 / 2.0)


def test_coalescence_summary_all_one():
    """Test semua chain coalesce dalam 1 blok"""
    summary = summarize_blocks([1] * 10)
    assert summary.mean == 1.0
    assert summary.max == 1
    assert summary.tail_ratios == {}


def test_ks_normal():
    """Test KS terhadap normal standar"""
    rng = np.random.default_rng(0)
    good = ks_normal(rng.normal(size=2000))
    bad = ks_normal(rng.normal(loc=1.0, size=2000))
    assert good.pvalue > 1e-3
    assert bad.pvalue < 1e-3
    assert good.n == 2000
    with pytest.raises(StatisticsError):
        ks_normal([])


def test_hole_decay():
    """Test hole per simulasi max(tau - k - 1, 0)"""
    taus = [3, 6, 10]
    curve = hole_decay(taus, [0, 5, 9, 20])
    assert curve.tolist() == pytest.approx([(2 + 5 + 9) / 3, (0 + 0 + 4) / 3, 0.0, 0.0])


def test_holes_per_sim_matches_strings():
    """Test holes_per_sim = total hole / n"""
    strings = [_string([1, 2, 1]), _string([1]), _string([2, 1, 2, 1, 2])]
    assert weighted_estimate(strings, indicator_state1).holes_per_sim == pytest.approx(3.0 / 3.0)
