"""
Statistik ringkasan untuk string berbobot, sample set, dan uji KS
"""
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, Iterable, List, Optional, Sequence

import numpy as np
import pandas as pd
from scipy import stats

from app.core.errors import StatisticsError
from app.core.logging_config import get_logger
from app.services.kernel import ChainState
from app.services.perfect import SampleSet
from app.services.unbiased import StringSample

logger = get_logger(__name__)


@dataclass(frozen=True)
class WeightedSummary:
    unadjusted: float
    adjusted: float
    prop_nu_gt1: float
    holes_per_sim: float
    sd_weight_sum: float
    n: int
    se_unadjusted: float
    se_adjusted: float

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class SetCorrelation:
    rho: float
    n_pairs: int
    se: float

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class CoalescenceSummary:
    mean: float
    max: int
    histogram: Dict[int, int] = field(default_factory=dict)
    tail_ratios: Dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass(frozen=True)
class KSResult:
    statistic: float
    pvalue: float
    n: int

    def to_dict(self) -> Dict:
        return asdict(self)


def _sd(values: np.ndarray) -> float:
    # s.d. sampel; tidak terdefinisi untuk n = 1
    if values.size < 2:
        return math.nan
    return float(np.std(values, ddof=1))


def weighted_estimate(strings: Sequence[StringSample], g: Callable[[ChainState], float]) -> WeightedSummary:
    """
    Estimasi tanpa penyesuaian (entri pertama) dan dengan penyesuaian (semua
    entri berbobot), beserta proporsi nu > 1 dan jumlah hole per simulasi
    """
    try:
        n = len(strings)
        if n == 0:
            raise StatisticsError("Daftar string kosong")
        for i, s in enumerate(strings):
            if s.weight_sum != 1:
                raise StatisticsError(f"Jumlah bobot string ke-{i} bukan 1: {s.weight_sum}")

        first = np.array([float(g(s.value)) for s in strings])
        sums = np.array([s.expectation(g) for s in strings])
        nu = np.array([s.nu for s in strings])
        holes = sum(s.holes for s in strings)

        sd_first = _sd(first)
        sd_sums = _sd(sums)
        return WeightedSummary(
            unadjusted=float(np.mean(first)),
            adjusted=float(np.mean(sums)),
            prop_nu_gt1=float(np.mean(nu > 1)),
            holes_per_sim=holes / n,
            sd_weight_sum=sd_sums,
            n=n,
            se_unadjusted=sd_first / math.sqrt(n),
            se_adjusted=sd_sums / math.sqrt(n),
        )
    except Exception as e:
        logger.error(f"Error saat menghitung estimasi berbobot: {str(e)}")
        raise


def _point_value(point: StringSample, coordinate: int, g: Optional[Callable[[ChainState], float]]) -> float:
    if not point.is_single:
        raise StatisticsError("Titik dengan string lebih dari satu entri tidak bisa dipakai untuk korelasi")
    if g is not None:
        return float(g(point.value))
    value = point.value
    if isinstance(value, np.ndarray):
        return float(value.reshape(-1)[coordinate])
    return float(value)


def _set_values(sample_set: SampleSet, coordinate: int, g) -> List[float]:
    if sample_set.error:
        raise StatisticsError(f"Set {sample_set.set_index} ditandai error")
    return [_point_value(p, coordinate, g) for p in sample_set.points]


def _pooled_pearson(left: np.ndarray, right: np.ndarray, center: float) -> SetCorrelation:
    n_pairs = left.size
    if n_pairs == 0:
        raise StatisticsError("Tidak ada pasangan untuk korelasi")
    a = left - center
    b = right - center
    denom = math.sqrt(float(np.dot(a, a)) * float(np.dot(b, b)))
    if denom == 0.0:
        raise StatisticsError("Variansi nol, korelasi tidak terdefinisi")
    rho = float(np.clip(np.dot(a, b) / denom, -1.0, 1.0))
    return SetCorrelation(rho=rho, n_pairs=n_pairs, se=1.0 / math.sqrt(n_pairs))


def serial_correlation(
    sets: Sequence[SampleSet],
    coordinate: int = 0,
    g: Optional[Callable[[ChainState], float]] = None,
) -> SetCorrelation:
    """
    Korelasi Pearson lag-1 gabungan antar baris berurutan dalam set yang sama.

    Semua nilai dipusatkan pada rata-rata global; pasangan tidak pernah
    melintasi batas set.
    """
    try:
        if not sets:
            raise StatisticsError("Daftar sample set kosong")
        left, right, everything = [], [], []
        for sample_set in sets:
            values = _set_values(sample_set, coordinate, g)
            if len(values) < 2:
                raise StatisticsError(f"Set {sample_set.set_index} punya kurang dari 2 titik")
            left.extend(values[:-1])
            right.extend(values[1:])
            everything.extend(values)
        center = float(np.mean(everything))
        return _pooled_pearson(np.array(left), np.array(right), center)
    except Exception as e:
        logger.error(f"Error saat menghitung korelasi serial: {str(e)}")
        raise


def cross_set_correlation(
    sets: Sequence[SampleSet],
    coordinate: int = 0,
    g: Optional[Callable[[ChainState], float]] = None,
) -> SetCorrelation:
    """
    Korelasi titik terakhir set s dengan titik pertama set s+1
    """
    try:
        if len(sets) < 2:
            raise StatisticsError("Butuh minimal 2 sample set")
        values = [_set_values(s, coordinate, g) for s in sets]
        left = np.array([v[-1] for v in values[:-1]])
        right = np.array([v[0] for v in values[1:]])
        center = float(np.mean([x for v in values for x in v]))
        return _pooled_pearson(left, right, center)
    except Exception as e:
        logger.error(f"Error saat menghitung korelasi antar set: {str(e)}")
        raise


def summarize_blocks(blocks: Iterable[int]) -> CoalescenceSummary:
    counts = pd.Series(list(blocks), dtype="int64")
    if counts.empty:
        raise StatisticsError("Data blok coalescence kosong")
    histogram = counts.value_counts().sort_index()
    at_least = histogram[::-1].cumsum()[::-1]
    tail_ratios = {}
    for b in range(int(histogram.index.min()), int(histogram.index.max())):
        base = int(at_least[at_least.index >= b].iloc[0])
        nxt = int(at_least[at_least.index >= b + 1].iloc[0])
        tail_ratios[b] = nxt / base
    return CoalescenceSummary(
        mean=float(counts.mean()),
        max=int(counts.max()),
        histogram={int(b): int(c) for b, c in histogram.items()},
        tail_ratios=tail_ratios,
    )


def coalescence_summary(sets: Sequence[SampleSet]) -> CoalescenceSummary:
    """
    Rata-rata, maksimum, dan histogram jumlah blok sampai coalesce (semua chain)
    """
    try:
        if not sets:
            raise StatisticsError("Daftar sample set kosong")
        return summarize_blocks(b for s in sets for b in s.blocks_to_coalesce)
    except Exception as e:
        logger.error(f"Error saat meringkas coalescence: {str(e)}")
        raise


def ks_normal(values: Sequence[float]) -> KSResult:
    """
    Uji Kolmogorov-Smirnov terhadap CDF normal standar
    """
    data = np.asarray(values, dtype=np.float64).reshape(-1)
    if data.size == 0:
        raise StatisticsError("Data KS kosong")
    result = stats.kstest(data, "norm")
    return KSResult(statistic=float(result.statistic), pvalue=float(result.pvalue), n=int(data.size))


def hole_decay(taus: Sequence[int], ks: Sequence[int]) -> np.ndarray:
    """
    Rata-rata hole per simulasi, max(tau - k - 1, 0), untuk setiap k
    """
    tau = np.asarray(taus, dtype=np.int64)
    if tau.size == 0:
        raise StatisticsError("Data tau kosong")
    k = np.asarray(ks, dtype=np.int64)
    return np.maximum(tau[None, :] - k[:, None] - 1, 0).mean(axis=1)
