"""
Harness eksperimen: tabel dua-state (burn-in k), tabel target normal
(sample set), dan kalibrasi panjang blok B.

Unit kerja (simulasi, sample set, pasangan) dibagi ke potongan berukuran
tetap dan dijalankan dengan joblib; hasil digabung menurut urutan potongan
sehingga output tidak bergantung pada jumlah worker.
"""
import math
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed

from app.core.config import CalibrationExperiment, NormalExperiment, RunConfig, TwoStateExperiment
from app.core.errors import ParameterError, StatisticsError
from app.core.logging_config import LogContext, get_logger
from app.core.rngstreams import StreamKey
from app.services.perfect import SampleSet, calibrate_pair, run_sample_set_maximal
from app.services.statistics import (
    coalescence_summary,
    hole_decay,
    ks_normal,
    serial_correlation,
    weighted_estimate,
)
from app.services.targets import (
    NormalKernel,
    NormalParams,
    TwoStateKernel,
    TwoStateParams,
    indicator_state1,
    twostate_analytics,
)
from app.services.unbiased import StringSample, run_coupled, sample_string

logger = get_logger(__name__)

# Ukuran potongan unit per tugas joblib (tetap, tidak bergantung jobs)
CHUNK_SIZES = {"twostate": 2000, "normal": 25, "calibrate": 5000}


@dataclass
class ExperimentResult:
    command: str
    config: Dict
    table: pd.DataFrame
    extras: Dict = field(default_factory=dict)
    side_tables: Dict[str, pd.DataFrame] = field(default_factory=dict)


def _chunks(n: int, size: int) -> List[Tuple[int, int]]:
    return [(lo, min(lo + size, n)) for lo in range(0, n, size)]


def _run_chunks(func: Callable, n: int, size: int, jobs: int, *args) -> List:
    results = Parallel(n_jobs=jobs)(delayed(func)(lo, hi, *args) for lo, hi in _chunks(n, size))
    merged = []
    for part in results:
        merged.extend(part)
    return merged


def _twostate_chunk(lo: int, hi: int, seed: int, params: Dict, ks: List[int], cap: int):
    """
    Satu run coupled per simulasi dipakai untuk semua k.
    Run yang mencapai cap dikembalikan tanpa string (strings=None, tau=None).
    """
    kernel = TwoStateKernel(TwoStateParams(**params))
    k_max, k_min = max(ks), min(ks)
    out = []
    for sim in range(lo, hi):
        key = StreamKey(master_seed=seed, set_index=sim)
        trace = run_coupled(kernel, k=k_max, lag=1, key=key, cap=cap, keep_from=k_min)
        if trace.tau is None:
            out.append((None, None, True))
        else:
            out.append(([sample_string(trace, k) for k in ks], trace.tau, False))
    return out


def _normal_chunk(lo: int, hi: int, seed: int, params: Dict, run: Dict) -> List[SampleSet]:
    kernel = NormalKernel(NormalParams(**params))
    config = RunConfig(**run)
    return [run_sample_set_maximal(kernel, config, seed, set_index) for set_index in range(lo, hi)]


def _calibrate_chunk(lo: int, hi: int, seed: int, target: str, params: Dict, run: Dict) -> List[bool]:
    if target == "twostate":
        kernel, maximal = TwoStateKernel(TwoStateParams(**params)), False
    else:
        kernel, maximal = NormalKernel(NormalParams(**params)), True
    config = RunConfig(**run)
    return [calibrate_pair(kernel, config, seed, i, maximal=maximal) for i in range(lo, hi)]


TWOSTATE_COLUMNS = [
    "k", "unadjusted", "adjusted", "prop_nu_gt1", "holes", "sd", "se_unadjusted", "se_adjusted", "n", "capped",
]


def _twostate_row(k: int, strings: List[StringSample], capped: int) -> Dict:
    row = {"k": k, "n": len(strings), "capped": capped}
    if not strings:
        row.update({c: math.nan for c in TWOSTATE_COLUMNS if c not in row})
        return row
    summary = weighted_estimate(strings, indicator_state1)
    row.update({
        "unadjusted": summary.unadjusted,
        "adjusted": summary.adjusted,
        "prop_nu_gt1": summary.prop_nu_gt1,
        "holes": summary.holes_per_sim,
        "sd": summary.sd_weight_sum,
        "se_unadjusted": summary.se_unadjusted,
        "se_adjusted": summary.se_adjusted,
    })
    row["n"] = summary.n
    return row


class ExperimentRunner:
    """
    Menjalankan perintah eksperimen dan menyusun tabel hasil
    """

    def __init__(self, chunk_sizes: Optional[Dict[str, int]] = None):
        self.chunk_sizes = dict(CHUNK_SIZES)
        if chunk_sizes:
            self.chunk_sizes.update(chunk_sizes)

    def cmd_twostate(self, cfg: TwoStateExperiment) -> ExperimentResult:
        """
        Tabel burn-in proses dua-state: satu baris per k
        """
        try:
            with LogContext(logger, command="twostate"):
                ks = list(cfg.ks)
                if cfg.cap <= max(ks) + 1:
                    raise ParameterError(f"cap harus lebih besar dari k + 1: cap={cfg.cap}, k={max(ks)}")
                logger.info(f"Mulai eksperimen dua-state: n={cfg.n}, ks={ks}")
                params = {"theta": cfg.theta, "p": cfg.p}
                results = _run_chunks(
                    _twostate_chunk, cfg.n, self.chunk_sizes["twostate"], cfg.jobs,
                    cfg.seed, params, ks, cfg.cap,
                )
                # simulasi yang mencapai cap tidak ikut diestimasi
                resolved = [(s, tau) for s, tau, c in results if not c]
                capped = len(results) - len(resolved)
                taus = [tau for _, tau in resolved]

                rows = []
                for col, k in enumerate(ks):
                    strings: List[StringSample] = [s[col] for s, _ in resolved]
                    rows.append(_twostate_row(k, strings, capped))
                table = pd.DataFrame(rows, columns=TWOSTATE_COLUMNS)

                analytics = twostate_analytics(TwoStateParams(**params))
                grid = list(range(0, max(ks) + 1))
                holes = pd.DataFrame({
                    "k": grid,
                    "holes": hole_decay(taus, grid) if taus else [math.nan] * len(grid),
                    "analytic_holes": [analytics.expected_holes(k) for k in grid],
                })
                if capped:
                    logger.warning(
                        f"{capped} simulasi mencapai cap={cfg.cap} dan dikeluarkan dari estimasi",
                        extra={"capped": capped, "cap": cfg.cap},
                    )
                logger.info("Eksperimen dua-state selesai")
                return ExperimentResult(
                    command="twostate",
                    config=cfg.echo(),
                    table=table,
                    extras={"capped": capped, "delta": analytics.delta, "stationary_state1": analytics.stationary[0]},
                    side_tables={"holes": holes},
                )
        except Exception as e:
            logger.error(f"Error saat menjalankan eksperimen dua-state: {str(e)}")
            raise

    def run_normal_sets(self, cfg: NormalExperiment) -> List[SampleSet]:
        B = cfg.block_length()
        params = {"d": cfg.d, "sigma": cfg.sigma, "r": cfg.r}
        run = {"K": cfg.K, "B": B, "M": cfg.M, "r": cfg.r}
        # validasi awal sebelum worker dijalankan
        RunConfig(**run)
        NormalParams(**params)
        return _run_chunks(_normal_chunk, cfg.n, self.chunk_sizes["normal"], cfg.jobs, cfg.seed, params, run)

    def cmd_normal(self, cfg: NormalExperiment) -> ExperimentResult:
        """
        Tabel target normal d-dimensi dengan sample set dan maximal coupling
        """
        try:
            with LogContext(logger, command="normal"):
                B = cfg.block_length()
                logger.info(f"Mulai eksperimen normal: d={cfg.d}, B={B}, K={cfg.K}, sets={cfg.n}")
                sets = self.run_normal_sets(cfg)

                clean = [s for s in sets if not s.error]
                error_sets = len(sets) - len(clean)
                unresolved = sum(s.unresolved for s in sets)
                summary = coalescence_summary(sets)

                row = {
                    "d": cfg.d,
                    "B": B,
                    "N": cfg.n * cfg.K,
                    "mean_blocks": summary.mean,
                    "max_blocks": summary.max,
                    "rho": math.nan,
                    "rho_se": math.nan,
                }
                try:
                    correlation = serial_correlation(clean, coordinate=0)
                    row["rho"], row["rho_se"] = correlation.rho, correlation.se
                except StatisticsError as e:
                    logger.warning(f"Korelasi serial tidak bisa dihitung: {str(e)}")

                values = np.array([np.asarray(p.value).reshape(-1) for s in clean for p in s.points])
                for i in range(cfg.d):
                    if values.size:
                        ks = ks_normal(values[:, i])
                        row[f"ks_stat_{i}"], row[f"ks_pvalue_{i}"] = ks.statistic, ks.pvalue
                    else:
                        row[f"ks_stat_{i}"], row[f"ks_pvalue_{i}"] = math.nan, math.nan
                row["error_sets"] = error_sets
                row["matrix_error_sets"] = sum(1 for s in sets if s.matrix_error)
                row["unresolved"] = unresolved

                if error_sets:
                    logger.warning(f"{error_sets} sample set ditandai error")
                blocks = pd.DataFrame({
                    "blocks": list(summary.histogram.keys()),
                    "count": list(summary.histogram.values()),
                })
                logger.info("Eksperimen normal selesai")
                return ExperimentResult(
                    command="normal",
                    config=cfg.echo(),
                    table=pd.DataFrame([row]),
                    extras={"tail_ratios": {str(b): v for b, v in summary.tail_ratios.items()}},
                    side_tables={"blocks": blocks},
                )
        except Exception as e:
            logger.error(f"Error saat menjalankan eksperimen normal: {str(e)}")
            raise

    def cmd_calibrate_b(self, cfg: CalibrationExperiment) -> ExperimentResult:
        """
        Fraksi pasangan yang belum coalesce setelah satu blok, untuk setiap B
        """
        try:
            with LogContext(logger, command="calibrate"):
                logger.info(f"Mulai kalibrasi B: target={cfg.target}, P={cfg.P}, Bs={cfg.Bs}")
                if cfg.target == "twostate":
                    params = {"theta": cfg.theta, "p": cfg.p}
                    analytics = twostate_analytics(TwoStateParams(**params))
                else:
                    params = {"d": cfg.d, "sigma": cfg.sigma, "r": cfg.r}
                    analytics = None

                rows = []
                for B in cfg.Bs:
                    run = {"K": 1, "B": B, "M": 1, "r": cfg.r}
                    flags = _run_chunks(
                        _calibrate_chunk, cfg.n, self.chunk_sizes["calibrate"], cfg.jobs,
                        cfg.seed, cfg.target, params, run,
                    )
                    fraction = float(np.mean(flags))
                    rows.append({
                        "B": B,
                        "noncoalescence": fraction,
                        "se": math.sqrt(fraction * (1.0 - fraction) / cfg.n),
                        "n_pairs": cfg.n,
                        "analytic": analytics.p_noncoal(B + 1) if analytics else math.nan,
                    })
                table = pd.DataFrame(rows, columns=["B", "noncoalescence", "se", "n_pairs", "analytic"])

                passing = table[table["noncoalescence"] <= cfg.P]
                target_met = not passing.empty
                if target_met:
                    recommended = int(passing["B"].iloc[0])
                else:
                    recommended = int(table.loc[table["noncoalescence"].idxmin(), "B"])
                    logger.warning(f"Tidak ada B yang mencapai P={cfg.P}; B terbaik {recommended}")

                extras = {"recommended_B": recommended, "target_met": target_met}
                if analytics is not None:
                    extras["analytic_B"] = analytics.calibrated_block_length(cfg.P)
                logger.info(f"Kalibrasi selesai: B={recommended}")
                return ExperimentResult(command="calibrate", config=cfg.echo(), table=table, extras=extras)
        except Exception as e:
            logger.error(f"Error saat kalibrasi B: {str(e)}")
            raise
