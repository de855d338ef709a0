"""
Sample-set engine: matriks chain x blok dengan coupling antar kolom.

Baris i diinisialisasi pada kolom i (diagonal). Segitiga atas menjalankan
kolom 1..K, segitiga bawah memutar ulang blok kolom 1..K-1 dari StreamKey yang
sama. Titik j diambil dari sel terakhir baris j; baris j dan j+1 berperan
sebagai X dan Y dengan offset satu blok (baris K berpasangan dengan baris 1).
"""
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from app.core.config import RunConfig
from app.core.errors import ParameterError
from app.core.logging_config import LogContext, get_logger
from app.core.rngstreams import RandomBlock, StreamKey, Substream, SubBlock, rand_block
from app.services.coupling import jump, max_couple, mh_test
from app.services.kernel import ChainState, Kernel, KernelSpec, min_ind, resolve_kernel, states_equal
from app.services.unbiased import CoupledTrace, StringSample, partial_string, sample_string

logger = get_logger(__name__)

# a[i] == ACTIVE: baris i belum coalesce; a[i] >= 0: mengikuti baris a[i]
ACTIVE = -1

__all__ = [
    "ACTIVE",
    "CoalescenceRecord",
    "RunConfig",
    "SampleSet",
    "SampleSetEngine",
    "advance_free",
    "advance_pair",
    "calibrate_pair",
    "extend_tail",
    "run_sample_set",
    "run_sample_set_maximal",
]


@dataclass
class CoalescenceRecord:
    a: List[int]

    def is_active(self, i: int) -> bool:
        return self.a[i] == ACTIVE


@dataclass
class SampleSet:
    set_index: int
    points: List[StringSample]
    blocks_to_coalesce: List[int]
    error: bool
    matrix_error: bool
    k_effective: int
    record: CoalescenceRecord
    cells_evaluated: int
    unresolved: int = 0
    audit: Optional[Dict] = None

    @property
    def K(self) -> int:
        return len(self.points)

    @property
    def values(self) -> List[ChainState]:
        return [point.value for point in self.points]

    @property
    def holes(self) -> int:
        return sum(point.holes for point in self.points)


# Langkah coupling tunggal (dipakai engine, ekor, dan kalibrasi)

def _free_step(kernel: Kernel, x: ChainState, sub: SubBlock, r: float) -> Tuple[ChainState, ChainState, ChainState]:
    x_pre = kernel.mcmc(x, sub.r_mcmc, len(sub.r_mcmc))
    x_star = jump(x_pre, r, sub.r_dir, sub.r_mag)
    return x_pre, x_star, mh_test(kernel.negloglik, x_pre, x_star, sub.r_mh)


def advance_free(kernel: Kernel, x: ChainState, block: RandomBlock, r: float, maximal: bool) -> ChainState:
    """
    Satu blok untuk satu chain tanpa pasangan (baris 1 melompat bebas)
    """
    if not maximal:
        return kernel.mcmc(x, block.r_mcmc, block.B)
    for s in range(block.steps):
        x = _free_step(kernel, x, block.sub_block(s), r)[2]
    return x


def advance_pair(
    kernel: Kernel,
    x: ChainState,
    y: ChainState,
    block: RandomBlock,
    r: float,
    maximal: bool,
) -> Tuple[ChainState, ChainState]:
    """
    Satu blok bersama untuk X dan Y; Y dikopel ke X
    """
    if not maximal:
        x_new, y_new = kernel.mcmc_many([x, y], block.r_mcmc, block.B)
        return x_new, y_new
    for s in range(block.steps):
        sub = block.sub_block(s)
        x_pre, y_pre = kernel.mcmc_many([x, y], sub.r_mcmc, len(sub.r_mcmc))
        x_star = jump(x_pre, r, sub.r_dir, sub.r_mag)
        x = mh_test(kernel.negloglik, x_pre, x_star, sub.r_mh)
        y_star = max_couple(x_pre, x_star, y_pre, r)
        y = mh_test(kernel.negloglik, y_pre, y_star, sub.r_mh)
    return x, y


def _check_kernel(kernel: Kernel, maximal: bool) -> None:
    if maximal and kernel.spec.discrete:
        raise ParameterError(f"Maximal coupling butuh kernel kontinu: {kernel.spec.name}")


def _block_for(
    kernel: Kernel,
    config: RunConfig,
    master_seed: int,
    set_index: int,
    block_index: int,
    lane: int,
    maximal: bool,
) -> RandomBlock:
    key = StreamKey(
        master_seed=master_seed,
        set_index=set_index,
        block_index=block_index,
        substream=Substream.MCMC,
        lane=lane,
    )
    return rand_block(key, config.B, config.M, kernel.dimension, width=kernel.draw_width, coupling=maximal)


def _start_for(kernel: Kernel, master_seed: int, set_index: int, lane: int) -> ChainState:
    return kernel.start(StreamKey(
        master_seed=master_seed,
        set_index=set_index,
        block_index=0,
        substream=Substream.START,
        lane=lane,
    ))


def extend_tail(
    spec: Union[Kernel, KernelSpec],
    pair: CoupledTrace,
    config: RunConfig,
    key: StreamKey,
    maximal: bool = False,
) -> StringSample:
    """
    Melanjutkan pasangan (X_K, Y_{K-1}) dengan blok baru sampai coalesce.

    Blok ekstra ke-e memakai block_index K + e dengan lane dari key, sehingga
    tidak bertabrakan dengan blok matriks. Trace pair diperbarui (tau, capped).
    """
    kernel = resolve_kernel(spec)
    _check_kernel(kernel, maximal)
    K = pair.x_origin
    if pair.y_origin != K - 1 or len(pair.xs) != 1 or len(pair.ys) != 1:
        raise ParameterError("Pair harus berisi tepat X_K dan Y_{K-1}")

    x, y = pair.xs[0], pair.ys[0]
    if states_equal(x, y):
        pair.tau = K
        return StringSample.single(x)

    t = K
    for extra in range(1, config.tail_cap + 1):
        block = _block_for(kernel, config, key.master_seed, key.set_index, K + extra, key.lane, maximal)
        x, y = advance_pair(kernel, x, y, block, config.r, maximal)
        t += 1
        pair.xs.append(x)
        pair.ys.append(y)
        if states_equal(x, y):
            pair.tau = t
            logger.debug(f"Ekor coalesce setelah {extra} blok ekstra (lane={key.lane})")
            return sample_string(pair, K)

    pair.capped = True
    logger.warning(
        f"Ekor mencapai tail_cap={config.tail_cap} tanpa coalescence "
        f"(set={key.set_index}, lane={key.lane})"
    )
    return partial_string(pair, K)


@dataclass
class _SetState:
    K: int
    Q: List[ChainState]
    Qm: List[ChainState]
    Qs: List[ChainState]
    a: np.ndarray
    starts: List[ChainState]
    row1: List = field(default_factory=list)
    coal_blocks: List[Optional[int]] = field(default_factory=list)
    pair_y: List[Optional[ChainState]] = field(default_factory=list)
    cells: int = 0
    matrix_error: bool = False
    audit: Optional[Dict] = None


class SampleSetEngine:
    """
    Menjalankan satu sample set berukuran K (coupling biasa atau maksimal)
    """

    def __init__(self, spec: Union[Kernel, KernelSpec], config: RunConfig, maximal: bool = False):
        self.kernel = resolve_kernel(spec)
        self.config = config
        self.maximal = maximal
        _check_kernel(self.kernel, maximal)

    def run(self, master_seed: int, set_index: int) -> SampleSet:
        """
        Menghasilkan K titik perfect untuk satu set_index
        """
        try:
            with LogContext(logger, set_index=set_index, maximal=self.maximal):
                return self._run(master_seed, set_index)
        except Exception as e:
            logger.error(f"Error saat menjalankan sample set {set_index}: {str(e)}")
            raise

    # ------------------------------------------------------------------

    def _run(self, master_seed: int, set_index: int) -> SampleSet:
        K = self.config.K
        starts = [_start_for(self.kernel, master_seed, set_index, lane=i) for i in range(K)]
        st = _SetState(
            K=K,
            Q=list(starts),
            Qm=list(starts),
            Qs=list(starts),
            a=np.full(K, ACTIVE, dtype=np.int64),
            starts=starts,
            coal_blocks=[None] * K,
            pair_y=[None] * K,
        )
        if self.config.audit:
            st.audit = {
                "upper_digests": [],
                "lower_digests": [],
                "cell_keys": [],
                "row1_mismatches": 0,
                "pointer_repairs": 0,
            }

        self._upper_triangle(st, master_seed, set_index)
        self._lower_triangle(st, master_seed, set_index)

        # Cek akhir: chain K harus coalesce dengan baris 1
        st.matrix_error |= bool(st.a[K - 1] != 0)
        row1_final = self._row1_final(st)
        if K >= 2:
            # baris 1 pada akhir kolom K-1 = Y_{K-1} untuk pasangan (K, 1)
            st.pair_y[K - 1] = st.Q[0]
        else:
            st.pair_y[0] = _start_for(self.kernel, master_seed, set_index, lane=1)
        st.Q[0] = row1_final

        return self._collect(st, master_seed, set_index)

    def _row1_final(self, st: _SetState) -> ChainState:
        last = st.row1[st.K - 1]
        return last[-1][2] if self.maximal else last

    # ------------------------------------------------------------------
    # Segitiga atas

    def _upper_triangle(self, st: _SetState, master_seed: int, set_index: int) -> None:
        for j in range(st.K):
            block = _block_for(self.kernel, self.config, master_seed, set_index, j + 1, 0, self.maximal)
            if st.audit is not None:
                st.audit["upper_digests"].append(block.digest())
            rows = list(range(j + 1))
            if self.maximal:
                st.row1.append([])
                self._maximal_column(st, block, j, rows, upper=True)
            else:
                self._plain_column(st, block, j, rows, upper=True)
            self._detect_pairs_upper(st, j)

    # ------------------------------------------------------------------
    # Segitiga bawah

    def _lower_triangle(self, st: _SetState, master_seed: int, set_index: int) -> None:
        K = st.K
        row0_live = st.starts[0]
        for j in range(K - 1):
            # Cek coalescence akhir chain j
            st.matrix_error |= bool(st.a[j + 1] != j)
            st.pair_y[j] = st.Q[j + 1]

            # Pindahkan coalescence dari baris j ke j+1
            st.a[j + 1] = st.a[j]
            st.a[st.a == j] = j + 1
            self._repair_pointers(st, j)

            block = _block_for(self.kernel, self.config, master_seed, set_index, j + 1, 0, self.maximal)
            if st.audit is not None:
                st.audit["lower_digests"].append(block.digest())

            reload = None
            if not self.config.cache_row1:
                row0_live, reload = self._recompute_row1(st, block, row0_live, j)

            rows = list(range(j + 1, K))
            if self.maximal:
                self._maximal_column(st, block, j, rows, upper=False, reload=reload)
            else:
                st.Q[0] = st.row1[j] if reload is None else reload
                self._plain_column(st, block, j, rows, upper=False)
            self._detect_pairs_lower(st, j)

    def _recompute_row1(self, st: _SetState, block: RandomBlock, row0: ChainState, j: int):
        """
        Menghitung ulang sel baris 1 dari blok yang diputar ulang (tanpa cache)
        """
        st.cells += 1
        if not self.maximal:
            value = self.kernel.mcmc(row0, block.r_mcmc, block.B)
            if st.audit is not None and not states_equal(value, st.row1[j]):
                st.audit["row1_mismatches"] += 1
            return value, value
        triples = []
        for s in range(block.steps):
            triple = _free_step(self.kernel, row0, block.sub_block(s), self.config.r)
            row0 = triple[2]
            if st.audit is not None:
                cached = st.row1[j][s]
                if not all(states_equal(u, v) for u, v in zip(triple, cached)):
                    st.audit["row1_mismatches"] += 1
            triples.append(triple)
        return row0, triples

    def _repair_pointers(self, st: _SetState, j: int) -> None:
        # Pointer harus menunjuk baris hidup dengan nilai yang sama
        for x in range(j + 1, st.K):
            leader = int(st.a[x])
            if leader == ACTIVE:
                continue
            if 0 < leader <= j or not states_equal(st.Q[x], st.Q[leader]):
                st.a[x] = ACTIVE
                logger.debug(f"Pointer baris {x} -> {leader} direset pada langkah {j}")
                if st.audit is not None:
                    st.audit["pointer_repairs"] += 1

    # ------------------------------------------------------------------
    # Satu kolom

    def _record_cells(self, st: _SetState, block: RandomBlock, j: int, rows: Sequence[int], upper: bool) -> None:
        if st.audit is not None:
            phase = "upper" if upper else "lower"
            st.audit["cell_keys"].extend((phase, j, i, block.key) for i in rows)

    def _partner(self, points: List[ChainState], i: int, j: int, upper: bool) -> int:
        if upper:
            return min_ind(points, 0, i, self.kernel.metric)
        if i == j + 1:
            return 0
        return min_ind(points, j + 1, i, self.kernel.metric)

    def _plain_column(self, st: _SetState, block: RandomBlock, j: int, rows: List[int], upper: bool) -> None:
        active = [i for i in rows if st.a[i] == ACTIVE]
        fresh = dict(zip(active, self.kernel.mcmc_many([st.Q[i] for i in active], block.r_mcmc, block.B)))
        st.cells += len(active)
        self._record_cells(st, block, j, active, upper)

        for i in rows:
            leader = int(st.a[i])
            if leader != ACTIVE:
                st.Q[i] = st.Q[leader]
                continue
            st.Q[i] = fresh[i]
            if upper and i == 0:
                st.row1.append(st.Q[0])
                continue
            m = self._partner(st.Q, i, j, upper)
            if states_equal(st.Q[i], st.Q[m]):
                st.a[i] = m

    def _maximal_column(
        self,
        st: _SetState,
        block: RandomBlock,
        j: int,
        rows: List[int],
        upper: bool,
        reload: Optional[List] = None,
    ) -> None:
        r = self.config.r
        U = self.kernel.negloglik
        touched = set()
        for s in range(block.steps):
            sub = block.sub_block(s)
            if not upper:
                # Muat ulang salinan baris 1 (pre-jump, jump, hasil)
                st.Qm[0], st.Qs[0], st.Q[0] = st.row1[j][s] if reload is None else reload[s]

            active = [i for i in rows if st.a[i] == ACTIVE]
            fresh = dict(zip(active, self.kernel.mcmc_many([st.Q[i] for i in active], sub.r_mcmc, len(sub.r_mcmc))))
            touched.update(active)

            for i in rows:
                leader = int(st.a[i])
                if leader != ACTIVE:
                    st.Qm[i], st.Qs[i], st.Q[i] = st.Qm[leader], st.Qs[leader], st.Q[leader]
                    continue
                st.Qm[i] = fresh[i]
                if upper and i == 0:
                    # Baris 1 melompat bebas
                    st.Qs[0] = jump(st.Qm[0], r, sub.r_dir, sub.r_mag)
                    st.Q[0] = mh_test(U, st.Qm[0], st.Qs[0], sub.r_mh)
                    st.row1[j].append((st.Qm[0], st.Qs[0], st.Q[0]))
                    continue

                m = self._partner(st.Qm, i, j, upper)
                st.Qs[i] = max_couple(st.Qm[m], st.Qs[m], st.Qm[i], r)
                st.Q[i] = mh_test(U, st.Qm[i], st.Qs[i], sub.r_mh)
                if not states_equal(st.Q[i], st.Q[m]):
                    continue
                if upper:
                    # reset m ke baris paling awal
                    if st.a[m] != ACTIVE:
                        m = int(st.a[m])
                    st.a[i] = m
                    st.a[st.a == i] = m
                else:
                    if st.a[m] > 0:
                        m = int(st.a[m])
                    st.a[i] = m
                    if m > 0:
                        st.a[st.a == i] = m

        st.cells += len(touched)
        self._record_cells(st, block, j, sorted(touched), upper)

    # ------------------------------------------------------------------
    # Deteksi coalescence per pasangan (baris p, p+1)

    def _detect_pairs_upper(self, st: _SetState, j: int) -> None:
        for p in range(j):
            if st.coal_blocks[p] is None and states_equal(st.Q[p], st.Q[p + 1]):
                st.coal_blocks[p] = j - p

    def _detect_pairs_lower(self, st: _SetState, j: int) -> None:
        K = st.K
        for p in range(j + 1, K - 1):
            if st.coal_blocks[p] is None and states_equal(st.Q[p], st.Q[p + 1]):
                st.coal_blocks[p] = K - p + j
        if st.coal_blocks[K - 1] is None and states_equal(st.Q[K - 1], st.Q[0]):
            st.coal_blocks[K - 1] = j + 1

    # ------------------------------------------------------------------

    def _collect(self, st: _SetState, master_seed: int, set_index: int) -> SampleSet:
        K = st.K
        points: List[StringSample] = []
        blocks: List[int] = []
        unresolved = 0
        for p in range(K):
            x_final = st.Q[p]
            if st.coal_blocks[p] is not None:
                points.append(StringSample.single(x_final))
                blocks.append(st.coal_blocks[p])
                continue
            pair = CoupledTrace(xs=[x_final], ys=[st.pair_y[p]], lag=self.config.B, x_origin=K, y_origin=K - 1)
            key = StreamKey(master_seed=master_seed, set_index=set_index, lane=p + 1)
            point = extend_tail(self.kernel, pair, self.config, key, maximal=self.maximal)
            points.append(point)
            if pair.tau is None:
                unresolved += 1
                blocks.append(K + self.config.tail_cap)
            else:
                blocks.append(max(pair.tau - 1, 1))

        error = unresolved > 0 or any(not point.is_single for point in points)
        if st.matrix_error:
            logger.warning(f"Flag Error matriks aktif pada set {set_index}")
        return SampleSet(
            set_index=set_index,
            points=points,
            blocks_to_coalesce=blocks,
            error=error,
            matrix_error=st.matrix_error,
            k_effective=self.config.k_effective,
            record=CoalescenceRecord(a=[int(v) for v in st.a]),
            cells_evaluated=st.cells,
            unresolved=unresolved,
            audit=st.audit,
        )


def run_sample_set(
    spec: Union[Kernel, KernelSpec],
    config: RunConfig,
    master_seed: int,
    set_index: int,
) -> SampleSet:
    """
    Sample set dengan coupling biasa (draw bersama per kolom)
    """
    return SampleSetEngine(spec, config, maximal=False).run(master_seed, set_index)


def run_sample_set_maximal(
    spec: Union[Kernel, KernelSpec],
    config: RunConfig,
    master_seed: int,
    set_index: int,
) -> SampleSet:
    """
    Sample set dengan langkah maximal coupling setiap M iterasi internal
    """
    return SampleSetEngine(spec, config, maximal=True).run(master_seed, set_index)


def calibrate_pair(
    spec: Union[Kernel, KernelSpec],
    config: RunConfig,
    master_seed: int,
    pair_index: int,
    maximal: bool = False,
) -> bool:
    """
    Satu pasangan kalibrasi: X satu blok bebas, lalu X dan Y berbagi satu blok.
    Mengembalikan True jika pasangan belum coalesce.
    """
    kernel = resolve_kernel(spec)
    _check_kernel(kernel, maximal)
    x = _start_for(kernel, master_seed, pair_index, lane=0)
    y = _start_for(kernel, master_seed, pair_index, lane=1)
    first = _block_for(kernel, config, master_seed, pair_index, 1, 0, maximal)
    x = advance_free(kernel, x, first, config.r, maximal)
    second = _block_for(kernel, config, master_seed, pair_index, 2, 0, maximal)
    x, y = advance_pair(kernel, x, y, second, config.r, maximal)
    return not states_equal(x, y)
