from dataclasses import dataclass
from typing import Callable, List, Optional, Tuple

import numpy as np

from app.core.errors import ParameterError, UnresolvedTraceError
from app.core.logging_config import get_logger
from app.core.rngstreams import KeyedStream, StreamKey, Substream, derive_stream
from app.services.kernel import ChainState, Kernel, resolve_kernel, states_equal

logger = get_logger(__name__)

DEFAULT_CAP = 10000


@dataclass
class CoupledTrace:
    """
    Dua chain dengan offset lag: Y memakai draw X yang digeser satu lag.

    Indeks dalam satuan lag; xs[t] = X_{x_origin + t}, ys[t] = Y_{y_origin + t}.
    """
    xs: List[ChainState]
    ys: List[ChainState]
    lag: int
    tau: Optional[int] = None
    x_origin: int = 0
    y_origin: int = 0
    capped: bool = False

    def x(self, i: int) -> ChainState:
        if i < self.x_origin or i - self.x_origin >= len(self.xs):
            raise IndexError(f"X_{i} tidak tersimpan")
        return self.xs[i - self.x_origin]

    def y(self, i: int) -> ChainState:
        if i < self.y_origin or i - self.y_origin >= len(self.ys):
            raise IndexError(f"Y_{i} tidak tersimpan")
        return self.ys[i - self.y_origin]

    @property
    def last_x(self) -> int:
        return self.x_origin + len(self.xs) - 1

    @property
    def last_y(self) -> int:
        return self.y_origin + len(self.ys) - 1


@dataclass(frozen=True, eq=False)
class StringSample:
    """
    Sampel perfect (relaxed): pasangan (nilai, bobot +-1) berselang-seling
    """
    entries: Tuple[Tuple[ChainState, int], ...]
    resolved: bool = True

    def __post_init__(self):
        if not self.entries:
            raise ParameterError("String kosong")
        for i, (_, weight) in enumerate(self.entries):
            if weight != (1 if i % 2 == 0 else -1):
                raise ParameterError(f"Bobot string tidak berselang-seling pada posisi {i}")
        if self.resolved and len(self.entries) % 2 == 0:
            raise ParameterError(f"Panjang string harus ganjil: {len(self.entries)}")

    @classmethod
    def single(cls, value: ChainState) -> "StringSample":
        return cls(entries=((value, 1),))

    @property
    def nu(self) -> int:
        return len(self.entries)

    @property
    def weight_sum(self) -> int:
        return sum(weight for _, weight in self.entries)

    @property
    def holes(self) -> int:
        return (self.nu - 1) // 2

    @property
    def value(self) -> ChainState:
        return self.entries[0][0]

    @property
    def is_single(self) -> bool:
        return self.resolved and self.nu == 1

    def expectation(self, g: Callable[[ChainState], float]) -> float:
        total = 0.0
        for value, weight in self.entries:
            total += weight * g(value)
        return total


def start_key(key: StreamKey, lane: int) -> StreamKey:
    return StreamKey(
        master_seed=key.master_seed,
        set_index=key.set_index,
        block_index=0,
        substream=Substream.START,
        lane=lane,
    )


class DrawBuffer:
    """
    Baris draw berurutan dari satu stream, dibangkitkan per potongan
    """
    def __init__(self, stream: KeyedStream, width: int, chunk: int = 256):
        self.stream = stream
        self.width = width
        self.chunk = chunk
        self._rows = np.empty((0, width))

    def rows(self, lo: int, hi: int) -> np.ndarray:
        while self._rows.shape[0] < hi:
            extra = self.stream.uniforms(self.chunk * self.width).reshape(self.chunk, self.width)
            self._rows = np.vstack([self._rows, extra])
        return self._rows[lo:hi]


def run_coupled(
    spec,
    k: int,
    lag: int,
    key: StreamKey,
    cap: int = DEFAULT_CAP,
    keep_from: Optional[int] = None,
    x0: Optional[ChainState] = None,
    y0: Optional[ChainState] = None,
) -> CoupledTrace:
    """
    Menjalankan X dan Y (draw digeser lag) sampai X_t = Y_{t-1} atau cap.

    Draw ke-i dari substream MCMC dipakai iterasi ke-i milik X dan iterasi
    ke-(i - lag) milik Y.
    """
    kernel: Kernel = resolve_kernel(spec)
    if k < 0:
        raise ParameterError(f"k tidak valid: {k}")
    if lag < 1:
        raise ParameterError(f"lag tidak valid: {lag}")
    if cap <= k + 1:
        raise ParameterError(f"cap harus lebih besar dari k + 1: cap={cap}, k={k}")
    keep_from = k if keep_from is None else keep_from
    if not 0 <= keep_from <= k:
        raise ParameterError(f"keep_from tidak valid: {keep_from}")

    if x0 is None:
        x0 = kernel.start(start_key(key, lane=0))
    if y0 is None:
        y0 = kernel.start(start_key(key, lane=1))
    buffer = DrawBuffer(derive_stream(key.with_substream(Substream.MCMC)), kernel.draw_width)

    trace = CoupledTrace(xs=[], ys=[], lag=lag, x_origin=keep_from, y_origin=keep_from)
    x, y = x0, y0
    if keep_from == 0:
        trace.xs.append(x)
        trace.ys.append(y)

    t = 0
    while True:
        t += 1
        rows = buffer.rows((t - 1) * lag, t * lag)
        x = kernel.mcmc(x, rows, lag)
        if t >= 2:
            # Y_{t-1} memakai draw yang sama dengan X_t
            y = kernel.mcmc(y, rows, lag)
            if t - 1 >= keep_from:
                trace.ys.append(y)
        if t >= keep_from:
            trace.xs.append(x)
        if trace.tau is None and states_equal(x, y):
            trace.tau = t
        if trace.tau is not None and t >= k:
            break
        if t >= cap:
            trace.capped = True
            logger.warning(f"Trace mencapai cap tanpa coalescence: cap={cap}, set={key.set_index}")
            break
    return trace


def _require_tau(trace: CoupledTrace) -> int:
    if trace.tau is None:
        raise UnresolvedTraceError("Trace belum coalesce (tau tidak ada)", trace=trace)
    return trace.tau


def unbiased_estimate(trace: CoupledTrace, g: Callable[[ChainState], float], k: int) -> float:
    """
    G = g(X_k) + sum_{i=k+1}^{tau-1} (g(X_i) - g(Y_{i-1}))
    """
    tau = _require_tau(trace)
    # urutan penjumlahan sama dengan StringSample.expectation
    total = 0.0 + g(trace.x(k))
    for i in range(k + 1, tau):
        total -= g(trace.y(i - 1))
        total += g(trace.x(i))
    return total


def sample_string(trace: CoupledTrace, k: int) -> StringSample:
    """
    String ((X_k,+1), (Y_k,-1), (X_{k+1},+1), ..., (X_{tau-1},+1))
    """
    tau = _require_tau(trace)
    entries = [(trace.x(k), 1)]
    for i in range(k + 1, tau):
        entries.append((trace.y(i - 1), -1))
        entries.append((trace.x(i), 1))
    return StringSample(entries=tuple(entries))


def partial_string(trace: CoupledTrace, k: int) -> StringSample:
    """
    String terpotong dari trace yang belum coalesce (diagnostik)
    """
    entries = [(trace.x(k), 1)]
    for i in range(k + 1, trace.last_x + 1):
        if i - 1 > trace.last_y:
            break
        entries.append((trace.y(i - 1), -1))
        entries.append((trace.x(i), 1))
    return StringSample(entries=tuple(entries), resolved=False)
