from abc import ABC, abstractmethod
from enum import Enum
from typing import Callable, Dict, List, Sequence, Type, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.errors import ParameterError
from app.core.logging_config import get_logger
from app.core.rngstreams import RandomBlock, StreamKey, SubBlock

logger = get_logger(__name__)

# Label diskrit (int) atau titik kontinu (vektor float64 berdimensi d)
ChainState = Union[int, np.ndarray]


class Metric(str, Enum):
    EUCLIDEAN = "euclidean"
    ZERO_ONE = "zero_one"


class KernelSpec(BaseModel):
    """
    Deskripsi kernel: nama target, dimensi, metrik dan parameter
    """
    model_config = ConfigDict(frozen=True)

    name: str
    dimension: int = Field(ge=1)
    metric: Metric
    discrete: bool
    parameters: Dict[str, float] = Field(default_factory=dict)

    @model_validator(mode="after")
    def _check_metric(self) -> "KernelSpec":
        # ZERO_ONE hanya untuk ruang state diskrit tak berurut
        if (self.metric == Metric.ZERO_ONE) != self.discrete:
            raise ValueError(f"Metrik tidak cocok dengan ruang state: {self.metric.value}")
        if self.discrete and self.dimension != 1:
            raise ValueError(f"Dimensi kernel diskrit harus 1: {self.dimension}")
        return self


def states_equal(a: ChainState, b: ChainState) -> bool:
    """
    Kesamaan untuk deteksi coalescence: identik per byte untuk state kontinu
    """
    if isinstance(a, np.ndarray) or isinstance(b, np.ndarray):
        a = np.asarray(a, dtype=np.float64)
        b = np.asarray(b, dtype=np.float64)
        return a.shape == b.shape and a.tobytes() == b.tobytes()
    return a == b


def distance(a: ChainState, b: ChainState, metric: Metric) -> float:
    if metric == Metric.ZERO_ONE:
        return 0.0 if states_equal(a, b) else 1.0
    diff = np.asarray(a, dtype=np.float64) - np.asarray(b, dtype=np.float64)
    return float(np.sqrt(np.sum(diff * diff)))


def min_ind(points: Sequence[ChainState], i1: int, i2: int, metric: Metric) -> int:
    """
    Indeks di [i1, i2-1] yang paling dekat ke points[i2]; seri -> indeks terkecil
    """
    if i1 < 0 or i2 >= len(points) or i1 > i2 - 1:
        raise ParameterError(f"Rentang min_ind tidak valid: i1={i1}, i2={i2}")
    target = points[i2]
    best = i1
    best_dist = distance(points[i1], target, metric)
    for i in range(i1 + 1, i2):
        dist = distance(points[i], target, metric)
        if dist < best_dist:
            best, best_dist = i, dist
    return best


def _draws_of(block: Union[RandomBlock, SubBlock, np.ndarray]) -> np.ndarray:
    if isinstance(block, (RandomBlock, SubBlock)):
        return block.r_mcmc
    return np.asarray(block, dtype=np.float64)


class Kernel(ABC):
    """
    Proses target: titik awal dan iterasi MCMC yang digerakkan draw blok.

    Draw dikonsumsi per indeks baris sehingga semua chain dalam satu kolom
    memakai draw yang sama pada posisi yang sama.
    """
    spec: KernelSpec
    draw_width: int = 1

    def __init__(self):
        # Jumlah evaluasi chain (baris x panggilan), untuk cek kerja engine
        self.evaluations = 0

    @property
    def metric(self) -> Metric:
        return self.spec.metric

    @property
    def dimension(self) -> int:
        return self.spec.dimension

    @abstractmethod
    def start(self, key: StreamKey) -> ChainState:
        ...

    @abstractmethod
    def _advance(self, states: List[ChainState], draws: np.ndarray, n: int) -> List[ChainState]:
        ...

    def negloglik(self, x: ChainState) -> float:
        raise ParameterError(f"Kernel {self.spec.name} tidak punya negloglik")

    def mcmc_many(self, states: Sequence[ChainState], draws, n: int) -> List[ChainState]:
        """
        Menjalankan n iterasi untuk setiap state dengan draw yang sama
        """
        draws = _draws_of(draws)
        if draws.ndim == 1:
            draws = draws.reshape(-1, 1)
        if n < 0 or n > draws.shape[0]:
            raise ParameterError(f"Draw blok habis: butuh {n}, tersedia {draws.shape[0]}")
        if draws.shape[1] < self.draw_width:
            raise ParameterError(f"Lebar draw tidak cukup: {draws.shape[1]} < {self.draw_width}")
        states = list(states)
        self.evaluations += len(states)
        if not states or n == 0:
            return [self.copy_state(s) for s in states]
        return self._advance(states, draws[:n], n)

    def mcmc(self, x0: ChainState, draws, n: int) -> ChainState:
        return self.mcmc_many([x0], draws, n)[0]

    def copy_state(self, x: ChainState) -> ChainState:
        if isinstance(x, np.ndarray):
            return x.copy()
        return x


_REGISTRY: Dict[str, Callable[[KernelSpec], Kernel]] = {}


def register_kernel(name: str):
    """
    Decorator untuk mendaftarkan factory kernel berdasarkan nama spec
    """
    def wrap(cls: Type[Kernel]) -> Type[Kernel]:
        _REGISTRY[name] = cls.from_spec
        return cls
    return wrap


def resolve_kernel(spec_or_kernel: Union[Kernel, KernelSpec]) -> Kernel:
    if isinstance(spec_or_kernel, Kernel):
        return spec_or_kernel
    from app.services import targets  # noqa: F401  (registrasi kernel bawaan)

    factory = _REGISTRY.get(spec_or_kernel.name)
    if factory is None:
        raise ParameterError(f"Kernel tidak dikenal: {spec_or_kernel.name}")
    return factory(spec_or_kernel)


def start(spec: Union[Kernel, KernelSpec], key: StreamKey) -> ChainState:
    """
    Satu titik awal independen dari distribusi awal kernel
    """
    return resolve_kernel(spec).start(key)


def mcmc(spec: Union[Kernel, KernelSpec], x0: ChainState, block, n: int) -> ChainState:
    """
    State setelah n iterasi, fungsi murni dari (x0, block, n)
    """
    return resolve_kernel(spec).mcmc(x0, block, n)
