import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, model_validator

from app.core.errors import ParameterError
from app.core.logging_config import get_logger
from app.core.rngstreams import StreamKey, Substream, derive_stream, to_standard_normal
from app.services.kernel import ChainState, Kernel, KernelSpec, Metric, register_kernel

logger = get_logger(__name__)

# Panjang blok hasil eksplorasi untuk target normal per dimensi
DEFAULT_NORMAL_BLOCKS: Dict[int, int] = {1: 5, 2: 10, 5: 25, 10: 95, 15: 425, 20: 3500}


class TwoStateParams(BaseModel):
    model_config = ConfigDict(frozen=True)

    theta: float = Field(default=1.0 / 9.0, ge=0, le=1)
    p: float = Field(default=0.1, gt=0, le=0.5)


class NormalParams(BaseModel):
    """
    Target normal standar d-dimensi; sigma default 2/sqrt(d)
    """
    model_config = ConfigDict(frozen=True)

    d: int = Field(default=1, ge=1)
    sigma: float = Field(default=2.0, gt=0)
    r: float = Field(default=3.0, gt=0)
    start_halfwidth: float = Field(default=6.0, gt=0)

    @model_validator(mode="before")
    @classmethod
    def _default_sigma(cls, data):
        if isinstance(data, dict) and data.get("sigma") is None:
            data = dict(data)
            data["sigma"] = 2.0 / math.sqrt(int(data.get("d", 1)))
        return data

    @staticmethod
    def default_block_length(d: int) -> int:
        if d not in DEFAULT_NORMAL_BLOCKS:
            raise ParameterError(f"Tidak ada B default untuk d={d}")
        return DEFAULT_NORMAL_BLOCKS[d]


def twostate_step(state: int, S: float, params: TwoStateParams) -> int:
    """
    Satu transisi proses dua-state dengan satu uniform S
    """
    if state == 1:
        return 2 if S > 1.0 - params.theta * params.p else 1
    if state == 2:
        return 1 if S < params.p else 2
    raise ParameterError(f"State tidak valid: {state}")


def indicator_state1(state: ChainState) -> float:
    return 1.0 if state == 1 else 0.0


@dataclass(frozen=True)
class TwoStateAnalytics:
    """
    Nilai analitik proses dua-state (start (0.5, 0.5))
    """
    theta: float
    p: float

    @property
    def stationary(self) -> Tuple[float, float]:
        return (1.0 / (1.0 + self.theta), self.theta / (1.0 + self.theta))

    @property
    def delta(self) -> float:
        return 1.0 - self.p - self.theta * self.p

    def transition_matrix(self) -> np.ndarray:
        tp = self.theta * self.p
        return np.array([[1.0 - tp, tp], [self.p, 1.0 - self.p]])

    def p_noncoal(self, i: int) -> float:
        """
        P(tau > i) untuk pasangan dengan lag 1
        """
        return 0.5 * self.delta ** (i - 1)

    def rho(self, B: int) -> float:
        return self.delta ** B

    def block_p(self, B: int) -> float:
        # Rantai pangkat-B tetap dua-state dengan theta yang sama
        if self.delta == 1.0:
            return 0.0
        return self.p * (1.0 - self.delta ** B) / (1.0 - self.delta)

    def marginal_state1(self, k: int) -> float:
        pi1 = self.stationary[0]
        return pi1 - (pi1 - 0.5) * self.delta ** k

    def prop_nu_gt1(self, k: int) -> float:
        return 0.5 * self.delta ** k

    def expected_holes(self, k: int) -> float:
        if self.delta >= 1.0:
            return math.inf
        return 0.5 * self.delta ** k / (1.0 - self.delta)

    def calibrated_block_length(self, P: float) -> int:
        """
        B terkecil dengan 0.5 * delta^B <= P
        """
        if not 0 < P <= 1:
            raise ParameterError(f"P tidak valid: {P}")
        if self.delta <= 0.0 or P >= 0.5:
            return 1
        if self.delta >= 1.0:
            raise ParameterError("Delta = 1, rantai tidak pernah coalesce")
        B = max(1, math.ceil(math.log(2.0 * P) / math.log(self.delta)))
        # koreksi pembulatan floating point
        while B > 1 and 0.5 * self.delta ** (B - 1) <= P:
            B -= 1
        while 0.5 * self.delta ** B > P:
            B += 1
        return B


def twostate_analytics(params: TwoStateParams) -> TwoStateAnalytics:
    return TwoStateAnalytics(theta=params.theta, p=params.p)


@register_kernel("twostate")
class TwoStateKernel(Kernel):
    """
    Proses dua-state, satu uniform per iterasi
    """
    draw_width = 1

    def __init__(self, params: Optional[TwoStateParams] = None):
        super().__init__()
        self.params = params or TwoStateParams()
        self.spec = KernelSpec(
            name="twostate",
            dimension=1,
            metric=Metric.ZERO_ONE,
            discrete=True,
            parameters={"theta": self.params.theta, "p": self.params.p},
        )
        self._up = 1.0 - self.params.theta * self.params.p
        self._down = self.params.p

    @classmethod
    def from_spec(cls, spec: KernelSpec) -> "TwoStateKernel":
        return cls(TwoStateParams(**spec.parameters))

    def start(self, key: StreamKey) -> int:
        u = derive_stream(key.with_substream(Substream.START)).uniforms(1)[0]
        return 1 if u < 0.5 else 2

    def _advance(self, states: List[ChainState], draws: np.ndarray, n: int) -> List[ChainState]:
        us = draws[:n, 0].tolist()
        up, down = self._up, self._down
        out = []
        for state in states:
            if state not in (1, 2):
                raise ParameterError(f"State tidak valid: {state}")
            for u in us:
                if state == 1:
                    if u > up:
                        state = 2
                elif u < down:
                    state = 1
            out.append(state)
        return out


def normal_negloglik(z) -> float:
    """
    U(z) = 0.5 * sum z_j^2
    """
    total = 0.0
    for value in np.asarray(z, dtype=np.float64).reshape(-1).tolist():
        total += value * value
    return 0.5 * total


def _negloglik_rows(x: np.ndarray) -> np.ndarray:
    # Urutan akumulasi sama dengan normal_negloglik
    total = np.zeros(x.shape[0])
    for j in range(x.shape[1]):
        total += x[:, j] * x[:, j]
    return 0.5 * total


@register_kernel("normal")
class NormalKernel(Kernel):
    """
    Random-walk Metropolis untuk normal standar d-dimensi.

    Tiap iterasi memakai d uniform (jump N(0, sigma^2 I) via inverse CDF)
    dan satu uniform untuk uji M-H, dibagi oleh semua chain aktif.
    """

    def __init__(self, params: Optional[NormalParams] = None):
        super().__init__()
        self.params = params or NormalParams()
        self.draw_width = self.params.d + 1
        self.spec = KernelSpec(
            name="normal",
            dimension=self.params.d,
            metric=Metric.EUCLIDEAN,
            discrete=False,
            parameters={
                "d": float(self.params.d),
                "sigma": self.params.sigma,
                "r": self.params.r,
                "start_halfwidth": self.params.start_halfwidth,
            },
        )

    @classmethod
    def from_spec(cls, spec: KernelSpec) -> "NormalKernel":
        values = dict(spec.parameters)
        values["d"] = int(values.get("d", spec.dimension))
        return cls(NormalParams(**values))

    def start(self, key: StreamKey) -> np.ndarray:
        h = self.params.start_halfwidth
        u = derive_stream(key.with_substream(Substream.START)).uniforms(self.params.d)
        return -h + 2.0 * h * u

    def negloglik(self, x: ChainState) -> float:
        return normal_negloglik(x)

    def _advance(self, states: List[ChainState], draws: np.ndarray, n: int) -> List[ChainState]:
        d = self.params.d
        x = np.array([np.asarray(s, dtype=np.float64).reshape(d) for s in states])
        jumps = to_standard_normal(draws[:n, :d]) * self.params.sigma
        accept_u = draws[:n, d]
        for t in range(n):
            proposal = x + jumps[t]
            log_ratio = _negloglik_rows(x) - _negloglik_rows(proposal)
            accept = accept_u[t] <= np.exp(np.minimum(log_ratio, 0.0))
            x = np.where(accept[:, None], proposal, x)
        return [row.copy() for row in x]


def normal_mcmc_block(states: Sequence[np.ndarray], block, params: NormalParams, n: Optional[int] = None) -> List[np.ndarray]:
    """
    Memperbarui semua chain aktif dengan jump dan uniform M-H bersama
    """
    kernel = NormalKernel(params)
    draws = block.r_mcmc if hasattr(block, "r_mcmc") else np.asarray(block)
    return kernel.mcmc_many(states, draws, draws.shape[0] if n is None else n)
