"""
Geometri maximal coupling: jump uniform bola padat, konstruksi overlap,
dan uji Metropolis-Hastings.
"""
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from app.core.errors import CouplingError, ParameterError
from app.core.logging_config import get_logger

logger = get_logger(__name__)

RADIUS_TOLERANCE = 1e-9


def _norm(v: np.ndarray) -> float:
    return float(np.sqrt(np.dot(v, v)))


@dataclass(frozen=True, eq=False)
class JumpProposal:
    origin: np.ndarray
    destination: np.ndarray
    r: float

    def __post_init__(self):
        if _norm(self.destination - self.origin) > self.r + RADIUS_TOLERANCE:
            raise CouplingError(f"Jump keluar radius: r={self.r}")


def jump(x, r: float, r_dir, r_mag: float) -> np.ndarray:
    """
    x + r * r_mag^(1/d) * arah; seragam pada bola padat berjari-jari r
    """
    if r <= 0:
        raise ParameterError(f"Radius tidak valid: {r}")
    x = np.asarray(x, dtype=np.float64)
    direction = np.asarray(r_dir, dtype=np.float64).reshape(x.shape)
    length = _norm(direction.reshape(-1))
    if length == 0.0 or not math.isfinite(length):
        # draw sudah ditentukan blok, tidak boleh diulang
        raise CouplingError("Vektor arah jump bernorma nol")
    d = x.size
    return x + (r * r_mag ** (1.0 / d) / length) * direction


def propose(x, r: float, r_dir, r_mag: float) -> JumpProposal:
    x = np.asarray(x, dtype=np.float64)
    return JumpProposal(origin=x, destination=jump(x, r, r_dir, r_mag), r=r)


def max_couple(x, x_star, y, r: float) -> np.ndarray:
    """
    Tujuan jump untuk Y yang dikopel maksimal dengan jump X -> x_star
    """
    x = np.asarray(x, dtype=np.float64)
    x_star = np.asarray(x_star, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)

    u_x = x_star - x
    if _norm(u_x.reshape(-1)) > r + RADIUS_TOLERANCE:
        raise CouplingError(f"|x_star - x| melebihi r: {_norm(u_x.reshape(-1))} > {r}")

    # Bola identik: coupling total
    if x.tobytes() == y.tobytes():
        return x_star.copy()

    # Di dalam zona overlap: salin tujuan X
    if _norm((y - x_star).reshape(-1)) <= r:
        return x_star.copy()

    half = 0.5 * _norm((y - x).reshape(-1))
    v = (y - x) / (2.0 * half)
    c = half * v + u_x - np.dot(u_x.reshape(-1), v.reshape(-1)) * v
    cc = float(np.dot(c.reshape(-1), c.reshape(-1)))
    if math.sqrt(cc) < r:
        w = -half + math.sqrt(half * half + r * r - cc)
        return y + u_x + 2.0 * w * v
    return y + u_x


def mh_test(U: Callable[[np.ndarray], float], x, x_star, r_mh: float):
    """
    Terima x_star jika r_mh <= exp(U(x) - U(x_star)), selain itu tetap di x
    """
    u_x = U(x)
    u_star = U(x_star)
    if math.isnan(u_star) or u_star == math.inf:
        return x
    log_ratio = u_x - u_star
    if log_ratio >= 0.0:
        return x_star
    return x_star if r_mh <= math.exp(log_ratio) else x
