"""
Stream acak deterministik berbasis kunci (counter-based Philox).

"Simpan seed" dan "restore seed" pada sample-set engine diwujudkan sebagai
derivasi ulang dari StreamKey yang sama, bukan mutasi state global.
"""
import hashlib
from dataclasses import dataclass, field, replace
from enum import IntEnum
from typing import List

import numpy as np
from scipy.special import ndtri

from app.core.errors import ParameterError

# Tag domain, kata entropi pertama untuk semua stream
_STREAM_TAG = 0x50534D31
_WORD = 2 ** 32
_UNIFORM_SCALE = 2.0 ** -53


class Substream(IntEnum):
    MCMC = 1
    DIR = 2
    MAG = 3
    MH = 4
    START = 5


@dataclass(frozen=True)
class StreamKey:
    """
    Kunci stream: (master_seed, set_index, block_index, substream, lane)
    """
    master_seed: int
    set_index: int = 0
    block_index: int = 0
    substream: Substream = Substream.MCMC
    lane: int = 0

    def __post_init__(self):
        if not 0 <= self.master_seed < 2 ** 64:
            raise ParameterError(f"master_seed tidak valid: {self.master_seed}")
        for name in ("set_index", "block_index", "lane"):
            value = getattr(self, name)
            if not 0 <= value < _WORD:
                raise ParameterError(f"{name} tidak valid: {value}")

    def entropy(self) -> List[int]:
        # Panjang tetap, 32 bit per kata
        return [
            _STREAM_TAG,
            self.master_seed % _WORD,
            self.master_seed // _WORD,
            self.set_index,
            self.block_index,
            int(self.substream),
            self.lane,
        ]

    def with_substream(self, substream: Substream) -> "StreamKey":
        return replace(self, substream=substream)


def to_standard_normal(uniforms: np.ndarray) -> np.ndarray:
    """
    Transformasi tetap uniform (0,1) -> normal standar (inverse CDF)
    """
    return ndtri(np.asarray(uniforms, dtype=np.float64))


class KeyedStream:
    """
    Handle stream milik satu pemakai; draw berurutan melanjutkan stream
    """
    def __init__(self, key: StreamKey):
        self.key = key
        self._bitgen = np.random.Philox(np.random.SeedSequence(key.entropy()))

    def raw(self, n: int) -> np.ndarray:
        return np.asarray(self._bitgen.random_raw(n), dtype=np.uint64)

    def uniforms(self, n: int) -> np.ndarray:
        # 53 bit teratas + 0.5 ulp, selalu di dalam (0,1)
        top = np.right_shift(self.raw(n), np.uint64(11)).astype(np.float64)
        return (top + 0.5) * _UNIFORM_SCALE

    def normals(self, n: int) -> np.ndarray:
        return to_standard_normal(self.uniforms(n))


def derive_stream(key: StreamKey) -> KeyedStream:
    """
    Membuat stream yang diposisikan di awal urutan untuk kunci ini
    """
    return KeyedStream(key)


@dataclass(frozen=True, eq=False)
class RandomBlock:
    """
    Bundel draw satu blok: B baris draw kernel plus B/M triple coupling
    """
    key: StreamKey
    B: int
    M: int
    d: int
    r_mcmc: np.ndarray
    r_dir: np.ndarray = field(repr=False)
    r_mag: np.ndarray = field(repr=False)
    r_mh: np.ndarray = field(repr=False)

    @property
    def steps(self) -> int:
        return len(self.r_mag)

    def sub_block(self, s: int) -> "SubBlock":
        """
        Potongan untuk langkah coupling ke-s (M iterasi kernel)
        """
        if not 0 <= s < self.steps:
            raise ParameterError(f"Sub-blok tidak valid: {s}")
        lo = s * self.M
        return SubBlock(
            r_mcmc=self.r_mcmc[lo:lo + self.M],
            r_dir=self.r_dir[s],
            r_mag=float(self.r_mag[s]),
            r_mh=float(self.r_mh[s]),
        )

    def digest(self) -> str:
        h = hashlib.sha256()
        for arr in (self.r_mcmc, self.r_dir, self.r_mag, self.r_mh):
            h.update(np.ascontiguousarray(arr).tobytes())
        return h.hexdigest()


@dataclass(frozen=True, eq=False)
class SubBlock:
    r_mcmc: np.ndarray
    r_dir: np.ndarray
    r_mag: float
    r_mh: float


def rand_block(
    key: StreamKey,
    B: int,
    M: int,
    d: int,
    width: int = 1,
    coupling: bool = True,
) -> RandomBlock:
    """
    Membangkitkan bundel lengkap satu blok dari kunci (master_seed, set, blok, lane)
    """
    if B < 1:
        raise ParameterError(f"B tidak valid: {B}")
    if M < 1 or B % M != 0:
        raise ParameterError(f"M tidak membagi B: M={M}, B={B}")
    if d < 1:
        raise ParameterError(f"d tidak valid: {d}")
    if width < 1:
        raise ParameterError(f"width tidak valid: {width}")

    steps = B // M if coupling else 0
    r_mcmc = derive_stream(key.with_substream(Substream.MCMC)).uniforms(B * width).reshape(B, width)
    if steps:
        r_dir = derive_stream(key.with_substream(Substream.DIR)).normals(steps * d).reshape(steps, d)
        r_mag = derive_stream(key.with_substream(Substream.MAG)).uniforms(steps)
        r_mh = derive_stream(key.with_substream(Substream.MH)).uniforms(steps)
    else:
        r_dir = np.empty((0, d))
        r_mag = np.empty(0)
        r_mh = np.empty(0)
    return RandomBlock(key=key, B=B, M=M, d=d, r_mcmc=r_mcmc, r_dir=r_dir, r_mag=r_mag, r_mh=r_mh)
