import os
from functools import lru_cache
from typing import List, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.core.errors import ParameterError

MAX_SEED = 2 ** 64


def parse_seed(text: str) -> int:
    """
    Parse master seed desimal atau hex (0x...) 64-bit unsigned
    """
    try:
        value = int(str(text).strip(), 0)
    except ValueError:
        raise ParameterError(f"Seed tidak valid: {text}")
    if not 0 <= value < MAX_SEED:
        raise ParameterError(f"Seed di luar rentang 64-bit: {text}")
    return value


def parse_int_list(text: str) -> List[int]:
    """
    Parse daftar integer dipisah koma, misalnya "5,10,20"
    """
    try:
        values = [int(part) for part in str(text).split(",") if part.strip()]
    except ValueError:
        raise ParameterError(f"Daftar integer tidak valid: {text}")
    if not values:
        raise ParameterError(f"Daftar integer kosong: {text}")
    return values


class Settings(BaseModel):
    """
    Konfigurasi lingkungan, dibaca dari .env / environment
    """
    seed: int = 20240501
    jobs: int = Field(default=1, ge=1)
    log_level: str = "INFO"
    log_file: Optional[str] = None
    output_dir: str = "results"
    api_max_units: int = Field(default=20000, ge=1)

    @field_validator("seed")
    @classmethod
    def _check_seed(cls, value: int) -> int:
        if not 0 <= value < MAX_SEED:
            raise ValueError(f"Seed di luar rentang 64-bit: {value}")
        return value


@lru_cache()
def get_settings() -> Settings:
    """
    Memuat Settings dari environment (sekali per proses)
    """
    load_dotenv()
    return Settings(
        seed=parse_seed(os.getenv("PERFECTSIM_SEED", "20240501")),
        jobs=int(os.getenv("PERFECTSIM_JOBS", "1")),
        log_level=os.getenv("PERFECTSIM_LOG_LEVEL", "INFO"),
        log_file=os.getenv("PERFECTSIM_LOG_FILE") or None,
        output_dir=os.getenv("PERFECTSIM_OUTPUT_DIR", "results"),
        api_max_units=int(os.getenv("PERFECTSIM_API_MAX_UNITS", "20000")),
    )


class RunConfig(BaseModel):
    """
    Konfigurasi satu sample set: K chain, blok panjang B, coupling tiap M iterasi
    """
    model_config = ConfigDict(frozen=True)

    K: int = Field(default=20, ge=1)
    B: int = Field(default=25, ge=1)
    M: int = Field(default=1, ge=1)
    r: float = Field(default=3.0, gt=0)
    P_target: float = Field(default=0.1, gt=0, lt=1)
    tail_cap: int = Field(default=200, ge=1)
    cache_row1: bool = True
    audit: bool = False

    @model_validator(mode="before")
    @classmethod
    def _default_tail_cap(cls, data):
        # default 10*K blok ekstra
        if isinstance(data, dict) and data.get("tail_cap") is None:
            data = dict(data)
            data["tail_cap"] = 10 * int(data.get("K", 20))
        return data

    @model_validator(mode="after")
    def _check_blocks(self) -> "RunConfig":
        if self.B % self.M != 0:
            raise ValueError(f"M tidak membagi B: M={self.M}, B={self.B}")
        return self

    @property
    def k_effective(self) -> int:
        return self.K * self.B

    @property
    def sub_blocks(self) -> int:
        return self.B // self.M


class ExperimentConfig(BaseModel):
    """
    Parameter umum perintah eksperimen
    """
    seed: int = 20240501
    n: int = Field(default=1000, ge=1)
    out: Optional[str] = None
    format: str = "csv"
    jobs: int = Field(default=1, ge=1)

    @field_validator("seed")
    @classmethod
    def _check_seed(cls, value: int) -> int:
        if not 0 <= value < MAX_SEED:
            raise ValueError(f"Seed di luar rentang 64-bit: {value}")
        return value

    @field_validator("format")
    @classmethod
    def _check_format(cls, value: str) -> str:
        value = value.lower()
        if value not in ("csv", "json"):
            raise ValueError(f"Format tidak valid: {value}")
        return value

    def echo(self) -> dict:
        """
        Konfigurasi yang ditulis ke file output (tanpa jobs dan path)
        """
        return self.model_dump(exclude={"jobs", "out", "format"})


class TwoStateExperiment(ExperimentConfig):
    ks: List[int] = Field(default_factory=lambda: [5, 10, 20, 50, 100, 110])
    theta: float = Field(default=1.0 / 9.0, ge=0, le=1)
    p: float = Field(default=0.1, gt=0, le=0.5)
    cap: int = Field(default=10000, ge=2)

    @field_validator("ks")
    @classmethod
    def _check_ks(cls, value: List[int]) -> List[int]:
        if not value or any(k < 0 for k in value):
            raise ValueError(f"Nilai k tidak valid: {value}")
        return value


class NormalExperiment(ExperimentConfig):
    d: int = Field(default=1, ge=1)
    B: Optional[int] = Field(default=None, ge=1)
    K: int = Field(default=20, ge=1)
    sigma: Optional[float] = Field(default=None, gt=0)
    r: float = Field(default=3.0, gt=0)
    M: int = Field(default=1, ge=1)
    opt_in_long: bool = False

    @model_validator(mode="after")
    def _check_blocks(self) -> "NormalExperiment":
        if self.B is not None and self.B % self.M != 0:
            raise ValueError(f"M tidak membagi B: M={self.M}, B={self.B}")
        return self

    def block_length(self) -> int:
        """
        B eksplisit, atau B default per dimensi (d > 5 butuh opt_in_long)
        """
        if self.B is not None:
            return self.B
        if self.d > 5 and not self.opt_in_long:
            raise ParameterError(f"d={self.d} tanpa --B butuh --opt-in-long")
        # import lokal: targets bergantung pada modul core
        from app.services.targets import NormalParams

        return NormalParams.default_block_length(self.d)

    def echo(self) -> dict:
        data = super().echo()
        data["B"] = self.block_length()
        return data


class CalibrationExperiment(ExperimentConfig):
    target: str = "twostate"
    d: int = Field(default=1, ge=1)
    P: float = Field(default=0.1, gt=0, le=1)
    Bs: List[int] = Field(default_factory=lambda: list(range(1, 31)))
    theta: float = Field(default=1.0 / 9.0, ge=0, le=1)
    p: float = Field(default=0.1, gt=0, le=0.5)
    r: float = Field(default=3.0, gt=0)
    sigma: Optional[float] = Field(default=None, gt=0)

    @field_validator("target")
    @classmethod
    def _check_target(cls, value: str) -> str:
        if value not in ("twostate", "normal"):
            raise ValueError(f"Target tidak valid: {value}")
        return value

    @field_validator("Bs")
    @classmethod
    def _check_bs(cls, value: List[int]) -> List[int]:
        if not value or any(b < 1 for b in value):
            raise ValueError(f"Daftar B tidak valid: {value}")
        return sorted(set(value))
