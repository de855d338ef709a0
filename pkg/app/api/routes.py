from typing import Dict, List, Optional

from fastapi import APIRouter, HTTPException, Query
from fastapi.concurrency import run_in_threadpool
from pydantic import BaseModel, Field, ValidationError

from ..core.config import (
    CalibrationExperiment,
    NormalExperiment,
    TwoStateExperiment,
    get_settings,
)
from ..core.errors import ParameterError
from ..core.logging_config import get_logger
from ..services.experiments import ExperimentResult, ExperimentRunner
from ..services.reporting import result_document, table_to_records
from ..services.targets import TwoStateParams, twostate_analytics
from ..services.visualizer import HoleDecayPlotter

logger = get_logger(__name__)

router = APIRouter()
runner = ExperimentRunner()
plotter = HoleDecayPlotter()


class TwoStateRequest(BaseModel):
    seed: Optional[int] = None
    n: int = Field(default=1000, ge=1)
    ks: List[int] = Field(default_factory=lambda: [5, 10, 20, 50, 100, 110])
    theta: float = 1.0 / 9.0
    p: float = 0.1
    cap: int = 10000
    plot: bool = False


class NormalRequest(BaseModel):
    seed: Optional[int] = None
    n: int = Field(default=50, ge=1)
    d: int = 1
    B: Optional[int] = None
    K: int = 20
    M: int = 1
    r: float = 3.0
    sigma: Optional[float] = None


class CalibrationRequest(BaseModel):
    seed: Optional[int] = None
    n: int = Field(default=1000, ge=1)
    target: str = "twostate"
    d: int = 1
    P: float = 0.1
    Bs: List[int] = Field(default_factory=lambda: list(range(1, 31)))
    theta: float = 1.0 / 9.0
    p: float = 0.1
    r: float = 3.0
    sigma: Optional[float] = None


def _fields(request: BaseModel, exclude=()) -> Dict:
    data = request.model_dump(exclude=set(exclude), exclude_none=True)
    data["seed"] = request.seed if request.seed is not None else get_settings().seed
    return data


def _check_units(units: int) -> None:
    limit = get_settings().api_max_units
    if units > limit:
        raise ParameterError(f"Permintaan terlalu besar: {units} unit > {limit}")


def _response(result: ExperimentResult) -> Dict:
    document = result_document(result)
    document["side_tables"] = {name: table_to_records(t) for name, t in result.side_tables.items()}
    return {"status": "success", "result": document}


async def _execute(func, cfg) -> ExperimentResult:
    return await run_in_threadpool(func, cfg)


def _http_error(e: Exception) -> HTTPException:
    if isinstance(e, (ParameterError, ValidationError)):
        return HTTPException(status_code=400, detail=str(e))
    return HTTPException(status_code=500, detail=str(e))


@router.get("/analytics/twostate")
async def get_twostate_analytics(
    theta: float = Query(1.0 / 9.0),
    p: float = Query(0.1),
    k: int = Query(5, ge=0),
    B: int = Query(25, ge=1),
    P: float = Query(0.1),
):
    """
    Nilai analitik proses dua-state untuk k, B dan P target
    """
    try:
        analytics = twostate_analytics(TwoStateParams(theta=theta, p=p))
        return {
            "status": "success",
            "analytics": {
                "stationary": list(analytics.stationary),
                "delta": analytics.delta,
                "marginal_state1": analytics.marginal_state1(k),
                "prop_nu_gt1": analytics.prop_nu_gt1(k),
                "expected_holes": analytics.expected_holes(k),
                "rho": analytics.rho(B),
                "calibrated_B": analytics.calibrated_block_length(P),
            },
        }
    except Exception as e:
        raise _http_error(e)


@router.post("/experiments/twostate")
async def run_twostate(request: TwoStateRequest):
    """
    Menjalankan tabel burn-in dua-state
    """
    try:
        _check_units(request.n)
        cfg = TwoStateExperiment(**_fields(request, exclude=("plot",)))
        result = await _execute(runner.cmd_twostate, cfg)
        response = _response(result)
        if request.plot:
            response["plot"] = plotter.to_base64(result.side_tables["holes"])
        return response
    except Exception as e:
        logger.error(f"Error saat menjalankan eksperimen dua-state via API: {str(e)}")
        raise _http_error(e)


@router.post("/experiments/normal")
async def run_normal(request: NormalRequest):
    """
    Menjalankan sample set target normal
    """
    try:
        _check_units(request.n * request.K)
        cfg = NormalExperiment(**_fields(request))
        return _response(await _execute(runner.cmd_normal, cfg))
    except Exception as e:
        logger.error(f"Error saat menjalankan eksperimen normal via API: {str(e)}")
        raise _http_error(e)


@router.post("/experiments/calibrate")
async def run_calibration(request: CalibrationRequest):
    """
    Kalibrasi panjang blok B
    """
    try:
        _check_units(request.n * len(request.Bs))
        cfg = CalibrationExperiment(**_fields(request))
        return _response(await _execute(runner.cmd_calibrate_b, cfg))
    except Exception as e:
        logger.error(f"Error saat kalibrasi via API: {str(e)}")
        raise _http_error(e)
