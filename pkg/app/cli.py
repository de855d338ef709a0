"""
Command-line entry point: perfectsim {twostate,normal,calibrate,serve}
"""
import argparse
import json
import sys
from typing import Dict, List, Optional

from pydantic import ValidationError

from app.core.config import (
    CalibrationExperiment,
    NormalExperiment,
    TwoStateExperiment,
    get_settings,
    parse_int_list,
    parse_seed,
)
from app.core.errors import ParameterError, PerfectSimError
from app.core.logging_config import get_logger, setup_logging
from app.services.experiments import ExperimentResult, ExperimentRunner
from app.services.reporting import render, write_result
from app.services.visualizer import HoleDecayPlotter

logger = get_logger(__name__)

EXIT_OK = 0
EXIT_PARAMETER = 2
EXIT_IO = 3
EXIT_FAILURE = 4


def _common_parser() -> argparse.ArgumentParser:
    settings = get_settings()
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", default=str(settings.seed), help="master seed (desimal atau 0x hex)")
    common.add_argument("--n", type=int, default=None, help="jumlah unit (simulasi/set/pasangan)")
    common.add_argument("--out", default=None, help="path output; tanpa ini tabel ditulis ke stdout")
    common.add_argument("--format", default="csv", choices=["csv", "json"])
    common.add_argument("--jobs", type=int, default=settings.jobs)
    common.add_argument("--log-level", default=settings.log_level)
    common.add_argument("--log-file", default=settings.log_file)
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(prog="perfectsim", description="Perfect simulation dengan coupled chains")
    sub = parser.add_subparsers(dest="command", required=True)

    twostate = sub.add_parser("twostate", parents=[common], help="tabel burn-in proses dua-state")
    twostate.add_argument("--ks", default=None, help="daftar k dipisah koma, mis. 5,10,20")
    twostate.add_argument("--theta", type=float, default=None)
    twostate.add_argument("--p", type=float, default=None)
    twostate.add_argument("--cap", type=int, default=None)
    twostate.add_argument("--plot", default=None, help="path SVG untuk plot peluruhan hole")

    normal = sub.add_parser("normal", parents=[common], help="sample set untuk target normal d-dimensi")
    normal.add_argument("--n-sets", dest="n", type=int, default=None)
    normal.add_argument("--d", type=int, default=None)
    normal.add_argument("--B", type=int, default=None)
    normal.add_argument("--K", type=int, default=None)
    normal.add_argument("--M", type=int, default=None)
    normal.add_argument("--r", type=float, default=None)
    normal.add_argument("--sigma", type=float, default=None)
    normal.add_argument("--opt-in-long", dest="opt_in_long", action="store_true")

    calibrate = sub.add_parser("calibrate", parents=[common], help="kalibrasi panjang blok B")
    calibrate.add_argument("--target", default=None, choices=["twostate", "normal"])
    calibrate.add_argument("--n-pairs", dest="n", type=int, default=None)
    calibrate.add_argument("--d", type=int, default=None)
    calibrate.add_argument("--P", type=float, default=None)
    calibrate.add_argument("--Bs", default=None, help="daftar B dipisah koma")
    calibrate.add_argument("--theta", type=float, default=None)
    calibrate.add_argument("--p", type=float, default=None)
    calibrate.add_argument("--r", type=float, default=None)
    calibrate.add_argument("--sigma", type=float, default=None)

    serve = sub.add_parser("serve", help="menjalankan API HTTP")
    serve.add_argument("--host", default="127.0.0.1")
    serve.add_argument("--port", type=int, default=8000)
    serve.add_argument("--log-level", default=get_settings().log_level)
    serve.add_argument("--log-file", default=get_settings().log_file)
    return parser


_SKIP = {"command", "log_level", "log_file", "plot", "host", "port"}


def _experiment_fields(args: argparse.Namespace) -> Dict:
    fields = {k: v for k, v in vars(args).items() if k not in _SKIP and v is not None}
    fields["seed"] = parse_seed(args.seed)
    if fields.get("opt_in_long") is False:
        fields.pop("opt_in_long")
    if "ks" in fields:
        fields["ks"] = parse_int_list(fields["ks"])
    if "Bs" in fields:
        fields["Bs"] = parse_int_list(fields["Bs"])
    return fields


def run_command(args: argparse.Namespace, runner: Optional[ExperimentRunner] = None) -> ExperimentResult:
    runner = runner or ExperimentRunner()
    fields = _experiment_fields(args)
    if args.command == "twostate":
        return runner.cmd_twostate(TwoStateExperiment(**fields))
    if args.command == "normal":
        return runner.cmd_normal(NormalExperiment(**fields))
    if args.command == "calibrate":
        result = runner.cmd_calibrate_b(CalibrationExperiment(**fields))
        if "analytic_B" in result.extras:
            logger.info(f"B analitik untuk P target: {result.extras['analytic_B']}")
        return result
    raise ParameterError(f"Perintah tidak dikenal: {args.command}")


def _emit(result: ExperimentResult, args: argparse.Namespace) -> None:
    if args.out is None:
        sys.stdout.write(render(result, args.format))
    else:
        write_result(result, args.out, args.format)
    plot = getattr(args, "plot", None)
    if plot and "holes" in result.side_tables:
        HoleDecayPlotter().save(result.side_tables["holes"], plot)


def _fail(error: Exception, code: int) -> int:
    sys.stderr.write(json.dumps({"error": type(error).__name__, "message": str(error)}) + "\n")
    return code


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    setup_logging(log_level=args.log_level, log_file=args.log_file)

    if args.command == "serve":
        import uvicorn

        uvicorn.run("app.main:app", host=args.host, port=args.port)
        return EXIT_OK

    try:
        result = run_command(args)
        _emit(result, args)
        return EXIT_OK
    except (ParameterError, ValidationError) as e:
        return _fail(e, EXIT_PARAMETER)
    except OSError as e:
        return _fail(e, EXIT_IO)
    except PerfectSimError as e:
        return _fail(e, EXIT_FAILURE)


if __name__ == "__main__":
    sys.exit(main())
