"""
Command line entry point for hypobv.
"""

import argparse
import asyncio
import sys
from typing import Any, Dict, List, Optional

import structlog

from jobs.handlers import read_json
from jobs.manager import JobManager, load_job, render
from shared.config import get_config
from shared.errors import HypoBVError
from shared.logging_setup import configure_logging
from shared.models import Job

logger = structlog.get_logger(__name__)


def _common_flags() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--poly", help="polynomial: expression string, inline JSON or a .json file")
    common.add_argument("--phi", help="test function JSON file")
    common.add_argument("--sequence", help="weight sequence CSV file")
    common.add_argument("--sigma", type=float, help="use the Gevrey sequence p!^sigma")
    common.add_argument("--h", type=float)
    common.add_argument("--order", type=int)
    common.add_argument("--t0", type=float)
    common.add_argument("--steps", type=int)
    common.add_argument("--tol", type=float)
    common.add_argument("--out", help="write the report to this path as well")
    common.add_argument("--threads", type=int)
    common.add_argument("--seed-echo", action="store_true", help="print the quasi-random seed to stderr")
    common.add_argument("--log-level", default=None)
    common.add_argument("--log-json", action="store_true")
    return common


def build_parser() -> argparse.ArgumentParser:
    common = _common_flags()
    parser = argparse.ArgumentParser(prog="hypobv", description="Boundary values of hypoelliptic zero solutions")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", parents=[common], help="run one job file")
    run.add_argument("job")
    suite = sub.add_parser("suite", parents=[common], help="run every job file in a directory")
    suite.add_argument("corpus")
    report = sub.add_parser("report", parents=[common], help="re-summarize a directory of reports")
    report.add_argument("directory")

    indices = sub.add_parser("indices", parents=[common])
    indices.add_argument("--check-a", type=float)
    weights = sub.add_parser("weights", parents=[common])
    weights.add_argument("--a", type=float, help="check (M.4)_a as well")
    cauchy = sub.add_parser("cauchy", parents=[common])
    cauchy.add_argument("--l-max", type=int)
    extend = sub.add_parser("extend", parents=[common])
    extend.add_argument("--mode", choices=["plain", "finite_order", "gevrey"], default="finite_order")
    extend.add_argument("--amplitude", help="cutoff amplitude A, or auto for the fitted 8 L1 H^b0 (default)")
    bv = sub.add_parser("bv", parents=[common])
    bv.add_argument("--kernel", default="heat")
    bv.add_argument("--expr", help="closed form for custom and zero_jump kernels")
    bv.add_argument("--method", choices=["direct", "stokes", "both"], default="both")
    bv.add_argument("--slot", type=int)
    stokes = sub.add_parser("stokes", parents=[common])
    stokes.add_argument("--kernel")
    stokes.add_argument("--f", help="closed form f(x, t) instead of a kernel")
    stokes.add_argument("--a", type=float, required=True)
    stokes.add_argument("--b", type=float, required=True)
    fundsol = sub.add_parser("fundsol", parents=[common])
    fundsol.add_argument("--check-delta", help="test function JSON, plain or {space, time}")
    fundsol.add_argument("--A", dest="amplitude")
    fundsol.add_argument("--regularity", action="store_true")
    return parser


def _sequence(args: argparse.Namespace) -> Any:
    if args.sigma is not None:
        return {"gevrey": args.sigma}
    return args.sequence


def build_job(args: argparse.Namespace) -> Job:
    """Turn direct subcommand flags into a job."""
    params: Dict[str, Any] = {}
    for flag in ("h", "order", "t0", "steps", "tol"):
        value = getattr(args, flag, None)
        if value is not None:
            params[flag] = value

    command = args.command
    phi: Optional[Any] = args.phi
    if command == "indices" and args.check_a is not None:
        params["check_a"] = args.check_a
    elif command == "weights" and args.a is not None:
        params["a"] = args.a
    elif command == "cauchy" and args.l_max is not None:
        params["l_max"] = args.l_max
    elif command == "extend":
        params["mode"] = args.mode
        if args.amplitude is not None:
            params["amplitude"] = args.amplitude if args.amplitude == "auto" else float(args.amplitude)
    elif command == "bv":
        params.update({"kernel": args.kernel, "method": args.method})
        if args.expr:
            params["expr"] = args.expr
        if args.slot is not None:
            params["slot"] = args.slot
    elif command == "stokes":
        params.update({"a": args.a, "b": args.b})
        if args.f:
            params["f"] = args.f
        if args.kernel:
            params["kernel"] = args.kernel
    elif command == "fundsol":
        if args.amplitude is not None:
            params["A"] = args.amplitude if args.amplitude == "auto" else float(args.amplitude)
        params["regularity"] = args.regularity
        if args.check_delta:
            data = read_json(args.check_delta)
            if isinstance(data, dict) and "space" in data:
                params["checks"] = [data]
            else:
                phi = data

    return Job(
        job_id=command,
        command=command,
        poly=args.poly,
        phi=phi,
        sequence=_sequence(args),
        parameters=params,
        out=args.out,
    )


async def _dispatch(args: argparse.Namespace, manager: JobManager) -> int:
    if args.command == "suite":
        report = await manager.run_suite(args.corpus, out=args.out)
    elif args.command == "report":
        report = manager.summarize_reports(args.directory)
        if args.out:
            await manager.write(report, args.out)
    else:
        job = load_job(args.job) if args.command == "run" else build_job(args)
        report = await manager.run(job, out=args.out)
    sys.stdout.write(render(report))
    return report.exit_code


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    cfg = get_config()
    configure_logging(args.log_level or cfg.logging.level, cfg.logging.format,
                      "json" if args.log_json else cfg.logging.renderer)
    if args.seed_echo:
        sys.stderr.write(f"seed={cfg.run.seed}\n")
    try:
        return asyncio.run(_dispatch(args, JobManager(threads=args.threads)))
    except HypoBVError as e:
        logger.error("command_failed", command=args.command, error=e.message, exit_code=e.exit_code)
        sys.stderr.write(f"error: {e.message}\n")
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
