"""
Command handlers: one tool per CLI command, dispatched by name.
"""

import csv
import json
import os
from collections.abc import Mapping
from typing import Any, Callable, Dict, List, Optional

import structlog

from algebra.polyops import OperatorProfile, decompose_t, parse_poly
from algebra.symfun import BumpFun, SymFun, TensorTest
from analysis.indices import analyze, b0_exact
from analysis.weights import WeightSeq, check_conditions, load_sequence_csv, omega, relation
from boundary.fundsol import fundamental_solution_1d
from boundary.growth import growth_fit
from boundary.kernels import as_closed_form, make_kernel, reference_polynomial, verify_zero_solution
from boundary.pairing import bv_direct, bv_stokes, bv_t_derivatives, direct_pairing, stokes_check, stokes_pairing
from extension.cauchyext import build_extension, cauchy_explicit, cauchy_recursive, h_trend, verify_extension
from jobs.base_job import BaseJobHandler, JobContext
from shared.config import get_config
from shared.errors import FileError, SchemaError, VerdictFailure
from shared.models import ExtensionMode, ExtensionReport, Job, PairingResult, VerdictStatus

logger = structlog.get_logger(__name__)

KERNEL_ALIASES = {
    "heat": "heat_kernel",
    "poisson": "poisson_kernel",
    "cauchy": "cauchy_kernel",
}


def _pair(z: complex) -> List[float]:
    return [float(z.real), float(z.imag)]


# inputs


def resolve_path(path: str, base_dir: Optional[str]) -> str:
    if os.path.isabs(path) or not base_dir:
        return path
    return os.path.join(base_dir, path)


def read_json(path: str, base_dir: Optional[str] = None) -> Any:
    full = resolve_path(path, base_dir)
    if not os.path.exists(full):
        raise FileError(f"Input file not found: {full}")
    try:
        with open(full, "r") as handle:
            return json.load(handle)
    except json.JSONDecodeError as e:
        raise SchemaError(f"Malformed JSON in {full}: {e}") from e


def load_profile(job: Job, default: Optional[str] = None) -> OperatorProfile:
    source = job.poly if job.poly is not None else default
    if source is None:
        raise SchemaError(f"Command {job.command!r} needs a polynomial")
    if isinstance(source, str) and source.endswith(".json"):
        source = read_json(source, job.base_dir)
    return decompose_t(parse_poly(source))


def load_phi(source: Any, base_dir: Optional[str] = None) -> SymFun:
    if isinstance(source, str):
        source = read_json(source, base_dir)
    if not isinstance(source, Mapping):
        raise SchemaError("A test function must be a JSON object or a path to one")
    return SymFun.from_json(source)


def load_sequence(source: Any, base_dir: Optional[str] = None) -> WeightSeq:
    """CSV path, {"gevrey": sigma}, {"values": [...]} or {"csv": path}."""
    if isinstance(source, str):
        return load_sequence_csv(resolve_path(source, base_dir))
    if not isinstance(source, Mapping):
        raise SchemaError("A sequence must be a CSV path or a JSON object")
    if "gevrey" in source:
        return WeightSeq.gevrey(float(source["gevrey"]), source.get("p_max"))
    if "values" in source:
        return WeightSeq.explicit(source["values"], label=source.get("label", "explicit"))
    if "csv" in source:
        return load_sequence_csv(resolve_path(source["csv"], base_dir))
    raise SchemaError(f"Unknown sequence source keys {sorted(source)}")


def load_data(job: Job, profile: OperatorProfile, slot: int = 0) -> List[SymFun]:
    """Cauchy data: job.phis as given, or job.phi placed in one slot."""
    if job.phis is not None:
        phis = [load_phi(p, job.base_dir) for p in job.phis]
    elif job.phi is not None:
        phi = load_phi(job.phi, job.base_dir)
        phis = [phi if k == slot else SymFun.zero(profile.d) for k in range(profile.m)]
    else:
        raise SchemaError(f"Command {job.command!r} needs test data")
    if len(phis) != profile.m:
        raise SchemaError(f"Expected {profile.m} Cauchy data, got {len(phis)}")
    return phis


# expectations


def _lookup(result: Any, path: str) -> Any:
    value = result
    for key in path.split("."):
        if isinstance(value, Mapping) and key in value:
            value = value[key]
        elif isinstance(value, list) and key.isdigit() and int(key) < len(value):
            value = value[int(key)]
        else:
            raise SchemaError(f"Expected field {path!r} is not in the result")
    return value


def _matches(actual: Any, expected: Any, tol: float) -> bool:
    if isinstance(expected, bool) or isinstance(expected, str) or expected is None:
        return actual == expected
    if isinstance(expected, (int, float)):
        return actual is not None and abs(float(actual) - float(expected)) <= tol
    if isinstance(expected, list) and len(expected) == 2 and isinstance(actual, list) and len(actual) == 2:
        return abs(complex(*actual) - complex(*expected)) <= tol
    return actual == expected


def check_expectations(result: Dict[str, Any], ctx: JobContext) -> None:
    """Compare result fields against the job's "expect" block; a mismatch is a verdict failure."""
    expected = ctx.parameters.get("expect") or {}
    tol = float(ctx.parameters.get("expect_tol", 1e-9))
    failed = {}
    for path, value in expected.items():
        actual = _lookup(result, path)
        if not _matches(actual, value, tol):
            failed[path] = {"expected": value, "actual": actual}
    if failed:
        raise VerdictFailure(f"{len(failed)} asserted value(s) did not hold", {"mismatches": failed})


# handlers


class CommandHandler(BaseJobHandler):
    """Runs indices, weights, cauchy, extend, bv, stokes and fundsol jobs."""

    def __init__(self):
        self.tools: Dict[str, Callable[[JobContext], Dict[str, Any]]] = {}
        self._register_default_tools()

    def _register_default_tools(self):
        self.tools = {
            "indices": self._tool_indices,
            "weights": self._tool_weights,
            "cauchy": self._tool_cauchy,
            "extend": self._tool_extend,
            "bv": self._tool_bv,
            "stokes": self._tool_stokes,
            "fundsol": self._tool_fundsol,
        }

    def commands(self) -> List[str]:
        return sorted(self.tools)

    def execute(self, command: str, ctx: JobContext) -> Dict[str, Any]:
        if command not in self.tools:
            raise SchemaError(f"Unknown command {command!r}, expected one of {self.commands()}")
        result = self.tools[command](ctx)
        check_expectations(result, ctx)
        return result

    # algebra and weights

    def _tool_indices(self, ctx: JobContext) -> Dict[str, Any]:
        profile = load_profile(ctx.job)
        seed = ctx.parameters.get("seed", get_config().indices.seed)
        report = analyze(profile, check_a=ctx.parameters.get("check_a"), seed=seed)
        check = report.numeric_a0_check
        if check is not None and not check.passed:
            ctx.warn(f"numeric a0 check did not confirm a = {check.a:g}")
        if report.semi_elliptic == VerdictStatus.INCONCLUSIVE:
            ctx.warn("semi-ellipticity is inconclusive on the sphere sample")
        return {"poly": str(profile.P), "d": profile.d, "m": profile.m, "report": report.model_dump(mode="json")}

    def _tool_weights(self, ctx: JobContext) -> Dict[str, Any]:
        if ctx.job.sequence is None:
            raise SchemaError("weights needs a sequence")
        M = load_sequence(ctx.job.sequence, ctx.job.base_dir)
        a = ctx.parameters.get("a")
        report = check_conditions(M, None if a is None else float(a))
        result: Dict[str, Any] = {
            "sequence": M.label,
            "p_max": M.p_max,
            "conditions": report.model_dump(mode="json"),
        }
        verdicts = {"m1": report.m1, "m2": report.m2, "m2_star": report.m2_star,
                    "m3_prime": report.m3_prime, "m4": report.m4}
        for name, verdict in verdicts.items():
            if verdict is not None and verdict.status == VerdictStatus.INCONCLUSIVE:
                ctx.warn(f"{verdict.name} is inconclusive on the truncation")

        rhos = ctx.parameters.get("omega")
        if rhos:
            values = [omega(M, float(r)) for r in rhos]
            result["omega"] = [{"rho": float(r), "value": v.value, "p": v.p} for r, v in zip(rhos, values)]
        other = ctx.parameters.get("relation_to")
        if other is not None:
            rel = relation(M, load_sequence(other, ctx.job.base_dir))
            result["relation"] = {"kind": rel.kind.value, "slope": rel.slope, "L": rel.L, "C": rel.C}

        for name in ctx.parameters.get("require", []):
            verdict = verdicts.get(name)
            if verdict is None:
                raise SchemaError(f"Unknown or unchecked condition {name!r}")
            if verdict.status != VerdictStatus.HOLDS:
                raise VerdictFailure(
                    f"{verdict.name} {verdict.status.value} for {M.label}",
                    {"condition": name, "witness": verdict.witness},
                )
        return result

    def _tool_cauchy(self, ctx: JobContext) -> Dict[str, Any]:
        profile = load_profile(ctx.job)
        l_max = int(ctx.parameters.get("l_max", profile.m + 8))
        recursive = cauchy_recursive(profile, l_max)
        explicit = cauchy_explicit(profile, l_max)
        result: Dict[str, Any] = {
            "l_max": l_max,
            "recursive_equals_explicit": recursive.ops == explicit.ops,
            "identity_holds": recursive.identity_holds(),
            "ops": [str(op) for op in recursive.ops],
        }
        if ctx.job.phi is not None or ctx.job.phis is not None:
            phis = load_data(ctx.job, profile, int(ctx.parameters.get("slot", profile.m - 1)))
            build = build_extension(profile, recursive, phis, ExtensionMode.PLAIN,
                                    order=int(ctx.parameters.get("order", profile.m)))
            result["traces_exact"] = build.traces_exact()
        if not (result["recursive_equals_explicit"] and result["identity_holds"] and result.get("traces_exact", True)):
            raise VerdictFailure("Cauchy table identities failed", result)
        return result

    def _tool_extend(self, ctx: JobContext) -> Dict[str, Any]:
        profile = load_profile(ctx.job)
        phis = load_data(ctx.job, profile, int(ctx.parameters.get("slot", profile.m - 1)))
        M = load_sequence(ctx.job.sequence, ctx.job.base_dir) if ctx.job.sequence is not None else None
        mode = ExtensionMode(ctx.parameters.get("mode", ExtensionMode.FINITE_ORDER.value))
        amplitude = ctx.parameters.get("amplitude")
        h = float(ctx.parameters.get("h", 1.0))
        build = build_extension(profile, None, phis, mode, order=ctx.parameters.get("order"), M=M, h=h,
                                amplitude=amplitude)
        report = verify_extension(build)
        if ctx.parameters.get("h_trend") and M is not None:
            report.h_trend = h_trend(profile, phis, M, amplitude=amplitude)
        if mode == ExtensionMode.GEVREY and report.fitted_l is None:
            ctx.warn("no L on the sweep makes the weighted residual nonincreasing")
        if ctx.job.out:
            write_residual_csv(report, resolve_path(ctx.job.out, ctx.job.base_dir))
        if not report.traces_exact:
            raise VerdictFailure("Extension traces differ from the Cauchy data")
        return {"report": report.model_dump(mode="json")}

    # boundary values

    def _kernel(self, ctx: JobContext):
        kind = KERNEL_ALIASES.get(ctx.parameters.get("kernel", "heat_kernel"), ctx.parameters.get("kernel", "heat_kernel"))
        profile = load_profile(ctx.job, None if ctx.job.poly is not None else reference_polynomial(kind))
        f = make_kernel(kind, profile, expr=ctx.parameters.get("expr"), lower=ctx.parameters.get("lower"))
        return profile, f

    def _tool_bv(self, ctx: JobContext) -> Dict[str, Any]:
        profile, f = self._kernel(ctx)
        if ctx.job.phi is None:
            raise SchemaError("bv needs a test function")
        phi = load_phi(ctx.job.phi, ctx.job.base_dir)
        cfg = get_config().boundary
        method = ctx.parameters.get("method", "both")
        if method not in ("direct", "stokes", "both"):
            raise SchemaError(f"Unknown method {method!r}")
        slot = int(ctx.parameters.get("slot", profile.m - 1))
        residual = verify_zero_solution(f)
        if residual > cfg.zero_solution_tol:
            ctx.warn(f"zero-solution residual {residual:.3g} exceeds {cfg.zero_solution_tol:g}")

        result: Dict[str, Any] = {"kernel": f.kind, "slot": slot, "zero_solution_residual": residual}
        pairings: Dict[str, PairingResult] = {}
        if method in ("direct", "both"):
            P_slot = profile.P_j(slot + 1)
            g = f if P_slot.is_constant() and complex(P_slot.constant_value()) == 1 else f.derivative(P_slot)
            pairings["direct"] = bv_direct(g, phi, ctx.parameters.get("t0"), ctx.parameters.get("steps"))
        if method in ("stokes", "both"):
            pairings["stokes"] = bv_stokes(f, phi, slot, ctx.parameters.get("tol"))
        for name, pairing in pairings.items():
            result[name] = pairing.model_dump(mode="json")

        if ctx.parameters.get("t_derivatives"):
            pair = stokes_pairing(f) if method == "stokes" else direct_pairing(f)
            result["t_derivatives"] = [_pair(v) for v in bv_t_derivatives(f, phi, pair)]
        if ctx.parameters.get("growth"):
            M = load_sequence(ctx.job.sequence, ctx.job.base_dir) if ctx.job.sequence is not None else None
            result["growth"] = growth_fit(f, M=M, b0=float(b0_exact(profile))).model_dump(mode="json")
        if ctx.job.out and "direct" in pairings:
            write_trail_csv(pairings["direct"], resolve_path(ctx.job.out, ctx.job.base_dir))

        if len(pairings) == 2:
            gap = abs(pairings["direct"].complex_value - pairings["stokes"].complex_value)
            result["agreement"] = gap
            if gap > cfg.agreement_tol:
                raise VerdictFailure(
                    f"Direct and Stokes evaluators differ by {gap:.3g}",
                    {"direct": pairings["direct"].value, "stokes": pairings["stokes"].value},
                )
        return result

    def _tool_stokes(self, ctx: JobContext) -> Dict[str, Any]:
        if "f" in ctx.parameters:
            profile = load_profile(ctx.job)
            f = as_closed_form(ctx.parameters["f"], profile.d)
        else:
            profile, f = self._kernel(ctx)
        if ctx.job.phi is None:
            raise SchemaError("stokes needs a test function")
        r1, r2 = ctx.parameters.get("bump", [1.0, 2.0])
        if ctx.parameters.get("field") == "extension":
            phis = load_data(ctx.job, profile, int(ctx.parameters.get("slot", profile.m - 1)))
            field: Any = build_extension(profile, None, phis, ExtensionMode.FINITE_ORDER,
                                         order=ctx.parameters.get("order"), cutoff=BumpFun(r1, r2))
        else:
            field = TensorTest(load_phi(ctx.job.phi, ctx.job.base_dir), BumpFun(r1, r2),
                               float(ctx.parameters.get("lam", 1.0)))
        try:
            a, b = float(ctx.parameters["a"]), float(ctx.parameters["b"])
        except KeyError as e:
            raise SchemaError(f"stokes needs the interval end {e}") from e
        res = stokes_check(f, field, profile, a, b)
        tol = float(ctx.parameters.get("tol", res.tolerance))
        if res.abs_diff > tol:
            raise VerdictFailure(f"Stokes identity off by {res.abs_diff:.3g} (tolerance {tol:g})",
                                 res.model_dump(mode="json"))
        return {"interval": [a, b], "result": res.model_dump(mode="json")}

    def _tool_fundsol(self, ctx: JobContext) -> Dict[str, Any]:
        profile = load_profile(ctx.job)
        fs = fundamental_solution_1d(profile, ctx.parameters.get("A"), ctx.parameters.get("radius"))
        checks = []
        for check in ctx.parameters.get("checks", []):
            checks.append((load_phi(check["space"], ctx.job.base_dir), load_phi(check["time"], ctx.job.base_dir)))
        if ctx.job.phi is not None:
            checks.append((load_phi(ctx.job.phi, ctx.job.base_dir), SymFun.gaussian(1)))
        points = [tuple(p) for p in ctx.parameters.get("points", [])]
        report = fs.report(checks, points, bool(ctx.parameters.get("regularity", False)))
        tol = float(ctx.parameters.get("tol", get_config().boundary.fund_delta_tol))
        worst = max((c["error"] for c in report.delta_checks), default=0.0)
        if worst > tol:
            raise VerdictFailure(f"Delta property off by {worst:.3g} (tolerance {tol:g})",
                                 report.model_dump(mode="json"))
        return {"report": report.model_dump(mode="json")}


def write_trail_csv(result: PairingResult, report_path: str) -> str:
    """Trail of a direct pairing next to its report, for external plotting."""
    root, _ = os.path.splitext(report_path)
    path = f"{root}.trail.csv"
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "s", "re", "im"])
        for point in result.trail:
            writer.writerow([repr(point.t), repr(point.s), repr(point.value[0]), repr(point.value[1])])
    return path


def write_residual_csv(report: ExtensionReport, report_path: str) -> str:
    """Residual profile of an extension next to its report; weighted is blank outside Gevrey mode."""
    root, _ = os.path.splitext(report_path)
    path = f"{root}.residual.csv"
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["t", "residual", "weighted"])
        for point in report.profile:
            writer.writerow([repr(point.t), repr(point.residual), "" if point.weighted is None else repr(point.weighted)])
    return path
