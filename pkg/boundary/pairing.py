"""
Boundary values of zero solutions paired with test functions.

Two evaluators are kept independent: bv_direct takes the two-sided trace
limit along a halving schedule, bv_stokes integrates f against the operator
applied to an almost-zero extension and takes no limit at all.
"""

import math
import time
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from algebra.polyops import MultiPoly, OperatorProfile
from algebra.symfun import BumpFun, SymFun, TensorTest, apply_operator
from boundary.kernels import ClosedForm, ZeroSolution
from boundary.quadrature import (
    composite_nodes,
    decaying,
    graded_edges,
    quad_complex,
    quad_vec_complex,
    richardson,
)
from extension.cauchyext import ExtensionBuild, build_extension
from shared.config import get_config
from shared.errors import DimensionMismatch, NoConvergence, ResidualTooLarge, SchemaError
from shared.models import ExtensionMode, PairingMethod, PairingResult, StokesResult, TrailPoint

logger = structlog.get_logger(__name__)

Field = Union[ExtensionBuild, TensorTest]
Pairing = Callable[[int, SymFun], complex]


def _pair(z: complex) -> Tuple[float, float]:
    return (float(z.real), float(z.imag))


def _x_rule(radius: Optional[float] = None, centers: Sequence[float] = (0.0,)) -> Tuple[np.ndarray, np.ndarray]:
    cfg = get_config().boundary
    radius = radius or cfg.x_radius
    return composite_nodes(graded_edges(radius, cfg.panel_levels, centers=centers))


def _check_1d(*objs: Any) -> None:
    for obj in objs:
        if getattr(obj, "d", 1) != 1:
            raise DimensionMismatch("Boundary pairings are evaluated in one space dimension")


# Stokes-type identity


def stokes_check(
    f: ClosedForm,
    phi: Field,
    profile: OperatorProfile,
    a: float,
    b: float,
    radius: Optional[float] = None,
) -> StokesResult:
    """Both sides of the integration by parts identity on [a, b] in t."""
    if not a < b:
        raise SchemaError(f"Need a < b, got [{a}, {b}]")
    _check_1d(f, phi, profile)
    cfg = get_config().boundary
    xs, wx = _x_rule(radius)
    m = profile.m
    pcheck = profile.pcheck

    def lhs_row(t: float) -> np.ndarray:
        return np.array([np.sum(wx * f(xs, t) * phi.apply(pcheck, xs, t))])

    def rhs_row(t: float) -> np.ndarray:
        return np.array([np.sum(wx * f.apply(profile.P, xs, t) * phi.evaluate(xs, t))])

    lhs, _ = quad_vec_complex(lhs_row, [(a, b)])
    rhs_bulk, _ = quad_vec_complex(rhs_row, [(a, b)])
    boundary = 0j
    for j in range(m):
        Pj = profile.P_j(j + 1)
        at = [np.sum(wx * f.apply(Pj, xs, s) * phi.evaluate(xs, s, j)) for s in (a, b)]
        boundary += (-1) ** j * (at[1] - at[0])
    rhs = rhs_bulk[0] + 1j * boundary
    diff = abs(lhs[0] - rhs)
    logger.info("stokes_check", a=a, b=b, lhs=str(lhs[0]), rhs=str(rhs), abs_diff=diff)
    return StokesResult(lhs=_pair(lhs[0]), rhs=_pair(rhs), abs_diff=float(diff), tolerance=10 * cfg.quad_tol)


# direct evaluator


def _jump_value(f: ClosedForm, phi: SymFun, t: float, s: float, radius: float) -> complex:
    def integrand(x: float) -> complex:
        return complex((f(x, t) - f(x, -s)) * phi.evaluate(np.array([x]))[0])

    pts = [0.0, t, -t, s, -s, math.sqrt(t), -math.sqrt(t), math.sqrt(s), -math.sqrt(s)]
    value, _ = quad_complex(integrand, -radius, radius, points=pts)
    return value


def bv_direct(
    f: ClosedForm,
    phi: SymFun,
    t0: Optional[float] = None,
    steps: Optional[int] = None,
) -> PairingResult:
    """Limit of the integral of (f(., t) - f(., -s)) phi along t_k = s_k = t0 2^-k, cross-checked on a staggered schedule."""
    _check_1d(f, phi)
    cfg = get_config().boundary
    t0 = t0 or cfg.bv_t0
    steps = steps or cfg.bv_steps
    radius = min(cfg.x_radius, phi.support_radius()) if not phi.is_zero() else 1.0
    started = time.perf_counter()

    ts = [t0 * 2.0 ** (-k) for k in range(steps + 1)]
    tied = [_jump_value(f, phi, t, t, radius) for t in ts]
    staggered = [_jump_value(f, phi, t, t / 2.0, radius) for t in ts]

    if not decaying(tied, cfg.decay_factor, cfg.noise_tol):
        raise NoConvergence(
            "Trail differences do not decay along the schedule",
            {"last": [str(v) for v in tied[-4:]]},
        )
    main = richardson(tied)
    staggered_limit = richardson(staggered)
    tolerance = max(1e-6, 10.0 * (main.error + staggered_limit.error))
    if abs(main.value - staggered_limit.value) > tolerance:
        raise NoConvergence(
            "Tied and staggered schedules disagree",
            {"tied": str(main.value), "staggered": str(staggered_limit.value), "tolerance": tolerance},
        )
    result = PairingResult(
        method=PairingMethod.DIRECT,
        value=_pair(main.value),
        error=float(max(main.error, abs(main.value - staggered_limit.value))),
        trail=[TrailPoint(t=t, s=t, value=_pair(v)) for t, v in zip(ts, tied)],
        order=main.order,
    )
    logger.info("bv_direct", value=str(main.value), error=result.error, order=main.order,
                elapsed=round(time.perf_counter() - started, 3))
    return result


# Stokes evaluator


def stokes_extension(profile: OperatorProfile, phi: SymFun, j: int) -> ExtensionBuild:
    """Finite-order extension for the reflected operator with phi in slot j."""
    cfg = get_config().boundary
    check = profile.reflected()
    data = [phi if k == j else SymFun.zero(profile.d) for k in range(profile.m)]
    return build_extension(
        check,
        None,
        data,
        ExtensionMode.FINITE_ORDER,
        order=cfg.stokes_order,
        cutoff=BumpFun(cfg.stokes_r1, cfg.stokes_r2),
    )


def bv_stokes(
    f: ZeroSolution,
    phi: SymFun,
    j: int = 0,
    tol: Optional[float] = None,
) -> PairingResult:
    """<bv(P_(j+1)(D) f), phi> as one absolutely convergent double integral."""
    _check_1d(f, phi)
    profile = f.profile
    if not 0 <= j < profile.m:
        raise SchemaError(f"Slot {j} outside 0..{profile.m - 1}")
    cfg = get_config().boundary
    tol = tol or cfg.quad_tol
    started = time.perf_counter()
    ext = stokes_extension(profile, phi, j)
    sign = complex(profile.reflected().scale)  # P-check = sign * normalized reflected operator

    r1, r2 = cfg.stokes_r1, cfg.stokes_r2
    s_near = r1 / 4.0
    radius = min(cfg.x_radius, max(phi.support_radius(), 1.0)) if not phi.is_zero() else 1.0
    xs, wx = _x_rule(radius)
    near = max(float(np.max(np.abs(ext.residual(xs, s)))) for s in (s_near, -s_near))
    if near > math.sqrt(tol):
        raise ResidualTooLarge(
            f"Extension residual {near:.3g} near t = 0 is too large for tolerance {tol:g}",
            {"residual": near, "s": s_near},
        )

    def row(s: float) -> np.ndarray:
        return np.array([np.sum(wx * f(xs, s) * ext.residual(xs, s))])

    segments = [(-r2, -r1), (-r1, 0.0), (0.0, r1), (r1, r2)]
    integral, err = quad_vec_complex(row, segments, tol)
    value = (-1) ** j * 1j * sign * integral[0]
    result = PairingResult(
        method=PairingMethod.STOKES,
        value=_pair(value),
        error=float(err),
        slot=j,
    )
    logger.info("bv_stokes", slot=j, value=str(value), error=err, order=ext.n,
                elapsed=round(time.perf_counter() - started, 3))
    return result


# pairings for the whole family


def direct_pairing(f: ZeroSolution) -> Pairing:
    """(slot, psi) -> <bv(P_(slot+1)(D) f), psi> by the direct limit."""
    cache: Dict[int, ClosedForm] = {}

    def pair(slot: int, psi: SymFun) -> complex:
        if slot not in cache:
            cache[slot] = f.derivative(f.profile.P_j(slot + 1))
        return bv_direct(cache[slot], psi).complex_value

    return pair


def stokes_pairing(f: ZeroSolution) -> Pairing:
    def pair(slot: int, psi: SymFun) -> complex:
        return bv_stokes(f, psi, slot).complex_value

    return pair


def _reflect_x(Q: MultiPoly) -> MultiPoly:
    """Q(-x) for a t-free operator."""
    return MultiPoly.from_dict(Q.d, {exp: c * (-1) ** sum(exp[:-1]) for exp, c in Q.terms})


def bv_t_derivatives(
    f: ZeroSolution,
    phi: SymFun,
    pairing: Optional[Pairing] = None,
) -> List[complex]:
    """<bv(D_t^j f), phi> for j = 0..m-1 from the P_(j) pairings via t^j = P_(m-j) - sum_k Q_{k+m-j} t^k."""
    profile = f.profile
    m, Q = profile.m, profile.Q
    pairing = pairing or direct_pairing(f)
    memo: Dict[Tuple[int, SymFun], complex] = {}

    def value(j: int, psi: SymFun) -> complex:
        key = (j, psi)
        if key not in memo:
            if psi.is_zero():
                memo[key] = 0j
            else:
                total = pairing(m - j - 1, psi)
                for k in range(j):
                    op = Q[k + m - j]
                    if not op.is_zero():
                        # <bv(Q(D_x) g), psi> = <bv(g), Q(-D_x) psi>
                        total -= value(k, apply_operator(_reflect_x(op), psi))
                memo[key] = total
        return memo[key]

    out = [value(j, phi) for j in range(m)]
    logger.info("bv_t_derivatives", m=m, values=[str(v) for v in out])
    return out
