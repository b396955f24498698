"""
Hypoellipticity indices: exact degree formulas and numeric checks.
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.linalg import companion
from scipy.optimize import minimize
from scipy.stats import qmc

from algebra.polyops import MultiPoly, OperatorProfile
from shared.config import get_config
from shared.errors import RootSolverFailed
from shared.models import A0Check, CaseTag, IndexReport, RootMargin, VerdictStatus

logger = structlog.get_logger(__name__)


def b0_exact(profile: OperatorProfile) -> Fraction:
    """max deg Q_k / (m - k) over k < m with Q_k nonzero."""
    ratios = [
        Fraction(profile.Q[k].x_degree(), profile.m - k)
        for k in range(profile.m)
        if not profile.Q[k].is_zero()
    ]
    return max(ratios, default=Fraction(0))


def anisotropy(P: MultiPoly) -> List[int]:
    """n_j = deg_{x_j} P followed by n_t = deg_t P."""
    return [P.degree_in(j) for j in range(P.d + 1)]


def principal_part(P: MultiPoly, n: Sequence[int]) -> MultiPoly:
    """Terms with sum_j beta_j / n_j = 1."""
    return MultiPoly.from_dict(
        P.d,
        {
            exp: c
            for exp, c in P.terms
            if sum(Fraction(b, nj) for b, nj in zip(exp, n)) == 1
        },
    )


def _sphere_map(u: np.ndarray, n: Sequence[int]) -> np.ndarray:
    """Project points onto {sum_j |xi_j|^n_j = 1}."""
    n_arr = np.asarray(n, dtype=float)
    s = np.sum(np.abs(u) ** n_arr, axis=-1, keepdims=True)
    s = np.where(s == 0, 1.0, s)
    return u / s ** (1.0 / n_arr)


def _modulus(P0: MultiPoly, xi: np.ndarray) -> np.ndarray:
    cols = [xi[..., j] for j in range(P0.d)]
    return np.abs(P0.evaluate_array(cols, xi[..., P0.d]))


def _case_tag(n: Sequence[int], m: int) -> CaseTag:
    x_degrees = list(n[:-1])
    if all(nj == m for nj in x_degrees):
        return CaseTag.ELLIPTIC
    if m < max(x_degrees):
        return CaseTag.PARABOLIC_LIKE
    return CaseTag.CASE_III


def _degree_chain(profile: OperatorProfile, a0: Fraction, b0: Fraction) -> bool:
    """a0 <= min_k (deg Q_0 - deg Q_k) / k <= deg Q_0 / m <= b0."""
    q0 = profile.Q[0].x_degree()
    middle = min(
        (Fraction(q0 - profile.Q[k].x_degree(), k) for k in range(1, profile.m + 1) if not profile.Q[k].is_zero()),
        default=Fraction(q0, profile.m),
    )
    upper = Fraction(q0, profile.m)
    return a0 <= middle <= upper <= b0


def semi_elliptic_analyze(profile: OperatorProfile, seed: Optional[int] = None) -> IndexReport:
    """Decide semi-ellipticity on the anisotropic sphere and fill in the degree-ratio indices."""
    cfg = get_config().indices
    seed = cfg.seed if seed is None else seed
    P = profile.P
    b0 = b0_exact(profile)
    n = anisotropy(P)
    report = IndexReport(
        b0=str(b0),
        semi_elliptic=VerdictStatus.INCONCLUSIVE,
        n=n,
        degree_bound_holds=profile.degree_bound_holds,
        seed=seed,
    )

    missing = [j for j, nj in enumerate(n) if nj <= 0]
    if missing:
        # P does not depend on this variable, so it is constant along that axis
        witness = [0.0] * (P.d + 1)
        witness[missing[0]] = 1.0
        report.semi_elliptic = VerdictStatus.FAILS
        report.witness = witness
        return report

    P0 = principal_part(P, n)
    scale = P0.coefficient_scale()
    dim = P.d + 1
    sampler = qmc.Sobol(d=dim, scramble=True, seed=seed)
    u = 2.0 * sampler.random_base2(math.ceil(math.log2(cfg.sphere_points))) - 1.0
    xi = _sphere_map(u, n)
    values = _modulus(P0, xi)
    best = int(np.argmin(values))

    def objective(v: np.ndarray) -> float:
        return float(_modulus(P0, _sphere_map(v[None, :], n))[0] ** 2)

    # polish the smallest samples; zero sets of codimension one slip between grid points
    found = None
    polished = float(values[best])
    for idx in np.argsort(values)[:5]:
        result = minimize(objective, u[idx], method="Nelder-Mead",
                          options={"xatol": 1e-14, "fatol": 1e-30, "maxiter": 4000})
        modulus = math.sqrt(max(result.fun, 0.0))
        polished = min(polished, modulus)
        if modulus < cfg.witness_threshold * scale:
            found = _sphere_map(result.x[None, :], n)[0]
            break
    report.min_principal = polished

    if found is not None:
        report.semi_elliptic = VerdictStatus.FAILS
        report.witness = [float(v) for v in found]
    elif polished > cfg.zero_threshold * scale:
        report.semi_elliptic = VerdictStatus.HOLDS
    if report.semi_elliptic != VerdictStatus.HOLDS:
        logger.info("principal_part_small", min_modulus=report.min_principal,
                    verdict=report.semi_elliptic.value)
        report.case_tag = CaseTag.NOT_SEMIELLIPTIC
        return report

    m = profile.m
    x_degrees = n[:-1]
    deg_p = P.degree()
    a0 = Fraction(min(x_degrees), m)
    report.a0 = str(a0)
    report.gamma0 = str(Fraction(min(x_degrees), deg_p))
    report.mu0 = str(Fraction(m, deg_p))
    report.case_tag = _case_tag(n, m)
    report.degree_chain_holds = _degree_chain(profile, a0, b0)
    report.degree_max_holds = deg_p == max(n)
    if Fraction(max(x_degrees), m) != b0:
        logger.warning("b0_mismatch", exact=str(b0), ratio=str(Fraction(max(x_degrees), m)))
    logger.info("indices", n=n, a0=report.a0, b0=report.b0, gamma0=report.gamma0, mu0=report.mu0,
                case=report.case_tag.value)
    return report


def root_margin(profile: OperatorProfile, x: Sequence[float]) -> RootMargin:
    """min |Im zeta| over the roots of t -> P(x, t), via companion-matrix eigenvalues."""
    limit = get_config().indices.condition_limit
    x = [float(v) for v in x]
    coeffs = [complex(profile.Q[k].evaluate(x + [0.0])) for k in range(profile.m, -1, -1)]
    if profile.m == 1:
        roots = np.array([-coeffs[1] / coeffs[0]])
    else:
        C = companion(np.array(coeffs, dtype=complex))
        if not np.all(np.isfinite(C)) or np.linalg.cond(C) > limit:
            raise RootSolverFailed(f"Companion matrix ill-conditioned at x = {x}", {"x": x})
        roots = np.linalg.eigvals(C)
    if not np.all(np.isfinite(roots)):
        raise RootSolverFailed(f"Non-finite roots at x = {x}", {"x": x})
    return RootMargin(
        x=x,
        value=float(np.min(np.abs(roots.imag))),
        roots=[(float(r.real), float(r.imag)) for r in sorted(roots, key=lambda z: (z.real, z.imag))],
    )


@dataclass
class _RayProfile:
    derivative: np.ndarray  # (rays, radii)
    margin: np.ndarray


def _rays(d: int, count: int, seed: int) -> np.ndarray:
    axes = [v for j in range(d) for v in (np.eye(d)[j], -np.eye(d)[j])]
    rng = np.random.default_rng(seed)
    random = rng.normal(size=(count, d))
    random /= np.linalg.norm(random, axis=1, keepdims=True)
    return np.vstack(axes + [random])


def _ray_profiles(profile: OperatorProfile, a: float, rays: np.ndarray, radii: np.ndarray) -> _RayProfile:
    P = profile.P
    d, m = profile.d, profile.m
    dP = [P.derivative([0] * d + [l]) for l in range(m + 1)]
    taus = np.array([0.0, 0.5, -0.5, 1.0, -1.0, 2.0, -2.0])
    deriv = np.zeros((len(rays), len(radii)))
    margin = np.zeros((len(rays), len(radii)))
    for i, ray in enumerate(rays):
        for k, r in enumerate(radii):
            x = ray * r
            ts = np.concatenate([taus, taus * (1.0 + r) ** a])
            xs = [np.full(len(ts), x[j]) for j in range(d)]
            base = np.abs(P.evaluate_array(xs, ts))
            worst = 0.0
            for l in range(1, m + 1):
                vals = np.abs(dP[l].evaluate_array(xs, ts))
                with np.errstate(divide="ignore", invalid="ignore"):
                    ratio = np.where(base > 0, r ** (a * l) * vals / base, np.inf)
                worst = max(worst, float(np.max(ratio)))
            deriv[i, k] = max(worst, 1.0)
            dist = root_margin(profile, x).value
            margin[i, k] = r ** a / dist if dist > 0 else np.inf
    return _RayProfile(deriv, margin)


def _outer_slope(radii: np.ndarray, values: np.ndarray) -> float:
    """Largest log-log slope over the outer decade across rays."""
    outer = radii >= radii[-1] / 10.0
    if not np.all(np.isfinite(values[:, outer])):
        return math.inf
    logs = np.log(values[:, outer])
    lr = np.log(radii[outer])
    return float(max(np.polyfit(lr, row, 1)[0] for row in logs))


def verify_a0_numeric(profile: OperatorProfile, a: float, seed: Optional[int] = None) -> A0Check:
    """Check both characterizations of a0 along rays and test maximality at a(1 + eps)."""
    cfg = get_config().indices
    seed = cfg.seed if seed is None else seed
    radii = np.logspace(math.log10(cfg.r_min), math.log10(cfg.r_max), cfg.radii)
    rays = _rays(profile.d, cfg.random_rays, seed)

    at_a = _ray_profiles(profile, a, rays, radii)
    s_deriv = _outer_slope(radii, at_a.derivative)
    s_margin = _outer_slope(radii, at_a.margin)
    bounded = s_deriv <= cfg.growth_slope_tol and s_margin <= cfg.growth_slope_tol

    a_up = a * (1.0 + cfg.maximality_eps)
    above = _ray_profiles(profile, a_up, rays, radii)
    s_up = max(_outer_slope(radii, above.derivative), _outer_slope(radii, above.margin))
    with np.errstate(divide="ignore", invalid="ignore"):
        growth = float(np.nanmax(above.margin[:, -1] / above.margin[:, 0]))
    maximal = s_up > cfg.growth_slope_tol

    result = A0Check(
        a=a,
        passed=bool(bounded and maximal),
        derivative_bound=float(np.max(at_a.derivative)),
        margin_bound=float(np.max(at_a.margin)),
        radius=float(radii[-1]),
        derivative_slope=s_deriv,
        margin_slope=s_margin,
        maximality_slope=s_up,
        maximality_growth=growth,
        maximal=bool(maximal),
    )
    logger.info("a0_check", a=a, bounded=bounded, maximal=maximal, slope_up=s_up, growth=growth)
    return result


def analyze(profile: OperatorProfile, check_a: Optional[float] = None, seed: Optional[int] = None) -> IndexReport:
    """Index report, with the numeric check at check_a or at the exact a0 when available."""
    report = semi_elliptic_analyze(profile, seed=seed)
    candidate = check_a if check_a is not None else (float(Fraction(report.a0)) if report.a0 else None)
    if candidate is not None:
        report.numeric_a0_check = verify_a0_numeric(profile, candidate, seed=seed)
    return report
