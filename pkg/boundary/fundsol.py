"""
Fundamental solution in one space dimension.

For each frequency xi the t-kernel K(xi, t) = (1/2pi) int exp(i t eta) / P(xi, eta) d eta
is taken by residues. For |xi| > R the contour is the real line and the roots
stay off the axis; for |xi| <= R the line is shifted down to Im eta = -A, which
for t > 0 encloses every root (evaluated on the circle |eta| = A) and for t < 0
encloses none. E(x, t) = (1/2pi) int exp(i x xi) K(xi, t) d xi.
"""

import math
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from scipy.integrate import quad

from algebra.polyops import OperatorProfile
from algebra.rational import minus_i_power
from algebra.symfun import DerivativeTable, SymFun, fourier_1d
from boundary.quadrature import composite_nodes, graded_edges
from shared.config import get_config
from shared.errors import (
    AdmissibilityFailure,
    DimensionMismatch,
    OscillatoryQuadratureFailure,
    SchemaError,
)
from shared.models import FundamentalSolutionReport

logger = structlog.get_logger(__name__)

CLUSTER_TOL = 1e-6


def _complex_quad(fn: Callable[[float], complex], a: float, b: float, **weight: Any) -> complex:
    """scipy quad on the real and imaginary parts; weight passes weight/wvar through."""
    tol = get_config().boundary.quad_tol
    re, _ = quad(lambda s: fn(s).real, a, b, epsabs=tol, epsrel=tol, limit=2000, **weight)
    im, _ = quad(lambda s: fn(s).imag, a, b, epsabs=tol, epsrel=tol, limit=2000, **weight)
    return complex(re, im)


class FundamentalSolution1D:
    """E with P(D) E = delta for a one-dimensional profile."""

    def __init__(self, profile: OperatorProfile, amplitude: Union[float, str, None] = None, radius: Optional[float] = None):
        if profile.d != 1:
            raise DimensionMismatch("Fundamental solutions are built for d = 1 only", {"d": profile.d})
        cfg = get_config().boundary
        self.profile = profile
        self.m = profile.m
        self.radius = float(radius or cfg.fund_radius)
        self.nodes = cfg.fund_circle_nodes
        self._check_high_region()
        bound = float(np.max(np.abs(self.roots(np.linspace(-self.radius, self.radius, 201)))))
        self.root_bound = bound
        if amplitude is None or amplitude == "auto":
            self.amplitude = 2.0 * max(1.0, bound + 0.5)
        else:
            self.amplitude = float(amplitude)
            if self.amplitude <= bound:
                raise AdmissibilityFailure(
                    f"Contour shift A = {self.amplitude:g} does not clear the roots (|eta| <= {bound:.4g})",
                    {"A": self.amplitude, "root_bound": bound},
                )
        self._dP = profile.P.derivative([0, 1])
        logger.info("fundamental_solution", m=self.m, A=self.amplitude, R=self.radius, root_bound=bound)

    # symbol

    def coefficients(self, xi: np.ndarray) -> np.ndarray:
        """Q_k(xi) for k = 0..m, shape (len(xi), m + 1)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        return np.stack([self.profile.Q[k].evaluate_array([xi], 0.0) * np.ones(xi.shape) for k in range(self.m + 1)], axis=1)

    def roots(self, xi: np.ndarray) -> np.ndarray:
        """Roots in eta of P(xi, eta), shape (len(xi), m)."""
        coeffs = self.coefficients(xi)
        if self.m == 1:
            return -coeffs[:, :1] / coeffs[:, 1:2]
        return np.array([np.roots(row[::-1]) for row in coeffs])

    def symbol(self, xi: float, eta: np.ndarray) -> np.ndarray:
        coeffs = self.coefficients(np.array([xi]))[0]
        return np.polyval(coeffs[::-1], eta)

    def _check_high_region(self) -> None:
        rays = self.radius * np.geomspace(1.0 + 1e-9, 1e3, 200)
        xi = np.concatenate([rays, -rays])
        margins = np.min(np.abs(self.roots(xi).imag), axis=1)
        worst = int(np.argmin(margins))
        if margins[worst] <= 1e-12 * (1.0 + abs(xi[worst])):
            raise AdmissibilityFailure(
                f"Real root of P(xi, .) at xi = {xi[worst]:.4g} outside the ball of radius {self.radius:g}",
                {"xi": float(xi[worst]), "margin": float(margins[worst])},
            )

    # t-kernel

    def _circle_sum(self, xi: float, center: complex, rho: float, t: np.ndarray) -> np.ndarray:
        """(1 / 2 pi i) times the contour integral of exp(i t eta) / P(xi, eta) over |eta - center| = rho."""
        theta = 2.0 * np.pi * np.arange(self.nodes) / self.nodes
        ring = np.exp(1j * theta)
        eta = center + rho * ring
        g = 1.0 / self.symbol(xi, eta)
        phase = np.exp(1j * np.outer(t, eta))
        return phase @ (g * rho * ring) / self.nodes

    def _clusters(self, roots: np.ndarray) -> List[List[int]]:
        groups: List[List[int]] = []
        for k, r in enumerate(roots):
            for group in groups:
                if any(abs(r - roots[g]) < CLUSTER_TOL * (1.0 + abs(r)) for g in group):
                    group.append(k)
                    break
            else:
                groups.append([k])
        return groups

    def kernel_high(self, xi: float, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        roots = self.roots(np.array([xi]))[0]
        out = np.zeros(t.shape, dtype=complex)
        upper = t >= 0
        for group in self._clusters(roots):
            members = roots[group]
            side = members[0].imag > 0
            mask = upper if side else ~upper
            if not np.any(mask):
                continue
            sign = 1j if side else -1j
            if len(group) == 1:
                r = members[0]
                dP = complex(self._dP.evaluate([xi, r]))
                out[mask] += sign * np.exp(1j * t[mask] * r) / dP
            else:
                center = complex(np.mean(members))
                others = [roots[k] for k in range(len(roots)) if k not in group]
                rho = 0.5 * min((abs(o - center) for o in others), default=1.0)
                rho = max(rho, 4.0 * max(abs(members - center)))
                out[mask] += sign * self._circle_sum(xi, center, rho, t[mask])
        return out

    def kernel_low(self, xi: float, t: np.ndarray) -> np.ndarray:
        t = np.atleast_1d(np.asarray(t, dtype=float))
        out = np.zeros(t.shape, dtype=complex)
        upper = t >= 0
        if np.any(upper):
            out[upper] = 1j * self._circle_sum(xi, 0j, self.amplitude, t[upper])
        return out

    def kernel(self, xi: float, t: np.ndarray) -> np.ndarray:
        """K(xi, t) for one frequency and a vector of times."""
        if abs(xi) > self.radius:
            return self.kernel_high(xi, t)
        return self.kernel_low(xi, t)

    # point values

    def _xi_extent(self, t: float, eps: float) -> float:
        floor = 1e-16 * max(1.0, float(np.max(np.abs(self.kernel(self.radius * (1 + 1e-9), np.array([t]))))))
        xi = 2.0 * self.radius
        while xi < 1e7:
            mollified = math.exp(-0.5 * (eps * xi) ** 2)
            size = max(abs(self.kernel(xi, np.array([t]))[0]), abs(self.kernel(-xi, np.array([t]))[0]))
            if size * mollified < floor:
                return xi
            xi *= 2.0
        raise OscillatoryQuadratureFailure(
            f"Frequency integrand does not decay at t = {t:g}",
            {"t": t, "eps": eps},
        )

    def _mollified(self, x: float, t: float, eps: float) -> complex:
        """(1/2pi) int exp(i x xi) K(xi, t) exp(-eps^2 xi^2 / 2) d xi."""
        ts = np.array([t])

        def moll(xi: float) -> float:
            return math.exp(-0.5 * (eps * xi) ** 2)

        def low(xi: float) -> complex:
            return complex(np.exp(1j * x * xi) * self.kernel_low(xi, ts)[0]) * moll(xi)

        def even(xi: float) -> complex:
            return complex(self.kernel_high(xi, ts)[0] + self.kernel_high(-xi, ts)[0]) * moll(xi)

        def odd(xi: float) -> complex:
            return complex(self.kernel_high(xi, ts)[0] - self.kernel_high(-xi, ts)[0]) * moll(xi)

        total = _complex_quad(low, -self.radius, self.radius)
        end = self._xi_extent(t, eps)
        if x == 0:
            total += _complex_quad(even, self.radius, end)
        else:
            total += _complex_quad(even, self.radius, end, weight="cos", wvar=x)
            total += 1j * _complex_quad(odd, self.radius, end, weight="sin", wvar=x)
        return total / (2.0 * math.pi)

    def evaluate(self, x: float, t: float) -> complex:
        """E(x, t) by shrinking the mollifier width and extrapolating in eps^2."""
        if t == 0 and x == 0:
            raise SchemaError("E is evaluated away from the origin")
        cfg = get_config().boundary
        rows: List[List[complex]] = []
        for eps in cfg.fund_eps:
            row = [self._mollified(float(x), float(t), eps)]
            # eps halves down the schedule, so eps^2 shrinks by 4
            for k, prev in enumerate(rows[-1] if rows else []):
                factor = 4.0 ** (k + 1)
                row.append((factor * row[k] - prev) / (factor - 1.0))
            rows.append(row)
            if len(rows) >= 3:
                cur, before = rows[-1][-1], rows[-2][-1]
                if abs(cur - before) <= cfg.fund_eps_tol * max(1.0, abs(cur)):
                    return cur
        raise OscillatoryQuadratureFailure(
            f"Mollified values of E({x:g}, {t:g}) did not settle",
            {"diagonal": [str(r[-1]) for r in rows]},
        )

    # delta property

    def pair_check(self, phi_x: SymFun, phi_t: SymFun) -> complex:
        """<E, P-check(D)(phi_x phi_t)> through the x-Fourier transform of the test function."""
        if phi_x.d != 1 or phi_t.d != 1:
            raise DimensionMismatch("Tensor test factors must be one-dimensional")
        cfg = get_config().boundary
        xi_max = cfg.fund_xi_max * math.sqrt(max(1.0, float(phi_x.max_width())))
        xi_edges = np.unique(np.concatenate([np.arange(-xi_max, xi_max + 0.25, 0.5), [-self.radius, self.radius]]))
        xi, w_xi = composite_nodes(xi_edges)
        t_radius = max(cfg.fund_t_max, phi_t.support_radius())
        t, w_t = composite_nodes(graded_edges(t_radius, cfg.panel_levels, step=0.25))

        # x-transform of P-check(D)(phi_x phi_t), evaluated at -xi
        pcheck = self.profile.pcheck
        phi_hat = fourier_1d(phi_x, -xi)
        t_table = DerivativeTable(phi_t, t, self.m)
        psi = np.zeros((len(xi), len(t)), dtype=complex)
        for l in range(self.m + 1):
            coeff = pcheck.coefficient_in_t(l)
            if coeff.is_zero():
                continue
            dt = complex(minus_i_power(l)) * t_table.partial((l,))
            psi += np.outer(coeff.evaluate_array([-xi], 0.0) * phi_hat, dt)

        kernel = np.array([self.kernel(float(v), t) for v in xi])
        return complex(np.einsum("i,j,ij->", w_xi, w_t, kernel * psi) / (2.0 * math.pi))

    def delta_check(self, phi_x: SymFun, phi_t: SymFun) -> Dict[str, Any]:
        value = self.pair_check(phi_x, phi_t)
        expected = complex(phi_x.evaluate(np.zeros(1))[0] * phi_t.evaluate(np.zeros(1))[0])
        error = abs(value - expected)
        logger.info("delta_check", value=str(value), expected=str(expected), error=error)
        return {"value": [value.real, value.imag], "expected": [expected.real, expected.imag], "error": error}

    # regularity

    def regularity(self, xs: Sequence[float] = (-0.5, 0.0, 0.5), levels: int = 5) -> float:
        """Smallest S with sup_x |E(x, t)| |t|^S bounded on dyadic 0 < |t| <= 1/2."""
        ts = np.array([2.0 ** (-k) for k in range(1, levels + 1)])
        sups = []
        for t in ts:
            values = [abs(self.evaluate(x, s)) for x in xs for s in (t, -t) if not (x == 0 and s == 0)]
            sups.append(max(values))
        sups_arr = np.array(sups)
        if np.any(sups_arr <= 0):
            return 0.0
        slope = float(np.polyfit(np.log(ts), np.log(sups_arr), 1)[0])
        return max(0.0, round(-slope, 3))

    def report(
        self,
        checks: Sequence[Tuple[SymFun, SymFun]] = (),
        points: Sequence[Tuple[float, float]] = (),
        regularity: bool = False,
    ) -> FundamentalSolutionReport:
        return FundamentalSolutionReport(
            amplitude=self.amplitude,
            radius=self.radius,
            delta_checks=[self.delta_check(px, pt) for px, pt in checks],
            samples=[
                {"x": x, "t": t, "value": [v.real, v.imag]}
                for x, t in points
                for v in [self.evaluate(x, t)]
            ],
            regularity_s=self.regularity() if regularity else None,
        )


def fundamental_solution_1d(
    profile: OperatorProfile,
    amplitude: Union[float, str, None] = None,
    radius: Optional[float] = None,
) -> FundamentalSolution1D:
    return FundamentalSolution1D(profile, amplitude, radius)
