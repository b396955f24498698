"""
Hermite-Gaussian test functions, the cutoff bump and tensor test fields.

A SymFun is a finite sum of terms coeff * (x - c)^e * exp(-a |x - c|^2).
The class is closed under differentiation and under multiplication by
polynomials, and products of two terms integrate in closed form.
"""

import math
import threading
from dataclasses import dataclass
from fractions import Fraction
from math import comb, factorial
from typing import TYPE_CHECKING, Any, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
from numpy.polynomial import Polynomial
from scipy.special import expit

from algebra.polyops import MultiPoly
from algebra.rational import ONE, ZERO, CRational, fraction_to_str, minus_i_power, parse_fraction
from shared.config import get_config
from shared.errors import DimensionMismatch, OrderTooHigh, SchemaError, TDependence
from shared.models import SeminormQuery

if TYPE_CHECKING:
    from analysis.weights import WeightSeq

logger = structlog.get_logger(__name__)

Exponent = Tuple[int, ...]
TermKey = Tuple[Exponent, Fraction, Tuple[Fraction, ...]]
Grid = Union[np.ndarray, Sequence[np.ndarray]]


def _as_grids(x: Grid, d: int) -> List[np.ndarray]:
    if d == 1 and not isinstance(x, (list, tuple)):
        return [np.atleast_1d(np.asarray(x, dtype=float))]
    grids = [np.atleast_1d(np.asarray(g, dtype=float)) for g in x]
    if len(grids) != d:
        raise DimensionMismatch(f"Got {len(grids)} grids, expected {d}")
    return grids


@dataclass(frozen=True)
class SymFun:
    """Finite sum of Hermite-Gaussian terms in d variables."""
    d: int
    terms: Tuple[Tuple[TermKey, CRational], ...] = ()

    @classmethod
    def from_terms(cls, d: int, items: Sequence[Tuple[TermKey, Any]]) -> "SymFun":
        acc: Dict[TermKey, CRational] = {}
        for (exp, width, center), coeff in items:
            exp = tuple(int(e) for e in exp)
            center = tuple(Fraction(c) for c in center)
            width = Fraction(width)
            if len(exp) != d or len(center) != d:
                raise DimensionMismatch(f"Term of dimension {len(exp)} in a {d}-dimensional SymFun")
            if width <= 0:
                raise SchemaError(f"Gaussian width must be positive, got {width}")
            key = (exp, width, center)
            acc[key] = acc.get(key, ZERO) + CRational.of(coeff)
        items_sorted = sorted(
            ((k, c) for k, c in acc.items() if not c.is_zero()),
            key=lambda kc: (kc[0][1], kc[0][2], kc[0][0]),
        )
        return cls(d, tuple(items_sorted))

    @classmethod
    def gaussian(
        cls,
        d: int = 1,
        width: Any = 1,
        center: Optional[Sequence[Any]] = None,
        coeff: Any = 1,
        exp: Optional[Sequence[int]] = None,
    ) -> "SymFun":
        center = center if center is not None else (0,) * d
        exp = exp if exp is not None else (0,) * d
        return cls.from_terms(d, [((tuple(exp), Fraction(width), tuple(center)), coeff)])

    @classmethod
    def zero(cls, d: int = 1) -> "SymFun":
        return cls(d, ())

    def is_zero(self) -> bool:
        return not self.terms

    # linear structure

    def __add__(self, other: "SymFun") -> "SymFun":
        if other.d != self.d:
            raise DimensionMismatch(f"Dimensions differ: {self.d} vs {other.d}")
        return SymFun.from_terms(self.d, list(self.terms) + list(other.terms))

    def __neg__(self) -> "SymFun":
        return SymFun(self.d, tuple((k, -c) for k, c in self.terms))

    def __sub__(self, other: "SymFun") -> "SymFun":
        return self + (-other)

    def scale(self, c: Any) -> "SymFun":
        c = CRational.of(c)
        if c.is_zero():
            return SymFun.zero(self.d)
        return SymFun(self.d, tuple((k, coeff * c) for k, coeff in self.terms))

    def __mul__(self, c: Any) -> "SymFun":
        return self.scale(c)

    __rmul__ = __mul__

    # calculus

    def differentiate(self, j: int) -> "SymFun":
        """Exact partial derivative along axis j (0-based)."""
        if not 0 <= j < self.d:
            raise DimensionMismatch(f"Axis {j} out of range for d = {self.d}")
        items: List[Tuple[TermKey, CRational]] = []
        for (exp, width, center), coeff in self.terms:
            if exp[j] > 0:
                lower = exp[:j] + (exp[j] - 1,) + exp[j + 1:]
                items.append(((lower, width, center), coeff * exp[j]))
            upper = exp[:j] + (exp[j] + 1,) + exp[j + 1:]
            items.append(((upper, width, center), coeff * (-2 * width)))
        return SymFun.from_terms(self.d, items)

    def derivative(self, alpha: Sequence[int]) -> "SymFun":
        f = self
        for j, k in enumerate(alpha):
            for _ in range(k):
                f = f.differentiate(j)
        return f

    def shift(self, v: Sequence[Any]) -> "SymFun":
        """f(x - v)."""
        v = tuple(Fraction(c) for c in v)
        return SymFun.from_terms(
            self.d,
            [
                ((exp, width, tuple(c + dv for c, dv in zip(center, v))), coeff)
                for (exp, width, center), coeff in self.terms
            ],
        )

    def times_poly(self, Q: MultiPoly) -> "SymFun":
        """Multiply by an x-polynomial, re-expanding each monomial about the term center."""
        if Q.depends_on_t():
            raise TDependence(f"Polynomial {Q} involves t")
        if Q.d != self.d:
            raise DimensionMismatch(f"Dimensions differ: {Q.d} vs {self.d}")
        items: List[Tuple[TermKey, CRational]] = []
        for (exp, width, center), coeff in self.terms:
            for qexp, q in Q.terms:
                # x_j^b = sum_r C(b, r) c_j^(b - r) (x_j - c_j)^r
                partial: List[Tuple[Exponent, CRational]] = [((), coeff * q)]
                for j in range(self.d):
                    b = qexp[j]
                    nxt = []
                    for e_acc, c_acc in partial:
                        for r in range(b + 1):
                            w = comb(b, r) * center[j] ** (b - r)
                            if w:
                                nxt.append((e_acc + (exp[j] + r,), c_acc * w))
                    partial = nxt
                items.extend(((e, width, center), c) for e, c in partial)
        return SymFun.from_terms(self.d, items)

    # numerics

    def evaluate(self, x: Grid) -> np.ndarray:
        """Values on a tensor grid (one 1-D array per axis)."""
        grids = _as_grids(x, self.d)
        shape = tuple(len(g) for g in grids)
        total = np.zeros(shape, dtype=complex)
        for (exp, width, center), coeff in self.terms:
            value = np.full(shape, complex(coeff))
            for j, g in enumerate(grids):
                y = g - float(center[j])
                axis = y ** exp[j] * np.exp(-float(width) * y * y)
                value = value * axis.reshape([-1 if k == j else 1 for k in range(self.d)])
            total += value
        return total if self.d > 1 else total.reshape(shape[0])

    def max_width(self) -> Fraction:
        return max((w for (_, w, _), _ in self.terms), default=Fraction(1))

    def support_radius(self, cutoff: Optional[float] = None) -> float:
        """Radius beyond which every term is below the Gaussian envelope cutoff."""
        cutoff = cutoff or get_config().symbolic.envelope_cutoff
        radius = 0.0
        for (exp, width, center), coeff in self.terms:
            a = float(width)
            scale = abs(complex(coeff))
            c_norm = math.sqrt(sum(float(c) ** 2 for c in center))
            deg = sum(exp)
            r = math.sqrt(max(math.log(max(scale, 1.0) / cutoff), 1.0) / a)
            # absorb the polynomial factor
            r = math.sqrt(r * r + deg * math.log(max(r, 2.0)) / a) + 1.0
            radius = max(radius, c_norm + r)
        return radius

    # serialization

    def to_json(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "terms": [
                {
                    "coeff": coeff.to_json(),
                    "exp": list(exp),
                    "width": fraction_to_str(width),
                    "center": [fraction_to_str(c) for c in center],
                }
                for (exp, width, center), coeff in self.terms
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "SymFun":
        try:
            terms = data["terms"]
            d = int(data.get("d", len(terms[0]["exp"]) if terms else 1))
            items = []
            for term in terms:
                coeff = term.get("coeff", {"re": "1/1", "im": "0/1"})
                items.append(
                    (
                        (
                            tuple(term.get("exp", [0] * d)),
                            parse_fraction(term.get("width", 1)),
                            tuple(parse_fraction(c) for c in term.get("center", [0] * d)),
                        ),
                        CRational.from_json(coeff),
                    )
                )
        except (KeyError, TypeError, IndexError, AttributeError) as e:
            raise SchemaError(f"Malformed test function JSON: {e}") from e
        return cls.from_terms(d, items)


def differentiate(f: SymFun, j: int) -> SymFun:
    return f.differentiate(j)


def apply_operator(Q: MultiPoly, f: SymFun) -> SymFun:
    """Q(D_x) f with D = -i d/dx, exact."""
    if Q.depends_on_t():
        raise TDependence(f"Operator {Q} involves t")
    if Q.d != f.d:
        raise DimensionMismatch(f"Dimensions differ: {Q.d} vs {f.d}")
    cache: Dict[Exponent, SymFun] = {(0,) * f.d: f}

    def partial(alpha: Exponent) -> SymFun:
        if alpha in cache:
            return cache[alpha]
        j = max(i for i, a in enumerate(alpha) if a > 0)
        lower = alpha[:j] + (alpha[j] - 1,) + alpha[j + 1:]
        cache[alpha] = partial(lower).differentiate(j)
        return cache[alpha]

    result = SymFun.zero(f.d)
    for exp, q in Q.terms:
        alpha = exp[:-1]
        result = result + partial(alpha).scale(q * minus_i_power(sum(alpha)))
    return result


def _axis_integral(e1: int, a: Fraction, c1: Fraction, e2: int, b: Fraction, c2: Fraction) -> Tuple[Fraction, Fraction, Fraction]:
    """Integral over R of (x-c1)^e1 (x-c2)^e2 exp(-a(x-c1)^2 - b(x-c2)^2).

    Returned as (rational part, s, exponent) meaning rational * sqrt(pi/s) * exp(-exponent).
    """
    s = a + b
    mu = (a * c1 + b * c2) / s
    u, v = mu - c1, mu - c2
    # (y + u)^e1 (y + v)^e2 as coefficients in y
    p1 = [comb(e1, k) * u ** (e1 - k) for k in range(e1 + 1)]
    p2 = [comb(e2, k) * v ** (e2 - k) for k in range(e2 + 1)]
    total = Fraction(0)
    for i, ci in enumerate(p1):
        for j, cj in enumerate(p2):
            k = i + j
            if k % 2 or not ci or not cj:
                continue
            # (k-1)!! / (2s)^(k/2)
            dfact = 1
            for r in range(k - 1, 0, -2):
                dfact *= r
            total += ci * cj * Fraction(dfact) / (2 * s) ** (k // 2)
    return total, s, a * b / s * (c1 - c2) ** 2


def integrate_product(f: SymFun, g: SymFun) -> complex:
    """Closed-form integral over R^d of f * g (bilinear, no conjugation)."""
    if f.d != g.d:
        raise DimensionMismatch(f"Dimensions differ: {f.d} vs {g.d}")
    total = 0j
    for (e1, a, c1), k1 in f.terms:
        for (e2, b, c2), k2 in g.terms:
            rational = Fraction(1)
            log_factor = 0.0
            for j in range(f.d):
                r, s, expo = _axis_integral(e1[j], a, c1[j], e2[j], b, c2[j])
                if r == 0:
                    rational = Fraction(0)
                    break
                rational *= r
                log_factor += 0.5 * math.log(math.pi / float(s)) - float(expo)
            if rational:
                total += complex(k1 * k2) * float(rational) * math.exp(log_factor)
    return total


def _gaussian_derivatives(y: np.ndarray, a: float, order: int) -> np.ndarray:
    """Rows k = 0..order of d^k/dy^k exp(-a y^2), by the Hermite three-term recurrence."""
    out = np.empty((order + 1,) + y.shape)
    out[0] = np.exp(-a * y * y)
    if order >= 1:
        out[1] = -2.0 * a * y * out[0]
    for j in range(1, order):
        out[j + 1] = -2.0 * a * y * out[j] - 2.0 * a * j * out[j - 1]
    return out


def fourier_1d(f: SymFun, xi: np.ndarray) -> np.ndarray:
    """Integral of exp(-i x xi) f(x) dx for a one-dimensional SymFun."""
    if f.d != 1:
        raise DimensionMismatch("fourier_1d needs a one-dimensional SymFun")
    xi = np.asarray(xi, dtype=float)
    total = np.zeros(xi.shape, dtype=complex)
    for (exp, width, center), coeff in f.terms:
        e, a, c = exp[0], float(width), float(center[0])
        g = _gaussian_derivatives(xi, 1.0 / (4.0 * a), e)[e]
        total += complex(coeff) * (1j ** e) * math.sqrt(math.pi / a) * np.exp(-1j * c * xi) * g
    return total


def _term_axis_table(y: np.ndarray, e: int, a: float, order: int) -> np.ndarray:
    """Rows k = 0..order of d^k/dy^k [y^e exp(-a y^2)] via Leibniz."""
    g = _gaussian_derivatives(y, a, order)
    table = np.zeros((order + 1,) + y.shape)
    for k in range(order + 1):
        for r in range(min(k, e) + 1):
            table[k] += comb(k, r) * (factorial(e) // factorial(e - r)) * y ** (e - r) * g[k - r]
    return table


class DerivativeTable:
    """Mixed partial derivatives of a SymFun on a tensor grid up to per-axis orders."""

    def __init__(self, f: SymFun, x: Grid, orders: Union[int, Sequence[int]]):
        self.f = f
        self.grids = _as_grids(x, f.d)
        self.orders = (orders,) * f.d if isinstance(orders, int) else tuple(orders)
        limit = get_config().symbolic.max_derivative_order
        if max(self.orders, default=0) > limit:
            raise OrderTooHigh(
                f"Derivative order {max(self.orders)} exceeds {limit}",
                {"orders": list(self.orders)},
            )
        self.shape = tuple(len(g) for g in self.grids)
        # per term, per axis: (order+1, n_axis)
        self._tables = [
            (
                complex(coeff),
                [
                    _term_axis_table(self.grids[j] - float(center[j]), exp[j], float(width), self.orders[j])
                    for j in range(f.d)
                ],
            )
            for (exp, width, center), coeff in f.terms
        ]
        self._partials: Dict[Tuple[int, ...], np.ndarray] = {}

    def covers(self, orders: Sequence[int]) -> bool:
        return all(k <= have for k, have in zip(orders, self.orders))

    def partial(self, alpha: Sequence[int]) -> np.ndarray:
        """Plain derivative d^alpha f on the grid."""
        alpha = tuple(int(a) for a in alpha)
        if alpha not in self._partials:
            self._partials[alpha] = self._partial(alpha)
        return self._partials[alpha]

    def _partial(self, alpha: Tuple[int, ...]) -> np.ndarray:
        if any(a > k for a, k in zip(alpha, self.orders)):
            raise OrderTooHigh(f"Derivative {alpha} beyond table orders {self.orders}")
        total = np.zeros(self.shape, dtype=complex)
        for coeff, axes in self._tables:
            value: Any = coeff
            for j, table in enumerate(axes):
                row = table[alpha[j]]
                value = np.multiply.outer(value, row) if j else coeff * row
            total += value
        return total if self.f.d > 1 else total.reshape(self.shape[0])

    def apply(self, Q: MultiPoly) -> np.ndarray:
        """Q(D_x) f on the grid."""
        if Q.depends_on_t():
            raise TDependence(f"Operator {Q} involves t")
        total = np.zeros(self.shape if self.f.d > 1 else self.shape[0], dtype=complex)
        for exp, q in Q.terms:
            alpha = exp[:-1]
            total = total + complex(q * minus_i_power(sum(alpha))) * self.partial(alpha)
        return total


@dataclass(frozen=True)
class SeminormResult:
    """Truncated weighted sup-norm with its maximizer."""
    value: float
    alpha: Tuple[int, ...]
    x: Tuple[float, ...]


def seminorm(f: SymFun, query: SeminormQuery) -> SeminormResult:
    """sup over |alpha| <= a_max and a grid on the box K of |D^alpha f| / (h^|alpha| M_|alpha|).

    Nonincreasing in h for a fixed f, M, K and a_max.
    """
    M, h, K, a_max = query.M, query.h, query.K, query.a_max
    if len(K) != f.d:
        raise DimensionMismatch(f"Seminorm box has {len(K)} sides for a function of {f.d} variables")
    points = query.points or get_config().symbolic.seminorm_points
    if f.is_zero():
        return SeminormResult(0.0, (0,) * f.d, tuple(float(lo) for lo, _ in K))
    grids = [np.linspace(lo, hi, points) for lo, hi in K]
    table = DerivativeTable(f, grids, a_max)
    best = SeminormResult(-1.0, (0,) * f.d, (0.0,) * f.d)
    alphas = [a for a in np.ndindex(*([a_max + 1] * f.d)) if sum(a) <= a_max]
    for alpha in alphas:
        k = sum(alpha)
        values = np.abs(table.partial(alpha))
        idx = np.unravel_index(int(np.argmax(values)), values.shape)
        log_weight = k * math.log(h) + M.log(k)
        score = float(values[idx]) * math.exp(-log_weight) if values[idx] > 0 else 0.0
        if score > best.value:
            best = SeminormResult(score, tuple(int(a) for a in alpha), tuple(float(grids[j][idx[j]]) for j in range(f.d)))
    return best


class BumpFun:
    """Even cutoff equal to 1 on [-r1, r1] and 0 outside (-r2, r2)."""

    def __init__(self, r1: Optional[float] = None, r2: Optional[float] = None, k_max: Optional[int] = None):
        cfg = get_config().symbolic
        self.r1 = float(cfg.bump_r1 if r1 is None else r1)
        self.r2 = float(cfg.bump_r2 if r2 is None else r2)
        self.k_max = int(cfg.bump_k_max if k_max is None else k_max)
        if not 0 < self.r1 < self.r2:
            raise SchemaError(f"Bump radii must satisfy 0 < r1 < r2, got {self.r1}, {self.r2}")
        self._lock = threading.Lock()
        self._glue: List[Polynomial] = [Polynomial([1.0])]

    def _glue_polys(self, k: int) -> List[Polynomial]:
        # d^k/ds^k exp(-1/s) = P_k(1/s) exp(-1/s), P_{k+1}(w) = w^2 (P_k(w) - P_k'(w))
        with self._lock:
            w2 = Polynomial([0.0, 0.0, 1.0])
            while len(self._glue) <= k:
                p = self._glue[-1]
                self._glue.append(w2 * (p - p.deriv()))
            return list(self._glue[: k + 1])

    def __call__(self, t: Any, k: int = 0) -> np.ndarray:
        return self.derivative(t, k)

    def derivative(self, t: Any, k: int = 0) -> np.ndarray:
        """psi^(k)(t), vectorized."""
        if k > self.k_max:
            raise OrderTooHigh(f"Bump derivative order {k} exceeds {self.k_max}", {"k": k})
        t_arr = np.asarray(t, dtype=float)
        u = np.abs(t_arr)
        out = np.zeros(t_arr.shape)
        if k == 0:
            out[u <= self.r1] = 1.0
        ramp = (u > self.r1) & (u < self.r2)
        if np.any(ramp):
            out[ramp] = self._ramp(u[ramp], k)
            if k % 2:
                out[ramp] *= np.sign(t_arr[ramp])
        return out if out.ndim else float(out)

    def _ramp(self, u: np.ndarray, k: int) -> np.ndarray:
        polys = self._glue_polys(k)
        s1 = self.r2 - u
        s2 = u - self.r1
        w1 = expit(1.0 / s2 - 1.0 / s1)  # exp(-1/s1) / S
        w2 = expit(1.0 / s1 - 1.0 / s2)  # exp(-1/s2) / S
        inv1, inv2 = 1.0 / s1, 1.0 / s2

        def scaled(p: Polynomial, inv: np.ndarray, w: np.ndarray) -> np.ndarray:
            with np.errstate(over="ignore", invalid="ignore"):
                value = p(inv) * w
            return np.where(w > 0, np.nan_to_num(value, nan=0.0, posinf=0.0, neginf=0.0), 0.0)

        # derivatives in u of G1 = g(r2 - u) and S = G1 + g(u - r1), each divided by S
        g1 = [(-1) ** j * scaled(polys[j], inv1, w1) for j in range(k + 1)]
        s = [g1[j] + scaled(polys[j], inv2, w2) for j in range(k + 1)]
        psi = [g1[0]]
        for n in range(1, k + 1):
            value = g1[n].copy()
            for i in range(n):
                value -= comb(n, i) * psi[i] * s[n - i]
            psi.append(value)
        return psi[k]

    def scaled(self, lam: float, t: Any, k: int = 0) -> np.ndarray:
        """d^k/dt^k psi(lam t)."""
        return lam ** k * self.derivative(lam * np.asarray(t, dtype=float), k)


def bump(b: BumpFun, t: Any, k: int = 0) -> np.ndarray:
    return b.derivative(t, k)


class TensorTest:
    """Test field f(x) g(t) with g a BumpFun (optionally rescaled) or a 1-D SymFun."""

    def __init__(self, space: SymFun, time: Union[BumpFun, SymFun], lam: float = 1.0):
        if isinstance(time, SymFun) and time.d != 1:
            raise DimensionMismatch("Time factor must be one-dimensional")
        self.space = space
        self.time = time
        self.lam = lam
        self.d = space.d

    def _time_derivs(self, t: float, order: int) -> np.ndarray:
        if isinstance(self.time, BumpFun):
            return np.array([float(self.time.scaled(self.lam, t, k)) for k in range(order + 1)], dtype=complex)
        table = DerivativeTable(self.time, np.array([t]), order)
        return np.array([table.partial((k,))[0] for k in range(order + 1)])

    def apply(self, poly: MultiPoly, x: Grid, t: float) -> np.ndarray:
        """P(D) (f g) at (x, t) with D = -i d."""
        order_t = max(poly.t_degree(), 0)
        order_x = [max(poly.degree_in(j), 0) for j in range(self.d)]
        table = DerivativeTable(self.space, x, order_x)
        tvals = self._time_derivs(t, order_t)
        total: Any = 0
        for exp, q in poly.terms:
            alpha, l = exp[:-1], exp[-1]
            factor = complex(q * minus_i_power(sum(alpha) + l)) * tvals[l]
            total = total + factor * table.partial(alpha)
        if isinstance(total, int):
            return np.zeros(table.shape if self.d > 1 else table.shape[0], dtype=complex)
        return total

    def evaluate(self, x: Grid, t: float, j: int = 0) -> np.ndarray:
        """D_t^j of the field."""
        return self.apply(MultiPoly.variable(self.d, self.d) ** j, x, t)

    def at_origin(self) -> complex:
        values = self.space.evaluate([np.zeros(1)] * self.d if self.d > 1 else np.zeros(1))
        tval = self._time_derivs(0.0, 0)[0]
        return complex(np.ravel(values)[0] * tval)
