"""
Closed-form functions of (x, t) and the reference zero solutions.
"""

import threading
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
import sympy

from algebra.polyops import MultiPoly, OperatorProfile, decompose_t, parse_poly, variable_symbols
from algebra.rational import minus_i_power
from shared.config import get_config
from shared.errors import DimensionMismatch, KindProfileMismatch, SchemaError

logger = structlog.get_logger(__name__)

KINDS = ("heat_kernel", "poisson_kernel", "cauchy_kernel", "custom", "zero_jump")


def _heat_expr(x: sympy.Symbol, t: sympy.Symbol) -> sympy.Expr:
    return sympy.exp(-x ** 2 / (4 * t)) / sympy.sqrt(4 * sympy.pi * t)


class ClosedForm:
    """A function of (x, t) given by one expression for t > 0 and one for t < 0."""

    def __init__(self, upper: sympy.Expr, lower: sympy.Expr, d: int = 1, name: str = "closed_form"):
        self.d = d
        self.name = name
        self.symbols = variable_symbols(d)
        self.upper = sympy.sympify(upper)
        self.lower = sympy.sympify(lower)
        allowed = set(self.symbols)
        for expr in (self.upper, self.lower):
            extra = expr.free_symbols - allowed
            if extra:
                raise SchemaError(f"Unknown symbols {sorted(map(str, extra))} in {name}")
        self._lock = threading.Lock()
        self._compiled: Dict[Tuple[int, ...], Tuple[Callable, Callable]] = {}

    @classmethod
    def from_string(cls, source: str, d: int = 1, lower: Optional[str] = None, name: str = "custom") -> "ClosedForm":
        local = {str(s): s for s in variable_symbols(d)}
        try:
            upper_expr = sympy.sympify(source, locals=local)
            lower_expr = upper_expr if lower is None else sympy.sympify(lower, locals=local)
        except (sympy.SympifyError, TypeError) as e:
            raise SchemaError(f"Cannot parse expression {source!r}: {e}")
        return cls(upper_expr, lower_expr, d, name)

    def _derived(self, order: Tuple[int, ...]) -> Tuple[Callable, Callable]:
        with self._lock:
            if order not in self._compiled:
                pairs = [(s, k) for s, k in zip(self.symbols, order) if k]
                ups, los = self.upper, self.lower
                if pairs:
                    ups = sympy.diff(ups, *pairs)
                    los = sympy.diff(los, *pairs)
                self._compiled[order] = (
                    sympy.lambdify(self.symbols, ups, "numpy"),
                    sympy.lambdify(self.symbols, los, "numpy"),
                )
            return self._compiled[order]

    def partial(self, order: Sequence[int], x: Any, t: Any) -> np.ndarray:
        """Plain derivative d_x^alpha d_t^l at (x, t), broadcasting; alpha then l in order."""
        order = tuple(int(k) for k in order)
        if len(order) != self.d + 1:
            raise DimensionMismatch(f"Order {order} for a {self.d}-dimensional function")
        up, lo = self._derived(order)
        xs = [np.asarray(v, dtype=float) for v in (x if self.d > 1 else [x])]
        t_arr = np.asarray(t, dtype=float)
        shape = np.broadcast_shapes(*(v.shape for v in xs), t_arr.shape)
        with np.errstate(all="ignore"):
            vu = np.broadcast_to(np.asarray(up(*xs, t_arr), dtype=complex), shape)
            vl = np.broadcast_to(np.asarray(lo(*xs, t_arr), dtype=complex), shape)
        return np.where(t_arr > 0, vu, vl)

    def __call__(self, x: Any, t: Any) -> np.ndarray:
        return self.partial((0,) * (self.d + 1), x, t)

    def apply(self, poly: MultiPoly, x: Any, t: Any) -> np.ndarray:
        """poly(D) f at (x, t) with D = -i d."""
        if poly.d != self.d:
            raise DimensionMismatch(f"Dimensions differ: {poly.d} vs {self.d}")
        total: Any = 0
        for exp, c in poly.terms:
            total = total + complex(c * minus_i_power(sum(exp))) * self.partial(exp, x, t)
        if isinstance(total, int):
            return np.zeros(np.broadcast_shapes(np.shape(t), *(np.shape(v) for v in (x if self.d > 1 else [x]))),
                            dtype=complex)
        return total

    def derivative(self, poly: MultiPoly) -> "ClosedForm":
        """The closed form of poly(D) f."""
        upper, lower = sympy.Integer(0), sympy.Integer(0)
        for exp, c in poly.terms:
            z = c * minus_i_power(sum(exp))
            factor = sympy.Rational(z.re.numerator, z.re.denominator) + sympy.I * sympy.Rational(z.im.numerator, z.im.denominator)
            pairs = [(s, k) for s, k in zip(self.symbols, exp) if k]
            upper += factor * (sympy.diff(self.upper, *pairs) if pairs else self.upper)
            lower += factor * (sympy.diff(self.lower, *pairs) if pairs else self.lower)
        return ClosedForm(upper, lower, self.d, f"{poly}(D){self.name}")

    def __repr__(self) -> str:
        return f"ClosedForm({self.name})"


class ZeroSolution(ClosedForm):
    """A closed form with P(D) f = 0 away from t = 0."""

    def __init__(self, profile: OperatorProfile, kind: str, upper: sympy.Expr, lower: sympy.Expr, name: Optional[str] = None):
        super().__init__(upper, lower, profile.d, name or kind)
        self.profile = profile
        self.kind = kind

    def derivative_kernel(self, alpha: Sequence[int], l: int) -> ClosedForm:
        """D_x^alpha D_t^l f."""
        exp = tuple(alpha) + (l,)
        return self.derivative(MultiPoly.monomial(self.d, exp, 1))


_REFERENCE = {
    "heat_kernel": "t - I*x**2",
    "poisson_kernel": "t**2 + x**2",
    "cauchy_kernel": "t - I*x",
}


def make_kernel(
    kind: str,
    profile: OperatorProfile,
    expr: Optional[str] = None,
    lower: Optional[str] = None,
) -> ZeroSolution:
    """Reference zero solution of the requested kind for the profile."""
    if kind not in KINDS:
        raise SchemaError(f"Unknown kernel kind {kind!r}, expected one of {KINDS}")
    if kind in _REFERENCE:
        expected = decompose_t(parse_poly(_REFERENCE[kind], 1)).P
        if profile.d != 1 or profile.P != expected:
            raise KindProfileMismatch(
                f"{kind} needs P = {_REFERENCE[kind]}, got {profile.P}",
                {"kind": kind, "poly": str(profile.P)},
            )
        x, t = variable_symbols(1)
        if kind == "heat_kernel":
            return ZeroSolution(profile, kind, _heat_expr(x, t), sympy.Integer(0))
        if kind == "poisson_kernel":
            f = t / (sympy.pi * (x ** 2 + t ** 2))
            return ZeroSolution(profile, kind, f, f)
        f = 1 / (x + sympy.I * t)
        return ZeroSolution(profile, kind, f, f)

    if expr is None:
        raise SchemaError(f"{kind} kernels need an expression")
    form = ClosedForm.from_string(expr, profile.d, None if kind == "zero_jump" else lower, kind)
    return ZeroSolution(profile, kind, form.upper, form.lower)


def standard_points(d: int) -> Tuple[List[np.ndarray], np.ndarray]:
    """Sample grid away from t = 0 used for zero-solution checks."""
    xs = np.linspace(-2.0, 2.0, 9)
    ts = np.array([-0.7, -0.3, -0.1, 0.1, 0.3, 0.7])
    mesh = np.meshgrid(*([xs] * d), ts, indexing="ij")
    return [m.ravel() for m in mesh[:-1]], mesh[-1].ravel()


def verify_zero_solution(f: ZeroSolution, points: Optional[Tuple[Any, Any]] = None) -> float:
    """Largest |P(D) f| relative to the size of its individual terms on the sample points."""
    if points is None:
        xs, ts = standard_points(f.d)
    else:
        xs, ts = points
        xs = [np.atleast_1d(np.asarray(v, dtype=float)) for v in (xs if f.d > 1 else [xs])]
        ts = np.atleast_1d(np.asarray(ts, dtype=float))
    x_arg = xs if f.d > 1 else xs[0]
    total = np.zeros(np.broadcast_shapes(ts.shape, *(v.shape for v in xs)), dtype=complex)
    scale = np.zeros(total.shape)
    for exp, c in f.profile.P.terms:
        term = complex(c * minus_i_power(sum(exp))) * f.partial(exp, x_arg, ts)
        total += term
        scale += np.abs(term)
    finite = np.isfinite(total) & np.isfinite(scale)
    with np.errstate(divide="ignore", invalid="ignore"):
        rel = np.where(scale[finite] > 0, np.abs(total[finite]) / scale[finite], 0.0)
    value = float(np.max(rel)) if rel.size else 0.0
    tol = get_config().boundary.zero_solution_tol
    if value > tol:
        logger.warning("zero_solution_residual", kind=f.kind, residual=value, tolerance=tol)
    else:
        logger.debug("zero_solution_checked", kind=f.kind, residual=value)
    return value


def as_closed_form(source: Union[ClosedForm, str], d: int = 1) -> ClosedForm:
    if isinstance(source, ClosedForm):
        return source
    return ClosedForm.from_string(source, d)


def reference_polynomial(kind: str) -> str:
    """Operator solved by a reference kernel, as an expression string."""
    if kind not in _REFERENCE:
        raise SchemaError(f"{kind} has no reference operator; pass a polynomial")
    return _REFERENCE[kind]
