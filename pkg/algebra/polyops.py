"""
Exact multivariate polynomials over complex rationals and the t-decomposition.
"""

import json
from dataclasses import dataclass, field
from fractions import Fraction
from math import factorial
from numbers import Rational
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np
import structlog
import sympy

from algebra.rational import ONE, ZERO, CRational, fraction_to_str, parse_fraction
from shared.errors import ConstantPoly, DimensionMismatch, NonConstantLeading, SchemaError

logger = structlog.get_logger(__name__)

Exponent = Tuple[int, ...]


def _falling(e: int, k: int) -> int:
    """e (e-1) ... (e-k+1)."""
    return factorial(e) // factorial(e - k)


@dataclass(frozen=True)
class MultiPoly:
    """Sparse polynomial in x_1..x_d and t; the last exponent slot is t."""
    d: int
    terms: Tuple[Tuple[Exponent, CRational], ...] = ()

    # construction

    @classmethod
    def from_dict(cls, d: int, coeffs: Mapping[Exponent, Any]) -> "MultiPoly":
        items = []
        for exp, c in coeffs.items():
            exp = tuple(int(e) for e in exp)
            if len(exp) != d + 1:
                raise DimensionMismatch(f"Exponent {exp} does not have length {d + 1}")
            if any(e < 0 for e in exp):
                raise SchemaError(f"Negative exponent {exp}")
            c = CRational.of(c)
            if not c.is_zero():
                items.append((exp, c))
        items.sort(key=lambda item: item[0])
        return cls(d, tuple(items))

    @classmethod
    def constant(cls, d: int, value: Any = 1) -> "MultiPoly":
        return cls.from_dict(d, {(0,) * (d + 1): value})

    @classmethod
    def zero(cls, d: int) -> "MultiPoly":
        return cls(d, ())

    @classmethod
    def monomial(cls, d: int, exp: Sequence[int], coeff: Any = 1) -> "MultiPoly":
        return cls.from_dict(d, {tuple(exp): coeff})

    @classmethod
    def variable(cls, d: int, index: int) -> "MultiPoly":
        """x_{index+1} for index < d, t for index == d."""
        exp = [0] * (d + 1)
        exp[index] = 1
        return cls.monomial(d, exp)

    def as_dict(self) -> Dict[Exponent, CRational]:
        return dict(self.terms)

    # predicates

    def is_zero(self) -> bool:
        return not self.terms

    def is_constant(self) -> bool:
        return all(sum(exp) == 0 for exp, _ in self.terms)

    def constant_value(self) -> CRational:
        for exp, c in self.terms:
            if sum(exp) == 0:
                return c
        return ZERO

    def depends_on_t(self) -> bool:
        return any(exp[-1] > 0 for exp, _ in self.terms)

    # degrees

    def degree(self) -> int:
        """Total degree; -1 for the zero polynomial."""
        return max((sum(exp) for exp, _ in self.terms), default=-1)

    def x_degree(self) -> int:
        return max((sum(exp[:-1]) for exp, _ in self.terms), default=-1)

    def degree_in(self, index: int) -> int:
        return max((exp[index] for exp, _ in self.terms), default=-1)

    def t_degree(self) -> int:
        return self.degree_in(self.d)

    def coefficient_in_t(self, k: int) -> "MultiPoly":
        """Coefficient of t^k as a polynomial in x (t slot zero)."""
        return MultiPoly.from_dict(
            self.d, {exp[:-1] + (0,): c for exp, c in self.terms if exp[-1] == k}
        )

    # arithmetic

    def _check(self, other: "MultiPoly") -> None:
        if other.d != self.d:
            raise DimensionMismatch(f"Dimensions differ: {self.d} vs {other.d}")

    def _coerce(self, other: Any) -> "MultiPoly":
        if isinstance(other, MultiPoly):
            self._check(other)
            return other
        return MultiPoly.constant(self.d, other)

    def __add__(self, other: Any) -> "MultiPoly":
        other = self._coerce(other)
        acc = self.as_dict()
        for exp, c in other.terms:
            acc[exp] = acc.get(exp, ZERO) + c
        return MultiPoly.from_dict(self.d, acc)

    __radd__ = __add__

    def __neg__(self) -> "MultiPoly":
        return MultiPoly(self.d, tuple((exp, -c) for exp, c in self.terms))

    def __sub__(self, other: Any) -> "MultiPoly":
        return self + (-self._coerce(other))

    def __rsub__(self, other: Any) -> "MultiPoly":
        return self._coerce(other) - self

    def __mul__(self, other: Any) -> "MultiPoly":
        if not isinstance(other, MultiPoly):
            c = CRational.of(other)
            if c.is_zero():
                return MultiPoly.zero(self.d)
            return MultiPoly(self.d, tuple((exp, coeff * c) for exp, coeff in self.terms))
        self._check(other)
        acc: Dict[Exponent, CRational] = {}
        for e1, c1 in self.terms:
            for e2, c2 in other.terms:
                exp = tuple(a + b for a, b in zip(e1, e2))
                acc[exp] = acc.get(exp, ZERO) + c1 * c2
        return MultiPoly.from_dict(self.d, acc)

    __rmul__ = __mul__

    def __truediv__(self, other: Any) -> "MultiPoly":
        c = CRational.of(other)
        return MultiPoly(self.d, tuple((exp, coeff / c) for exp, coeff in self.terms))

    def __pow__(self, k: int) -> "MultiPoly":
        if k < 0:
            raise ValueError("Negative polynomial power")
        result = MultiPoly.constant(self.d, 1)
        base = self
        while k:
            if k & 1:
                result = result * base
            base = base * base
            k >>= 1
        return result

    def shift_t(self, k: int) -> "MultiPoly":
        """Multiply by t^k."""
        return MultiPoly(self.d, tuple((exp[:-1] + (exp[-1] + k,), c) for exp, c in self.terms))

    def reflect(self) -> "MultiPoly":
        """P(-x, -t)."""
        return MultiPoly(
            self.d, tuple((exp, c if sum(exp) % 2 == 0 else -c) for exp, c in self.terms)
        )

    def map_coefficients(self, fn) -> "MultiPoly":
        return MultiPoly.from_dict(self.d, {exp: fn(exp, c) for exp, c in self.terms})

    # calculus

    def derivative(self, order: Sequence[int]) -> "MultiPoly":
        """Plain mixed partial derivative, no factors of -i."""
        order = tuple(order)
        if len(order) != self.d + 1:
            raise DimensionMismatch(f"Derivative order {order} does not have length {self.d + 1}")
        acc: Dict[Exponent, CRational] = {}
        for exp, c in self.terms:
            if any(e < k for e, k in zip(exp, order)):
                continue
            factor = 1
            for e, k in zip(exp, order):
                factor *= _falling(e, k)
            new = tuple(e - k for e, k in zip(exp, order))
            acc[new] = acc.get(new, ZERO) + c * factor
        return MultiPoly.from_dict(self.d, acc)

    # evaluation

    def evaluate(self, point: Sequence[Any]) -> Union[CRational, complex]:
        """Exact at rational points, complex floating otherwise."""
        if len(point) != self.d + 1:
            raise DimensionMismatch(f"Point has length {len(point)}, expected {self.d + 1}")
        exact = all(
            isinstance(v, CRational) or (isinstance(v, Rational) and not isinstance(v, bool))
            for v in point
        )
        if exact:
            values = [CRational.of(v) for v in point]
            total = ZERO
            for exp, c in self.terms:
                term = c
                for v, e in zip(values, exp):
                    if e:
                        term = term * (v ** e)
                total = total + term
            return total
        values_c = [complex(v) for v in point]
        total_c = 0j
        for exp, c in self.terms:
            term_c = complex(c)
            for v, e in zip(values_c, exp):
                if e:
                    term_c *= v ** e
            total_c += term_c
        return total_c

    def evaluate_array(self, xs: Sequence[np.ndarray], t: Any = 0.0) -> np.ndarray:
        """Vectorized complex evaluation; xs holds one broadcastable array per x-variable."""
        if len(xs) != self.d:
            raise DimensionMismatch(f"Got {len(xs)} coordinate arrays, expected {self.d}")
        arrays = [np.asarray(x, dtype=complex) for x in xs] + [np.asarray(t, dtype=complex)]
        shape = np.broadcast_shapes(*(a.shape for a in arrays))
        total = np.zeros(shape, dtype=complex)
        for exp, c in self.terms:
            term = np.full(shape, complex(c))
            for a, e in zip(arrays, exp):
                if e:
                    term = term * a ** e
            total = total + term
        return total

    def coefficient_vector(self) -> Tuple[np.ndarray, np.ndarray]:
        """Exponent matrix and complex coefficient vector."""
        if not self.terms:
            return np.zeros((0, self.d + 1), dtype=int), np.zeros(0, dtype=complex)
        exps = np.array([exp for exp, _ in self.terms], dtype=int)
        coeffs = np.array([complex(c) for _, c in self.terms])
        return exps, coeffs

    def coefficient_scale(self) -> float:
        return max((abs(complex(c)) for _, c in self.terms), default=0.0)

    # conversions

    def symbols(self) -> List[sympy.Symbol]:
        return variable_symbols(self.d)

    def to_sympy(self) -> sympy.Expr:
        gens = self.symbols()
        expr = sympy.Integer(0)
        for exp, c in self.terms:
            coeff = sympy.Rational(c.re.numerator, c.re.denominator) + sympy.I * sympy.Rational(
                c.im.numerator, c.im.denominator
            )
            mono = sympy.Integer(1)
            for g, e in zip(gens, exp):
                mono *= g ** e
            expr += coeff * mono
        return sympy.expand(expr)

    def to_json(self) -> Dict[str, Any]:
        return {
            "d": self.d,
            "terms": [
                {"exp": list(exp), "re": fraction_to_str(c.re), "im": fraction_to_str(c.im)}
                for exp, c in self.terms
            ],
        }

    @classmethod
    def from_json(cls, data: Mapping[str, Any]) -> "MultiPoly":
        try:
            d = int(data["d"])
            coeffs: Dict[Exponent, CRational] = {}
            for term in data["terms"]:
                exp = tuple(int(e) for e in term["exp"])
                c = CRational(parse_fraction(term.get("re", 0)), parse_fraction(term.get("im", 0)))
                coeffs[exp] = coeffs.get(exp, ZERO) + c
        except (KeyError, TypeError, ValueError) as e:
            raise SchemaError(f"Malformed polynomial JSON: {e}") from e
        if d < 1:
            raise SchemaError(f"Polynomial dimension must be positive, got {d}")
        return cls.from_dict(d, coeffs)

    def __str__(self) -> str:
        return str(self.to_sympy()) if self.terms else "0"


def variable_symbols(d: int) -> List[sympy.Symbol]:
    """x (or x1..xd) followed by t."""
    if d == 1:
        names = ["x"]
    else:
        names = [f"x{j + 1}" for j in range(d)]
    return [sympy.Symbol(n) for n in names] + [sympy.Symbol("t")]


def _sympy_rational(value: sympy.Expr) -> Fraction:
    value = sympy.nsimplify(value) if not value.is_Rational else value
    if not value.is_Rational:
        raise SchemaError(f"Coefficient {value} is not rational")
    return Fraction(int(value.p), int(value.q))


def from_sympy(expr: sympy.Expr, d: int) -> MultiPoly:
    """Convert a sympy polynomial in the standard variables into a MultiPoly."""
    gens = variable_symbols(d)
    try:
        poly = sympy.Poly(sympy.expand(expr), *gens)
    except sympy.PolynomialError as e:
        raise SchemaError(f"Not a polynomial in {gens}: {expr}") from e
    coeffs: Dict[Exponent, CRational] = {}
    for monom, coeff in poly.terms():
        re, im = coeff.as_real_imag()
        coeffs[tuple(monom)] = CRational(_sympy_rational(re), _sympy_rational(im))
    return MultiPoly.from_dict(d, coeffs)


def infer_dimension(expr: sympy.Expr) -> int:
    names = {s.name for s in expr.free_symbols}
    indexed = [int(n[1:]) for n in names if n.startswith("x") and n[1:].isdigit()]
    if indexed:
        return max(indexed)
    return 1


def parse_poly(source: Union[str, Mapping[str, Any]], d: Optional[int] = None) -> MultiPoly:
    """Parse a JSON mapping, a JSON string or a sympy expression string such as "t - I*x**2"."""
    if isinstance(source, Mapping):
        return MultiPoly.from_json(source)
    text = source.strip()
    if text.startswith("{"):
        try:
            return MultiPoly.from_json(json.loads(text))
        except json.JSONDecodeError as e:
            raise SchemaError(f"Malformed polynomial JSON: {e}") from e
    try:
        expr = sympy.sympify(text, locals={"I": sympy.I})
    except (sympy.SympifyError, SyntaxError, TypeError) as e:
        raise SchemaError(f"Cannot parse polynomial expression {text!r}") from e
    return from_sympy(expr, d or infer_dimension(expr))


def poly_derivative(P: MultiPoly, order: Sequence[int]) -> MultiPoly:
    return P.derivative(order)


def poly_eval(P: MultiPoly, point: Sequence[Any]) -> Union[CRational, complex]:
    return P.evaluate(point)


@dataclass(frozen=True)
class OperatorProfile:
    """Normalized polynomial P = sum_k Q_k(x) t^k with Q_m = 1."""
    P: MultiPoly
    d: int
    m: int
    Q: Tuple[MultiPoly, ...]
    scale: CRational = ONE
    pfam: Tuple[MultiPoly, ...] = field(default=())
    pcheck: MultiPoly = field(default=None)  # type: ignore[assignment]
    recursion_check: bool = False
    degree_bound_holds: bool = True

    def P_j(self, j: int) -> MultiPoly:
        """P_(j) for j = 1..m."""
        return self.pfam[j - 1]

    def reflected(self) -> "OperatorProfile":
        """Profile of (-1)^m P-check, normalized again to leading coefficient 1."""
        return decompose_t(self.pcheck)


def reassemble(Q: Sequence[MultiPoly]) -> MultiPoly:
    total = MultiPoly.zero(Q[0].d)
    for k, q in enumerate(Q):
        total = total + q.shift_t(k)
    return total


def p_family(profile: OperatorProfile) -> Tuple[List[MultiPoly], MultiPoly, bool]:
    """P_(1)..P_(m), P-check and the exact base-change recursion check."""
    m, Q, d = profile.m, profile.Q, profile.d
    pfam = []
    for j in range(1, m + 1):
        pj = MultiPoly.zero(d)
        for k in range(j, m + 1):
            pj = pj + Q[k].shift_t(k - j)
        pfam.append(pj)
    pcheck = profile.P.reflect()

    one = MultiPoly.constant(d, 1)
    ok = pfam[m - 1] == one
    t = MultiPoly.variable(d, d)
    for j in range(1, m):
        rhs = pfam[m - j - 1]
        for k in range(j):
            rhs = rhs - Q[k + m - j] * (t ** k)
        ok = ok and rhs == t ** j
    return pfam, pcheck, ok


def decompose_t(P: MultiPoly) -> OperatorProfile:
    """Split P into its t-coefficients and normalize the leading one to 1."""
    if P.is_constant():
        raise ConstantPoly("Polynomial is constant", {"poly": str(P)})
    m = P.t_degree()
    leading = P.coefficient_in_t(m)
    if not leading.is_constant() or leading.is_zero():
        raise NonConstantLeading(
            f"Leading t-coefficient {leading} depends on x", {"m": m, "leading": str(leading)}
        )
    c = leading.constant_value()
    normalized = P / c
    Q = tuple(normalized.coefficient_in_t(k) for k in range(m + 1))
    degree_ok = all(Q[k].x_degree() <= Q[0].x_degree() for k in range(1, m + 1) if not Q[k].is_zero())

    profile = OperatorProfile(P=normalized, d=P.d, m=m, Q=Q, scale=c, degree_bound_holds=degree_ok)
    pfam, pcheck, ok = p_family(profile)
    profile = OperatorProfile(
        P=normalized,
        d=P.d,
        m=m,
        Q=Q,
        scale=c,
        pfam=tuple(pfam),
        pcheck=pcheck,
        recursion_check=ok,
        degree_bound_holds=degree_ok,
    )
    if not ok:
        logger.error("base_change_recursion_failed", m=m, poly=str(normalized))
    logger.debug("decomposed", d=P.d, m=m, degree_bound=degree_ok)
    return profile
