"""
Cauchy recursion tables, formal solutions and extensions of Cauchy data.

An extension is stored as "atoms": a key (q, p, s) stands for the scalar
factor e_q(t) * D_t^s c_p(t), with e_q(t) = (it)^q / q! and c_p the cutoff
attached to the p-th series term, and maps to one x-operator per datum
phi_j. The residual P(D)Phi is kept in its own, already-cancelled form so
that it can be evaluated far below the size of Phi itself.
"""

import math
from dataclasses import dataclass
from math import comb, factorial
from typing import Any, Dict, Iterator, List, Optional, Sequence, Tuple, Union

import numpy as np
import structlog

from algebra.polyops import MultiPoly, OperatorProfile
from algebra.rational import i_power, minus_i_power
from algebra.symfun import BumpFun, DerivativeTable, SymFun, apply_operator, seminorm
from analysis.weights import (
    WeightSeq,
    check_conditions,
    fit_m2,
    omega_array,
    relation,
    transform,
)
from shared.config import get_config
from shared.errors import (
    ConditionViolation,
    DimensionMismatch,
    OrderTooSmall,
    SchemaError,
    TruncationExceeded,
)
from shared.models import (
    ExtensionMode,
    ExtensionReport,
    RelationKind,
    ResidualPoint,
    SeminormQuery,
    VerdictStatus,
)

logger = structlog.get_logger(__name__)

AtomKey = Tuple[int, int, int]  # (q, p, s)
ResidualKey = Tuple[int, int, int, int]  # (q, pa, pb, s); pb = -1 means no subtraction
Ops = Tuple[MultiPoly, ...]


# Cauchy tables


@dataclass(frozen=True)
class CauchyTable:
    """The x-operators C_0..C_Lmax of a normalized profile."""
    profile: OperatorProfile
    ops: Tuple[MultiPoly, ...]
    provenance: str

    @property
    def l_max(self) -> int:
        return len(self.ops) - 1

    def __getitem__(self, l: int) -> MultiPoly:
        return self.ops[l]

    def apply(self, l: int, phi: SymFun) -> SymFun:
        return apply_operator(self.ops[l], phi)

    def identity_holds(self) -> bool:
        """sum_k Q_k C_{k+l} = 0 exactly for every l in range."""
        m, Q = self.profile.m, self.profile.Q
        for l in range(self.l_max - m + 1):
            total = MultiPoly.zero(self.profile.d)
            for k in range(m + 1):
                total = total + Q[k] * self.ops[k + l]
            if not total.is_zero():
                return False
        return True


def _check_table_request(profile: OperatorProfile, l_max: int) -> None:
    if l_max < profile.m:
        raise SchemaError(f"L_max = {l_max} must be at least m = {profile.m}")


def cauchy_recursive(profile: OperatorProfile, l_max: int) -> CauchyTable:
    """C_l = 0 for l <= m-2, C_{m-1} = 1, C_l = -sum_{k<m} Q_k C_{k+l-m}."""
    _check_table_request(profile, l_max)
    m, d, Q = profile.m, profile.d, profile.Q
    ops: List[MultiPoly] = []
    for l in range(l_max + 1):
        if l < m - 1:
            ops.append(MultiPoly.zero(d))
        elif l == m - 1:
            ops.append(MultiPoly.constant(d, 1))
        else:
            total = MultiPoly.zero(d)
            for k in range(m):
                total = total - Q[k] * ops[k + l - m]
            ops.append(total)
    logger.debug("cauchy_table", provenance="recursive", m=m, l_max=l_max)
    return CauchyTable(profile, tuple(ops), "recursive")


def _weighted_compositions(l: int, m: int) -> Iterator[Tuple[int, ...]]:
    """beta in N_0^m with sum_k k beta_k = l (k = 1..m)."""
    def rec(k: int, remaining: int) -> Iterator[Tuple[int, ...]]:
        if k == 0:
            if remaining == 0:
                yield ()
            return
        for b in range(remaining // k + 1):
            for rest in rec(k - 1, remaining - k * b):
                yield rest + (b,)
    yield from rec(m, l)


def cauchy_explicit(profile: OperatorProfile, l_max: int) -> CauchyTable:
    """C_{m-1+l} = sum over sigma(beta) = l of (-1)^|beta| multinomial(beta) prod Q_{m-k}^beta_k."""
    _check_table_request(profile, l_max)
    m, d, Q = profile.m, profile.d, profile.Q
    powers: Dict[Tuple[int, int], MultiPoly] = {}

    def power(k: int, b: int) -> MultiPoly:
        if (k, b) not in powers:
            powers[(k, b)] = Q[m - k] ** b
        return powers[(k, b)]

    ops: List[MultiPoly] = [MultiPoly.zero(d) for _ in range(min(m - 1, l_max + 1))]
    for l in range(l_max - m + 2):
        total = MultiPoly.zero(d)
        for beta in _weighted_compositions(l, m):
            size = sum(beta)
            multinomial = factorial(size)
            for b in beta:
                multinomial //= factorial(b)
            term = MultiPoly.constant(d, (-1) ** size * multinomial)
            for k, b in enumerate(beta, start=1):
                if b:
                    term = term * power(k, b)
            total = total + term
        ops.append(total)
    logger.debug("cauchy_table", provenance="explicit", m=m, l_max=l_max)
    return CauchyTable(profile, tuple(ops[: l_max + 1]), "explicit")


# scalar factors


def e_weight(q: int, t: float) -> complex:
    """(it)^q / q!."""
    if q < 0:
        return 0j
    if t == 0:
        return 1.0 + 0j if q == 0 else 0j
    magnitude = math.exp(q * math.log(abs(t)) - math.lgamma(q + 1))
    sign = 1.0 if t > 0 or q % 2 == 0 else -1.0
    return complex(i_power(q)) * sign * magnitude


class FormalSolution:
    """S_n(phi)(x, t) = sum_{p<=n} C_p(phi)(x) (it)^p / p!."""

    def __init__(self, table: CauchyTable, phi: SymFun, n: int):
        if n > table.l_max:
            raise SchemaError(f"Order {n} exceeds table depth {table.l_max}")
        self.table = table
        self.phi = phi
        self.n = n
        self._tables: Dict[Any, DerivativeTable] = {}

    def term(self, p: int) -> SymFun:
        """C_p(phi), exact."""
        return self.table.apply(p, self.phi)

    def at_zero(self) -> SymFun:
        return self.term(0)

    def _table(self, x: Any) -> DerivativeTable:
        grids = [np.atleast_1d(np.asarray(g, dtype=float)) for g in (x if isinstance(x, (list, tuple)) else [x])]
        key = tuple(g.tobytes() for g in grids)
        if key not in self._tables:
            orders = [max(self.table[p].degree_in(j) for p in range(self.n + 1)) for j in range(self.phi.d)]
            self._tables[key] = DerivativeTable(self.phi, grids if self.phi.d > 1 else grids[0], [max(o, 0) for o in orders])
        return self._tables[key]

    def __call__(self, x: Any, t: float) -> np.ndarray:
        return self.evaluate(x, t)

    def evaluate(self, x: Any, t: float) -> np.ndarray:
        table = self._table(x)
        total: Any = 0j
        for p in range(self.n + 1):
            w = e_weight(p, t)
            if w != 0 and not self.table[p].is_zero():
                total = total + w * table.apply(self.table[p])
        if np.isscalar(total):
            shape = table.shape if self.phi.d > 1 else table.shape[0]
            return np.full(shape, total, dtype=complex)
        return total


def formal_solution(table: CauchyTable, phi: SymFun, n: int) -> FormalSolution:
    return FormalSolution(table, phi, n)


# cutoff schedules


class Cutoff:
    """D_t^s c_p(t) for the three construction modes."""

    def __init__(self, n: int, bump: Optional[BumpFun] = None, lam: Optional[np.ndarray] = None):
        self.n = n
        self.bump = bump
        self.lam = lam

    def __call__(self, p: int, s: int, t: float) -> complex:
        if p < 0 or p > self.n:
            return 0j
        if self.bump is None:
            return 1.0 + 0j if s == 0 else 0j
        factor = complex(minus_i_power(s))
        if self.lam is None:
            return factor * float(self.bump.derivative(t, s))
        lam = float(self.lam[p])
        return factor * lam ** s * float(self.bump.derivative(lam * t, s))


# extension builds


def _add(target: Dict[Any, List[MultiPoly]], key: Any, j: int, op: MultiPoly, m: int, d: int) -> None:
    if op.is_zero():
        return
    if key not in target:
        target[key] = [MultiPoly.zero(d) for _ in range(m)]
    target[key][j] = target[key][j] + op


def _prune(target: Dict[Any, List[MultiPoly]]) -> Dict[Any, Ops]:
    return {k: tuple(v) for k, v in sorted(target.items()) if any(not op.is_zero() for op in v)}


@dataclass
class _Block:
    """sum_p B_p e_p c_p for datum j, followed by sum_k outer_k D_t^k."""
    j: int
    base: List[MultiPoly]  # B_0..B_{n+m}
    outer: List[Tuple[int, MultiPoly]]


class ExtensionBuild:
    """Structured extension Phi of Cauchy data phi_0..phi_{m-1}."""

    def __init__(
        self,
        profile: OperatorProfile,
        table: CauchyTable,
        phis: Sequence[SymFun],
        mode: ExtensionMode,
        n: int,
        blocks: List[_Block],
        cutoff: Cutoff,
        **info: Any,
    ):
        self.profile = profile
        self.table = table
        self.phis = list(phis)
        self.mode = mode
        self.n = n
        self.cutoff = cutoff
        self.info = info
        self.d = profile.d
        self.atoms, self.residual_terms = self._assemble(blocks)
        self._apply_cache: Dict[MultiPoly, Dict[AtomKey, Ops]] = {}
        self._tables: Dict[Any, List[DerivativeTable]] = {}
        self._values: Dict[Any, Tuple[List[Any], np.ndarray]] = {}

    # assembly

    def _assemble(self, blocks: List[_Block]) -> Tuple[Dict[AtomKey, Ops], Dict[ResidualKey, Ops]]:
        m, d, Q, n = self.profile.m, self.d, self.profile.Q, self.n
        atoms: Dict[AtomKey, List[MultiPoly]] = {}
        residual: Dict[ResidualKey, List[MultiPoly]] = {}
        for block in blocks:
            B = block.base
            block_res: Dict[ResidualKey, MultiPoly] = {}

            def put(key: ResidualKey, op: MultiPoly) -> None:
                if not op.is_zero():
                    block_res[key] = block_res.get(key, MultiPoly.zero(d)) + op

            for q in range(n + 1):
                for k in range(1, m + 1):
                    if Q[k].is_zero() or B[q + k].is_zero():
                        continue
                    put((q, q + k, q, 0), Q[k] * B[q + k])
            for p in range(n + 1):
                if B[p].is_zero():
                    continue
                for k in range(1, m + 1):
                    if Q[k].is_zero():
                        continue
                    for r in range(k):
                        if p - r >= 0:
                            put((p - r, p, -1, k - r), Q[k] * B[p] * comb(k, r))

            for kk, outer_op in block.outer:
                for u in range(kk + 1):
                    coeff = comb(kk, u)
                    for p in range(n + 1):
                        if p - u >= 0 and not B[p].is_zero():
                            _add(atoms, (p - u, p, kk - u), block.j, outer_op * B[p] * coeff, m, d)
                    for (q, pa, pb, s), op in block_res.items():
                        if q - u >= 0:
                            _add(residual, (q - u, pa, pb, s + kk - u), block.j, outer_op * op * coeff, m, d)
        return _prune(atoms), _prune(residual)

    # exact traces

    def traces(self) -> List[SymFun]:
        """D_t^r Phi(., 0) for r = 0..m-1, exact."""
        out = []
        for r in range(self.profile.m):
            total = SymFun.zero(self.d)
            for (q, p, s), ops in self.atoms.items():
                if q == r and s == 0 and p <= self.n:
                    for j, op in enumerate(ops):
                        if not op.is_zero():
                            total = total + apply_operator(op, self.phis[j])
            out.append(total)
        return out

    def traces_exact(self) -> bool:
        return all(tr == phi for tr, phi in zip(self.traces(), self.phis))

    # numerics

    def _grid(self, x: Any) -> Tuple[Any, Tuple[bytes, ...]]:
        if self.d == 1 and not isinstance(x, (list, tuple)):
            g = np.atleast_1d(np.asarray(x, dtype=float))
            return g, (g.tobytes(),)
        grids = [np.atleast_1d(np.asarray(g, dtype=float)) for g in x]
        if len(grids) != self.d:
            raise DimensionMismatch(f"Got {len(grids)} grids, expected {self.d}")
        return grids, tuple(g.tobytes() for g in grids)

    def _derivative_tables(self, grid: Any, key: Tuple[bytes, ...], orders: List[int]) -> List[DerivativeTable]:
        tables = self._tables.get(key)
        if tables is None or not all(t.covers(orders) for t in tables):
            if tables is not None:
                orders = [max(a, b) for a, b in zip(orders, tables[0].orders)]
            tables = [DerivativeTable(phi, grid, orders) for phi in self.phis]
            self._tables[key] = tables
        return tables

    def _matrix(self, name: Any, terms: Dict[Any, Ops], x: Any) -> Tuple[List[Any], np.ndarray, Tuple[int, ...]]:
        grid, gkey = self._grid(x)
        shape = tuple(len(g) for g in grid) if isinstance(grid, list) else (len(grid),)
        cache_key = (name, gkey)
        if cache_key not in self._values:
            orders = [0] * self.d
            for ops in terms.values():
                for op in ops:
                    for j in range(self.d):
                        orders[j] = max(orders[j], op.degree_in(j))
            tables = self._derivative_tables(grid, gkey, orders)
            keys = list(terms.keys())
            X = np.zeros((len(keys), int(np.prod(shape))), dtype=complex)
            for i, key in enumerate(keys):
                for j, op in enumerate(terms[key]):
                    if not op.is_zero():
                        X[i] += np.ravel(tables[j].apply(op))
            self._values[cache_key] = (keys, X)
        keys, X = self._values[cache_key]
        return keys, X, shape

    def _shape_out(self, values: np.ndarray, shape: Tuple[int, ...]) -> np.ndarray:
        return values.reshape(shape) if self.d > 1 else values

    def _atom_weights(self, keys: List[AtomKey], t: float) -> np.ndarray:
        return np.array([e_weight(q, t) * self.cutoff(p, s, t) for q, p, s in keys])

    def _residual_weights(self, keys: List[ResidualKey], t: float) -> np.ndarray:
        w = np.zeros(len(keys), dtype=complex)
        for i, (q, pa, pb, s) in enumerate(keys):
            e = e_weight(q, t)
            if e == 0:
                continue
            diff = self.cutoff(pa, s, t) - (self.cutoff(pb, s, t) if pb >= 0 else 0j)
            w[i] = e * diff
        return w

    def _apply_atoms(self, poly: MultiPoly) -> Dict[AtomKey, Ops]:
        if poly not in self._apply_cache:
            m, d = self.profile.m, self.d
            out: Dict[AtomKey, List[MultiPoly]] = {}
            for exp, c in poly.terms:
                alpha, l = exp[:-1], exp[-1]
                mono = MultiPoly.monomial(d, tuple(alpha) + (0,), c)
                for (q, p, s), ops in self.atoms.items():
                    for u in range(l + 1):
                        if q - u < 0:
                            continue
                        for j, op in enumerate(ops):
                            _add(out, (q - u, p, s + l - u), j, mono * op * comb(l, u), m, d)
            self._apply_cache[poly] = _prune(out)
        return self._apply_cache[poly]

    def apply(self, poly: MultiPoly, x: Any, t: float) -> np.ndarray:
        """poly(D) Phi at (x, t)."""
        if poly.d != self.d:
            raise DimensionMismatch(f"Dimensions differ: {poly.d} vs {self.d}")
        terms = self._apply_atoms(poly)
        keys, X, shape = self._matrix(("apply", poly), terms, x)
        if not keys:
            return self._shape_out(np.zeros(int(np.prod(shape)), dtype=complex), shape)
        return self._shape_out(self._atom_weights(keys, t) @ X, shape)

    def evaluate(self, x: Any, t: float, j: int = 0) -> np.ndarray:
        """D_t^j Phi at (x, t)."""
        keys, X, shape = self._matrix("atoms", self.atoms, x)
        if j == 0:
            if not keys:
                return self._shape_out(np.zeros(int(np.prod(shape)), dtype=complex), shape)
            return self._shape_out(self._atom_weights(keys, t) @ X, shape)
        return self.apply(MultiPoly.variable(self.d, self.d) ** j, x, t)

    def residual(self, x: Any, t: float) -> np.ndarray:
        """P(D) Phi at (x, t)."""
        values, _ = self.residual_with_scale(x, t)
        return values

    def residual_with_scale(self, x: Any, t: float) -> Tuple[np.ndarray, float]:
        """Residual and the size of its largest contributions, for noise-floor decisions."""
        keys, X, shape = self._matrix("residual", self.residual_terms, x)
        if not keys:
            return self._shape_out(np.zeros(int(np.prod(shape)), dtype=complex), shape), 0.0
        w = self._residual_weights(keys, t)
        scale = float(np.abs(w) @ np.max(np.abs(X), axis=1))
        return self._shape_out(w @ X, shape), scale


def _psi_blocks(profile: OperatorProfile, table: CauchyTable, n: int) -> List[_Block]:
    """B_l = sum_k Q_{j+k+1} C_{l+k} for each datum j, no outer derivatives."""
    m, d, Q = profile.m, profile.d, profile.Q
    blocks = []
    for j in range(m):
        base = []
        for l in range(n + m + 1):
            op = MultiPoly.zero(d)
            for k in range(m - j):
                op = op + Q[j + k + 1] * table[l + k]
            base.append(op)
        blocks.append(_Block(j, base, [(0, MultiPoly.constant(d, 1))]))
    return blocks


def _cauchy_blocks(profile: OperatorProfile, table: CauchyTable, n: int) -> List[_Block]:
    """B_p = C_p for each datum j with outer sum_k Q_{j+k+1} D_t^k."""
    m = profile.m
    return [
        _Block(j, [table[p] for p in range(n + m + 1)], [(k, profile.Q[j + k + 1]) for k in range(m - j)])
        for j in range(m)
    ]


def _ensure_table(profile: OperatorProfile, table: Optional[CauchyTable], depth: int) -> CauchyTable:
    if table is None or table.l_max < depth:
        return cauchy_recursive(profile, depth)
    return table


def fit_cauchy_growth(table: CauchyTable, phi: SymFun, M: WeightSeq, h: float, b0: float) -> float:
    """L1 with sup|C_p(phi)| <= (L1 h^b0)^p M^b0_p ||phi||_{M,h} over the table."""
    cfg = get_config().extension
    lo, hi = cfg.x_box
    grid = np.linspace(lo, hi, cfg.x_points)
    grids = grid if phi.d == 1 else [np.linspace(lo, hi, cfg.x_points_2d)] * phi.d
    max_deg = max(op.degree() for op in table.ops)
    norm = seminorm(phi, SeminormQuery(M=M, h=h, K=[(lo, hi)] * phi.d, a_max=max(max_deg, 1))).value
    orders = [max(op.degree_in(j) for op in table.ops) for j in range(phi.d)]
    dt = DerivativeTable(phi, grids, [max(o, 0) for o in orders])
    best = 0.0
    for p in range(1, table.l_max + 1):
        if table[p].is_zero() or p > M.p_max:
            continue
        size = float(np.max(np.abs(dt.apply(table[p]))))
        if size <= 0 or norm <= 0:
            continue
        log_ratio = math.log(size) - math.log(norm) - b0 * M.log(p)
        best = max(best, math.exp(log_ratio / p) / h ** b0)
    return best


def build_extension(
    profile: OperatorProfile,
    table: Optional[CauchyTable],
    phis: Sequence[SymFun],
    mode: Union[ExtensionMode, str],
    order: Optional[int] = None,
    M: Optional[WeightSeq] = None,
    h: float = 1.0,
    amplitude: Optional[Union[float, str]] = None,
    cutoff: Optional[BumpFun] = None,
    t_min: Optional[float] = None,
) -> ExtensionBuild:
    """Extension Phi with D_t^j Phi(., 0) = phi_j in plain, finite-order or Gevrey-cutoff mode."""
    cfg = get_config().extension
    mode = ExtensionMode(mode)
    m, d = profile.m, profile.d
    if len(phis) != m:
        raise SchemaError(f"Expected {m} Cauchy data, got {len(phis)}")
    for phi in phis:
        if phi.d != d:
            raise DimensionMismatch(f"Datum of dimension {phi.d} for a {d}-dimensional operator")

    if mode == ExtensionMode.PLAIN:
        n = cfg.default_order if order is None else order
        if n < m:
            raise OrderTooSmall(f"Truncation order {n} is below m = {m}", {"n": n, "m": m})
        table = _ensure_table(profile, table, n + 2 * m)
        build = ExtensionBuild(profile, table, phis, mode, n, _psi_blocks(profile, table, n), Cutoff(n))
    elif mode == ExtensionMode.FINITE_ORDER:
        N = cfg.default_order if order is None else order
        if N < 1:
            raise OrderTooSmall(f"Residual order {N} must be positive", {"N": N})
        n = N + m - 1
        table = _ensure_table(profile, table, n + 2 * m)
        bump = cutoff or BumpFun()
        build = ExtensionBuild(profile, table, phis, mode, n, _psi_blocks(profile, table, n), Cutoff(n, bump),
                               residual_order=N)
    else:
        build = _build_gevrey(profile, table, phis, M, h, amplitude, cutoff, t_min)
    logger.info("extension_built", mode=build.mode.value, n=build.n, atoms=len(build.atoms),
                residual_terms=len(build.residual_terms))
    return build


def _build_gevrey(
    profile: OperatorProfile,
    table: Optional[CauchyTable],
    phis: Sequence[SymFun],
    M: Optional[WeightSeq],
    h: float,
    amplitude: Optional[Union[float, str]],
    cutoff: Optional[BumpFun],
    t_min: Optional[float],
) -> ExtensionBuild:
    from analysis.indices import b0_exact

    cfg = get_config().extension
    m = profile.m
    if M is None:
        raise ConditionViolation("Gevrey mode needs a weight sequence")
    b0 = float(b0_exact(profile))
    if b0 <= 0:
        raise ConditionViolation("Gevrey mode needs b0 > 0", {"b0": b0})
    report = check_conditions(M, b0)
    if report.m4 is None or report.m4.status != VerdictStatus.HOLDS:
        raise ConditionViolation(
            f"(M.4)_{b0:g} does not hold for {M.label}",
            {"b0": b0, "verdict": report.m4.status.value if report.m4 else None},
        )
    t_min = t_min or 2.0 ** (-cfg.window[0])
    t_max = 2.0 ** (-cfg.window[1])

    if relation(WeightSeq.gevrey(1.0 / b0, M.p_max), M).kind == RelationKind.ASYMP:
        L = cfg.convergent_l
        plateau = 1.0 / (L * h ** b0)
        chi = BumpFun(plateau, 2.0 * plateau)
        n = max(m, 8)
        while True:
            table = _ensure_table(profile, table, n + 2 * m)
            build = ExtensionBuild(profile, table, phis, ExtensionMode.GEVREY, n, _psi_blocks(profile, table, n),
                                   Cutoff(n, chi), convergent=True, h=h, b0=b0, M=M, L=L, amplitude=None)
            if _plateau_residual_small(build, min(plateau, t_max), t_min):
                return build
            n += 4
            if n > cfg.order_cap:
                raise TruncationExceeded(f"Convergent branch did not settle below order {cfg.order_cap}",
                                         {"h": h, "b0": b0})

    Mstar = transform(M, b0, star=True)
    if amplitude is None:
        amplitude = cfg.cutoff_amplitude
    fitted: Dict[str, float] = {}
    if amplitude == "auto":
        seed_table = _ensure_table(profile, table, m + 8)
        L1 = max(fit_cauchy_growth(seed_table, phi, M, h, b0) for phi in phis)
        L1 = L1 or 1.0  # zero data; any amplitude works
        _, H = fit_m2(M)
        A = 8.0 * L1 * H ** b0
        fitted = {"cauchy_growth_l1": L1, "m2_h": H}
        logger.info("cutoff_amplitude_fitted", A=A, L1=L1, H=H, b0=b0)
    else:
        A = float(amplitude)
    if A <= 0:
        raise ConditionViolation(f"Cutoff amplitude must be positive, got {A}")

    bump = cutoff or BumpFun()
    q = Mstar.log_quotients
    lam = A * h ** b0 * np.exp(q[1:])  # lam[p] = A h^b0 m*_{p+1}
    hits = np.nonzero(lam * t_min >= bump.r2)[0]
    if not hits.size or hits[0] > cfg.order_cap:
        raise TruncationExceeded(
            f"No truncation order up to {cfg.order_cap} clears the cutoff at t = {t_min:g}",
            {"A": A, "h": h},
        )
    n = max(int(hits[0]), 2 * m - 1)
    table = _ensure_table(profile, table, n + 2 * m)
    return ExtensionBuild(profile, table, phis, ExtensionMode.GEVREY, n, _cauchy_blocks(profile, table, n),
                          Cutoff(n, bump, lam), convergent=False, h=h, b0=b0, M=M, Mstar=Mstar, amplitude=A,
                          amplitude_fitted=bool(fitted), **fitted)


def _window_grid(d: int) -> Any:
    cfg = get_config().extension
    lo, hi = cfg.x_box
    if d == 1:
        return np.linspace(lo, hi, cfg.x_points)
    return [np.linspace(lo, hi, cfg.x_points_2d)] * d


def _plateau_residual_small(build: ExtensionBuild, t_hi: float, t_lo: float) -> bool:
    cfg = get_config().extension
    x = _window_grid(build.d)
    size = max(float(np.max(np.abs(build.evaluate(x, t_lo)))), 1.0)
    for t in (t_lo, 0.5 * (t_lo + t_hi), t_hi):
        if float(np.max(np.abs(build.residual(x, t)))) > cfg.convergent_tol * size:
            return False
    return True


# verification


def residual_profile(build: ExtensionBuild, ts: Sequence[float]) -> List[Tuple[float, float, float]]:
    """(t, sup_x |P(D)Phi|, rounding scale) on the window grid."""
    x = _window_grid(build.d)
    rows = []
    for t in ts:
        values, scale = build.residual_with_scale(x, t)
        rows.append((t, float(np.max(np.abs(values))), scale))
    return rows


def fit_slope(rows: Sequence[Tuple[float, float, float]], discard: int = 2) -> Optional[float]:
    """Least-squares log-log slope, coarsest points dropped; exact zeros skipped."""
    pts = sorted(rows, key=lambda r: -r[0])[discard:]
    pts = [(t, v) for t, v, _ in pts if v > 0]
    if len(pts) < 2:
        return None
    lt = np.log([t for t, _ in pts])
    lv = np.log([v for _, v in pts])
    return float(np.polyfit(lt, lv, 1)[0])


def _weighted_monotone(rows: Sequence[Tuple[float, float, float]], weights: np.ndarray) -> bool:
    cfg = get_config().extension
    last = None
    for (t, value, scale), w in sorted(zip(rows, weights), key=lambda item: -item[0][0]):
        if value <= cfg.noise_floor * scale or value == 0:
            continue
        current = value * w
        if last is not None and current > last * (1.0 + cfg.monotone_slack):
            return False
        last = current
    return True


def fit_weighted_l(build: ExtensionBuild, rows: Sequence[Tuple[float, float, float]]) -> Tuple[Optional[float], List[float]]:
    """Smallest L = A 2^k (k up to the sweep limit) with the weighted residual nonincreasing as t -> 0."""
    cfg = get_config().extension
    Mstar: WeightSeq = build.info["Mstar"]
    A, h, b0 = build.info["amplitude"], build.info["h"], build.info["b0"]
    ts = np.array([r[0] for r in rows])
    for k in range(cfg.l_sweep_max + 1):
        L = A * 2.0 ** k
        weights = np.exp(omega_array(Mstar, 1.0 / (L * h ** b0 * ts)))
        if _weighted_monotone(rows, weights):
            return L, list(weights)
    return None, []


def verify_extension(build: ExtensionBuild) -> ExtensionReport:
    """Exact traces, residual profile on the dyadic window and, in Gevrey mode, the fitted L."""
    cfg = get_config().extension
    ts = [2.0 ** (-k) for k in range(cfg.window[1], cfg.window[0] + 1)]
    rows = residual_profile(build, ts)
    report = ExtensionReport(
        mode=build.mode,
        order=build.n,
        traces_exact=build.traces_exact(),
        slope=fit_slope(rows),
        profile=[ResidualPoint(t=t, residual=v) for t, v, _ in rows],
        amplitude=build.info.get("amplitude"),
        amplitude_fitted=bool(build.info.get("amplitude_fitted", False)),
        cauchy_growth_l1=build.info.get("cauchy_growth_l1"),
        m2_h=build.info.get("m2_h"),
        convergent_branch=bool(build.info.get("convergent", False)),
        h=build.info.get("h"),
    )
    if build.mode == ExtensionMode.GEVREY and not report.convergent_branch:
        L, weights = fit_weighted_l(build, rows)
        report.fitted_l = L
        report.monotone = L is not None
        if weights:
            for point, w in zip(report.profile, weights):
                point.weighted = point.residual * w
    elif report.convergent_branch:
        report.fitted_l = build.info.get("L")
        report.monotone = True
    logger.info("extension_verified", mode=build.mode.value, traces=report.traces_exact, slope=report.slope,
                fitted_l=report.fitted_l)
    return report


def h_trend(
    profile: OperatorProfile,
    phis: Sequence[SymFun],
    M: WeightSeq,
    hs: Optional[Sequence[float]] = None,
    amplitude: Optional[Union[float, str]] = None,
) -> List[Tuple[float, Optional[float]]]:
    """Fitted L per h; uniformity in h is only reported."""
    hs = hs or get_config().extension.h_trend
    out = []
    for h in hs:
        try:
            build = build_extension(profile, None, phis, ExtensionMode.GEVREY, M=M, h=h, amplitude=amplitude)
            out.append((h, verify_extension(build).fitted_l))
        except TruncationExceeded as e:
            logger.warning("h_trend_skipped", h=h, error=e.message)
            out.append((h, None))
    return out
