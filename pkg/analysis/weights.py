"""
Weight sequences: Gevrey and explicit tables, condition verdicts,
associated functions, transforms, relations and the truncation index.

All arithmetic happens on log M_p in double precision.
"""

import math
import os
import threading
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from scipy.special import gammaln

from shared.config import get_config
from shared.errors import FileError, NoFit, SchemaError, TruncationExceeded, TruncationSuspect
from shared.models import ConditionReport, RelationKind, Verdict, VerdictStatus

logger = structlog.get_logger(__name__)


class WeightSeq:
    """Positive sequence M_0..M_P held as log values."""

    def __init__(self, log_values: Sequence[float], label: str = "explicit", normalized: bool = True):
        log_values = np.asarray(log_values, dtype=float)
        if log_values.ndim != 1 or len(log_values) < 2:
            raise SchemaError("A weight sequence needs at least M_0 and M_1")
        if not np.all(np.isfinite(log_values)):
            raise SchemaError("Weight sequence entries must be positive and finite")
        if normalized and (abs(log_values[0]) > 1e-12 or abs(log_values[1]) > 1e-12):
            raise SchemaError(
                "Weight sequences must satisfy M_0 = M_1 = 1",
                {"M0": float(np.exp(log_values[0])), "M1": float(np.exp(log_values[1]))},
            )
        log_values.setflags(write=False)
        self._log = log_values
        self.label = label
        self.normalized = normalized
        self._lock = threading.Lock()
        self._cache: Dict[str, Any] = {}

    # constructors

    @classmethod
    def gevrey(cls, sigma: float, p_max: Optional[int] = None) -> "WeightSeq":
        if sigma <= 0:
            raise SchemaError(f"Gevrey order must be positive, got {sigma}")
        p_max = p_max or get_config().weights.p_max
        p = np.arange(p_max + 1)
        return cls(sigma * gammaln(p + 1), label=f"gevrey({sigma:g})")

    @classmethod
    def explicit(cls, values: Sequence[float], label: str = "explicit") -> "WeightSeq":
        values = np.asarray(values, dtype=float)
        if np.any(~np.isfinite(values)) or np.any(values <= 0):
            raise SchemaError("Weight sequence entries must be positive and finite")
        return cls(np.log(values), label=label)

    # access

    @property
    def p_max(self) -> int:
        return len(self._log) - 1

    @property
    def log_values(self) -> np.ndarray:
        return self._log

    def log(self, p: int) -> float:
        return float(self._log[p])

    def value(self, p: int) -> float:
        return math.exp(self._log[p])

    def _cached(self, key: str, compute):
        with self._lock:
            if key not in self._cache:
                self._cache[key] = compute()
            return self._cache[key]

    @property
    def log_quotients(self) -> np.ndarray:
        """log m_p for p = 1..P, stored at index p (index 0 unused)."""
        def compute():
            q = np.empty_like(self._log)
            q[0] = np.nan
            q[1:] = np.diff(self._log)
            q.setflags(write=False)
            return q
        return self._cached("log_quotients", compute)

    def is_asymp_one(self) -> bool:
        """All entries within the configured factor of 1."""
        bound = math.log(get_config().weights.asymp_one_factor)
        return bool(np.all(np.abs(self._log) <= bound))

    def truncate(self, p_max: int) -> "WeightSeq":
        return WeightSeq(self._log[: p_max + 1], label=self.label, normalized=self.normalized)

    def __repr__(self) -> str:
        return f"WeightSeq({self.label}, P={self.p_max})"


def transform(M: WeightSeq, a: float, star: bool = False) -> WeightSeq:
    """M^a, or M^{a,*} = M^a_p / p! when star is set; no renormalization."""
    if a <= 0:
        raise SchemaError(f"Exponent must be positive, got {a}")
    p = np.arange(M.p_max + 1)
    logs = a * M.log_values
    if star:
        logs = logs - gammaln(p + 1)
    suffix = f"^({a:g}{',*' if star else ''})"
    return WeightSeq(logs, label=M.label + suffix, normalized=False)


def rescale(M: WeightSeq, q: float) -> WeightSeq:
    """(q^p M_p)."""
    p = np.arange(M.p_max + 1)
    return WeightSeq(M.log_values + p * math.log(q), label=f"{q:g}^p*{M.label}", normalized=False)


def load_sequence_csv(path: str) -> WeightSeq:
    """Read (index, value) rows; a header line is skipped."""
    if not os.path.exists(path):
        raise FileError(f"Sequence file not found: {path}")
    try:
        data = np.genfromtxt(path, delimiter=",", comments="#", dtype=float)
    except (OSError, ValueError) as e:
        raise SchemaError(f"Cannot parse sequence CSV {path}: {e}") from e
    data = np.atleast_2d(data)
    if data.shape[1] < 2:
        raise SchemaError(f"Sequence CSV {path} needs (index, value) columns")
    data = data[~np.isnan(data).any(axis=1)]
    order = np.argsort(data[:, 0])
    index, values = data[order, 0], data[order, 1]
    if not np.array_equal(index, np.arange(len(index))):
        raise SchemaError(f"Sequence CSV {path} must list indices 0..P without gaps")
    return WeightSeq.explicit(values, label=os.path.basename(path))


# conditions


def _verdict_m1(M: WeightSeq) -> Verdict:
    tol = get_config().weights.m1_tol
    L = M.log_values
    second = L[2:] - 2 * L[1:-1] + L[:-2]  # index i corresponds to p = i + 1
    scale = np.maximum(1.0, np.abs(L[1:-1]))
    bad = np.nonzero(second < -tol * scale)[0]
    if bad.size:
        p = int(bad[0] + 1)
        return Verdict(name="M.1", status=VerdictStatus.FAILS, witness=[p],
                       constants={"defect": float(-second[bad[0]])})
    return Verdict(name="M.1", status=VerdictStatus.HOLDS)


def _m2_profile(M: WeightSeq) -> Tuple[np.ndarray, np.ndarray]:
    """g(n) = max_{p+q=n} log(M_n / (M_p M_q)) and its argmax p."""
    def compute():
        L = M.log_values
        P = M.p_max
        g = np.zeros(P + 1)
        arg = np.zeros(P + 1, dtype=int)
        for n in range(1, P + 1):
            p = np.arange(n + 1)
            vals = L[n] - L[p] - L[n - p]
            arg[n] = int(np.argmax(vals))
            g[n] = vals[arg[n]]
        return g, arg
    return M._cached("m2_profile", compute)


def _verdict_m2(M: WeightSeq) -> Verdict:
    cfg = get_config().weights
    g, arg = _m2_profile(M)
    P = M.p_max
    n = np.arange(1, P + 1)
    ratio = g[1:] / n
    log_h = float(np.max(ratio))
    log_c = float(max(0.0, np.max(g[1:] - n * log_h)))
    start = ratio[(3 * P) // 4 - 1]
    end = ratio[-1]
    rel = (end - start) / max(abs(start), 1e-12)
    constants = {"C": math.exp(log_c), "H": math.exp(log_h), "tail_increase": float(rel)}
    if rel <= cfg.m2_hold_rel:
        status = VerdictStatus.HOLDS
        witness = None
    elif rel > cfg.m2_fail_rel:
        status = VerdictStatus.FAILS
        witness = [int(arg[P]), int(P - arg[P])]
    else:
        status = VerdictStatus.INCONCLUSIVE
        witness = None
    return Verdict(name="M.2", status=status, witness=witness, constants=constants)


def _verdict_m2_star(M: WeightSeq) -> Verdict:
    cfg = get_config().weights
    q = M.log_quotients
    P = M.p_max
    last_bad = None
    for N in range(1, cfg.m2star_n_max + 1):
        top = P // N
        if top < 2:
            break
        p = np.arange(1, top + 1)
        bad = np.nonzero(math.log(2.0) + q[p] > q[N * p] + 1e-12)[0]
        if not bad.size:
            return Verdict(name="M.2*", status=VerdictStatus.HOLDS, constants={"N": N, "p0": 1})
        worst = int(p[bad[-1]])
        if worst < top // 2:
            return Verdict(name="M.2*", status=VerdictStatus.HOLDS, constants={"N": N, "p0": worst + 1})
        last_bad = [worst, N]
    return Verdict(name="M.2*", status=VerdictStatus.FAILS, witness=last_bad or [1, 1])


def _verdict_m3_prime(M: WeightSeq) -> Verdict:
    margin = get_config().weights.m3_slope_margin
    P = M.p_max
    p = np.arange(1, P + 1)
    log_terms = -M.log_values[1:] / p
    terms = np.exp(log_terms)
    partial = np.cumsum(terms)
    checkpoints = sorted({c for c in (10, 25, 50, 100, 200, 400, 800, 1600, 3200, P) if c <= P})
    trace = [(int(c), float(partial[c - 1])) for c in checkpoints]
    tail = slice(P // 2, P)
    slope = float(np.polyfit(np.log(p[tail]), log_terms[tail], 1)[0])
    constants = {"slope": slope, "partial_sum": float(partial[-1])}
    if slope < -1.0 - margin:
        return Verdict(name="M.3'", status=VerdictStatus.HOLDS, constants=constants, trace=trace)
    if slope > -1.0 + margin:
        weighted = p[tail] * terms[tail]
        hits = np.nonzero(weighted >= 1.0)[0]
        witness = int(p[tail][hits[0]]) if hits.size else P
        return Verdict(name="M.3'", status=VerdictStatus.FAILS, witness=[witness],
                       constants=constants, trace=trace)
    return Verdict(name="M.3'", status=VerdictStatus.INCONCLUSIVE, constants=constants, trace=trace,
                   note="decay exponent within margin of -1")


def _almost_increasing_defect(log_q: np.ndarray) -> Tuple[float, int, int]:
    """max over p <= q of log_q[p] - log_q[q], with the maximizing pair."""
    running = np.maximum.accumulate(log_q)
    where = np.zeros(len(log_q), dtype=int)
    best = 0
    for i in range(len(log_q)):
        if log_q[i] >= log_q[best]:
            best = i
        where[i] = best
    gaps = running - log_q
    q = int(np.argmax(gaps))
    return float(gaps[q]), int(where[q]), q


def _verdict_m4(M: WeightSeq, a: float) -> Verdict:
    tol = get_config().weights.m4_tol
    P = M.p_max
    p = np.arange(1, P + 1)
    log_q = a * M.log_quotients[1:] - np.log(p)  # log m^{a,*}_p
    c_full, p_full, q_full = _almost_increasing_defect(log_q)
    c_half, _, _ = _almost_increasing_defect(log_q[: P // 2])
    constants = {"C": math.exp(c_full), "c_half": c_half, "c_full": c_full}
    if c_full - c_half > tol:
        return Verdict(name=f"M.4_{a:g}", status=VerdictStatus.FAILS,
                       witness=[p_full + 1, q_full + 1], constants=constants)
    return Verdict(name=f"M.4_{a:g}", status=VerdictStatus.HOLDS, constants=constants)


def check_conditions(M: WeightSeq, a: Optional[float] = None) -> ConditionReport:
    """Verdicts on the truncation for (M.1), (M.2), (M.2)*, (M.3)' and optionally (M.4)_a."""
    cfg = get_config().weights
    if M.p_max < cfg.min_p_max:
        raise SchemaError(f"Truncation depth {M.p_max} is below {cfg.min_p_max}")
    report = ConditionReport(
        p_max=M.p_max,
        a=a,
        m1=_verdict_m1(M),
        m2=_verdict_m2(M),
        m2_star=_verdict_m2_star(M),
        m3_prime=_verdict_m3_prime(M),
    )
    if a is not None:
        report.m4 = _verdict_m4(M, a)
        report.dichotomy = relation(WeightSeq.gevrey(1.0 / a, M.p_max), M).kind.value
    logger.info(
        "conditions_checked",
        sequence=M.label,
        p_max=M.p_max,
        m1=report.m1.status.value,
        m2=report.m2.status.value,
        m4=report.m4.status.value if report.m4 else None,
    )
    return report


def fit_m2(M: WeightSeq) -> Tuple[float, float]:
    """Fitted (C, H) of the moderate growth condition."""
    verdict = _verdict_m2(M)
    return verdict.constants["C"], verdict.constants["H"]


# associated function


@dataclass(frozen=True)
class OmegaResult:
    value: float
    p: int


def omega(M: WeightSeq, rho: float) -> OmegaResult:
    """sup_p log(rho^p M_0 / M_p) on the truncation."""
    if rho < 0:
        raise SchemaError(f"rho must be nonnegative, got {rho}")
    if M.is_asymp_one():
        return OmegaResult(0.0, 0) if rho <= 1 else OmegaResult(math.inf, M.p_max)
    if rho == 0:
        return OmegaResult(0.0, 0)
    L = M.log_values
    p = np.arange(M.p_max + 1)
    values = p * math.log(rho) - L
    best = int(np.argmax(values))
    if best == M.p_max:
        raise TruncationSuspect(
            f"omega({rho:g}) attained at the truncation depth {M.p_max}",
            {"rho": rho, "p_max": M.p_max},
        )
    return OmegaResult(float(values[best] + L[0]), best)


def omega_array(M: WeightSeq, rhos: np.ndarray) -> np.ndarray:
    """Vectorized omega without the truncation check."""
    rhos = np.asarray(rhos, dtype=float)
    L = M.log_values
    p = np.arange(M.p_max + 1)
    with np.errstate(divide="ignore", invalid="ignore"):
        values = np.multiply.outer(np.log(rhos), p) - L
    out = values.max(axis=-1) + L[0]
    return np.where(rhos == 0, 0.0, out)


def gamma_cut(Mstar: WeightSeq, rho: float) -> int:
    """min p with m*_{p+1} >= 1/rho."""
    if rho <= 0:
        raise ValueError(f"rho must be positive, got {rho}")
    q = Mstar.log_quotients[1:]  # q[p] = log m*_{p+1}
    hits = np.nonzero(q >= -math.log(rho))[0]
    if not hits.size:
        raise TruncationExceeded(
            f"No p <= {Mstar.p_max - 1} with m*_(p+1) >= {1 / rho:g}", {"rho": rho}
        )
    return int(hits[0])


def stationary_identity(Mstar: WeightSeq, rho: float) -> Tuple[float, float]:
    """Both sides rho^G M*_G and exp(-omega(1/rho)) with G = gamma_cut(rho)."""
    G = gamma_cut(Mstar, rho)
    lhs = math.exp(G * math.log(rho) + Mstar.log(G) - Mstar.log(0))
    rhs = math.exp(-omega(Mstar, 1.0 / rho).value)
    return lhs, rhs


def power_identity_check(M: WeightSeq, a: float, rhos: Sequence[float]) -> float:
    """max |omega_{M^a}(rho) - a omega_M(rho^{1/a})| over rhos."""
    Ma = transform(M, a)
    worst = 0.0
    for rho in rhos:
        lhs = omega(Ma, rho).value
        rhs = a * omega(M, rho ** (1.0 / a)).value
        worst = max(worst, abs(lhs - rhs))
    return worst


# relations


@dataclass(frozen=True)
class RelationResult:
    kind: RelationKind
    slope: float
    L: Optional[float] = None
    C: Optional[float] = None
    reverse_L: Optional[float] = None


def _tail_slope(M: WeightSeq, N: WeightSeq) -> Tuple[np.ndarray, np.ndarray, float]:
    P = min(M.p_max, N.p_max)
    p = np.arange(1, P + 1)
    q = (N.log_values[1: P + 1] - M.log_values[1: P + 1]) / p
    tail = slice((3 * P) // 4, P)
    slope = float(np.polyfit(np.log(p[tail]), q[tail], 1)[0])
    return p, q, slope


def _subset_constants(p: np.ndarray, q: np.ndarray) -> Tuple[float, float]:
    """L and C with M_p <= C L^p N_p, given q_p = log(N_p / M_p) / p."""
    tail = slice(len(p) // 2, len(p))
    log_l = float(-np.min(q[tail]))
    log_c = float(max(0.0, np.max(-p * q - p * log_l)))
    return math.exp(log_l), math.exp(log_c)


def relation(M: WeightSeq, N: WeightSeq) -> RelationResult:
    """Heuristic relation between M and N on the shared truncation."""
    cfg = get_config().weights
    p, q, slope = _tail_slope(M, N)
    if slope > cfg.relation_prec_slope:
        L, C = _subset_constants(p, q)
        return RelationResult(RelationKind.PREC, slope, L=L, C=C)
    if abs(slope) < cfg.relation_bounded_slope:
        L, C = _subset_constants(p, q)
        _, q_rev, slope_rev = _tail_slope(N, M)
        if abs(slope_rev) < cfg.relation_bounded_slope:
            reverse_l, _ = _subset_constants(p, q_rev)
            return RelationResult(RelationKind.ASYMP, slope, L=L, C=C, reverse_L=reverse_l)
        return RelationResult(RelationKind.SUBSET, slope, L=L, C=C)
    if slope < -cfg.relation_prec_slope:
        return RelationResult(RelationKind.NONE, slope)
    return RelationResult(RelationKind.INCONCLUSIVE, slope)


@dataclass(frozen=True)
class FloorFit:
    C: float
    L: float
    p: int


def floor_power_fit(M: WeightSeq, a: float) -> FloorFit:
    """Smallest grid L with M_{floor(a p)} <= C L^p M_p^a, C attained away from the truncation edge."""
    if a <= 0:
        raise SchemaError(f"Exponent must be positive, got {a}")
    lo, hi = get_config().weights.floor_fit_exponents
    P_eff = int(M.p_max / max(1.0, a))
    p = np.arange(P_eff + 1)
    idx = np.floor(a * p + 1e-12).astype(int)
    base = M.log_values[idx] - a * M.log_values[p]
    for k in range(lo, hi + 1):
        log_l = k / 4 * math.log(2.0)
        values = base - p * log_l
        best = int(np.argmax(values))
        if best <= P_eff // 2:
            fit = FloorFit(C=math.exp(float(values[best])), L=2.0 ** (k / 4), p=best)
            logger.debug("floor_power_fit", sequence=M.label, a=a, C=fit.C, L=fit.L, p=fit.p)
            return fit
    raise NoFit(f"No (C, L) fits M_floor(ap) <= C L^p M^a_p for {M.label}, a={a:g}", {"a": a})
