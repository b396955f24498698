"""
Quadrature helpers shared by the boundary-value evaluators.
"""

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np
import structlog
from numpy.polynomial.legendre import leggauss
from scipy.integrate import quad, quad_vec

from shared.config import get_config
from shared.errors import QuadratureNoConvergence

logger = structlog.get_logger(__name__)


@lru_cache(maxsize=16)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    nodes, weights = leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def graded_edges(radius: float, levels: int, step: float = 0.5, centers: Sequence[float] = (0.0,)) -> np.ndarray:
    """Uniform panels of width step on [-radius, radius], refined geometrically towards each center."""
    edges = set(np.round(np.arange(-radius, radius + step / 2, step), 12))
    for c in centers:
        for k in range(1, levels + 1):
            for sign in (-1.0, 1.0):
                e = c + sign * step * 2.0 ** (-k)
                if -radius < e < radius:
                    edges.add(round(e, 15))
        if -radius < c < radius:
            edges.add(float(c))
    return np.array(sorted(edges))


def composite_nodes(edges: np.ndarray, order: Optional[int] = None) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of composite Gauss-Legendre over consecutive edges."""
    order = order or get_config().boundary.gl_order
    x, w = gauss_legendre(order)
    a, b = edges[:-1, None], edges[1:, None]
    half = 0.5 * (b - a)
    nodes = (a + b) / 2 + half * x[None, :]
    weights = half * w[None, :]
    return nodes.ravel(), weights.ravel()


def quad_complex(
    fn: Callable[[float], complex],
    a: float,
    b: float,
    points: Optional[Sequence[float]] = None,
    tol: Optional[float] = None,
    limit: int = 400,
) -> Tuple[complex, float]:
    """Adaptive integral of a complex integrand, real and imaginary parts separately."""
    tol = tol or get_config().boundary.quad_tol
    inner = sorted({p for p in (points or []) if a < p < b})
    total = 0j
    error = 0.0
    for part, pick in (("re", lambda z: z.real), ("im", lambda z: z.imag)):
        out = quad(lambda s: pick(complex(fn(s))), a, b, points=inner or None,
                   epsabs=tol, epsrel=tol, limit=limit, full_output=1)
        value, err = out[0], out[1]
        if len(out) > 3 and err > 100 * tol:
            raise QuadratureNoConvergence(
                f"Integral over [{a:g}, {b:g}] did not converge: {out[3]}",
                {"part": part, "error": err},
            )
        total += value if part == "re" else 1j * value
        error += err
    return total, error


def quad_vec_complex(
    fn: Callable[[float], np.ndarray],
    segments: Sequence[Tuple[float, float]],
    tol: Optional[float] = None,
) -> Tuple[np.ndarray, float]:
    """quad_vec of a complex vector integrand over consecutive segments."""
    tol = tol or get_config().boundary.quad_tol

    def split(s: float) -> np.ndarray:
        z = np.atleast_1d(np.asarray(fn(s), dtype=complex))
        return np.concatenate([z.real, z.imag])

    total = None
    error = 0.0
    for a, b in segments:
        if b <= a:
            continue
        value, err, info = quad_vec(split, a, b, epsabs=tol, epsrel=tol, limit=20000, full_output=True)
        if not info.success:
            raise QuadratureNoConvergence(
                f"Vector integral over [{a:g}, {b:g}] did not converge",
                {"error": float(err), "intervals": int(info.intervals.shape[0])},
            )
        total = value if total is None else total + value
        error += float(err)
    if total is None:
        return np.zeros(0, dtype=complex), 0.0
    n = total.shape[0] // 2
    return total[:n] + 1j * total[n:], error


@dataclass
class Extrapolation:
    """Richardson table over a halving schedule."""
    value: complex
    error: float
    order: Optional[float]
    diagonal: List[complex] = field(default_factory=list)


def detect_order(values: Sequence[complex], noise: float) -> Optional[float]:
    """Empirical convergence order for a halving schedule, from the last three differences."""
    if len(values) < 3:
        return None
    d1 = abs(values[-2] - values[-3])
    d2 = abs(values[-1] - values[-2])
    if d1 <= noise or d2 <= noise:
        return None
    return math.log2(d1 / d2)


def richardson(values: Sequence[complex], noise: Optional[float] = None, max_order: Optional[int] = None) -> Extrapolation:
    """Romberg-style extrapolation with integer orders starting at the detected one."""
    cfg = get_config().boundary
    noise = cfg.noise_tol if noise is None else noise
    max_order = max_order or cfg.richardson_max_order
    order = detect_order(values, noise)
    if order is None:
        value = complex(values[-1])
        err = abs(values[-1] - values[-2]) if len(values) > 1 else 0.0
        return Extrapolation(value, err, None, [value])
    p0 = max(1, int(round(order)))
    table: List[List[complex]] = []
    for k, v in enumerate(values):
        row = [complex(v)]
        for j in range(min(k, max_order)):
            factor = 2.0 ** (p0 + j)
            row.append((factor * row[j] - table[k - 1][j]) / (factor - 1.0))
        table.append(row)
    diagonal = [row[-1] for row in table]
    value = diagonal[-1]
    err = max(abs(diagonal[-1] - diagonal[-2]), abs(diagonal[-2] - diagonal[-3])) if len(diagonal) >= 3 else abs(value)
    return Extrapolation(value, float(err), order, diagonal)


def decaying(values: Sequence[complex], factor: float, noise: float) -> bool:
    """The last three differences shrink by at least factor, or sit at rounding level."""
    if len(values) < 4:
        return False
    diffs = [abs(values[-k] - values[-k - 1]) for k in (3, 2, 1)]
    if all(d <= noise for d in diffs):
        return True
    return all(b <= noise or (a > 0 and a / b >= factor) for a, b in zip(diffs, diffs[1:]))
