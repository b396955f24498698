"""
Growth class of a function near t = 0.
"""

import math
from typing import Optional, Tuple

import numpy as np
import structlog

from analysis.weights import WeightSeq, omega_array, transform
from boundary.kernels import ClosedForm
from shared.config import get_config
from shared.models import GrowthFit

logger = structlog.get_logger(__name__)


def _sup_grid(radius: float) -> np.ndarray:
    coarse = np.linspace(-radius, radius, 2001)
    fine = np.geomspace(1e-6, 1.0, 400)
    return np.unique(np.concatenate([coarse, fine, -fine, [0.0]]))


def sup_profile(f: ClosedForm, ts: np.ndarray, radius: Optional[float] = None) -> np.ndarray:
    """sup_x |f(x, t)| over both sides t and -t."""
    xs = _sup_grid(radius or get_config().boundary.x_radius)
    out = np.empty(len(ts))
    for i, t in enumerate(ts):
        values = np.abs(np.concatenate([f(xs, t), f(xs, -t)]))
        out[i] = float(np.nanmax(values[np.isfinite(values)]))
    return out


def growth_fit(
    f: ClosedForm,
    window: Optional[Tuple[int, int]] = None,
    M: Optional[WeightSeq] = None,
    b0: float = 1.0,
) -> GrowthFit:
    """Smallest polynomial order N, and with M the largest h on a dyadic sweep keeping the envelope bounded."""
    cfg = get_config()
    lo, hi = window or cfg.boundary.growth_window
    ts = np.array([2.0 ** (-k) for k in range(hi, lo + 1)])
    sups = sup_profile(f, ts)
    positive = sups > 0
    if positive.sum() < 2:
        return GrowthFit(kind="polynomial", n=0, slope=0.0, window=(float(ts[-1]), float(ts[0])), fit_residual=0.0)

    lt, ls = np.log(ts[positive]), np.log(sups[positive])
    coeffs = np.polyfit(lt, ls, 1)
    slope = float(coeffs[0])
    residual = float(np.sqrt(np.mean((np.polyval(coeffs, lt) - ls) ** 2)))
    n = max(0, math.ceil(-slope - cfg.indices.growth_slope_tol))
    fit = GrowthFit(
        kind="polynomial",
        n=n,
        slope=slope,
        window=(float(ts[-1]), float(ts[0])),
        fit_residual=residual,
    )

    if M is not None:
        Mstar = transform(M, b0, star=True)
        best = None
        for k in range(-4, 7):
            h = 2.0 ** k
            weighted = ls - omega_array(Mstar, 1.0 / (h * ts[positive]))
            # nonincreasing as t -> 0, ts are decreasing
            if np.all(np.diff(weighted) <= 1e-9):
                best = h
        fit.kind = "gevrey"
        fit.h_fit = best
        fit.b0 = b0
    logger.info("growth_fit", kind=fit.kind, n=fit.n, slope=slope, h_fit=fit.h_fit)
    return fit
