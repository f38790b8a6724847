"""Asymptotic variance ``lim var(v.X_n) / n`` from ensemble moments."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from ..errors import EstimationError

log = logging.getLogger(__name__)

MIN_WINDOW = 10
MIN_BATCHES = 8


@dataclass(frozen=True)
class AsyVarEstimate:
    slope: float
    stderr: float
    window: tuple
    method: str = "ols-final-window/batch-means"
    intercept: float = 0.0
    batch_slopes: tuple = ()

    def __post_init__(self):
        if not self.stderr >= 0:
            raise EstimationError(f"negative or undefined stderr {self.stderr}")
        if not self.window[0] < self.window[1]:
            raise EstimationError(f"empty window {self.window}")

    def zscore(self, target) -> float:
        if self.stderr == 0:
            return 0.0 if self.slope == target else math.copysign(math.inf, self.slope - target)
        return (self.slope - target) / self.stderr


def _ols(n, y):
    """Slopes and intercepts of the least-squares lines through each row of ``y``."""
    x = n - n.mean()
    sxx = float(x @ x)
    y = np.atleast_2d(y)
    ybar = y.mean(axis=1)
    slope = (y - ybar[:, None]) @ x / sxx
    return slope, ybar - slope * n.mean()


def asyvar_fit(moments, window_fraction: float = 0.5, quantity: str = "X") -> AsyVarEstimate:
    """OLS slope of var(v.X_n) on n over ``[window_fraction * N, N]``.

    The error bar is the standard deviation of the slopes fitted to each batch
    sub-ensemble, divided by sqrt(number of batches).
    """
    if not 0 < window_fraction < 1:
        raise EstimationError("window_fraction must lie in (0, 1)")
    N = moments.n_steps
    if N < 100:
        log.warning("asyvar_fit on a short horizon (N=%d < 100); transients may bias the slope", N)
    n_lo = math.ceil(window_fraction * N)
    n = np.arange(n_lo, N + 1, dtype=float)
    if n.size < MIN_WINDOW:
        raise EstimationError(f"fit window [{n_lo}, {N}] has {n.size} points (< {MIN_WINDOW})")
    slope, intercept = _ols(n, moments.var_of(quantity)[n_lo:])
    bvar = moments.batch_var(quantity)
    B = bvar.shape[0]
    if B < MIN_BATCHES:
        raise EstimationError(f"batch-means error bars need >= {MIN_BATCHES} batches, got {B}")
    bslope, _ = _ols(n, bvar[:, n_lo:])
    stderr = float(np.std(bslope, ddof=1) / math.sqrt(B))
    return AsyVarEstimate(float(slope[0]), stderr, (n_lo, N), intercept=float(intercept[0]),
                          batch_slopes=tuple(float(s) for s in bslope))


def ratio_estimate(moments, n: int | None = None, quantity: str = "X") -> AsyVarEstimate:
    """``var(v.Q_n) / n`` at a single step with batch-means stderr (used for var(S_n)/n)."""
    N = moments.n_steps if n is None else int(n)
    if not 1 <= N <= moments.n_steps:
        raise EstimationError(f"step {N} outside 1..{moments.n_steps}")
    value = float(moments.var_of(quantity)[N]) / N
    per = moments.batch_var(quantity)[:, N] / N
    B = per.size
    if B < 2:
        raise EstimationError("need at least two batches for an error bar")
    stderr = float(np.std(per, ddof=1) / math.sqrt(B))
    return AsyVarEstimate(value, stderr, (0, N), method="ratio/batch-means",
                          batch_slopes=tuple(float(s) for s in per))
