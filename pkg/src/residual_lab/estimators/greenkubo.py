"""Green-Kubo sums and correlation decay from exact noiseless orbits.

Both work on a stratified midpoint grid ``(2j + 1) / (2g)`` per axis, standing
in for the uniform law on Q0, and iterate it with exact rational arithmetic
(floating point would collapse dyadic orbits of the doubling map to 0).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import EstimationError, ResourceError
from ..maps import MapSpec
from ..process import ExactOrbits

log = logging.getLogger(__name__)

MAX_GRID_POINTS = 1 << 22


@dataclass(frozen=True)
class GreenKuboResult:
    """``cov[k]`` is the lag-k increment autocovariance (``cov[0]`` the variance);
    ``partial_sums[k] = cov[0] + 2 * sum(cov[1..k])``."""

    cov: np.ndarray
    partial_sums: np.ndarray
    exact_cov: tuple
    grid_size: int
    increment: str
    plateau_lag: int | None

    def to_csv(self) -> str:
        lines = ["k,cov,partial_sum"]
        for k, (c, s) in enumerate(zip(self.cov, self.partial_sums)):
            lines.append(f"{k},{float(c)!r},{float(s)!r}")
        return "\n".join(lines) + "\n"


def plateau_index(values, tol, run=3):
    """First k with ``|values[j] - values[j-1]| <= tol`` for ``j = k+1 .. k+run``."""
    diffs = np.abs(np.diff(np.asarray(values, float))) <= tol
    for k in range(len(diffs) - run + 1):
        if diffs[k:k + run].all():
            return k
    return None


def _grid_points(d, grid_size):
    total = grid_size ** d
    if total > MAX_GRID_POINTS:
        raise ResourceError(f"grid of {grid_size}^{d} = {total} points exceeds {MAX_GRID_POINTS}")
    return total


def _as_big(a):
    return a.astype(object) if a.dtype != object else a


def green_kubo(map: MapSpec, v=None, n_max: int = 8, grid_size: int = 1 << 16,
               increment: str = "state", max_bits: int = 4096, plateau_tol: float = 1e-3):
    """Partial sums of ``var(v.d_0) + 2 sum_n cov(v.d_0, v.d_n)`` over exact orbits.

    ``increment="state"`` uses ``d_n = X_{n+1} - X_n``; ``increment="lattice"``
    uses ``floor(X_{n+1}) - floor(X_n)``, the increments of S at zero noise.
    Covariances are evaluated exactly over the grid and returned both as
    ``Fraction`` (per axis pair) and as floats for the direction v.
    """
    if increment not in ("state", "lattice"):
        raise EstimationError(f"unknown increment kind {increment!r}")
    if n_max < 0:
        raise EstimationError("n_max must be >= 0")
    d = map.dimension
    P = _grid_points(d, grid_size)
    v = np.ones(d) if v is None else np.asarray(v, float).reshape(-1)
    v = v / np.linalg.norm(v)
    orbit = ExactOrbits.midpoint_grid(map, grid_size, max_bits=max_bits)
    states = [(orbit.num.copy(), orbit.den)]
    for _ in range(n_max + 1):
        orbit.step()
        states.append((orbit.num.copy(), orbit.den))
    if increment == "lattice":
        floors = [_as_big(num // den) for num, den in states]
        incs = [floors[k + 1] - floors[k] for k in range(n_max + 1)]
        L = 1
    else:
        L = 1
        for _, den in states:
            L = math.lcm(L, den)
        scaled = [_as_big(num) * (L // den) for num, den in states]
        incs = [scaled[k + 1] - scaled[k] for k in range(n_max + 1)]
    sums = [inc.sum(axis=0) for inc in incs]
    exact = []
    for lag in range(n_max + 1):
        c = [[Fraction(int(np.dot(incs[0][:, i], incs[lag][:, j])), P * L * L)
              - Fraction(int(sums[0][i]) * int(sums[lag][j]), P * P * L * L)
              for j in range(d)] for i in range(d)]
        exact.append(c)
    cov = np.array([float(sum(v[i] * v[j] * float(c[i][j]) for i in range(d) for j in range(d)))
                    for c in exact])
    partial = cov[0] + 2 * np.concatenate(([0.0], np.cumsum(cov[1:])))
    return GreenKuboResult(cov, partial, tuple(exact), grid_size, increment,
                           plateau_index(partial, plateau_tol))


@dataclass(frozen=True)
class CorrelationDecay:
    """``c[n]`` with the per-lag quadrature noise estimate ``noise[n]``."""

    c: np.ndarray
    gamma: float | None
    noise_floor: float
    fit_range: tuple | None
    grid_size: int
    noise: np.ndarray | None = None

    @property
    def status(self) -> str:
        return "undefined (all c_n below noise floor)" if self.gamma is None else "fitted"


def default_correlation_grid(d):
    # primes p with b**n != +-1 (mod p) for b <= 8, n <= 30, so that orbits of
    # m-ary expanding maps neither collapse nor return within the lag range
    return 16411 if d == 1 else 1031


def _cov(f, g):
    return abs(float(np.mean(f * g)) - float(f.mean()) * float(g.mean()))


def correlation_decay(map: MapSpec, f, g=None, n_max: int = 20, grid_size: int | None = None,
                      noise_floor: float | None = None):
    """``c_n = |<f, g o phi^n> - <f><g>|`` on the torus for ``n = 0..n_max``.

    ``f`` and ``g`` take an array of torus points (shape (P,) when d = 1,
    (P, d) otherwise) and return P values.  The decay rate is the negative
    slope of ``log c_n`` over the leading run of steps with ``c_n`` above
    10 times the noise floor.  With ``noise_floor=None`` the floor at lag n
    is the larger of ``max|f| max|g| / grid_size`` and the disagreement
    between the two interleaved half grids (even and odd point index); the
    latter tracks the growing roughness of ``g o phi^n``.
    """
    if n_max > 30:
        raise EstimationError("n_max must be <= 30")
    g = f if g is None else g
    d = map.dimension
    size = default_correlation_grid(d) if grid_size is None else int(grid_size)
    _grid_points(d, size)
    orbit = ExactOrbits.midpoint_grid(map, size, torus=True)

    def pts():
        x = orbit.as_float()
        return x[:, 0] if d == 1 else x

    x0 = pts()
    fx = np.asarray(f(x0), float).reshape(-1)
    gx = np.asarray(g(x0), float).reshape(-1)
    even = np.arange(fx.size) % 2 == 0
    static = float(np.abs(fx).max() * np.abs(gx).max()) / size
    c = np.empty(n_max + 1)
    noise = np.empty(n_max + 1)
    for n in range(n_max + 1):
        if n:
            orbit.step()
        gn = gx if n == 0 else np.asarray(g(pts()), float).reshape(-1)
        c[n] = _cov(fx, gn)
        noise[n] = abs(_cov(fx[even], gn[even]) - _cov(fx[~even], gn[~even]))
    if noise_floor is None:
        floor = np.maximum(noise, static)
        noise_floor = static
    else:
        floor = np.full(n_max + 1, float(noise_floor))
    ok = (c > 10 * floor) & (c > 0)
    gamma, fit = None, None
    idx = np.flatnonzero(ok)
    if idx.size >= 2:
        stop = idx[0]
        while stop + 1 < c.size and ok[stop + 1]:
            stop += 1
        run = np.arange(idx[0], stop + 1)
        if run.size >= 2:
            slope = np.polyfit(run, np.log(c[run]), 1)[0]
            gamma, fit = float(-slope), (int(run[0]), int(run[-1]))
    if gamma is None:
        log.info("correlation decay: fewer than two consecutive c_n above 10 x noise floor")
    return CorrelationDecay(c, gamma, float(noise_floor), fit, size, noise)
