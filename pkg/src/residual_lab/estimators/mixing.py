"""Ulam-type discretisation of the torus transition kernel and its mixing time.

Cell ``i`` sends its mass through ``phi`` and then through the wrapped
Gaussian of width eps.  For pieces with monomial matrices the image of a box
is a box and the kernel factorises over axes, so each axis contributes the
exact cell-averaged probability

    (1/|I|) int_I [Phi((b - y)/eps) - Phi((a - y)/eps)] dy,

evaluated in closed form through ``G(t) = t Phi(t) + phi(t)`` (an
antiderivative of Phi).  Other pieces fall back to the cell-centre image.
"""

from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.special import ndtr

from ..errors import ConfigError, ResourceError
from ..maps import MapSpec

log = logging.getLogger(__name__)

MAX_CELLS = 1 << 24
MAX_NNZ = 60_000_000
TRUNCATION = 6.0


@dataclass
class TransitionGrid:
    m: int
    dimension: int
    epsilon: float
    matrix: sparse.csr_matrix
    defect: float
    map_name: str = ""

    @property
    def n_cells(self) -> int:
        return self.m ** self.dimension

    def row_sums(self):
        return np.asarray(self.matrix.sum(axis=1)).ravel()

    def push(self, dist):
        """One step of the chain applied to a row distribution (or a stack of rows)."""
        return np.asarray(self.matrix.T @ np.asarray(dist).T).T


def min_resolution(epsilon: float) -> int:
    return max(16, math.ceil(4.0 / epsilon))


def _G(t):
    return t * ndtr(t) + np.exp(-0.5 * t * t) / math.sqrt(2 * math.pi)


def _axis_masses(y0, y1, eps, m):
    """Wrapped cell masses on one axis for images uniform on ``[y0, y1)``.

    ``y0``/``y1`` have shape (R,).  Returns ``(first, W)`` with ``W`` of shape
    (R, w): ``W[r, k]`` is the mass that lands in cell ``(first[r] + k) mod m``.
    """
    h = 1.0 / m
    reach = TRUNCATION * eps
    first = np.floor((y0 - reach) * m).astype(np.int64)
    last = np.floor((y1 + reach) * m).astype(np.int64)
    w = int((last - first).max()) + 1
    edges = (first[:, None] + np.arange(w + 1)[None, :]) * h
    width = (y1 - y0)[:, None]
    point = width[:, 0] <= 1e-12 * h
    with np.errstate(invalid="ignore", divide="ignore"):
        # F(e) = (eps / width) * [G((e - y0)/eps) - G((e - y1)/eps)] is the
        # probability of landing below e; cell mass is its difference.
        F = eps / width * (_G((edges - y0[:, None]) / eps) - _G((edges - y1[:, None]) / eps))
    if point.any():
        F[point] = ndtr((edges[point] - y0[point, None]) / eps)
    W = np.diff(F, axis=1)
    valid = np.arange(w)[None, :] <= (last - first)[:, None]
    W = np.where(valid, np.clip(W, 0.0, None), 0.0)
    return first, W


def _piece_cells(piece, m):
    """Per axis: cell indices meeting the piece box and the clipped intervals."""
    out = []
    for a, b in zip(piece.lo, piece.hi):
        a, b = float(a), float(b)
        i0 = int(math.floor(a * m))
        i1 = int(math.ceil(b * m))
        idx = np.arange(i0, min(i1, m))
        lo = np.maximum(idx / m, a)
        hi = np.minimum((idx + 1) / m, b)
        keep = hi > lo
        out.append((idx[keep], lo[keep], hi[keep]))
    return out


def build_transition_grid(map: MapSpec, epsilon: float, m: int | None = None) -> TransitionGrid:
    """Row-stochastic ``m^d x m^d`` approximation of the one-step torus kernel."""
    if not epsilon > 0:
        raise ConfigError("epsilon must be > 0 for a transition grid (the eps = 0 kernel is singular)")
    d = map.dimension
    need = min_resolution(epsilon)
    m = need if m is None else int(m)
    if m < need:
        raise ConfigError(f"resolution m={m} does not resolve eps={epsilon}; need m >= {need}")
    n = m ** d
    if n > MAX_CELLS:
        raise ResourceError(f"grid has {m}^{d} = {n} cells (> {MAX_CELLS})")
    lo_a, hi_a, A, b = map.arrays
    rows, cols, vals = [], [], []
    nnz = 0
    strides = m ** np.arange(d - 1, -1, -1)
    for pi, piece in enumerate(map.pieces):
        cells = _piece_cells(piece, m)
        mono = piece.monomial
        # per target axis k: cell offsets and masses indexed by the source cell on that axis
        axis_tables = []
        for k in range(d):
            if mono is not None:
                j = mono[k]
                idx, s0, s1 = cells[j]
                e0 = A[pi, k, j] * s0 + b[pi, k]
                e1 = A[pi, k, j] * s1 + b[pi, k]
                first, W = _axis_masses(np.minimum(e0, e1), np.maximum(e0, e1), epsilon, m)
                axis_tables.append((j, first, W))
            else:
                axis_tables.append(None)
        if mono is None:
            # cell-centre image of each (clipped) sub-box
            grids = np.meshgrid(*[(c[1] + c[2]) / 2 for c in cells], indexing="ij")
            centres = np.stack([g.ravel() for g in grids], axis=1)
            img = centres @ A[pi].T + b[pi]
            per_axis = [_axis_masses(img[:, k], img[:, k], epsilon, m) for k in range(d)]
            src = np.stack(np.meshgrid(*[c[0] for c in cells], indexing="ij"), -1).reshape(-1, d)
            vol = np.prod(np.stack(np.meshgrid(*[(c[2] - c[1]) * m for c in cells],
                                               indexing="ij"), -1).reshape(-1, d), axis=1)
            R, rr, cc, vv = _combine_rows(src, vol, [(p[0], p[1]) for p in per_axis], m, strides)
        else:
            src = np.stack(np.meshgrid(*[np.arange(len(c[0])) for c in cells], indexing="ij"),
                           -1).reshape(-1, d)
            cell_idx = np.stack([cells[k][0][src[:, k]] for k in range(d)], axis=1)
            vol = np.prod(np.stack([(cells[k][2] - cells[k][1])[src[:, k]] * m for k in range(d)],
                                   axis=1), axis=1)
            tabs = []
            for k in range(d):
                j, first, W = axis_tables[k]
                tabs.append((first[src[:, j]], W[src[:, j]]))
            R, rr, cc, vv = _combine_rows(cell_idx, vol, tabs, m, strides)
        nnz += vv.size
        if nnz > MAX_NNZ:
            raise ResourceError(f"transition grid would hold more than {MAX_NNZ} nonzeros")
        rows.append(rr)
        cols.append(cc)
        vals.append(vv)
    P = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)
    ).tocsr()
    P.sum_duplicates()
    sums = np.asarray(P.sum(axis=1)).ravel()
    if (sums <= 0).any():
        raise ResourceError("some grid cells received no mass; the map does not cover Q0")
    defect = float(np.abs(sums - 1.0).max())
    P = sparse.diags(1.0 / sums) @ P
    P = P.tocsr()
    log.info("transition grid m=%d eps=%g: nnz=%d, renormalisation defect %.3g", m, epsilon, P.nnz,
             defect)
    return TransitionGrid(m, d, float(epsilon), P, defect, map.name)


def _combine_rows(cell_idx, vol, tabs, m, strides):
    """Outer products of per-axis mass tables -> COO triplets for the given source cells."""
    d = cell_idx.shape[1]
    row = cell_idx @ strides
    mass = vol[:, None]
    col = np.zeros((len(row), 1), np.int64)
    for k in range(d):
        first, W = tabs[k]
        w = W.shape[1]
        tgt = np.mod(first[:, None] + np.arange(w)[None, :], m)
        mass = (mass[:, :, None] * W[:, None, :]).reshape(len(row), -1)
        col = (col[:, :, None] + tgt[:, None, :] * strides[k]).reshape(len(row), -1)
    keep = mass > 0
    rr = np.broadcast_to(row[:, None], mass.shape)[keep]
    return len(row), rr, col[keep], mass[keep]


@dataclass(frozen=True)
class MixingResult:
    t_mix: int
    trace: np.ndarray
    threshold: float
    extrapolated: bool = False

    def to_csv(self) -> str:
        lines = ["k,tv"]
        lines += [f"{k},{float(tv)!r}" for k, tv in enumerate(self.trace)]
        return "\n".join(lines) + "\n"


def mixing_time(grid: TransitionGrid, threshold: float = 0.25, cap: int = 1_000_000,
                chunk: int = 4096) -> MixingResult:
    """First k with ``max_x 1/2 |p_k(x, .) - 1|_1 <= threshold``.

    Every cell-concentrated start is propagated (in chunks of ``chunk``
    starts).  Distance to uniform is nonincreasing in k, so each chunk can stop
    at its own crossing time and t_mix is the largest of them.  ``trace[k]``
    is the worst distance over all starts at step k.
    """
    n = grid.n_cells
    PT = grid.matrix.T.tocsr()
    trace = np.zeros(0)
    t_mix = 0
    for s0 in range(0, n, chunk):
        s1 = min(n, s0 + chunk)
        E = np.zeros((n, s1 - s0))
        E[np.arange(s0, s1), np.arange(s1 - s0)] = 1.0
        k = 0
        tvs = []
        while True:
            tv = 0.5 * float(np.abs(E * n - 1.0).sum(axis=0).max()) / n
            tvs.append(tv)
            if tv <= threshold:
                break
            if k >= cap:
                raise ResourceError(
                    f"mixing time exceeds {cap} iterations; eps may be too small for m={grid.m}"
                )
            E = PT @ E
            k += 1
        t_mix = max(t_mix, k)
        tvs = np.asarray(tvs)
        if tvs.size > trace.size:
            tvs, trace = trace, tvs
        trace[:tvs.size] = np.maximum(trace[:tvs.size], tvs)
    return MixingResult(t_mix, trace, threshold)


def tv_trace(grid: TransitionGrid, n_steps: int, chunk: int = 4096):
    """Worst-case distance to uniform after k = 0..n_steps steps."""
    n = grid.n_cells
    PT = grid.matrix.T.tocsr()
    trace = np.zeros(n_steps + 1)
    for s0 in range(0, n, chunk):
        s1 = min(n, s0 + chunk)
        E = np.zeros((n, s1 - s0))
        E[np.arange(s0, s1), np.arange(s1 - s0)] = 1.0
        for k in range(n_steps + 1):
            if k:
                E = PT @ E
            trace[k] = max(trace[k], 0.5 * float(np.abs(E * n - 1.0).sum(axis=0).max()) / n)
    return trace


def fit_log_cube(eps, t_mix):
    """Least-squares C in ``t_mix ~ C |ln eps|^3``."""
    x = np.abs(np.log(np.asarray(eps, float))) ** 3
    t = np.asarray(t_mix, float)
    return float(x @ t / (x @ x))


_MIX_CACHE = {}


def _cached_mixing_time(map, epsilon):
    key = (map, float(epsilon))
    if key not in _MIX_CACHE:
        _MIX_CACHE[key] = mixing_time(build_transition_grid(map, epsilon))
    return _MIX_CACHE[key]


def mixing_time_for(map: MapSpec, epsilon: float, max_cells: int = 4096, reference=None):
    """Mixing time at the resolution ``min_resolution(eps)``.

    When that grid would exceed ``max_cells`` cells the value is extrapolated
    as ``C |ln eps|^3`` with C fitted to computed values at ``reference``
    epsilons, and the result is flagged.  Computed values are memoised per
    (map, eps).
    """
    m = min_resolution(epsilon)
    if m ** map.dimension <= max_cells:
        return _cached_mixing_time(map, epsilon)
    if reference is None:
        reference = [e for e in (1e-1, 3e-2, 1e-2, 3e-3, 1e-3)
                     if min_resolution(e) ** map.dimension <= max_cells]
    if not reference:
        raise ResourceError("no computable reference epsilon for mixing-time extrapolation")
    ts = [_cached_mixing_time(map, e).t_mix for e in reference]
    C = fit_log_cube(reference, ts)
    t = int(math.ceil(C * abs(math.log(epsilon)) ** 3))
    log.info("mixing time at eps=%g extrapolated from %s: %d", epsilon, reference, t)
    return MixingResult(t, np.zeros(0), 0.25, extrapolated=True)
