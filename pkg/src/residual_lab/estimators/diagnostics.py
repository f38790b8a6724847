"""Monte Carlo checks of the supporting lemmas: jump moments, i.i.d. lattice
increments, subgaussian tails, decorrelation of noise-induced crossings,
stationarity and the S/J/R bookkeeping."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from ..errors import EstimationError
from ..maps import MapSpec, apply_map
from ..process import (InitialDistribution, SimulationConfig, iter_path_chunks,
                       simulate_float_reference)
from ..rng import STREAM_AUX, STREAM_NOISE, normals, uniforms

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MCEstimate:
    value: float
    stderr: float
    n_samples: int


def delta_moment(map: MapSpec, epsilon: float, p: float = 1.0, n_samples: int = 10**6,
                 seed: int = 0, chunk: int = 1 << 20) -> MCEstimate:
    """Monte Carlo ``E|Delta_0|^p`` with ``Delta_0 = floor(phi(U) + eps xi) - floor(phi(U))``.

    U ~ unif(Q0); ``|.|`` is the Euclidean norm.  Chunks are fixed blocks of
    sample indices, so the value depends only on ``(seed, n_samples)``.
    """
    if epsilon < 0:
        raise EstimationError("epsilon must be >= 0")
    d = map.dimension
    if epsilon == 0:
        return MCEstimate(0.0, 0.0, int(n_samples))
    total = 0.0
    total2 = 0.0
    for s in range(0, n_samples, chunk):
        k = min(chunk, n_samples - s)
        u = uniforms(seed, s, k, d, STREAM_AUX)
        xi = normals(seed, s, k, d, STREAM_NOISE)
        y = apply_map(map, u if d > 1 else u[:, 0])
        y = np.asarray(y, float).reshape(k, d)
        jump = np.floor(y + epsilon * xi) - np.floor(y)
        a = np.sqrt((jump * jump).sum(axis=1)) ** p
        total += float(a.sum())
        total2 += float((a * a).sum())
    mean = total / n_samples
    var = max(total2 / n_samples - mean * mean, 0.0) * n_samples / max(n_samples - 1, 1)
    return MCEstimate(mean, math.sqrt(var / n_samples), int(n_samples))


# --- independence of lattice increments --------------------------------------


@dataclass(frozen=True)
class IndependenceTest:
    lag: int
    p_value: float
    statistic: float
    dof: int
    n_pairs: int
    categories: tuple


def _coarsen(labels, min_expected, n_total, other):
    """Merge rare categories into ``other`` so that expected counts stay >= min_expected."""
    vals, counts = np.unique(labels, return_counts=True)
    rare = vals[counts < min_expected]
    out = labels.copy()
    if rare.size:
        out[np.isin(out, rare)] = other
    return out


def chi2_independence(x, y, min_expected: float = 5.0):
    """Chi-square test of independence for paired integer labels.

    Categories whose marginal count is too small to give expected cell counts
    of ``min_expected`` are pooled; raises if fewer than two categories remain
    on either side.
    """
    x = np.asarray(x, np.int64).ravel()
    y = np.asarray(y, np.int64).ravel()
    n = x.size
    other = np.iinfo(np.int64).min
    for _ in range(8):
        cx, nx = np.unique(x, return_counts=True)
        cy, ny = np.unique(y, return_counts=True)
        # expected count of cell (a, b) is nx[a] ny[b] / n
        need_x = min_expected * n / ny.min()
        need_y = min_expected * n / nx.min()
        if nx.min() >= need_x and ny.min() >= need_y:
            break
        if nx.min() < need_x:
            x = _coarsen(x, need_x, n, other)
        if ny.min() < need_y:
            y = _coarsen(y, need_y, n, other)
    cx, ix = np.unique(x, return_inverse=True)
    cy, iy = np.unique(y, return_inverse=True)
    if cx.size < 2 or cy.size < 2:
        raise EstimationError("fewer than two populated categories; no independence test possible")
    table = np.zeros((cx.size, cy.size), np.int64)
    np.add.at(table, (ix, iy), 1)
    if (np.outer(table.sum(1), table.sum(0)) / n).min() < min_expected:
        raise EstimationError("expected counts below threshold even after coarsening")
    stat, p, dof, _ = stats.chi2_contingency(table, correction=False)
    return float(stat), float(p), int(dof), tuple(int(c) for c in cx)


def _encode(D):
    """Integer label per lattice vector (rows of an int array)."""
    if D.shape[-1] == 1:
        return D[..., 0]
    base = 1 << 20
    lab = np.zeros(D.shape[:-1], np.int64)
    for k in range(D.shape[-1]):
        lab = lab * base + (D[..., k] + base // 2)
    return lab


def increment_independence(map: MapSpec, epsilon: float, n_steps: int = 64,
                           n_paths: int = 20000, lags=(1,), seed: int = 0,
                           require_bernoulli: bool = True):
    """Chi-square tests of ``D_t`` against ``D_{t+lag}``, D the S increments.

    Pairs never share an increment: within a path, pairs start at
    ``t = 2 lag q + r`` for ``r < lag``, so under the i.i.d. hypothesis all
    pairs are independent.  Paths start from pi_0.
    """
    if require_bernoulli and map.bernoulli is None:
        raise EstimationError("increment independence is claimed only for Bernoulli maps")
    cfg = SimulationConfig(map, epsilon, n_steps, n_paths, InitialDistribution.uniform(), seed=seed)
    lags = tuple(int(l) for l in lags)
    pairs = {l: ([], []) for l in lags}
    for traj in iter_path_chunks(cfg):
        labels = _encode(traj.D)
        for l in lags:
            t = np.array([t for t in range(n_steps - l) if (t // l) % 2 == 0])
            if t.size == 0:
                raise EstimationError(f"n_steps={n_steps} too short for lag {l}")
            pairs[l][0].append(labels[:, t].ravel())
            pairs[l][1].append(labels[:, t + l].ravel())
    out = []
    for l in lags:
        x = np.concatenate(pairs[l][0])
        y = np.concatenate(pairs[l][1])
        stat, p, dof, cats = chi2_independence(x, y)
        out.append(IndependenceTest(l, p, stat, dof, x.size, cats))
    return out


# --- subgaussian scale -------------------------------------------------------


@dataclass(frozen=True)
class Psi2Fit:
    c: float
    stderr: float
    bounded_only: bool = False


def _psi2_point(y, lo=None, hi=None, iters=200):
    ymax = float(y.max())
    if ymax == 0.0:
        return 0.0, False
    n = y.size
    log2 = math.log(2.0)

    def excess(c):
        # log mean exp(y^2 / c^2) - log 2, decreasing in c
        a = (y / c) ** 2
        amax = a.max()
        return amax + math.log(np.exp(a - amax).sum()) - math.log(n) - log2

    # bracket: at ymax/sqrt(ln 2n) the largest term alone gives mean >= 2;
    # at ymax/sqrt(ln 2) every term is <= 2
    a_lo = ymax / math.sqrt(math.log(2.0 * n))
    a_hi = ymax / math.sqrt(log2)
    if lo is not None:
        a_lo = max(a_lo, lo)
    if hi is not None:
        a_hi = min(a_hi, hi)
        if excess(a_hi) > 0:
            return a_hi, True
    for _ in range(iters):
        mid = math.sqrt(a_lo * a_hi)
        if excess(mid) > 0:
            a_lo = mid
        else:
            a_hi = mid
        if a_hi - a_lo <= 1e-12 * a_hi:
            break
    return 0.5 * (a_lo + a_hi), False


def tail_diagnostic(samples, c_range=None, winsor: float = 1e-4, n_boot: int = 100,
                    seed: int = 0, min_samples: int = 10**5) -> Psi2Fit:
    """Empirical psi_2 scale ``inf{c : mean exp(|Y|^2 / c^2) <= 2}``.

    The top ``winsor`` fraction of |Y| is clipped before fitting.  With
    ``c_range = (lo, hi)`` a root above ``hi`` is reported as the bound ``hi``
    (``bounded_only``).  The error bar is a bootstrap standard deviation.
    """
    y = np.abs(np.asarray(samples, float).ravel())
    if y.size < min_samples:
        raise EstimationError(f"need >= {min_samples} samples, got {y.size}")
    if not np.isfinite(y).all():
        raise EstimationError("samples must be finite")
    if winsor > 0:
        y = np.minimum(y, np.quantile(y, 1.0 - winsor))
    lo, hi = (None, None) if c_range is None else c_range
    c, bounded = _psi2_point(y, lo, hi)
    if c == 0.0 or n_boot <= 1:
        return Psi2Fit(c, 0.0, bounded)
    rng = np.random.default_rng(seed)
    boots = [_psi2_point(y[rng.integers(0, y.size, y.size)], lo, hi)[0] for _ in range(n_boot)]
    return Psi2Fit(c, float(np.std(boots, ddof=1)), bounded)


def psi2_growth(map: MapSpec, epsilon: float, steps, n_paths: int = 10**5, v=None,
                initial=None, seed: int = 0, n_boot: int = 20):
    """psi_2 fits of ``|v.X_n|`` for each n in ``steps``; returns ``{n: Psi2Fit}``."""
    steps = sorted(int(s) for s in steps)
    init = InitialDistribution.uniform() if initial is None else initial
    cfg = SimulationConfig(map, epsilon, steps[-1], n_paths, init, v=v, seed=seed)
    vv = np.asarray(cfg.v)
    vals = {n: [] for n in steps}
    for traj in iter_path_chunks(cfg):
        X = traj.X
        for n in steps:
            vals[n].append(X[:, n, :] @ vv)
    return {n: tail_diagnostic(np.concatenate(vals[n]), n_boot=n_boot, seed=seed)
            for n in steps}


# --- decorrelation of J increments -------------------------------------------


@dataclass(frozen=True)
class CovJResult:
    lags: np.ndarray
    cov: np.ndarray
    stderr: np.ndarray
    plateau_lag: int | None
    tv: np.ndarray | None = None


def covJ_decay(map: MapSpec, epsilon: float, m_fixed: int = 8, n_max: int = 20,
               n_paths: int = 10**5, v=None, seed: int = 0, n_batches: int = 16,
               grid=None, stop_at_plateau: bool = False) -> CovJResult:
    """``cov(v.Delta_m, v.Delta_{m+n+1})`` for ``n = 0..n_max`` from pi_0 starts.

    ``Delta_k = floor(X_{k+1}) - floor(phi(X_k))``.  Error bars are batch
    means over ``n_batches`` path ranges.  The plateau lag is the first n
    after which three consecutive estimates lie within one stderr of 0;
    ``stop_at_plateau`` truncates the output there.  With a
    ``TransitionGrid`` the worst-case TV distances at the same lags are
    attached for comparison with the bound's shape.
    """
    if not epsilon > 0:
        raise EstimationError("covJ_decay needs epsilon > 0")
    n_steps = m_fixed + n_max + 2
    cfg = SimulationConfig(map, epsilon, n_steps, n_paths, InitialDistribution.uniform(), v=v,
                           seed=seed, n_batches=n_batches)
    vv = np.asarray(cfg.v)
    batches = cfg.batches()
    B = len(batches)
    L = n_max + 1
    sa = np.zeros(B)
    sb = np.zeros((B, L))
    sab = np.zeros((B, L))
    cnt = np.zeros(B)
    starts = np.array([b[0] for b in batches])
    p0 = 0
    for traj in iter_path_chunks(cfg):
        P = traj.Delta.shape[0]
        dv = traj.Delta @ vv
        a = dv[:, m_fixed]
        bb = dv[:, m_fixed + 1: m_fixed + 1 + L]
        which = np.searchsorted(starts, np.arange(p0, p0 + P), side="right") - 1
        np.add.at(sa, which, a)
        np.add.at(sb, which, bb)
        np.add.at(sab, which, a[:, None] * bb)
        np.add.at(cnt, which, 1.0)
        p0 += P
    N = cnt.sum()
    cov = sab.sum(0) / N - (sa.sum() / N) * (sb.sum(0) / N)
    per = sab / cnt[:, None] - (sa / cnt)[:, None] * (sb / cnt[:, None])
    stderr = per.std(axis=0, ddof=1) / math.sqrt(B)
    plateau = None
    small = np.abs(cov) <= stderr
    for k in range(L - 2):
        if small[k:k + 3].all():
            plateau = k
            break
    lags = np.arange(L)
    tv = None
    if grid is not None:
        from .mixing import tv_trace
        tv = tv_trace(grid, L - 1)
    if stop_at_plateau and plateau is not None:
        keep = slice(0, plateau + 3)
        return CovJResult(lags[keep], cov[keep], stderr[keep], plateau,
                          None if tv is None else tv[keep])
    return CovJResult(lags, cov, stderr, plateau, tv)


# --- process-level invariants ------------------------------------------------


@dataclass(frozen=True)
class StationarityTest:
    steps: tuple
    p_values: tuple
    bins: int
    n_samples: int

    @property
    def min_p(self):
        return min(self.p_values)


def stationarity_test(map: MapSpec, epsilon: float, steps=(1, 4, 16), n_samples: int = 10**6,
                      bins: int = 64, seed: int = 0) -> StationarityTest:
    """Chi-square uniformity of the torus projection of X_n from pi_0 starts.

    ``bins`` cells in total: ``bins**(1/d)`` per axis (64 -> 64 in 1-D, 8x8 in 2-D).
    """
    d = map.dimension
    per = int(round(bins ** (1.0 / d)))
    if per ** d != bins:
        raise EstimationError(f"{bins} cells cannot be split evenly over {d} axes")
    steps = tuple(sorted(int(s) for s in steps))
    cfg = SimulationConfig(map, epsilon, steps[-1], n_samples, InitialDistribution.uniform(),
                           seed=seed)
    counts = {n: np.zeros(bins, np.int64) for n in steps}
    strides = per ** np.arange(d - 1, -1, -1)
    for traj in iter_path_chunks(cfg):
        for n in steps:
            cell = np.minimum((traj.u[:, n, :] * per).astype(np.int64), per - 1) @ strides
            counts[n] += np.bincount(cell, minlength=bins)
    pv = tuple(float(stats.chisquare(counts[n]).pvalue) for n in steps)
    return StationarityTest(steps, pv, bins, n_samples)


@dataclass
class DecompositionCheck:
    n_paths: int
    n_steps: int
    identity_violations: int = 0
    bound_violations: int = 0
    float_inexact: int = 0
    float_max_error: float = 0.0
    max_abs_R_drift: float = 0.0

    @property
    def passed(self) -> bool:
        return self.identity_violations == 0 and self.bound_violations == 0


def decomposition_check(cfg: SimulationConfig, chunk: int = 10000) -> DecompositionCheck:
    """Audit ``S + J + R = X`` and ``R_n - R_0 in (-1, 1)^d`` on every step of every path.

    The compiled simulator stores X exactly as ``K + u`` (integer plus
    fraction), so there the identity is checked exactly: the S increments are
    recomputed from the stored states with ``apply_map``, J is what remains
    of ``K_n - K_{n-1}``, and ``R = K_0 + u``.  The plain float route
    (``apply_map`` + ``decompose_update``) is audited too; there ``R = X - S - J``
    is a rounded subtraction, so its exact-equality misses are counted
    separately (``float_inexact``) along with the largest error.  The two
    routes are never compared path by path: chaotic maps amplify their
    rounding differences until the paths separate.
    """
    from ..process import simulate_paths

    out = DecompositionCheck(cfg.n_paths, cfg.n_steps)
    d = cfg.map.dimension
    for s in range(0, cfg.n_paths, chunk):
        k = min(chunk, cfg.n_paths - s)
        traj = simulate_paths(cfg, s, k)
        # S increments from the definition floor(phi(X)) - floor(X) = floor(phi(u))
        u_prev = traj.u[:, :-1, :].reshape(-1, d)
        img = np.asarray(apply_map(cfg.map, u_prev if d > 1 else u_prev[:, 0]), float)
        D = np.floor(img).astype(np.int64).reshape(traj.D.shape)
        out.identity_violations += int(np.count_nonzero(D != traj.D))
        J_inc = np.diff(traj.K, axis=1) - D
        out.identity_violations += int(np.count_nonzero(J_inc != traj.Delta))
        S = np.concatenate([np.zeros_like(D[:, :1]), np.cumsum(D, axis=1)], axis=1)
        J = np.concatenate([np.zeros_like(J_inc[:, :1]), np.cumsum(J_inc, axis=1)], axis=1)
        # X = K + u and R = K_0 + u, so S + J + R = X  <=>  K = K_0 + S + J (integers)
        out.identity_violations += int(np.count_nonzero(traj.K != traj.K[:, :1] + S + J))
        drift = traj.u - traj.u[:, :1]
        out.bound_violations += int(np.count_nonzero(np.abs(drift) >= 1.0))
        out.max_abs_R_drift = max(out.max_abs_R_drift, float(np.abs(drift).max()))
        R0 = {}

        def check(n, x, st):
            if n == 0:
                R0["v"] = st.R.copy()
            err = np.abs((st.S + st.J) + st.R - x)
            out.float_inexact += int(np.count_nonzero(err))
            out.float_max_error = max(out.float_max_error, float(err.max()))
            out.bound_violations += int(np.count_nonzero(np.abs(st.R - R0["v"]) >= 1.0))

        simulate_float_reference(cfg, s, k, check=check)
    return out
