"""Simulation of ``X_{n+1} = phi(X_n) + eps * xi_{n+1}`` and its S/J/R split.

Paths are simulated in fixed blocks whose draws depend only on
``(seed, path, step)``; blocks are farmed out to a thread pool and their
moments merged in block order, so results do not depend on the worker count.
"""

from __future__ import annotations

import csv
import logging
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from fractions import Fraction
from pathlib import Path

import numpy as np
import yaml

from . import _kernels
from .errors import BitBudgetError, ConfigError, MapError, ResourceError
from .maps import MapSpec, apply_map, as_fraction, floor_lattice, resolve_map
from .moments import merge, merge_all
from .rng import normals

log = logging.getLogger(__name__)

SIM_SCHEMA = "sim/v1"
MEMORY_LIMIT = 2 << 30

_KINDS = {"point": _kernels.INIT_POINT, "uniform": _kernels.INIT_UNIFORM,
          "gaussian": _kernels.INIT_GAUSSIAN}


def default_threads() -> int:
    env = os.environ.get("RESIDUAL_LAB_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ConfigError(f"RESIDUAL_LAB_THREADS={env!r} is not an integer")
    return os.cpu_count() or 1


@dataclass(frozen=True)
class InitialDistribution:
    """Law of X_0: a point mass, uniform on Q0 (pi_0) or an isotropic Gaussian."""

    kind: str = "uniform"
    x0: tuple = ()
    sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise ConfigError(f"unknown initial distribution {self.kind!r}")
        if self.kind == "gaussian" and not self.sigma > 0:
            raise ConfigError("gaussian initial distribution needs sigma > 0")

    @classmethod
    def point(cls, x0):
        return cls("point", tuple(float(c) for c in np.atleast_1d(x0)))

    @classmethod
    def uniform(cls):
        return cls("uniform")

    @classmethod
    def gaussian(cls, mean, sigma):
        return cls("gaussian", tuple(float(c) for c in np.atleast_1d(mean)), float(sigma))

    @classmethod
    def parse(cls, spec) -> InitialDistribution:
        """From a dict (``{kind: point, x0: [0]}``) or a short string.

        Strings: ``uniform``, ``point(0.37)``, ``point(0.1,0.2)``,
        ``gaussian(0,5)`` (mean coordinates then sigma).
        """
        if isinstance(spec, InitialDistribution):
            return spec
        if isinstance(spec, dict):
            kind = spec.get("kind", "uniform")
            if kind == "point":
                return cls.point(spec.get("x0", 0.0))
            if kind == "gaussian":
                return cls.gaussian(spec.get("mean", 0.0), spec.get("sigma", 1.0))
            return cls(kind)
        text = str(spec).strip().replace(" ", "")
        if text in ("uniform", "pi0"):
            return cls.uniform()
        for kind in ("point", "gaussian"):
            if text.startswith(kind + "(") and text.endswith(")"):
                try:
                    nums = [float(t) for t in text[len(kind) + 1:-1].split(",")]
                except ValueError:
                    break
                if kind == "point":
                    return cls.point(nums)
                if len(nums) >= 2:
                    return cls.gaussian(nums[:-1], nums[-1])
        raise ConfigError(f"cannot parse initial distribution {spec!r}")

    def coords(self, d):
        if self.kind == "uniform":
            return np.zeros(d)
        x = np.asarray(self.x0, dtype=float)
        if x.size == 1:
            return np.full(d, x[0])
        if x.size != d:
            raise ConfigError(f"initial point has dimension {x.size}, map has {d}")
        return x

    @property
    def label(self) -> str:
        if self.kind == "uniform":
            return "uniform"
        pts = ",".join(f"{c:g}" for c in self.x0)
        if self.kind == "point":
            return f"point({pts})"
        return f"gaussian({pts},{self.sigma:g})"

    def to_dict(self):
        if self.kind == "uniform":
            return {"kind": "uniform"}
        if self.kind == "point":
            return {"kind": "point", "x0": list(self.x0)}
        return {"kind": "gaussian", "mean": list(self.x0), "sigma": self.sigma}


def _unit(v, d):
    v = np.asarray(v, dtype=float).reshape(-1)
    if v.size == 1 and d > 1:
        raise ConfigError("direction v must have one entry per dimension")
    if v.size != d:
        raise ConfigError(f"direction v has dimension {v.size}, map has {d}")
    norm = float(np.linalg.norm(v))
    if not norm > 0 or not math.isfinite(norm):
        raise ConfigError("direction v must be a nonzero finite vector")
    return tuple(float(c) for c in v / norm)


@dataclass(frozen=True)
class SimulationConfig:
    map: MapSpec
    epsilon: float
    n_steps: int
    n_paths: int
    initial: InitialDistribution = field(default_factory=InitialDistribution)
    v: tuple = None
    seed: int = 0
    record_decomposition: bool = False
    n_batches: int = 16
    block_size: int = 4096

    def __post_init__(self):
        d = self.map.dimension
        if not (0.0 <= self.epsilon <= 1.0):
            raise ConfigError(f"epsilon must lie in [0, 1], got {self.epsilon}")
        if self.n_steps < 1 or self.n_paths < 1:
            raise ConfigError("n_steps and n_paths must be >= 1")
        if self.n_batches < 1 or self.block_size < 1:
            raise ConfigError("n_batches and block_size must be >= 1")
        object.__setattr__(self, "v", _unit((1.0,) * d if self.v is None else self.v, d))
        object.__setattr__(self, "seed", int(self.seed) % (1 << 64))
        object.__setattr__(self, "epsilon", float(self.epsilon))
        self.initial.coords(d)

    def with_(self, **changes) -> SimulationConfig:
        return replace(self, **changes)

    def batches(self):
        """Path ranges ``[(start, stop), ...]`` of the batch sub-ensembles."""
        B = min(self.n_batches, self.n_paths)
        edges = [self.n_paths * b // B for b in range(B + 1)]
        return list(zip(edges[:-1], edges[1:]))

    def blocks(self):
        """``(batch, start, count)`` work units; independent of the thread count."""
        out = []
        for b, (lo, hi) in enumerate(self.batches()):
            for s in range(lo, hi, self.block_size):
                out.append((b, s, min(self.block_size, hi - s)))
        return out

    def kernel_args(self):
        lo, hi, A, b = self.map.arrays
        return (lo, hi, A, b, self.epsilon)

    def init_args(self):
        d = self.map.dimension
        return (_KINDS[self.initial.kind], self.initial.coords(d), float(self.initial.sigma))


QUANTITIES_X = ("X",)
QUANTITIES_SJR = ("X", "S", "J", "R")


@dataclass
class EnsembleMoments:
    """Per-step moments of v.X_n (and v.S_n, v.J_n, v.R_n) over a path ensemble.

    ``mean``/``var`` have shape (Q, n_steps + 1), one row per quantity;
    ``var`` is the unbiased sample variance.  Batch-level Welford triples are
    kept for batch-means error bars.
    """

    quantities: tuple
    count: int
    mean: np.ndarray
    var: np.ndarray
    batch_count: np.ndarray
    batch_mean: np.ndarray
    batch_m2: np.ndarray
    config: SimulationConfig | None = None

    @property
    def n_steps(self) -> int:
        return self.mean.shape[1] - 1

    def _q(self, name):
        try:
            return self.quantities.index(name)
        except ValueError:
            raise KeyError(f"quantity {name!r} not recorded (have {self.quantities})") from None

    def mean_of(self, name="X"):
        return self.mean[self._q(name)]

    def var_of(self, name="X"):
        return self.var[self._q(name)]

    def batch_var(self, name="X"):
        """Unbiased per-batch variance series, shape (B, n_steps + 1)."""
        q = self._q(name)
        c = self.batch_count[:, None].astype(float)
        return self.batch_m2[:, q, :] / np.maximum(c - 1.0, 1.0)

    @classmethod
    def from_batches(cls, quantities, triples, config=None):
        """Build from per-batch ``(count, mean(Q,N+1), m2(Q,N+1))`` triples."""
        n, mean, m2 = merge_all(triples)
        var = m2 / max(n - 1, 1)
        return cls(
            tuple(quantities), int(n), np.asarray(mean, float), np.asarray(var, float),
            np.array([t[0] for t in triples], dtype=np.int64),
            np.stack([t[1] for t in triples]), np.stack([t[2] for t in triples]), config,
        )

    @classmethod
    def synthetic(cls, var_series, n_batches=8, count=1000):
        """Moments whose every batch has exactly the given variance series (tests, demos)."""
        var_series = np.asarray(var_series, float)[None, :]
        m2 = var_series * (count - 1)
        # batch means spread so that the pooled variance equals the series too
        z = np.arange(n_batches) - (n_batches - 1) / 2
        z = z / np.sqrt((z * z).sum()) if n_batches > 1 else z
        scale = np.sqrt(var_series * (n_batches - 1) / count)
        return cls.from_batches(QUANTITIES_X, [(count, zb * scale, m2) for zb in z])

    def to_csv(self, path=None) -> str:
        header = ["n", "count"]
        for q in self.quantities:
            header += [f"mean_v{q}", f"var_v{q}"]
        lines = [",".join(header)]
        for n in range(self.n_steps + 1):
            row = [str(n), str(self.count)]
            for q in range(len(self.quantities)):
                row += [repr(float(self.mean[q, n])), repr(float(self.var[q, n]))]
            lines.append(",".join(row))
        text = "\n".join(lines) + "\n"
        if path is not None:
            Path(path).write_text(text)
        return text


def _check_memory(cfg: SimulationConfig, Q: int, threads: int):
    B = len(cfg.batches())
    per = Q * (cfg.n_steps + 1) * 16
    need = per * (B + 2 * threads + 1)
    if need > MEMORY_LIMIT:
        raise ResourceError(
            f"moment buffers need ~{need / 2**20:.0f} MiB (> {MEMORY_LIMIT / 2**20:.0f} MiB); "
            "reduce n_steps or n_batches"
        )


def _run_blocks(fn, blocks, threads):
    if threads <= 1 or len(blocks) <= 1:
        for blk in blocks:
            yield fn(blk)
        return
    with ThreadPoolExecutor(max_workers=threads) as pool:
        yield from pool.map(fn, blocks)


def simulate_ensemble(cfg: SimulationConfig, threads: int | None = None) -> EnsembleMoments:
    """Monte Carlo moments of v.X_n for n = 0..n_steps."""
    threads = default_threads() if threads is None else max(1, int(threads))
    Q = 4 if cfg.record_decomposition else 1
    _check_memory(cfg, Q, threads)
    lo, hi, A, b, eps = cfg.kernel_args()
    kind, x0, sigma = cfg.init_args()
    v = np.asarray(cfg.v)
    seed = np.uint64(cfg.seed)
    kernel = _kernels.ensemble_block_1d if cfg.map.dimension == 1 else _kernels.ensemble_block

    def work(blk):
        _, start, count = blk
        mean = np.zeros((Q, cfg.n_steps + 1))
        m2 = np.zeros((Q, cfg.n_steps + 1))
        bad = kernel(seed, start, count, cfg.n_steps, lo, hi, A, b, eps, v,
                     kind, x0, sigma, cfg.record_decomposition, mean, m2)
        if bad >= 0:
            raise MapError(f"path {bad} reached a point outside every piece (malformed map)")
        return count, mean, m2

    blocks = cfg.blocks()
    acc = [(0, 0.0, 0.0) for _ in cfg.batches()]
    try:
        for blk, res in zip(blocks, _run_blocks(work, blocks, threads)):
            acc[blk[0]] = merge(acc[blk[0]], res)
    except MemoryError as exc:
        raise ResourceError("out of memory during simulation; partial results discarded") from exc
    quantities = QUANTITIES_SJR if cfg.record_decomposition else QUANTITIES_X
    return EnsembleMoments.from_batches(quantities, acc, cfg)


@dataclass
class Trajectories:
    """Split-state paths: X = K + u.  Shapes (P, N+1, d) and increments (P, N, d)."""

    K: np.ndarray
    u: np.ndarray
    D: np.ndarray
    Delta: np.ndarray

    @property
    def X(self):
        return self.K + self.u


def simulate_paths(cfg: SimulationConfig, path_start=0, n_paths=None) -> Trajectories:
    """Store every step of ``n_paths`` paths (for diagnostics; memory grows as P*N)."""
    n_paths = cfg.n_paths if n_paths is None else n_paths
    d = cfg.map.dimension
    shape = (n_paths, cfg.n_steps + 1, d)
    need = n_paths * (cfg.n_steps + 1) * d * 32
    if need > MEMORY_LIMIT:
        raise ResourceError(f"trajectory storage needs ~{need / 2**20:.0f} MiB; use fewer paths")
    K = np.zeros(shape, np.int64)
    u = np.zeros(shape)
    D = np.zeros((n_paths, cfg.n_steps, d), np.int64)
    Dl = np.zeros((n_paths, cfg.n_steps, d), np.int64)
    lo, hi, A, b, eps = cfg.kernel_args()
    kind, x0, sigma = cfg.init_args()
    bad = _kernels.trajectory_block(np.uint64(cfg.seed), path_start, cfg.n_steps, lo, hi, A, b,
                                    eps, kind, x0, sigma, K, u, D, Dl)
    if bad >= 0:
        raise MapError(f"path {bad} reached a point outside every piece (malformed map)")
    return Trajectories(K, u, D, Dl)


def iter_path_chunks(cfg: SimulationConfig, chunk=None):
    """Yield ``Trajectories`` for consecutive path ranges covering ``cfg.n_paths``."""
    if chunk is None:
        chunk = max(1, min(cfg.n_paths, (64 << 20) // (32 * (cfg.n_steps + 1) * cfg.map.dimension)))
    for s in range(0, cfg.n_paths, chunk):
        yield simulate_paths(cfg, s, min(chunk, cfg.n_paths - s))


# --- single steps, float reference route -------------------------------------


def step(map: MapSpec, x, epsilon, xi):
    """``phi(x) + epsilon * xi``."""
    return apply_map(map, x) + epsilon * np.asarray(xi, dtype=float)


@dataclass
class DecompositionState:
    """Per-path S (int), J (int), R (float) with S + J + R = X."""

    S: np.ndarray
    J: np.ndarray
    R: np.ndarray

    @classmethod
    def start(cls, x0):
        x0 = np.asarray(x0, dtype=float)
        zeros = np.zeros(x0.shape, np.int64)
        return cls(zeros, zeros.copy(), x0.copy())


def decompose_update(map: MapSpec, x_prev, x_next, state: DecompositionState, phi_prev=None):
    """Advance S, J, R across one step ``x_prev -> x_next``.

    ``phi_prev`` should be the deterministic image used to produce ``x_next``;
    it is recomputed when omitted.
    """
    if phi_prev is None:
        phi_prev = apply_map(map, x_prev)
    f_phi = floor_lattice(phi_prev)
    S = state.S + (f_phi - floor_lattice(x_prev))
    J = state.J + (floor_lattice(x_next) - f_phi)
    R = np.asarray(x_next, dtype=float) - (S + J)
    return DecompositionState(S, J, R)


def simulate_float_reference(cfg: SimulationConfig, path_start=0, n_paths=None, check=None):
    """Plain float-64 simulation of X with S/J/R via ``decompose_update``.

    Uses the same normals as the compiled simulator.  ``check(n, x, state)``
    is called after every step, which lets callers audit invariants without
    storing whole trajectories.  Returns the final ``(x, state)``.
    """
    n_paths = cfg.n_paths if n_paths is None else n_paths
    d = cfg.map.dimension
    if cfg.initial.kind == "uniform":
        from .rng import STREAM_INITIAL, uniforms
        x = uniforms(cfg.seed, path_start, n_paths, d, STREAM_INITIAL)
    elif cfg.initial.kind == "gaussian":
        from .rng import STREAM_INITIAL
        x = cfg.initial.coords(d) + cfg.initial.sigma * normals(cfg.seed, path_start, n_paths, d,
                                                                STREAM_INITIAL)
    else:
        x = np.tile(cfg.initial.coords(d), (n_paths, 1))
    xi = normals(cfg.seed, path_start, n_paths, cfg.n_steps * d).reshape(n_paths, cfg.n_steps, d)
    state = DecompositionState.start(x)
    if check is not None:
        check(0, x, state)
    for n in range(cfg.n_steps):
        phi = apply_map(cfg.map, x)
        x_next = phi + cfg.epsilon * xi[:, n, :]
        state = decompose_update(cfg.map, x, x_next, state, phi_prev=phi)
        x = x_next
        if check is not None:
            check(n + 1, x, state)
    return x, state


# --- exact noiseless orbits --------------------------------------------------


def noiseless_orbit(map: MapSpec, x0, n: int, max_bits: int = 4096):
    """Exact orbit ``x0, phi(x0), ..., phi^n(x0)`` in rational arithmetic.

    Raises ``BitBudgetError`` once a denominator exceeds ``max_bits`` bits.
    """
    scalar = not isinstance(x0, (list, tuple))
    x = (as_fraction(x0),) if scalar else tuple(as_fraction(c) for c in x0)
    if len(x) != map.dimension:
        raise MapError(f"x0 has dimension {len(x)}, map has {map.dimension}")
    orbit = [x]
    for k in range(n):
        x = apply_map(map, x)
        if any(c.denominator.bit_length() > max_bits for c in x):
            raise BitBudgetError(
                f"denominator exceeded {max_bits} bits after {k + 1} steps; use a smaller n"
            )
        orbit.append(x)
    return [p[0] for p in orbit] if scalar else orbit


class ExactOrbits:
    """Vectorised exact orbits of many rational points with one common denominator.

    Points are stored as integer numerators over a shared denominator, so
    every step is exact.  Numerators live in int64 arrays while that cannot
    overflow and in object arrays of Python ints otherwise.  With
    ``torus=True`` only the fractional parts are kept (the orbit of the
    projected map).
    """

    def __init__(self, map: MapSpec, numerators, denominator: int, max_bits: int = 4096,
                 torus: bool = False):
        self.map = map
        self.num = np.asarray(numerators, dtype=object).reshape(-1, map.dimension)
        self.den = int(denominator)
        self.max_bits = max_bits
        self.torus = torus
        self._steps = 0
        q = 1
        for p in map.pieces:
            for v in list(p.offset) + [c for row in p.matrix for c in row]:
                q = math.lcm(q, v.denominator)
        self._q = q
        self._pieces = [
            (
                list(p.lo), list(p.hi),
                [[int(a * q) for a in row] for row in p.matrix],
                [int(c * q) for c in p.offset],
            )
            for p in map.pieces
        ]
        self._gain = max(
            sum(abs(a) for a in row) + abs(c) + 1
            for _, _, mat, off in self._pieces for row, c in zip(mat, off)
        )
        if torus:
            self.num = self.num % self.den
        self._retype()

    @classmethod
    def midpoint_grid(cls, map: MapSpec, size: int, max_bits: int = 4096, torus: bool = False):
        """Points ``(2j + 1) / (2 size)`` per axis (product grid)."""
        d = map.dimension
        axis = np.arange(size, dtype=np.int64) * 2 + 1
        grids = np.meshgrid(*([axis] * d), indexing="ij")
        num = np.stack([g.reshape(-1) for g in grids], axis=1)
        return cls(map, num, 2 * size, max_bits, torus)

    def _retype(self):
        # worst case magnitude of any intermediate in the next step
        big = (abs(int(self.num.max())) + abs(int(self.num.min())) + 2 * self.den) * self._gain
        big *= max(self._q, 1) * max(max(h[k].denominator for k in range(len(h)))
                                     for _, h, _, _ in self._pieces)
        dtype = np.int64 if big < (1 << 62) else object
        if self.num.dtype != dtype:
            self.num = self.num.astype(dtype) if dtype is object else \
                np.array(self.num.tolist(), dtype=np.int64).reshape(self.num.shape)

    def floor(self):
        return self.num // self.den

    def step(self):
        """Replace every point x by phi(x)."""
        n = self.num // self.den
        r = self.num - n * self.den
        out = np.empty_like(self.num)
        todo = np.ones(len(self.num), dtype=bool)
        den = self.den
        for lo, hi, mat, off in self._pieces:
            hit = todo.copy()
            for k in range(self.map.dimension):
                lo_k = lo[k].numerator * den
                hi_k = hi[k].numerator * den
                if self.num.dtype != object:
                    lo_k, hi_k = np.int64(lo_k), np.int64(hi_k)
                # r/den in [lo, hi)  <=>  r*lo.den >= lo.num*den  and  r*hi.den < hi.num*den
                col = r[:, k]
                hit &= (col * lo[k].denominator >= lo_k) & (col * hi[k].denominator < hi_k)
            if not hit.any():
                continue
            rr = r[hit]
            img = np.empty_like(rr)
            for i in range(self.map.dimension):
                acc = off[i] * den
                for j in range(self.map.dimension):
                    if mat[i][j]:
                        acc = acc + mat[i][j] * rr[:, j]
                img[:, i] = acc
            out[hit] = img if self.torus else n[hit] * (den * self._q) + img
            todo &= ~hit
        if todo.any():
            raise MapError("exact orbit point fell in a coverage gap")
        self.num = out
        self.den = den * self._q
        if self.torus:
            self.num = self.num % self.den
        if self._q != 1:
            g = self.den
            for v in self.num.reshape(-1):
                g = math.gcd(g, int(v))
                if g == 1:
                    break
            if g > 1:
                self.num = self.num // g
                self.den //= g
        self._retype()
        self._steps += 1
        if self.den.bit_length() > self.max_bits:
            raise BitBudgetError(
                f"common denominator exceeded {self.max_bits} bits after {self._steps} steps"
            )

    def as_float(self):
        """Points as floats, shape (P, d)."""
        whole = self.num // self.den
        frac = self.num - whole * self.den
        if self.den.bit_length() < 1000:
            return whole.astype(float) + frac.astype(float) / float(self.den)
        shift = self.den.bit_length() - 60
        return whole.astype(float) + (frac >> shift).astype(float) / float(self.den >> shift)

    def dot_float(self, v):
        """``v . x`` as floats."""
        return self.as_float() @ np.asarray(v, float)


def _random_below(rng, bound):
    nbytes = (bound.bit_length() + 7) // 8 + 8
    return int.from_bytes(rng.bytes(nbytes), "little") % bound


def noiseless_ensemble(cfg: SimulationConfig, max_bits: int | None = None) -> EnsembleMoments:
    """Moments of v.X_n at eps = 0 from exact rational orbits.

    Floating point collapses orbits of dyadic maps (every double is a dyadic
    rational with at most 53 significant digits), so the zero-noise ensemble
    is run exactly.  Random starts are rationals ``k / (2 * 3**L)`` with
    3**L large enough that the digits consumed over ``n_steps`` expansions
    are all random: uniform starts draw k uniformly, Gaussian starts round a
    Gaussian draw and randomise the digits below float precision.  A point
    start is iterated exactly from its rational value.  The random integers
    come from numpy's PCG64 generator seeded with ``cfg.seed``.
    """
    if cfg.epsilon != 0:
        raise ConfigError("noiseless_ensemble is for epsilon = 0")
    d = cfg.map.dimension
    P = cfg.n_paths
    v = np.asarray(cfg.v)
    B = min(cfg.n_batches, P)
    if cfg.initial.kind == "point":
        x0 = [as_fraction(c) for c in cfg.initial.coords(d)]
        orbit = noiseless_orbit(cfg.map, x0, cfg.n_steps, max_bits or 1 << 16)
        vx = np.array([sum(float(c) * w for c, w in zip(pt, v)) for pt in orbit])
        mean = vx[None, :]
        triples = []
        for lo, hi in cfg.batches():
            triples.append((hi - lo, mean.copy(), np.zeros_like(mean)))
        return EnsembleMoments.from_batches(QUANTITIES_X, triples, cfg)
    gain = 2.0
    for piece in cfg.map.pieces:
        for row in piece.matrix:
            gain = max(gain, float(sum(abs(a) for a in row)))
    bits = int(math.ceil(cfg.n_steps * math.log2(gain))) + 64
    L = int(math.ceil(bits / math.log2(3)))
    den = 2 * 3 ** L
    rng = np.random.default_rng(cfg.seed)
    num = np.empty((P, d), dtype=object)
    if cfg.initial.kind == "uniform":
        for i in range(P):
            for k in range(d):
                num[i, k] = _random_below(rng, den)
    else:
        from .rng import STREAM_INITIAL
        x = cfg.initial.coords(d) + cfg.initial.sigma * normals(cfg.seed, 0, P, d, STREAM_INITIAL)
        fine = den >> 40
        for i in range(P):
            for k in range(d):
                f = Fraction(float(x[i, k])) * den
                num[i, k] = f.numerator // f.denominator + _random_below(rng, fine)
    orbit = ExactOrbits(cfg.map, num, den, max_bits=max_bits or (den.bit_length() + bits + 64))
    mean = np.zeros((B, 1, cfg.n_steps + 1))
    m2 = np.zeros((B, 1, cfg.n_steps + 1))
    ranges = cfg.batches()
    for n in range(cfg.n_steps + 1):
        if n:
            orbit.step()
        y = orbit.dot_float(v)
        for b, (lo, hi) in enumerate(ranges):
            yb = y[lo:hi]
            mean[b, 0, n] = yb.mean()
            m2[b, 0, n] = ((yb - yb.mean()) ** 2).sum()
    triples = [(hi - lo, mean[b], m2[b]) for b, (lo, hi) in enumerate(ranges)]
    return EnsembleMoments.from_batches(QUANTITIES_X, triples, cfg)


# --- sim/v1 config files -----------------------------------------------------


def config_from_dict(doc, base_dir=None) -> SimulationConfig:
    if not isinstance(doc, dict) or doc.get("schema") != SIM_SCHEMA:
        raise ConfigError(f"expected a mapping with schema {SIM_SCHEMA!r}")
    try:
        ref = doc["map"]
        if isinstance(ref, str) and base_dir is not None and not Path(ref).is_absolute():
            cand = Path(base_dir) / ref
            ref = str(cand) if cand.exists() else ref
        m = resolve_map(ref)
        return SimulationConfig(
            map=m,
            epsilon=float(doc["epsilon"]),
            n_steps=int(doc["n_steps"]),
            n_paths=int(doc["n_paths"]),
            initial=InitialDistribution.parse(doc.get("initial", "uniform")),
            v=doc.get("v"),
            seed=int(doc.get("seed", 0)),
            record_decomposition=bool(doc.get("record_decomposition", False)),
            n_batches=int(doc.get("n_batches", 16)),
            block_size=int(doc.get("block_size", 4096)),
        )
    except KeyError as exc:
        raise ConfigError(f"sim config missing field {exc}") from exc
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad sim config value: {exc}") from exc


def load_config(path) -> SimulationConfig:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return config_from_dict(doc, Path(path).parent)
