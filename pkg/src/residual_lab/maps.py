"""Piecewise-affine maps of R^d with Z^d-periodic displacement.

A map is given by affine pieces on half-open boxes that partition the unit
cube ``Q0 = [0, 1)^d``; it acts on R^d by

    phi(x) = floor(x) + A_i (x - floor(x)) + b_i   where x - floor(x) is in box i.

All piece data is kept as exact ``Fraction`` values; float copies are derived
for the simulators.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from numbers import Rational
from pathlib import Path

import numpy as np
import yaml

from .errors import ConfigError, MapError

MAP_SCHEMA = "maps/v1"


def as_fraction(value) -> Fraction:
    """Exact rational from an int, Fraction, ``"p/q"`` string or decimal."""
    if isinstance(value, bool):
        raise ConfigError(f"not a number: {value!r}")
    if isinstance(value, Fraction):
        return value
    if isinstance(value, (int, np.integer)):
        return Fraction(int(value))
    if isinstance(value, (float, np.floating)):
        value = float(value)
        if not math.isfinite(value):
            raise ConfigError(f"non-finite value {value!r}")
        # decimal reading of the literal, so 0.1 means 1/10
        return Fraction(repr(value))
    if isinstance(value, str):
        try:
            return Fraction(value.strip())
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"cannot parse rational {value!r}") from exc
    raise ConfigError(f"unsupported numeric value {value!r}")


def _is_exact(x) -> bool:
    if isinstance(x, (list, tuple)):
        return all(_is_exact(c) for c in x)
    return isinstance(x, Rational) and not isinstance(x, bool)


def floor_lattice(x):
    """Lattice cell of ``x``: the unique integer vector n with x in n + [0,1)^d.

    Scalars give an int, exact sequences a tuple of ints and float arrays an
    int64 array of the same shape.
    """
    if _is_exact(x):
        if isinstance(x, (list, tuple)):
            return tuple(math.floor(c) for c in x)
        return math.floor(x)
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("floor_lattice: non-finite coordinate")
    out = np.floor(arr).astype(np.int64)
    return int(out) if out.ndim == 0 else out


def project_torus(x):
    """Representative of ``x mod Z^d`` in [0, 1)^d."""
    if _is_exact(x):
        if isinstance(x, (list, tuple)):
            return tuple(c - math.floor(c) for c in x)
        return x - math.floor(x)
    arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("project_torus: non-finite coordinate")
    out = arr - np.floor(arr)
    # x - floor(x) rounds up to 1.0 for tiny negative x
    out = np.where(out >= 1.0, 0.0, out)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True)
class AffinePiece:
    """``u -> matrix @ u + offset`` on the box ``[lo, hi)``.

    ``target`` is the integer cube the image should fill (the ``o_i`` of a
    Bernoulli partition); it is optional for general maps.
    """

    lo: tuple
    hi: tuple
    matrix: tuple
    offset: tuple
    target: tuple | None = None

    def __post_init__(self):
        d = len(self.lo)
        if d < 1 or len(self.hi) != d or len(self.offset) != d or len(self.matrix) != d:
            raise MapError("piece arrays have inconsistent dimensions")
        if any(len(row) != d for row in self.matrix):
            raise MapError("piece matrix must be square")
        if self.target is not None and len(self.target) != d:
            raise MapError("target cube has wrong dimension")
        for a, b in zip(self.lo, self.hi):
            if not (0 <= a < b <= 1):
                raise MapError(f"piece box [{a}, {b}) is not a nonempty sub-box of [0, 1)")

    @classmethod
    def build(cls, lo, hi, matrix, offset, target=None):
        lo = tuple(as_fraction(v) for v in lo)
        hi = tuple(as_fraction(v) for v in hi)
        matrix = tuple(tuple(as_fraction(v) for v in row) for row in matrix)
        offset = tuple(as_fraction(v) for v in offset)
        if target is not None:
            tf = [as_fraction(v) for v in target]
            if any(t.denominator != 1 for t in tf):
                # kept as Fractions so validation can report the non-integer cube
                target = tuple(tf)
            else:
                target = tuple(int(t) for t in tf)
        return cls(lo, hi, matrix, offset, target)

    @property
    def dimension(self) -> int:
        return len(self.lo)

    @cached_property
    def volume(self) -> Fraction:
        v = Fraction(1)
        for a, b in zip(self.lo, self.hi):
            v *= b - a
        return v

    @cached_property
    def det(self) -> Fraction:
        return _det([list(r) for r in self.matrix])

    @cached_property
    def monomial(self):
        """Column index of the single nonzero in each row, or None if not monomial."""
        cols = []
        for row in self.matrix:
            nz = [j for j, a in enumerate(row) if a != 0]
            if len(nz) != 1:
                return None
            cols.append(nz[0])
        return tuple(cols) if len(set(cols)) == len(cols) else None

    def contains(self, u) -> bool:
        return all(a <= c < b for a, b, c in zip(self.lo, self.hi, u))

    def apply(self, u):
        return tuple(
            sum((a * c for a, c in zip(row, u)), Fraction(0)) + b
            for row, b in zip(self.matrix, self.offset)
        )

    def vertices(self):
        return list(itertools.product(*zip(self.lo, self.hi)))

    def image_vertices(self):
        return [self.apply(v) for v in self.vertices()]

    def image_box(self):
        """Image of the box as ``(lo, hi)`` when the matrix is monomial, else None."""
        if self.monomial is None:
            return None
        ilo, ihi = [], []
        for i, j in enumerate(self.monomial):
            a = self.matrix[i][j]
            e0 = a * self.lo[j] + self.offset[i]
            e1 = a * self.hi[j] + self.offset[i]
            ilo.append(min(e0, e1))
            ihi.append(max(e0, e1))
        return tuple(ilo), tuple(ihi)


def _det(m) -> Fraction:
    n = len(m)
    m = [[Fraction(v) for v in row] for row in m]
    det = Fraction(1)
    for c in range(n):
        p = next((r for r in range(c, n) if m[r][c] != 0), None)
        if p is None:
            return Fraction(0)
        if p != c:
            m[c], m[p] = m[p], m[c]
            det = -det
        det *= m[c][c]
        for r in range(c + 1, n):
            f = m[r][c] / m[c][c]
            if f:
                for k in range(c, n):
                    m[r][k] -= f * m[c][k]
    return det


@dataclass(frozen=True)
class BernoulliPartition:
    """Pieces ``E_i -> Q_{o_i}`` of an expanding Bernoulli map."""

    dimension: int
    pieces: tuple

    def __post_init__(self):
        # canonical order: nondecreasing volume (stable)
        ordered = tuple(sorted(self.pieces, key=lambda p: p.volume))
        object.__setattr__(self, "pieces", ordered)

    @property
    def M(self) -> int:
        return len(self.pieces)


@dataclass(frozen=True)
class MapSpec:
    dimension: int
    pieces: tuple
    name: str = "map"
    bernoulli: BernoulliPartition | None = field(default=None, compare=False)

    def __post_init__(self):
        if self.dimension < 1:
            raise MapError("dimension must be >= 1")
        if not self.pieces:
            raise MapError("a map needs at least one piece")
        for p in self.pieces:
            if p.dimension != self.dimension:
                raise MapError("piece dimension differs from map dimension")

    @classmethod
    def from_partition(cls, partition: BernoulliPartition, name="bernoulli"):
        return cls(partition.dimension, partition.pieces, name, partition)

    @cached_property
    def arrays(self):
        """Float copies ``(lo, hi, A, b)`` with shapes (M,d), (M,d), (M,d,d), (M,d)."""
        lo = np.array([[float(c) for c in p.lo] for p in self.pieces])
        hi = np.array([[float(c) for c in p.hi] for p in self.pieces])
        A = np.array([[[float(c) for c in row] for row in p.matrix] for p in self.pieces])
        b = np.array([[float(c) for c in p.offset] for p in self.pieces])
        return lo, hi, A, b

    @cached_property
    def displacement_bound(self) -> float:
        return displacement_bound(self)

    def piece_index(self, u):
        """Index of the piece whose box contains the exact point ``u`` in Q0."""
        for i, p in enumerate(self.pieces):
            if p.contains(u):
                return i
        raise MapError(f"point {tuple(str(c) for c in u)} of Q0 lies in no piece (coverage gap)")

    def __call__(self, x):
        return apply_map(self, x)


def apply_map(map: MapSpec, x):
    """``phi(x) = floor(x) + A_i (x - floor(x)) + b_i``.

    Exact (``Fraction``/int) inputs give exact outputs.  Float inputs may be a
    scalar (d = 1), a point of shape (d,), or a batch of shape (N, d) / (N,)
    for d = 1.
    """
    d = map.dimension
    if _is_exact(x):
        scalar = not isinstance(x, (list, tuple))
        pt = (x,) if scalar else tuple(x)
        if len(pt) != d:
            raise MapError(f"point has dimension {len(pt)}, map has {d}")
        n = tuple(math.floor(c) for c in pt)
        u = tuple(Fraction(c) - k for c, k in zip(pt, n))
        y = map.pieces[map.piece_index(u)].apply(u)
        out = tuple(k + c for k, c in zip(n, y))
        return out[0] if scalar else out

    arr = np.asarray(x, dtype=float)
    squeeze = None
    if d == 1 and (arr.ndim == 0 or (arr.ndim == 1 and arr.shape[0] != 1)):
        squeeze = arr.shape
        arr = arr.reshape(-1, 1)
    elif arr.ndim == 1:
        if arr.shape[0] != d:
            raise MapError(f"point has dimension {arr.shape[0]}, map has {d}")
        squeeze = "point"
        arr = arr.reshape(1, d)
    if arr.shape[-1] != d:
        raise MapError(f"points have dimension {arr.shape[-1]}, map has {d}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("apply_map: non-finite coordinate")
    n = np.floor(arr)
    u = arr - n
    # guard the x - floor(x) == 1.0 rounding case
    wrap = u >= 1.0
    if wrap.any():
        n = n + wrap
        u = np.where(wrap, 0.0, u)
    lo, hi, A, b = map.arrays
    out = np.full_like(arr, np.nan)
    todo = np.ones(arr.shape[0], dtype=bool)
    for i in range(len(map.pieces)):
        hit = todo & np.all((u >= lo[i]) & (u < hi[i]), axis=1)
        if hit.any():
            out[hit] = n[hit] + u[hit] @ A[i].T + b[i]
            todo &= ~hit
    if todo.any():
        bad = arr[np.argmax(todo)]
        raise MapError(f"point {bad.tolist()} falls in a coverage gap of Q0")
    if squeeze == "point":
        return out[0]
    if squeeze is not None:
        return out.reshape(squeeze) if squeeze != () else float(out[0, 0])
    return out


def displacement_bound(map: MapSpec) -> float:
    """``sup_x |phi(x) - x|`` (Euclidean), attained at closure vertices of pieces."""
    best = Fraction(0)
    for p in map.pieces:
        for v in p.vertices():
            y = p.apply(v)
            sq = sum(((a - c) ** 2 for a, c in zip(y, v)), Fraction(0))
            best = max(best, sq)
    return math.sqrt(best)


# --- validation -------------------------------------------------------------


def _coverage(boxes, weights, d):
    """Total weight over each elementary cell of [0,1)^d cut by all box faces.

    Returns ``[(cell_volume, weight)]``.
    """
    cuts = []
    for k in range(d):
        pts = {Fraction(0), Fraction(1)}
        for lo, hi in boxes:
            pts.add(min(max(lo[k], Fraction(0)), Fraction(1)))
            pts.add(min(max(hi[k], Fraction(0)), Fraction(1)))
        cuts.append(sorted(pts))
    cells = []
    for idx in itertools.product(*[range(len(c) - 1) for c in cuts]):
        clo = [cuts[k][i] for k, i in enumerate(idx)]
        chi = [cuts[k][i + 1] for k, i in enumerate(idx)]
        vol = Fraction(1)
        for a, b in zip(clo, chi):
            vol *= b - a
        w = Fraction(0)
        for (lo, hi), wt in zip(boxes, weights):
            if all(lo[k] <= clo[k] and chi[k] <= hi[k] for k in range(d)):
                w += wt
        cells.append((vol, w))
    return cells


def _torus_pieces(lo, hi):
    """Split a box of R^d into sub-boxes each inside one integer cube, shifted into Q0."""
    per_axis = []
    for a, b in zip(lo, hi):
        segs = []
        k = math.floor(a)
        while k < b:
            s, e = max(a, Fraction(k)), min(b, Fraction(k + 1))
            if e > s:
                segs.append((s - k, e - k))
            k += 1
        per_axis.append(segs)
    for combo in itertools.product(*per_axis):
        yield tuple(s for s, _ in combo), tuple(e for _, e in combo)


@dataclass
class PieceReport:
    index: int
    volume: Fraction
    det: Fraction
    det_deviation: Fraction
    target: tuple | None
    image_mismatch: bool


@dataclass
class ValidationReport:
    kind: str
    passed: bool
    pieces: list
    gap_volume: Fraction
    overlap_volume: Fraction
    problems: list
    notes: list = field(default_factory=list)

    def to_text(self) -> str:
        lines = [
            f"kind: {self.kind}",
            f"passed: {str(self.passed).lower()}",
            f"gap_volume: {self.gap_volume}",
            f"overlap_volume: {self.overlap_volume}",
            "pieces:",
        ]
        for p in self.pieces:
            tgt = "none" if p.target is None else "[" + ", ".join(str(t) for t in p.target) + "]"
            lines.append(
                f"  - index: {p.index}\n    volume: {p.volume}\n    det: {p.det}\n"
                f"    det_volume_deviation: {p.det_deviation}\n    target: {tgt}\n"
                f"    image_mismatch: {str(p.image_mismatch).lower()}"
            )
        lines.append("problems:" + ("" if self.problems else " []"))
        lines.extend(f"  - {msg}" for msg in self.problems)
        if self.notes:
            lines.append("notes:")
            lines.extend(f"  - {msg}" for msg in self.notes)
        return "\n".join(lines) + "\n"


def _domain_coverage(pieces, d):
    cells = _coverage([(p.lo, p.hi) for p in pieces], [Fraction(1)] * len(pieces), d)
    gap = sum((v for v, w in cells if w == 0), Fraction(0))
    overlap = sum((v * (w - 1) for v, w in cells if w > 1), Fraction(0))
    return gap, overlap


def validate_bernoulli(partition: BernoulliPartition, tol=0) -> ValidationReport:
    """Check the expanding-Bernoulli conditions; never raises.

    Passes iff M >= 2, the boxes tile Q0, every target is an integer vector,
    every piece maps its box onto exactly ``target + [0,1)^d`` and
    ``|det A_i| * vol(E_i) = 1``.  With exact data ``tol`` stays 0.
    """
    d = partition.dimension
    problems = []
    reports = []
    if partition.M < 2:
        problems.append(f"M = {partition.M}: a Bernoulli partition needs M >= 2 pieces")
    for i, p in enumerate(partition.pieces):
        dev = abs(abs(p.det) * p.volume - 1)
        mismatch = True
        tgt = p.target
        if tgt is None:
            problems.append(f"piece {i}: no target cube")
        elif any(Fraction(t).denominator != 1 for t in tgt):
            problems.append(f"piece {i}: target {[str(t) for t in tgt]} is not an integer vector")
        else:
            cube = set(itertools.product(*[(Fraction(t), Fraction(t + 1)) for t in tgt]))
            mismatch = set(p.image_vertices()) != cube
            if mismatch:
                problems.append(f"piece {i}: image is not the full cube at {list(tgt)}")
        if dev > tol:
            problems.append(f"piece {i}: |det| * volume = {abs(p.det) * p.volume}, expected 1")
        reports.append(PieceReport(i, p.volume, p.det, dev, tgt, mismatch))
    gap, overlap = _domain_coverage(partition.pieces, d)
    if gap > tol:
        problems.append(f"pieces leave a gap of volume {gap} in Q0")
    if overlap > tol:
        problems.append(f"pieces overlap with total volume {overlap}")
    return ValidationReport("bernoulli", not problems, reports, gap, overlap, problems)


def validate_map(map: MapSpec) -> ValidationReport:
    """General checks: tiling of Q0 and Lebesgue preservation of the torus map.

    Measure preservation is checked exactly (preimage density 1 everywhere)
    when all matrices are monomial; otherwise only the total image volume is
    checked.  If the map carries a Bernoulli partition, its checks are added.
    """
    d = map.dimension
    problems = []
    reports = []
    for i, p in enumerate(map.pieces):
        if p.det == 0:
            problems.append(f"piece {i}: singular matrix")
        reports.append(PieceReport(i, p.volume, p.det, abs(abs(p.det) * p.volume - 1), p.target, False))
    gap, overlap = _domain_coverage(map.pieces, d)
    if gap:
        problems.append(f"pieces leave a gap of volume {gap} in Q0")
    if overlap:
        problems.append(f"pieces overlap with total volume {overlap}")
    notes = []
    if not problems:
        if any(p.monomial is None for p in map.pieces):
            notes.append("measure preservation not checked: a piece matrix is not monomial")
        else:
            boxes, weights = [], []
            for p in map.pieces:
                ilo, ihi = p.image_box()
                for tlo, thi in _torus_pieces(ilo, ihi):
                    boxes.append((tlo, thi))
                    weights.append(1 / abs(p.det))
            bad = [w for v, w in _coverage(boxes, weights, d) if w != 1]
            if bad:
                problems.append("torus map does not preserve Lebesgue measure "
                                f"(preimage density takes value {bad[0]})")
    report = ValidationReport("general", not problems, reports, gap, overlap, problems, notes)
    if map.bernoulli is not None:
        b = validate_bernoulli(map.bernoulli)
        report = ValidationReport(
            "bernoulli", report.passed and b.passed, b.pieces, gap, overlap,
            problems + [m for m in b.problems if m not in problems], notes,
        )
    return report


# --- constructors -----------------------------------------------------------


def _piece_1d(lo, hi, slope, offset, target=None):
    return AffinePiece.build([lo], [hi], [[slope]], [offset], None if target is None else [target])


def m_ary_expanding_1d(m: int, offsets=None, name=None) -> MapSpec:
    """``phi(x) = floor(x) + m u - i + o_i`` for u in [i/m, (i+1)/m)."""
    if m < 2:
        raise MapError("m must be >= 2")
    offsets = list(range(m)) if offsets is None else list(offsets)
    if len(offsets) != m:
        raise MapError(f"need {m} offsets, got {len(offsets)}")
    if any(as_fraction(o).denominator != 1 for o in offsets):
        raise MapError("Bernoulli offsets must be integers")
    pieces = tuple(
        _piece_1d(Fraction(i, m), Fraction(i + 1, m), m, int(o) - i, int(o))
        for i, o in enumerate(offsets)
    )
    part = BernoulliPartition(1, pieces)
    return MapSpec.from_partition(part, name or f"expanding_{m}")


def doubling_1d() -> MapSpec:
    """``phi(x) = 2x - floor(x)``."""
    return m_ary_expanding_1d(2, (0, 1), name="doubling")


def shifted_doubling_1d() -> MapSpec:
    """``phi(x) = 2x - floor(x) - 1/2``; its images straddle integer cubes, so no Bernoulli data."""
    h = Fraction(1, 2)
    q = Fraction(1, 4)
    pieces = (
        _piece_1d(0, q, 2, -h),
        _piece_1d(q, 3 * q, 2, -h),
        _piece_1d(3 * q, 1, 2, -h),
    )
    return MapSpec(1, pieces, "shifted_doubling")


def shifted_doubling_partition(form: int = 3) -> BernoulliPartition:
    """The shifted doubling map forced into partition form; it fails validation.

    ``form=3`` cuts Q0 so each image lies in one integer cube (the outer
    pieces only reach half of it); ``form=2`` uses the two halves of Q0, whose
    image cubes ``o_i + [0,1)`` have half-integer corners ``o_i = -1/2, 1/2``.
    """
    h, q = Fraction(1, 2), Fraction(1, 4)
    if form == 2:
        return BernoulliPartition(1, (
            _piece_1d(0, h, 2, -h, -h),
            _piece_1d(h, 1, 2, -h, h),
        ))
    return BernoulliPartition(1, (
        _piece_1d(0, q, 2, -h, -1),
        _piece_1d(q, 3 * q, 2, -h, 0),
        _piece_1d(3 * q, 1, 2, -h, 1),
    ))


def identity_map(shift=(0,), name=None) -> MapSpec:
    """``phi(x) = x + k`` for a fixed integer vector k."""
    shift = tuple(int(s) for s in shift)
    d = len(shift)
    eye = [[1 if i == j else 0 for j in range(d)] for i in range(d)]
    piece = AffinePiece.build([0] * d, [1] * d, eye, shift, shift)
    return MapSpec(d, (piece,), name or ("identity" if not any(shift) else f"shift{list(shift)}"))


def product_map(maps, name=None) -> MapSpec:
    """Cartesian product of maps; Bernoulli when every factor is."""
    maps = list(maps)
    if not maps:
        raise MapError("product of no maps")
    dims = [m.dimension for m in maps]
    d = sum(dims)
    pieces = []
    for combo in itertools.product(*[m.pieces for m in maps]):
        lo, hi, off, tgt = [], [], [], []
        mat = [[Fraction(0)] * d for _ in range(d)]
        base = 0
        for p, k in zip(combo, dims):
            lo += p.lo
            hi += p.hi
            off += p.offset
            for i in range(k):
                for j in range(k):
                    mat[base + i][base + j] = p.matrix[i][j]
            tgt = None if (tgt is None or p.target is None) else tgt + list(p.target)
            base += k
        pieces.append(AffinePiece(tuple(lo), tuple(hi), tuple(tuple(r) for r in mat),
                                  tuple(off), None if tgt is None else tuple(tgt)))
    name = name or "x".join(m.name for m in maps)
    if all(m.bernoulli is not None for m in maps):
        return MapSpec.from_partition(BernoulliPartition(d, tuple(pieces)), name)
    return MapSpec(d, tuple(pieces), name)


BUILTINS = {
    "doubling": doubling_1d,
    "shifted_doubling": shifted_doubling_1d,
    "identity": identity_map,
    "doubling_2d": lambda: product_map([doubling_1d(), doubling_1d()], "doubling_2d"),
    "tripling": lambda: m_ary_expanding_1d(3, (0, 1, 2), "tripling"),
}


def resolve_map(ref) -> MapSpec:
    """A builtin name or a path to a ``maps/v1`` file."""
    if isinstance(ref, MapSpec):
        return ref
    if ref in BUILTINS:
        return BUILTINS[ref]()
    path = Path(ref)
    if path.exists():
        return load_map(path)
    raise ConfigError(f"unknown map {ref!r} (builtins: {', '.join(BUILTINS)})")


# --- maps/v1 file format ----------------------------------------------------


def _vec(v, d, what):
    if not isinstance(v, (list, tuple)):
        v = [v]
    if len(v) != d:
        raise ConfigError(f"{what}: expected {d} entries, got {len(v)}")
    return v


def map_from_dict(doc) -> MapSpec:
    if not isinstance(doc, dict):
        raise ConfigError("map document must be a mapping")
    if doc.get("schema") != MAP_SCHEMA:
        raise ConfigError(f"expected schema {MAP_SCHEMA!r}, got {doc.get('schema')!r}")
    try:
        d = int(doc["dimension"])
        raw = doc["pieces"]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"map document missing field: {exc}") from exc
    pieces = []
    try:
        for k, p in enumerate(raw):
            mat = p["matrix"]
            if d == 1 and not isinstance(mat, (list, tuple)):
                mat = [[mat]]
            mat = [_vec(r, d, f"piece {k} matrix row") for r in _vec(mat, d, f"piece {k} matrix")]
            tgt = p.get("target")
            pieces.append(AffinePiece.build(
                _vec(p["lo"], d, f"piece {k} lo"), _vec(p["hi"], d, f"piece {k} hi"),
                mat, _vec(p.get("offset", [0] * d), d, f"piece {k} offset"),
                None if tgt is None else _vec(tgt, d, f"piece {k} target"),
            ))
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed piece: {exc}") from exc
    except MapError as exc:
        raise ConfigError(str(exc)) from exc
    name = str(doc.get("name", "map"))
    if doc.get("bernoulli", False):
        return MapSpec.from_partition(BernoulliPartition(d, tuple(pieces)), name)
    return MapSpec(d, tuple(pieces), name)


def map_to_dict(map: MapSpec) -> dict:
    def s(v):
        return str(v)

    return {
        "schema": MAP_SCHEMA,
        "name": map.name,
        "dimension": map.dimension,
        "bernoulli": map.bernoulli is not None,
        "pieces": [
            {
                "lo": [s(c) for c in p.lo],
                "hi": [s(c) for c in p.hi],
                "matrix": [[s(c) for c in row] for row in p.matrix],
                "offset": [s(c) for c in p.offset],
                **({"target": [int(t) if Fraction(t).denominator == 1 else s(t) for t in p.target]}
                   if p.target is not None else {}),
            }
            for p in map.pieces
        ],
    }


def load_map(path) -> MapSpec:
    try:
        doc = yaml.safe_load(Path(path).read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read map file {path}: {exc}") from exc
    return map_from_dict(doc)


def dump_map(map: MapSpec, path=None) -> str:
    text = yaml.safe_dump(map_to_dict(map), sort_keys=False)
    if path is not None:
        Path(path).write_text(text)
    return text
