"""Exact law of floor(phi(U)) for U uniform on Q0, and the limiting variance."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from ..errors import MapError
from ..maps import MapSpec


@dataclass(frozen=True)
class JumpLaw:
    """``support`` is a sorted tuple of ``(cube, probability)`` with exact probabilities."""

    dimension: int
    support: tuple

    def __post_init__(self):
        total = sum((p for _, p in self.support), Fraction(0))
        if total != 1 or any(p < 0 or p > 1 for _, p in self.support):
            raise MapError(f"jump law does not sum to 1 (got {total})")

    def as_dict(self):
        return {k: p for k, p in self.support}

    def moments(self, v):
        """``(E[v.o], E[(v.o)^2])`` as floats."""
        v = np.asarray(v, float)
        m1 = sum(float(p) * float(np.dot(v, k)) for k, p in self.support)
        m2 = sum(float(p) * float(np.dot(v, k)) ** 2 for k, p in self.support)
        return m1, m2

    def variance(self, v) -> float:
        v = np.asarray(v, float).reshape(-1)
        v = v / np.linalg.norm(v)
        exact = _exact_vector(v)
        if exact is not None:
            m1 = sum((p * sum((a * b for a, b in zip(exact, k)), Fraction(0))
                      for k, p in self.support), Fraction(0))
            m2 = sum((p * sum((a * b for a, b in zip(exact, k)), Fraction(0)) ** 2
                      for k, p in self.support), Fraction(0))
            return float(m2 - m1 * m1)
        m1, m2 = self.moments(v)
        return m2 - m1 * m1

    def to_text(self) -> str:
        lines = ["jump_law:"]
        for k, p in self.support:
            cube = k[0] if self.dimension == 1 else list(k)
            lines.append(f"  - cube: {cube}\n    probability: {p}  # {float(p):.12g}")
        return "\n".join(lines)


def _exact_vector(v):
    # unit vectors along an axis (the common case) keep the variance exact
    if np.count_nonzero(v) == 1 and abs(abs(v[np.flatnonzero(v)[0]]) - 1.0) == 0:
        return tuple(Fraction(int(round(c))) for c in v)
    return None


def _axis_overlaps(lo: Fraction, hi: Fraction):
    """``[(k, length of [lo, hi) & [k, k+1)), ...]`` for integer k."""
    out = []
    k = math.floor(lo)
    while k < hi:
        seg = min(hi, k + 1) - max(lo, Fraction(k))
        if seg > 0:
            out.append((k, seg))
        k += 1
    return out


def exact_jump_law(map: MapSpec) -> JumpLaw:
    """Law of ``floor(phi(U))``, U ~ unif(Q0), in exact rational arithmetic.

    Each piece's image box is cut by the integer cubes; the pulled-back volume
    of each cut is tallied against its cube.  Pieces must have monomial
    matrices (so images are boxes) unless the whole image sits in one cube.
    """
    d = map.dimension
    tally = {}
    for piece in map.pieces:
        box = piece.image_box()
        if box is None:
            verts = piece.image_vertices()
            lows = tuple(math.floor(min(v[k] for v in verts)) for k in range(d))
            highs = tuple(math.ceil(max(v[k] for v in verts)) - 1 for k in range(d))
            if lows != highs:
                raise MapError(
                    "jump law needs monomial piece matrices unless the image lies in one cube"
                )
            tally[lows] = tally.get(lows, Fraction(0)) + piece.volume
            continue
        ilo, ihi = box
        image_vol = Fraction(1)
        for a, b in zip(ilo, ihi):
            image_vol *= b - a
        per_axis = [_axis_overlaps(a, b) for a, b in zip(ilo, ihi)]
        for combo in itertools.product(*per_axis):
            cube = tuple(k for k, _ in combo)
            frac = Fraction(1)
            for _, seg in combo:
                frac *= seg
            # the affine map is uniform on boxes, so mass is proportional to image volume
            tally[cube] = tally.get(cube, Fraction(0)) + piece.volume * frac / image_vol
    support = tuple(sorted((k, p) for k, p in tally.items() if p != 0))
    return JumpLaw(d, support)


def theoretical_asyvar(map: MapSpec, v=None) -> float:
    """``var(v . floor(phi(U)))`` with v normalised to unit length."""
    if v is None:
        v = np.ones(map.dimension)
    v = np.asarray(v, float).reshape(-1)
    if v.size != map.dimension or not np.linalg.norm(v) > 0:
        raise MapError("v must be a nonzero vector of the map's dimension")
    return exact_jump_law(map).variance(v)
