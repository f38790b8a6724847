"""Streaming mean/variance accumulators (Welford) and their pairwise merge."""

import numpy as np


def welford(values, axis=0):
    """``(count, mean, m2)`` of ``values`` along ``axis`` by one-pass updates."""
    values = np.moveaxis(np.asarray(values, dtype=float), axis, 0)
    mean = np.zeros(values.shape[1:])
    m2 = np.zeros(values.shape[1:])
    for k, x in enumerate(values, start=1):
        delta = x - mean
        mean = mean + delta / k
        m2 = m2 + delta * (x - mean)
    return len(values), mean, m2


def merge(a, b):
    """Chan et al. combination of two ``(count, mean, m2)`` triples."""
    na, ma, sa = a
    nb, mb, sb = b
    if na == 0:
        return b
    if nb == 0:
        return a
    n = na + nb
    delta = mb - ma
    mean = ma + delta * (nb / n)
    m2 = sa + sb + delta * delta * (na * nb / n)
    return n, mean, m2


def merge_all(parts):
    """Left fold of ``merge`` in the given order (the order fixes the rounding)."""
    acc = (0, 0.0, 0.0)
    for p in parts:
        acc = merge(acc, p)
    return acc
