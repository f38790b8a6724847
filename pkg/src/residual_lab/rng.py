"""Counter-based random streams.

Every Gaussian used by the simulators is a pure function of
``(seed, path_index, draw_index, stream)``.  The generator is Philox4x32-10
(Salmon et al., Random123); uniforms are built from two 32-bit words (53-bit resolution) and
turned into normals by the inverse normal CDF (Wichura's AS241, relative
accuracy about 1e-16).  Because nothing depends on call order,
splitting the paths over any number of workers gives bit-identical draws.

Draw indexing: the ``j``-th normal of a path (``j = step * d + axis``) comes
from Philox block ``j // 2``, element ``j % 2``.
"""

import numpy as np
from numba import njit

STREAM_NOISE = 0
STREAM_INITIAL = 1
STREAM_AUX = 2

_M0 = np.uint64(0xD2511F53)
_M1 = np.uint64(0xCD9E8D57)
_W0 = np.uint64(0x9E3779B9)
_W1 = np.uint64(0xBB67AE85)
_MASK = np.uint64(0xFFFFFFFF)
_S32 = np.uint64(32)
_S5 = np.uint64(5)
_S6 = np.uint64(6)
_TWO26 = 67108864.0
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True, nogil=True)
def philox4x32(c0, c1, c2, c3, k0, k1):
    """Philox4x32 with 10 rounds. All arguments are uint64 holding 32-bit values."""
    for r in range(10):
        p0 = _M0 * c0
        p1 = _M1 * c2
        hi0 = p0 >> _S32
        lo0 = p0 & _MASK
        hi1 = p1 >> _S32
        lo1 = p1 & _MASK
        c0 = hi1 ^ c1 ^ k0
        c1 = lo1
        c2 = hi0 ^ c3 ^ k1
        c3 = lo0
        if r < 9:
            k0 = (k0 + _W0) & _MASK
            k1 = (k1 + _W1) & _MASK
    return c0, c1, c2, c3


def philox4x32_py(counter, key):
    """Convenience wrapper taking ``(4,)`` counter and ``(2,)`` key of ints."""
    c = [np.uint64(int(w) & 0xFFFFFFFF) for w in counter]
    k = [np.uint64(int(w) & 0xFFFFFFFF) for w in key]
    out = philox4x32(c[0], c[1], c[2], c[3], k[0], k[1])
    return tuple(int(w) for w in out)


@njit(cache=True, nogil=True)
def _uniform53(a, b):
    return ((a >> _S5) * _TWO26 + (b >> _S6)) * _INV53


@njit(cache=True, nogil=True)
def uniform_pair(seed, path, block, stream):
    """Two uniforms on [0, 1) for ``(seed, path, block, stream)``."""
    s = np.uint64(seed)
    p = np.uint64(path)
    w0, w1, w2, w3 = philox4x32(
        np.uint64(block) & _MASK, p & _MASK, p >> _S32, np.uint64(stream),
        s & _MASK, s >> _S32,
    )
    return _uniform53(w0, w1), _uniform53(w2, w3)


@njit(cache=True, nogil=True)
def norm_ppf(p):
    """Inverse standard normal CDF, algorithm AS241 (PPND16)."""
    q = p - 0.5
    if abs(q) <= 0.425:
        r = 0.180625 - q * q
        num = (((((((2509.0809287301226727 * r + 33430.575583588128105) * r
                    + 67265.770927008700853) * r + 45921.953931549871457) * r
                  + 13731.693765509461125) * r + 1971.5909503065514427) * r
                + 133.14166789178437745) * r + 3.387132872796366608)
        den = (((((((5226.495278852545925 * r + 28729.085735721942674) * r
                    + 39307.89580009271061) * r + 21213.794301586595867) * r
                  + 5394.1960214247511077) * r + 687.1870074920579083) * r
                + 42.313330701600911252) * r + 1.0)
        return q * num / den
    r = p if q < 0.0 else 1.0 - p
    if r <= 0.0:
        # p == 0 exactly (probability 2**-53); clamp to the smallest uniform
        r = 1.1102230246251565e-16
    r = np.sqrt(-np.log(r))
    if r <= 5.0:
        r -= 1.6
        num = (((((((7.7454501427834140764e-4 * r + 0.0227238449892691845833) * r
                    + 0.24178072517745061177) * r + 1.27045825245236838258) * r
                  + 3.64784832476320460504) * r + 5.7694972214606914055) * r
                + 4.6303378461565452959) * r + 1.42343711074968357734)
        den = (((((((1.05075007164441684324e-9 * r + 5.475938084995344946e-4) * r
                    + 0.0151986665636164571966) * r + 0.14810397642748007459) * r
                  + 0.68976733498510000455) * r + 1.6763848301838038494) * r
                + 2.05319162663775882187) * r + 1.0)
    else:
        r -= 5.0
        num = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r
                    + 0.0012426609473880784386) * r + 0.026532189526576123093) * r
                  + 0.29656057182850489123) * r + 1.7848265399172913358) * r
                + 5.4637849111641143699) * r + 6.6579046435011037772)
        den = (((((((2.04426310338993978564e-15 * r + 1.4215117583164458887e-7) * r
                    + 1.8463183175100546818e-5) * r + 7.868691311456132591e-4) * r
                  + 0.0148753612908506148525) * r + 0.13692988092273580531) * r
                + 0.59983220655588793769) * r + 1.0)
    val = num / den
    return -val if q < 0.0 else val


@njit(cache=True, nogil=True)
def normal_pair(seed, path, block, stream):
    """Two independent standard normals from one Philox block."""
    u1, u2 = uniform_pair(seed, path, block, stream)
    return norm_ppf(u1), norm_ppf(u2)


@njit(cache=True, nogil=True)
def _fill_normals(seed, path_start, out, stream):
    n_paths, n_draws = out.shape
    for i in range(n_paths):
        p = path_start + i
        for j in range(0, n_draws, 2):
            z0, z1 = normal_pair(seed, p, j // 2, stream)
            out[i, j] = z0
            if j + 1 < n_draws:
                out[i, j + 1] = z1


@njit(cache=True, nogil=True)
def _fill_uniforms(seed, path_start, out, stream):
    n_paths, n_draws = out.shape
    for i in range(n_paths):
        p = path_start + i
        for j in range(0, n_draws, 2):
            a, b = uniform_pair(seed, p, j // 2, stream)
            out[i, j] = a
            if j + 1 < n_draws:
                out[i, j + 1] = b


def normals(seed, path_start, n_paths, n_draws, stream=STREAM_NOISE):
    """Array ``(n_paths, n_draws)`` of the normals the simulators would use."""
    out = np.empty((n_paths, n_draws))
    _fill_normals(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF), path_start, out, stream)
    return out


def uniforms(seed, path_start, n_paths, n_draws, stream=STREAM_AUX):
    out = np.empty((n_paths, n_draws))
    _fill_uniforms(np.uint64(int(seed) & 0xFFFFFFFFFFFFFFFF), path_start, out, stream)
    return out
