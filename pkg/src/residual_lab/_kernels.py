"""Compiled inner loops for path simulation.

State of a path is kept split as ``X = K + u`` with ``K`` integer and
``u`` in [0, 1)^d, so lattice bookkeeping (S, J) is exact integer arithmetic
and float error only ever touches the fractional part.
"""

import numpy as np
from numba import njit

from .rng import STREAM_INITIAL, STREAM_NOISE, normal_pair, uniform_pair

INIT_POINT = 0
INIT_UNIFORM = 1
INIT_GAUSSIAN = 2


@njit(cache=True, nogil=True, inline="always")
def find_piece(u, lo, hi):
    M, d = lo.shape
    for i in range(M):
        inside = True
        for k in range(d):
            if u[k] < lo[i, k] or u[k] >= hi[i, k]:
                inside = False
                break
        if inside:
            return i
    return -1


@njit(cache=True, nogil=True, inline="always")
def init_state(seed, path, kind, x0, sigma, K, u):
    d = K.shape[0]
    spare = 0.0
    for k in range(d):
        if kind == INIT_UNIFORM:
            if k % 2 == 0:
                a, spare = uniform_pair(seed, path, k // 2, STREAM_INITIAL)
            else:
                a = spare
            K[k] = 0
            u[k] = a
            continue
        if kind == INIT_GAUSSIAN:
            if k % 2 == 0:
                z, spare = normal_pair(seed, path, k // 2, STREAM_INITIAL)
            else:
                z = spare
            x = x0[k] + sigma * z
        else:
            x = x0[k]
        f = np.floor(x)
        r = x - f
        if r >= 1.0:
            r = 0.0
            f += 1.0
        K[k] = np.int64(f)
        u[k] = r


@njit(cache=True, nogil=True, inline="always")
def advance(seed, path, n, eps, lo, hi, A, b, K, u, y, D, Dl, sp):
    """One step ``X <- phi(X) + eps * xi_n`` (n is 1-based).

    ``sp[0]`` carries the unused half of the last normal pair between calls.
    Writes the S increment ``floor(phi(X)) - floor(X)`` to ``D`` and the J
    increment ``floor(X_new) - floor(phi(X))`` to ``Dl``.  Returns False if
    ``u`` lies in no piece.
    """
    d = K.shape[0]
    i = find_piece(u, lo, hi)
    if i < 0:
        return False
    for k in range(d):
        acc = b[i, k]
        for l in range(d):
            acc += A[i, k, l] * u[l]
        y[k] = acc
    for k in range(d):
        fy = np.floor(y[k])
        if eps > 0.0:
            j = (n - 1) * d + k
            if j % 2 == 0:
                z, sp[0] = normal_pair(seed, path, j // 2, STREAM_NOISE)
            else:
                z = sp[0]
            w = y[k] + eps * z
        else:
            w = y[k]
        fw = np.floor(w)
        r = w - fw
        if r >= 1.0:
            r = 0.0
            fw += 1.0
        D[k] = np.int64(fy)
        Dl[k] = np.int64(fw - fy)
        K[k] += np.int64(fw)
        u[k] = r
    return True


@njit(cache=True, nogil=True)
def ensemble_block(seed, path_start, n_paths, n_steps, lo, hi, A, b, eps, v,
                   kind, x0, sigma, decomp, mean, m2):
    """Welford moments over ``n_paths`` paths of v.X (and v.S, v.J, v.R).

    ``mean``/``m2`` have shape (Q, n_steps + 1), zero on entry.  Returns -1 on
    success or the index of the first path that hit a coverage gap.
    """
    d = lo.shape[1]
    K = np.zeros(d, np.int64)
    K0 = np.zeros(d, np.int64)
    S = np.zeros(d, np.int64)
    J = np.zeros(d, np.int64)
    D = np.zeros(d, np.int64)
    Dl = np.zeros(d, np.int64)
    u = np.zeros(d)
    y = np.zeros(d)
    vals = np.zeros(4)
    sp = np.zeros(1)
    Q = mean.shape[0]
    for i in range(n_paths):
        p = path_start + i
        init_state(seed, p, kind, x0, sigma, K, u)
        for k in range(d):
            K0[k] = K[k]
            S[k] = 0
            J[k] = 0
        inv = 1.0 / (i + 1)
        for n in range(n_steps + 1):
            if n > 0:
                if not advance(seed, p, n, eps, lo, hi, A, b, K, u, y, D, Dl, sp):
                    return p
                for k in range(d):
                    S[k] += D[k]
                    J[k] += Dl[k]
            vK = 0.0
            vu = 0.0
            for k in range(d):
                vK += v[k] * K[k]
                vu += v[k] * u[k]
            vals[0] = vK + vu
            if decomp:
                vS = 0.0
                vJ = 0.0
                vK0 = 0.0
                for k in range(d):
                    vS += v[k] * S[k]
                    vJ += v[k] * J[k]
                    vK0 += v[k] * K0[k]
                vals[1] = vS
                vals[2] = vJ
                vals[3] = vK0 + vu
            for q in range(Q):
                delta = vals[q] - mean[q, n]
                mean[q, n] += delta * inv
                m2[q, n] += delta * (vals[q] - mean[q, n])
    return -1


@njit(cache=True, nogil=True)
def trajectory_block(seed, path_start, n_steps, lo, hi, A, b, eps, kind, x0, sigma,
                     K_out, u_out, D_out, Dl_out):
    """Full trajectories: K/u of shape (P, n_steps+1, d), increments (P, n_steps, d)."""
    n_paths = K_out.shape[0]
    d = lo.shape[1]
    K = np.zeros(d, np.int64)
    D = np.zeros(d, np.int64)
    Dl = np.zeros(d, np.int64)
    u = np.zeros(d)
    y = np.zeros(d)
    sp = np.zeros(1)
    for i in range(n_paths):
        p = path_start + i
        init_state(seed, p, kind, x0, sigma, K, u)
        K_out[i, 0] = K
        u_out[i, 0] = u
        for n in range(1, n_steps + 1):
            if not advance(seed, p, n, eps, lo, hi, A, b, K, u, y, D, Dl, sp):
                return p
            K_out[i, n] = K
            u_out[i, n] = u
            D_out[i, n - 1] = D
            Dl_out[i, n - 1] = Dl
    return -1


@njit(cache=True, nogil=True)
def ensemble_block_1d(seed, path_start, n_paths, n_steps, lo, hi, A, b, eps, v,
                      kind, x0, sigma, decomp, mean, m2):
    """Scalar-state specialisation of ``ensemble_block`` for d = 1 (same draws, same output)."""
    M = lo.shape[0]
    plo = lo[:, 0].copy()
    phi = hi[:, 0].copy()
    pa = A[:, 0, 0].copy()
    pb = b[:, 0].copy()
    Kv = np.zeros(1, np.int64)
    uv = np.zeros(1)
    Q = mean.shape[0]
    sgn = v[0]
    for i in range(n_paths):
        p = path_start + i
        init_state(seed, p, kind, x0, sigma, Kv, uv)
        K = Kv[0]
        K0 = K
        u = uv[0]
        S = 0
        J = 0
        spare = 0.0
        inv = 1.0 / (i + 1)
        for n in range(n_steps + 1):
            if n > 0:
                k = -1
                for t in range(M):
                    if u >= plo[t] and u < phi[t]:
                        k = t
                        break
                if k < 0:
                    return p
                y = pa[k] * u + pb[k]
                fy = np.floor(y)
                w = y
                if eps > 0.0:
                    if n % 2 == 1:
                        z, spare = normal_pair(seed, p, (n - 1) // 2, STREAM_NOISE)
                    else:
                        z = spare
                    w = y + eps * z
                fw = np.floor(w)
                r = w - fw
                if r >= 1.0:
                    r = 0.0
                    fw += 1.0
                iw = np.int64(fw)
                iy = np.int64(fy)
                S += iy
                J += iw - iy
                K += iw
                u = r
            x = sgn * (K + u)
            dl = x - mean[0, n]
            mean[0, n] += dl * inv
            m2[0, n] += dl * (x - mean[0, n])
            if Q > 1:
                xs = sgn * S
                dl = xs - mean[1, n]
                mean[1, n] += dl * inv
                m2[1, n] += dl * (xs - mean[1, n])
                xj = sgn * J
                dl = xj - mean[2, n]
                mean[2, n] += dl * inv
                m2[2, n] += dl * (xj - mean[2, n])
                xr = sgn * (K0 + u)
                dl = xr - mean[3, n]
                mean[3, n] += dl * inv
                m2[3, n] += dl * (xr - mean[3, n])
    return -1
