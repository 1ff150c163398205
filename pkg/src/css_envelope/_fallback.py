"""Pure-Python implementations of the hot loops in ``_kernels.pyx``.

Used when the compiled extension is unavailable or when
``CSS_ENVELOPE_PURE=1`` is set. Integer kernels return exactly what the
compiled ones return; the jump-linear kernel agrees to rounding.
"""
import numpy as np


def _rt_iter(c_i, b_i, hp, horizon):
    r = c_i + b_i
    its = 0
    while True:
        nxt = c_i + b_i
        for c, p, j in hp:
            nxt += -(-(r + j) // p) * c
        its += 1
        if nxt == r or nxt > horizon:
            return nxt, its
        r = nxt


def rt_fixed_point(c_i, b_i, hp_c, hp_p, hp_j, horizon):
    hp = list(zip(map(int, hp_c), map(int, hp_p), map(int, hp_j)))
    r, its = _rt_iter(int(c_i), int(b_i), hp, int(horizon))
    return r, its, r <= horizon


def rt_sweep(c_grid, b_i, hp_c, hp_p, hp_j, horizon):
    hp = list(zip(map(int, hp_c), map(int, hp_p), map(int, hp_j)))
    rs, its, oks = [], [], []
    for c_i in c_grid:
        r, n = _rt_iter(int(c_i), int(b_i), hp, int(horizon))
        rs.append(r)
        its.append(n)
        oks.append(r <= horizon)
    return (np.array(rs, dtype=np.int64), np.array(its, dtype=np.int64),
            np.array(oks, dtype=bool))


def busy_period(c_i, b_i, hp_c, hp_p, hp_j, horizon):
    c = [int(v) for v in hp_c]
    p = [int(v) for v in hp_p]
    jj = [int(v) for v in hp_j]
    n = len(c)
    pending = [0] * n
    next_m = [0] * n
    next_rel = [0] * n
    for j in range(n):
        m0 = jj[j] // p[j] + 1
        pending[j] = m0 * c[j]
        next_m[j] = m0
        next_rel[j] = m0 * p[j] - jj[j]
    rem_i, rem_b = int(c_i), int(b_i)
    t = 0
    while t < horizon:
        for j in range(n):
            while next_rel[j] == t:
                pending[j] += c[j]
                next_m[j] += 1
                next_rel[j] = next_m[j] * p[j] - jj[j]
        if rem_b > 0:
            rem_b -= 1
        else:
            for j in range(n):
                if pending[j] > 0:
                    pending[j] -= 1
                    break
            else:
                rem_i -= 1
                if rem_i <= 0:
                    return t + 1
        t += 1
    return -1


def jump_linear_chunk(x, log_v, mode, phi, lt, pm, scale, cum, normals, uniforms):
    steps, runs = uniforms.shape
    out = np.empty((steps, runs))
    for k in range(steps):
        a = mode
        nxt = (np.einsum("rij,rj->ri", phi[a], x)
               + scale[a][:, None] * np.einsum("rij,rj->ri", lt[a], normals[k]))
        b = (uniforms[k][:, None] >= cum[a]).sum(axis=1)
        b = np.minimum(b, cum.shape[0] - 1)
        mode[:] = b
        v = np.einsum("ri,rij,rj->r", nxt, pm[b], nxt)
        log_v += np.log(v)
        x[:] = nxt / np.sqrt(v)[:, None]
        out[k] = log_v
    return out
