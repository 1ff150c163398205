# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot loops.

Same signatures and results as :mod:`css_envelope._fallback`; selected at
import time by :mod:`css_envelope.kernels`.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport log, sqrt

cnp.import_array()

ctypedef cnp.int64_t i64


cdef inline i64 _ceil_div(i64 a, i64 b) nogil:
    # a >= 0, b > 0
    return (a + b - 1) // b


cdef i64 _rt_iter(i64 c_i, i64 b_i, const i64[:] hp_c, const i64[:] hp_p,
                  const i64[:] hp_j, i64 horizon, i64 *iterations) nogil:
    cdef Py_ssize_t j, n = hp_c.shape[0]
    cdef i64 r = c_i + b_i
    cdef i64 nxt
    iterations[0] = 0
    while True:
        nxt = c_i + b_i
        for j in range(n):
            nxt += _ceil_div(r + hp_j[j], hp_p[j]) * hp_c[j]
        iterations[0] += 1
        if nxt == r:
            return r
        r = nxt
        if r > horizon:
            return r


def rt_fixed_point(i64 c_i, i64 b_i, hp_c, hp_p, hp_j, i64 horizon):
    """Least fixed point of the fixed-priority recurrence, integer ticks.

    Returns ``(R, iterations, converged)``.
    """
    cdef const i64[:] c = np.ascontiguousarray(hp_c, dtype=np.int64)
    cdef const i64[:] p = np.ascontiguousarray(hp_p, dtype=np.int64)
    cdef const i64[:] jj = np.ascontiguousarray(hp_j, dtype=np.int64)
    cdef i64 its = 0
    cdef i64 r
    with nogil:
        r = _rt_iter(c_i, b_i, c, p, jj, horizon, &its)
    return int(r), int(its), bool(r <= horizon)


def rt_sweep(c_grid, i64 b_i, hp_c, hp_p, hp_j, i64 horizon):
    """Vectorised :func:`rt_fixed_point` over a grid of C_i values."""
    cdef const i64[:] cg = np.ascontiguousarray(c_grid, dtype=np.int64)
    cdef const i64[:] c = np.ascontiguousarray(hp_c, dtype=np.int64)
    cdef const i64[:] p = np.ascontiguousarray(hp_p, dtype=np.int64)
    cdef const i64[:] jj = np.ascontiguousarray(hp_j, dtype=np.int64)
    cdef Py_ssize_t k, m = cg.shape[0]
    out_r = np.empty(m, dtype=np.int64)
    out_it = np.empty(m, dtype=np.int64)
    out_ok = np.empty(m, dtype=np.bool_)
    cdef i64[:] r_v = out_r
    cdef i64[:] it_v = out_it
    cdef cnp.npy_bool[:] ok_v = out_ok
    cdef i64 its
    with nogil:
        for k in range(m):
            its = 0
            r_v[k] = _rt_iter(cg[k], b_i, c, p, jj, horizon, &its)
            it_v[k] = its
            ok_v[k] = r_v[k] <= horizon
    return out_r, out_it, out_ok


def busy_period(i64 c_i, i64 b_i, hp_c, hp_p, hp_j, i64 horizon):
    """Tick-by-tick level-i busy period from a synchronous critical instant.

    ``hp_*`` must be ordered highest priority first and ``c_i`` must be
    positive. Blocking occupies the resource from t=0. Returns the
    completion tick of task i's first job, or -1 when ``horizon`` ticks
    elapse first.
    """
    cdef const i64[:] c = np.ascontiguousarray(hp_c, dtype=np.int64)
    cdef const i64[:] p = np.ascontiguousarray(hp_p, dtype=np.int64)
    cdef const i64[:] jj = np.ascontiguousarray(hp_j, dtype=np.int64)
    cdef Py_ssize_t j, n = c.shape[0]
    pending_arr = np.zeros(n, dtype=np.int64)
    next_arr = np.zeros(n, dtype=np.int64)
    nextm_arr = np.zeros(n, dtype=np.int64)
    cdef i64[:] pending = pending_arr
    cdef i64[:] next_rel = next_arr
    cdef i64[:] next_m = nextm_arr
    cdef i64 t = 0, m0, rem_i = c_i, rem_b = b_i, result = -1
    cdef bint busy
    with nogil:
        for j in range(n):
            # jobs m with m*P - J <= 0 are all released at t = 0
            m0 = jj[j] // p[j] + 1
            pending[j] = m0 * c[j]
            next_m[j] = m0
            next_rel[j] = m0 * p[j] - jj[j]
        while t < horizon:
            for j in range(n):
                while next_rel[j] == t:
                    pending[j] += c[j]
                    next_m[j] += 1
                    next_rel[j] = next_m[j] * p[j] - jj[j]
            if rem_b > 0:
                rem_b -= 1
            else:
                busy = False
                for j in range(n):
                    if pending[j] > 0:
                        pending[j] -= 1
                        busy = True
                        break
                if not busy:
                    rem_i -= 1
                    if rem_i <= 0:
                        result = t + 1
                        break
            t += 1
    return int(result)


def jump_linear_chunk(double[:, ::1] x, double[::1] log_v, i64[::1] mode,
                      const double[:, :, ::1] phi, const double[:, :, ::1] lt,
                      const double[:, :, ::1] pm, const double[::1] scale,
                      const double[:, ::1] cum, const double[:, :, ::1] normals,
                      const double[:, ::1] uniforms):
    """Advance a batch of jump-linear runs by ``normals.shape[0]`` epochs.

    Per run and epoch (current mode ``a``, state normalised so that
    ``x' P_a x = 1``)::

        x <- phi[a] x + scale[a] * lt[a] xi      # perturbation
        a <- b ~ cum[a]                           # Markov jump
        v = x' P_b x;  log_v += log v;  x /= sqrt(v)

    ``x``, ``log_v`` and ``mode`` are updated in place. Returns the
    accumulated log V per epoch, shape ``(steps, runs)``.
    """
    cdef Py_ssize_t steps = normals.shape[0]
    cdef Py_ssize_t runs = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    cdef Py_ssize_t nm = cum.shape[0]
    cdef Py_ssize_t k, r, i, l, b
    cdef i64 a
    cdef double acc, v, u, s
    out = np.empty((steps, runs), dtype=np.float64)
    cdef double[:, ::1] out_v = out
    tmp_arr = np.empty(n, dtype=np.float64)
    cdef double[::1] tmp = tmp_arr
    with nogil:
        for k in range(steps):
            for r in range(runs):
                a = mode[r]
                for i in range(n):
                    acc = 0.0
                    for l in range(n):
                        acc = acc + phi[a, i, l] * x[r, l] + scale[a] * lt[a, i, l] * normals[k, r, l]
                    tmp[i] = acc
                u = uniforms[k, r]
                b = nm - 1
                for i in range(nm):
                    if u < cum[a, i]:
                        b = i
                        break
                mode[r] = b
                v = 0.0
                for i in range(n):
                    s = 0.0
                    for l in range(n):
                        s = s + pm[b, i, l] * tmp[l]
                    v = v + tmp[i] * s
                log_v[r] = log_v[r] + log(v)
                v = sqrt(v)
                for i in range(n):
                    x[r, i] = tmp[i] / v
                out_v[k, r] = log_v[r]
    return out
