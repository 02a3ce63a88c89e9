# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled iteration kernels for the affine inclusion runs.

Mirrors ``_kernels_py`` exactly in semantics; only the inner products and
matrix-vector products are hand-rolled C loops, so results can differ
from the NumPy backend by accumulation-order rounding (tested to agree
to ~1e-12 over short horizons).
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport NAN, isfinite, sqrt
from posix.time cimport CLOCK_MONOTONIC, clock_gettime, timespec

cnp.import_array()

BACKEND = "cython"


cdef inline long long _now_ns() noexcept nogil:
    cdef timespec ts
    clock_gettime(CLOCK_MONOTONIC, &ts)
    return <long long>ts.tv_sec * 1_000_000_000 + ts.tv_nsec


def affine_reflected_loop(double[:, ::1] S, double[::1] b, double nu,
                          double[::1] x0, double[::1] xm1,
                          double[::1] xbar,
                          double[::1] gammas, double[::1] noise_scale,
                          double[:, ::1] Z, bint frb,
                          long record_every, double stop_tol,
                          double[::1] dist_out, double[::1] resid_out,
                          double[::1] draw_err_out, long long[::1] wall_out,
                          long long[::1] ns_out):
    """See ``_kernels_py.affine_reflected_loop``; same contract."""
    cdef Py_ssize_t budget = gammas.shape[0]
    cdef Py_ssize_t d = x0.shape[0]
    cdef bint has_noise = Z.shape[0] > 0
    cdef bint has_xbar = xbar.shape[0] > 0

    xcur_arr = np.array(x0, dtype=np.float64)
    xprev_arr = np.array(xm1, dtype=np.float64)
    work_arr = np.empty(d, dtype=np.float64)
    by_arr = np.empty(d, dtype=np.float64)
    byp_arr = np.empty(d, dtype=np.float64)
    r_arr = np.empty(d, dtype=np.float64)

    cdef double[::1] xcur = xcur_arr
    cdef double[::1] xprev = xprev_arr
    cdef double[::1] xnew = work_arr
    cdef double[::1] by = by_arr
    cdef double[::1] byp = byp_arr
    cdef double[::1] r = r_arr
    cdef double[::1] tmp

    cdef Py_ssize_t k, i, j
    cdef long rows = 0, streak = 0
    cdef bint stopped = False, diverged = False
    cdef long steps = 0
    cdef double g, acc, sc, resid, dist, draw_err, e, denom
    cdef long long t0 = _now_ns()

    with nogil:
        for k in range(budget):
            g = gammas[k]
            if frb:
                for i in range(d):
                    acc = 0.0
                    for j in range(d):
                        acc += S[i, j] * xcur[j]
                    by[i] = acc + b[i]
                for i in range(d):
                    acc = 0.0
                    for j in range(d):
                        acc += S[i, j] * xprev[j]
                    byp[i] = acc + b[i]
                for i in range(d):
                    r[i] = 2.0 * by[i] - byp[i]
                draw_err = 0.0
            else:
                # y = 2 x - x_prev folded into the matvec; by = S y + b
                for i in range(d):
                    acc = 0.0
                    for j in range(d):
                        acc += S[i, j] * (2.0 * xcur[j] - xprev[j])
                    by[i] = acc + b[i]
                if has_noise:
                    sc = noise_scale[k]
                    draw_err = 0.0
                    for i in range(d):
                        e = sc * Z[k, i]
                        r[i] = by[i] + e
                        e = r[i] - by[i]
                        draw_err += e * e
                else:
                    for i in range(d):
                        r[i] = by[i]
                    draw_err = 0.0
            denom = 1.0 + g * nu
            resid = 0.0
            for i in range(d):
                xnew[i] = (xcur[i] - g * r[i]) / denom
                e = xnew[i] - xcur[i]
                resid += e * e
            resid = sqrt(resid)
            if has_xbar:
                dist = 0.0
                for i in range(d):
                    e = xnew[i] - xbar[i]
                    dist += e * e
            else:
                dist = NAN
            if not isfinite(resid) or (has_xbar and not isfinite(dist)):
                diverged = True
                break
            tmp = xprev
            xprev = xcur
            xcur = xnew
            xnew = tmp
            steps = k + 1
            if stop_tol > 0.0:
                if resid < stop_tol:
                    streak += 1
                else:
                    streak = 0
            if k % record_every == 0:
                ns_out[rows] = k + 1
                dist_out[rows] = dist
                resid_out[rows] = resid
                draw_err_out[rows] = draw_err
                wall_out[rows] = _now_ns() - t0
                rows += 1
            if streak >= 10:
                stopped = True
                break

    x_final = np.array(xcur, dtype=np.float64, copy=True)
    xprev_final = np.array(xprev, dtype=np.float64, copy=True)
    return rows, steps, bool(stopped), bool(diverged), x_final, xprev_final
