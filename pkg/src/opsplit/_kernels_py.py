"""NumPy fallback for the compiled iteration kernels.

Same signature and same arithmetic (operation order included) as the
Cython module ``_kernels``, so either backend can serve the affine
inclusion runs.  The compiled version avoids the per-iteration Python
dispatch overhead; this one exists so the package works without a build
toolchain and as the baseline for the kernel benchmark.
"""

import time

import numpy as np

BACKEND = "python"


def affine_reflected_loop(S, b, nu, x0, xm1, xbar, gammas, noise_scale,
                          Z, frb, record_every, stop_tol,
                          dist_out, resid_out, draw_err_out, wall_out,
                          ns_out):
    """Iterate the reflected (or forward-reflected) step on an affine field.

    The field is B y = S y + b, the backward operator is nu*Id (resolvent
    w / (1 + gamma nu)).  Gaussian noise enters as
    ``noise_scale[k] * Z[k]`` when ``Z`` is non-empty.  Metrics for step k
    land in the output rows as iterate index n = k+1; a row is written
    when k is a multiple of ``record_every``.

    Returns ``(rows, steps, stopped_early, diverged, x_final, x_prev_final)``.
    """
    budget = gammas.shape[0]
    has_noise = Z.shape[0] > 0
    has_xbar = xbar.shape[0] > 0
    xcur = x0.copy()
    xprev = xm1.copy()
    t0 = time.perf_counter_ns()
    rows = 0
    streak = 0
    stopped = False
    diverged = False
    steps = 0
    # overflow past the divergence point is expected and detected below
    with np.errstate(over="ignore", invalid="ignore"):
        for k in range(budget):
            g = gammas[k]
            if frb:
                by = S @ xcur + b
                byp = S @ xprev + b
                r = 2.0 * by - byp
                draw_err = 0.0
            else:
                y = 2.0 * xcur - xprev
                by = S @ y + b
                if has_noise:
                    r = by + noise_scale[k] * Z[k]
                else:
                    r = by
                delta = r - by
                draw_err = float(delta @ delta)
            w = xcur - g * r
            xnew = w / (1.0 + g * nu)
            dvec = xnew - xcur
            resid = float(np.sqrt(dvec @ dvec))
            if has_xbar:
                evec = xnew - xbar
                dist = float(evec @ evec)
            else:
                dist = np.nan
            if not np.isfinite(resid) or (has_xbar and not np.isfinite(dist)):
                diverged = True
                break
            xprev, xcur = xcur, xnew
            steps = k + 1
            if stop_tol > 0.0:
                streak = streak + 1 if resid < stop_tol else 0
            if k % record_every == 0:
                ns_out[rows] = k + 1
                dist_out[rows] = dist
                resid_out[rows] = resid
                draw_err_out[rows] = draw_err
                wall_out[rows] = time.perf_counter_ns() - t0
                rows += 1
            if streak >= 10:
                stopped = True
                break
    return rows, steps, stopped, diverged, xcur, xprev
