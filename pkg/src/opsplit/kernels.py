"""Backend selection for the hot iteration loops.

The compiled extension is preferred when importable; otherwise the NumPy
twin takes over.  ``BACKEND`` records which one is active and
``available_backends()`` lists both for the benchmark script.
"""

import math

import numpy as np

from . import _kernels_py

try:
    from . import _kernels
    _default = _kernels
except ImportError:  # no compiled extension in this environment
    _kernels = None
    _default = _kernels_py

BACKEND = _default.BACKEND


def available_backends():
    out = {"python": _kernels_py}
    if _kernels is not None:
        out["cython"] = _kernels
    return out


def get_backend(name="auto"):
    if name == "auto":
        return _default
    try:
        return available_backends()[name]
    except KeyError:
        raise ValueError(f"backend {name!r} is not available") from None


def affine_loop(S, b, nu, x0, x_prev, xbar, gammas, noise_std=None, seed=0,
                frb=False, record_every=1, stop_tol=0.0, backend="auto"):
    """Run the affine-field reflected loop on the selected backend.

    ``noise_std[k]`` is the total noise standard deviation sigma_k (split
    isotropically over coordinates inside); None means an exact run.  The
    Gaussian block is pregenerated from ``seed`` with the same generator
    the object-level oracle uses, so a kernel run and a step-by-step run
    consume identical noise.

    Returns a dict of recorded columns plus run status and final iterates.
    """
    mod = get_backend(backend)
    S = np.ascontiguousarray(S, dtype=float)
    b = np.ascontiguousarray(b, dtype=float)
    x0 = np.ascontiguousarray(x0, dtype=float)
    x_prev = np.ascontiguousarray(x_prev, dtype=float)
    d = x0.shape[0]
    budget = int(gammas.shape[0])
    xbar_arr = (np.empty(0) if xbar is None
                else np.ascontiguousarray(xbar, dtype=float))
    if noise_std is None:
        Z = np.empty((0, d))
        scale = np.empty(0)
    else:
        Z = np.random.default_rng(seed).standard_normal((budget, d))
        scale = np.ascontiguousarray(noise_std / math.sqrt(d), dtype=float)
    cap = max(1, -(-budget // record_every))  # ceil
    dist = np.empty(cap)
    resid = np.empty(cap)
    draw_err = np.empty(cap)
    wall = np.empty(cap, dtype=np.int64)
    ns = np.empty(cap, dtype=np.int64)
    rows, steps, stopped, diverged, x_fin, xp_fin = mod.affine_reflected_loop(
        S, b, float(nu), x0, x_prev, xbar_arr,
        np.ascontiguousarray(gammas, dtype=float), scale, Z,
        bool(frb), int(record_every), float(stop_tol),
        dist, resid, draw_err, wall, ns)
    return {
        "ns": ns[:rows],
        "dist_sq": dist[:rows] if xbar is not None else None,
        "resid": resid[:rows],
        "draw_err_sq": draw_err[:rows],
        "wall_ns": wall[:rows],
        "steps": steps,
        "stopped_early": stopped,
        "diverged": diverged,
        "x": x_fin,
        "x_prev": xp_fin,
        "backend": mod.BACKEND,
    }
