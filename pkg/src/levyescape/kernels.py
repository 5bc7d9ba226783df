"""Backend selection for the hot kernels.

The compiled Cython core is used when it imports; otherwise, or when
``LEVYESCAPE_BACKEND=python`` is set, the numpy implementations are used.
Drift fields unknown to the compiled core always run on numpy.
"""

import os

import numpy as np

from . import _pykernels

BACKEND = "python"
_ckernels = None
if os.environ.get("LEVYESCAPE_BACKEND", "").lower() != "python":
    try:
        from . import _ckernels
        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on the build
        _ckernels = None

COMPILED_DRIFTS = ("ml", "zero")


def get_impl(backend=None):
    backend = backend or BACKEND
    if backend == "cython":
        if _ckernels is None:
            raise ImportError("compiled kernels are not built")
        return _ckernels
    return _pykernels


def uniform_pairs(seed, counter, stream, tag, backend=None):
    return get_impl(backend).uniform_pairs(seed, counter, stream, tag)


def noise_draws(alpha, seed, counter, stream, tag, backend=None):
    counter = np.asarray(counter, dtype=np.uint64)
    return get_impl(backend).noise_draws(float(alpha), seed, counter, stream, tag)


def simulate_paths(drift, start, box, alpha, sigma1, sigma2, dt, n_steps, seed,
                   path_ids, antithetic=False, bridge=False, backend=None):
    kind = getattr(drift, "kind", None)
    impl = get_impl(backend)
    if kind in COMPILED_DRIFTS:
        args = np.ascontiguousarray(drift.kernel_args(), dtype=np.float64)
    else:
        impl, args = _pykernels, drift
    return impl.simulate_paths(args, tuple(map(float, start)), tuple(map(float, box)),
                               float(alpha), float(sigma1), float(sigma2), float(dt),
                               int(n_steps), seed, path_ids, bool(antithetic),
                               bool(bridge))
