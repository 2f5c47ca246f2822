"""Backend selection for the hot loops.

The compiled extension is used when it imports; otherwise (or when
``FEDGROUP_PURE_PYTHON=1`` is set) the numpy fallback is used.  Both backends
return identical results; ``tests/test_kernels.py`` checks this.
"""

import os

import numpy as np

from fedgroup import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("FEDGROUP_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from fedgroup import _ckernels as _impl  # noqa: F811
        BACKEND = "cython"
    except ImportError:
        pass

_BACKENDS = {"python": _pykernels}
try:
    from fedgroup import _ckernels
    _BACKENDS["cython"] = _ckernels
except ImportError:
    pass


def available_backends():
    return sorted(_BACKENDS)


def backend(name=None):
    """Kernel module by name (default: the active backend).  Modules pass through."""
    if name is None:
        return _impl
    if not isinstance(name, str):
        return name
    if name not in _BACKENDS:
        raise ValueError(f"kernel backend {name!r} unavailable; have {available_backends()}")
    return _BACKENDS[name]


def _f64(a):
    return np.ascontiguousarray(a, dtype=np.float64)


def _i64(a):
    return np.ascontiguousarray(a, dtype=np.int64)


def disc_counts(xs, ys, owner, cx, cy, radius, m, impl=None):
    """Per-owner count of points strictly inside the disc."""
    impl = backend(impl)
    return impl.disc_counts(_f64(xs), _f64(ys), _i64(owner), float(cx), float(cy), float(radius), int(m))


def disc_sums(xs, ys, owner, weights, cx, cy, radius, m, impl=None):
    impl = backend(impl)
    return impl.disc_sums(_f64(xs), _f64(ys), _i64(owner), _f64(weights),
                          float(cx), float(cy), float(radius), int(m))


def grid_counts(xs, ys, owner, bbox, k, m, impl=None):
    """Per-owner row-major (top-left first) grid histogram, shape ``(m, k*k)``."""
    impl = backend(impl)
    min_x, min_y, max_x, max_y = map(float, bbox)
    return impl.grid_counts(_f64(xs), _f64(ys), _i64(owner), min_x, min_y, max_x, max_y, int(k), int(m))


def greedy_color(indptr, indices, caps, impl=None):
    impl = backend(impl)
    return impl.greedy_color(_i64(indptr), _i64(indices), _i64(caps))
