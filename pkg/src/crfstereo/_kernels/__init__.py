"""Backend selection for the numeric hot loops.

Two interchangeable implementations exist: ``numba_impl`` (JIT-compiled,
the default) and ``numpy_impl`` (pure vectorized numpy). Setting the
environment variable ``CRFSTEREO_NO_NUMBA=1`` before import forces the
numpy path; the same fallback engages automatically when numba is not
installed. Both backends are deterministic run-to-run; they are compared
against each other in the test suite and timed against each other in
``benchmarks/bench_kernels.py``.
"""

import os

_FORCE_NUMPY = os.environ.get("CRFSTEREO_NO_NUMBA", "").strip() not in ("", "0")

HAS_NUMBA = False
if not _FORCE_NUMPY:
    try:
        from . import numba_impl as _impl

        HAS_NUMBA = True
    except ImportError:
        from . import numpy_impl as _impl
else:
    from . import numpy_impl as _impl

BACKEND = "numba" if HAS_NUMBA else "numpy"

gauss_filter_bruteforce = _impl.gauss_filter_bruteforce
lattice_splat = _impl.lattice_splat
lattice_blur = _impl.lattice_blur
lattice_slice = _impl.lattice_slice
sgm_scan = _impl.sgm_scan
median_filter_masked = _impl.median_filter_masked
