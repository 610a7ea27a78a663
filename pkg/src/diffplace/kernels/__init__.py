"""Hot numeric kernels with a compiled core and a pure-numpy fallback.

The compiled extension (``_ckernels``, built from Cython) is preferred; if it
is missing, or ``DIFFPLACE_PURE=1`` is set, the numpy implementations in
``_npkernels`` are used instead.  Both backends expose the same functions and
must agree numerically (see tests/test_kernels.py); ``backend_name()`` reports
which one is active.
"""

import os

from . import _npkernels

if os.environ.get("DIFFPLACE_PURE") == "1":
    _impl = _npkernels
else:
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _npkernels

hpwl_grad = _impl.hpwl_grad
pair_potential = _impl.pair_potential
union_area = _impl.union_area
rudy_fill = _impl.rudy_fill
segment_sum = _impl.segment_sum
segment_max = _impl.segment_max


def backend_name() -> str:
    return "compiled" if _impl.__name__.endswith("_ckernels") else "numpy"


def get_backend(name: str):
    """Return a specific backend module ('numpy' or 'compiled'); for tests/benchmarks."""
    if name == "numpy":
        return _npkernels
    if name == "compiled":
        from . import _ckernels

        return _ckernels
    raise ValueError(f"unknown kernel backend {name!r}")
