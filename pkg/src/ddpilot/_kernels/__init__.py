"""Hot kernels with a compiled core and a numpy fallback.

The Cython extension is used when it was built and ``DDPILOT_PURE_PYTHON``
is unset. ``BACKEND`` names the selected implementation.
"""
import os

from . import _pykernels

python_backend = _pykernels

compiled_backend = None
if not os.environ.get("DDPILOT_PURE_PYTHON"):
    try:
        from . import _ckernels as compiled_backend
    except ImportError:
        compiled_backend = None

_active = compiled_backend if compiled_backend is not None else python_backend
BACKEND = "cython" if compiled_backend is not None else "python"

twisted_accumulate = _active.twisted_accumulate
correlate_direct = _active.correlate_direct

__all__ = ["BACKEND", "twisted_accumulate", "correlate_direct",
           "python_backend", "compiled_backend"]
