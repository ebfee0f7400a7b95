"""Backend selection for the hot kernels.

The compiled extension is preferred. Set ``PHYSADV_PURE_PYTHON=1`` to force
the numpy fallback, e.g. for benchmarking or on platforms without a compiler.
"""
import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("PHYSADV_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py

rref = _impl.rref
forward = _impl.forward
loss_input_gradient = _impl.loss_input_gradient

__all__ = ["BACKEND", "rref", "forward", "loss_input_gradient"]
