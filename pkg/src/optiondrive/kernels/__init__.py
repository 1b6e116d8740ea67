"""Numeric kernels with a compiled fast path and a pure-numpy fallback.

The compiled extension ``optiondrive.kernels._fast`` is optional: it is built
when Cython and a C compiler are available at install time.  Setting the
environment variable ``OPTIONDRIVE_PURE=1`` forces the numpy fallback, which
is what the backend benchmark uses for its comparison runs.
"""

import os

from . import purepy as _purepy

if os.environ.get("OPTIONDRIVE_PURE", "") == "1":
    _impl = _purepy
else:
    try:
        from . import _fast as _impl  # type: ignore[attr-defined]
    except ImportError:
        _impl = _purepy

BACKEND = _impl.BACKEND

mlp_forward = _impl.mlp_forward
mlp_forward_all = _impl.mlp_forward_all
mlp_backward = _impl.mlp_backward
adam_step = _impl.adam_step
sgd_step = _impl.sgd_step
kbm_batch = _impl.kbm_batch
