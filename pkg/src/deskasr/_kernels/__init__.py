"""Hot-kernel backend selection.

The compiled Cython module is used when available; set DESKASR_PURE=1 to
force the numpy fallback. `BACKEND` reports which one is active.
"""

import os

if os.environ.get("DESKASR_PURE") == "1":
    from . import _pykern as _impl
else:
    try:
        from . import _ckern as _impl
    except ImportError:
        from . import _pykern as _impl

BACKEND = _impl.BACKEND

conv2d_forward = _impl.conv2d_forward
conv2d_backward = _impl.conv2d_backward
maxpool_forward = _impl.maxpool_forward
maxpool_backward = _impl.maxpool_backward
viterbi_forward = _impl.viterbi_forward

__all__ = [
    "BACKEND",
    "conv2d_forward",
    "conv2d_backward",
    "maxpool_forward",
    "maxpool_backward",
    "viterbi_forward",
]
