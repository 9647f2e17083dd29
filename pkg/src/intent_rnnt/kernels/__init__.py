"""Hot-kernel backend selection.

The compiled extension is used when available; the NumPy implementation is
the fallback. Set INTENT_RNNT_BACKEND=python (or =cython) to force one.
Both backends implement the same functions with the same semantics.
"""

import os

from intent_rnnt.kernels import _pykernels

_forced = os.environ.get("INTENT_RNNT_BACKEND", "").strip().lower()

if _forced in ("python", "py"):
    _impl = _pykernels
else:
    try:
        from intent_rnnt.kernels import _ckernels as _impl
    except ImportError:
        if _forced in ("cython", "c"):
            raise
        _impl = _pykernels

BACKEND = _impl.BACKEND_NAME

lstm_step = _impl.lstm_step
lstm_forward = _impl.lstm_forward
lstm_backward = _impl.lstm_backward
lattice_forward_backward = _impl.lattice_forward_backward
