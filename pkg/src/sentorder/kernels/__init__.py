"""Backend selection for the hot recurrent kernels.

Set SENTORDER_BACKEND=numpy to force the pure-numpy path; anything else
(or unset) uses the numba-compiled kernels when numba imports cleanly.
"""

import os
import warnings

_requested = os.environ.get("SENTORDER_BACKEND", "numba").strip().lower()

if _requested not in ("numba", "numpy"):
    raise ValueError(f"SENTORDER_BACKEND must be 'numba' or 'numpy', got {_requested!r}")

if _requested == "numba":
    try:
        from .numba_impl import lstm_seq_backward, lstm_seq_forward
        BACKEND = "numba"
    except ImportError:
        warnings.warn("numba unavailable; falling back to pure-numpy kernels")
        from .numpy_impl import lstm_seq_backward, lstm_seq_forward
        BACKEND = "numpy"
else:
    from .numpy_impl import lstm_seq_backward, lstm_seq_forward
    BACKEND = "numpy"

__all__ = ["lstm_seq_forward", "lstm_seq_backward", "BACKEND"]
