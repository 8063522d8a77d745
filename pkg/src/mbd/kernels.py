"""Backend selection for the hot kernels.

The compiled extension is used when it imports; setting ``MBD_PURE_PYTHON=1``
forces the numpy fallback.
"""

from __future__ import annotations

import os

from . import _kernels_py

BACKEND = "python"
_impl = _kernels_py

if os.environ.get("MBD_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _kernels as _compiled
    except ImportError:  # extension not built
        _compiled = None
    else:
        _impl = _compiled
        BACKEND = "cython"
else:
    _compiled = None

rollout_batch = _impl.rollout_batch
weighted_mean = _impl.weighted_mean
