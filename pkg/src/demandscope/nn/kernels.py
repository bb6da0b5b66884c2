"""Kernel backend selection.

The compiled extension is used when it imports; ``DEMANDSCOPE_KERNELS=python``
forces the numpy fallback.
"""
from __future__ import annotations

import os

from . import _pykernels

python_backend = _pykernels

if os.environ.get("DEMANDSCOPE_KERNELS", "").lower() == "python":
    compiled_backend = None
else:
    try:
        from . import _ckernels as compiled_backend
    except ImportError:  # extension not built
        compiled_backend = None

active = compiled_backend if compiled_backend is not None else python_backend
BACKEND: str = active.BACKEND

im2col = active.im2col
maxpool2_forward = active.maxpool2_forward
maxpool2_backward = active.maxpool2_backward
