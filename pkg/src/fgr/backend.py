"""Kernel backend selection.

The compiled extension (fgr._kernels) is preferred; the numpy implementation
(fgr._kernels_py) is the fallback. FGR_KERNELS=cython|numpy forces a choice,
which the kernel benchmark uses to compare both.
"""

from __future__ import annotations

import logging
import os

logger = logging.getLogger(__name__)

_forced = os.environ.get("FGR_KERNELS", "").strip().lower()

if _forced == "numpy":
    from fgr import _kernels_py as kernels

    KERNEL_BACKEND = "numpy"
elif _forced == "cython":
    from fgr import _kernels as kernels  # type: ignore[no-redef]

    KERNEL_BACKEND = "cython"
else:
    try:
        from fgr import _kernels as kernels  # type: ignore[no-redef]

        KERNEL_BACKEND = "cython"
    except ImportError:
        from fgr import _kernels_py as kernels  # type: ignore[no-redef]

        KERNEL_BACKEND = "numpy"
        logger.info("compiled kernels unavailable, using numpy fallback")
