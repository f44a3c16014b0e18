"""Select the hot-kernel implementation at import time.

The compiled ``_core`` extension is used when it imports; setting
``NLCH_PURE_PYTHON=1`` forces the numpy fallback.
"""
import os

from . import _fallback

if os.environ.get("NLCH_PURE_PYTHON", "") not in ("", "0"):
    core = _fallback
else:
    try:
        from . import _core as core
    except ImportError:  # extension not built
        core = _fallback

COMPILED = core is not _fallback
fallback = _fallback
