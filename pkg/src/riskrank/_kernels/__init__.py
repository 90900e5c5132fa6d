"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; the numpy
fallback is used otherwise.  Set RISKRANK_PURE=1 to force the fallback
(used by the backend-parity tests and the benchmark).  Both backends are
bit-identical, so the choice never changes pipeline output.
"""

import os

from . import _scan_py

if os.environ.get("RISKRANK_PURE", "") not in ("", "0"):
    _impl = _scan_py
else:
    try:
        from . import _scan_cy as _impl
    except ImportError:
        _impl = _scan_py

BACKEND = _impl.BACKEND_NAME
scan_threshold = _impl.scan_threshold
scan_equality = _impl.scan_equality
levenshtein = _impl.levenshtein

__all__ = ["BACKEND", "scan_threshold", "scan_equality", "levenshtein"]
