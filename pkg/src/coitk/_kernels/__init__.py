"""Kernel backend selection.

Prefers the compiled extension and silently falls back to the numpy
implementation when it is absent.  Set ``COITK_KERNEL=py`` or
``COITK_KERNEL=ext`` to force a backend (``ext`` raises if unavailable).
"""

from __future__ import annotations

import os

_forced = os.environ.get("COITK_KERNEL", "").strip().lower()
if _forced == "py":
    from . import _slow as _impl
elif _forced == "ext":
    from . import _fast as _impl  # type: ignore[no-redef]
elif _forced:
    raise ValueError(f"COITK_KERNEL must be 'py' or 'ext', got {_forced!r}")
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        from . import _slow as _impl  # type: ignore[no-redef]

BACKEND: str = "ext" if _impl.__name__.endswith("_fast") else "py"

METRIC_KL: int = _impl.METRIC_KL
METRIC_JS: int = _impl.METRIC_JS

kl_div = _impl.kl_div
js_div = _impl.js_div
leave_one_out_gaps = _impl.leave_one_out_gaps
subset_gaps = _impl.subset_gaps

__all__ = [
    "BACKEND",
    "METRIC_KL",
    "METRIC_JS",
    "kl_div",
    "js_div",
    "leave_one_out_gaps",
    "subset_gaps",
]
