"""Import-time selection between the compiled kernels and the Python fallback.

Set RELSYNC_BACKEND=python or RELSYNC_BACKEND=compiled to force a choice;
unset, the compiled extension is used when importable.
"""

from __future__ import annotations

import os

from . import _kernels_py

try:
    from . import _kernels as _compiled  # type: ignore[attr-defined]
except ImportError:
    _compiled = None

_requested = os.environ.get("RELSYNC_BACKEND", "").strip().lower()

if _requested == "python":
    _active = _kernels_py
elif _requested == "compiled":
    if _compiled is None:
        raise ImportError(
            "RELSYNC_BACKEND=compiled but the relsync._kernels extension is not built; "
            "install with Cython available or unset RELSYNC_BACKEND"
        )
    _active = _compiled
elif _requested == "":
    _active = _compiled if _compiled is not None else _kernels_py
else:
    raise ImportError(f"unknown RELSYNC_BACKEND value {_requested!r}; use 'compiled' or 'python'")

update_basic_estimates = _active.update_basic_estimates
rwp_advance = _active.rwp_advance


def backend_name() -> str:
    """Which kernel implementation is live: 'compiled' or 'python'."""
    return _active.BACKEND_NAME


def available_backends() -> list[str]:
    out = ["python"]
    if _compiled is not None:
        out.insert(0, "compiled")
    return out
