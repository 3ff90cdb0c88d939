"""Backend selection: compiled core when importable, numpy fallback otherwise.

Set ``BEREZINLAB_PURE=1`` to force the fallback.
"""

from __future__ import annotations

import os

from . import _fallback

BACKEND = "python"
_impl = _fallback

if os.environ.get("BEREZINLAB_PURE", "") not in ("1", "true", "yes"):
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # pragma: no cover - depends on build
        _impl = _fallback

neumaier_sum = _impl.neumaier_sum
neumaier_rows = _impl.neumaier_rows
log_delta_series = _impl.log_delta_series
reduce_points = _impl.reduce_points
dedekind_12c = _impl.dedekind_12c
rademacher_batch = _impl.rademacher_batch

__all__ = [
    "BACKEND",
    "neumaier_sum",
    "neumaier_rows",
    "log_delta_series",
    "reduce_points",
    "dedekind_12c",
    "rademacher_batch",
]
