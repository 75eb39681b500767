"""Backend selection: compiled Cython core when available, numpy otherwise.

Set EARTH4D_DISABLE_COMPILED=1 to force the pure-Python kernels (used by the
parity tests and the benchmark).
"""

from __future__ import annotations

import os

from . import fallback

_FUNCTIONS = (
    "spatial_hash",
    "probe_hash",
    "dense_index",
    "base_cells",
    "level_forward",
    "level_backward",
    "probed_level_forward",
    "probed_level_backward",
    "corner_vertices",
)

if os.environ.get("EARTH4D_DISABLE_COMPILED", "") not in ("", "0"):
    _impl = fallback
    BACKEND = "fallback"
else:
    try:
        from . import _core as _impl  # type: ignore[no-redef]

        BACKEND = "compiled"
    except ImportError:
        _impl = fallback
        BACKEND = "fallback"

spatial_hash = _impl.spatial_hash
probe_hash = _impl.probe_hash
dense_index = _impl.dense_index
base_cells = _impl.base_cells
level_forward = _impl.level_forward
level_backward = _impl.level_backward
probed_level_forward = _impl.probed_level_forward
probed_level_backward = _impl.probed_level_backward
corner_vertices = _impl.corner_vertices

PRIMES = fallback.PRIMES
PROBE_PRIMES = fallback.PROBE_PRIMES

__all__ = list(_FUNCTIONS) + ["BACKEND", "PRIMES", "PROBE_PRIMES", "fallback"]
