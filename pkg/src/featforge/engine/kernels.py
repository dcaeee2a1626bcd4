"""Selects the compiled aggregation backend at import, falling back to NumPy."""

from __future__ import annotations

import numpy as np

try:
    from featforge.engine import _aggkernels as _backend
except ImportError:  # extension not built; the NumPy path is semantically identical
    from featforge.engine import _aggkernels_py as _backend

BACKEND = _backend.BACKEND_NAME


def segment_aggregate(values: np.ndarray, starts: np.ndarray, fn_id: int) -> tuple[np.ndarray, np.ndarray]:
    """Aggregate over pre-sorted segments; returns (per-group values, validity bytes)."""
    values = np.ascontiguousarray(values, dtype=np.float64)
    starts = np.ascontiguousarray(starts, dtype=np.intp)
    return _backend.segment_aggregate(values, starts, fn_id)
