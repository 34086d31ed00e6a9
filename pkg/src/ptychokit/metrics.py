"""Quality metrics that respect the problem's gauge freedoms.

The object carries a global phase gauge, so object error is the normalized
complex correlation distance (invariant to a constant phase). Scan positions
carry a global translation gauge, so RMSE is computed after removing the mean
offset between estimate and truth.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, asdict
from pathlib import Path

import numpy as np

from .errors import DegenerateInputError, ShapeError


def object_error(reconstructed: np.ndarray, truth: np.ndarray,
                 mask: np.ndarray) -> float:
    """1 - |<a, b>| / (||a|| ||b||) over masked pixels; 0 = perfect (up to phase)."""
    a = np.asarray(reconstructed)
    b = np.asarray(truth)
    if a.shape != b.shape or a.shape != np.asarray(mask).shape:
        raise ShapeError(f"shape mismatch: {a.shape}, {b.shape}, {np.shape(mask)}")
    m = np.asarray(mask, bool)
    if not m.any():
        raise DegenerateInputError("empty mask")
    av = a[m].ravel()
    bv = b[m].ravel()
    na = np.linalg.norm(av)
    nb = np.linalg.norm(bv)
    if na == 0 or nb == 0:
        raise DegenerateInputError("zero field under mask")
    return float(1.0 - np.abs(np.vdot(av, bv)) / (na * nb))


def coverage_mask(probes: list[np.ndarray], positions: np.ndarray,
                  canvas_shape: tuple[int, int], canvas_origin: tuple[int, int],
                  threshold: float = 0.05) -> np.ndarray:
    """Pixels where accumulated probe power exceeds ``threshold`` of its max."""
    cover = np.zeros(canvas_shape)
    power = np.zeros(probes[0].shape)
    for p in probes:
        power += np.abs(p) ** 2
    w = power.shape[0]
    r0, c0 = canvas_origin
    for x, y in positions:
        r = int(round(float(y))) - r0
        c = int(round(float(x))) - c0
        cover[r:r + w, c:c + w] += power
    return cover > threshold * cover.max()


def position_rmse(estimated: np.ndarray, truth: np.ndarray) -> float:
    """RMS position error after removing the global mean offset (gauge)."""
    est = np.asarray(estimated, float)
    tru = np.asarray(truth, float)
    if est.shape != tru.shape:
        raise ShapeError(f"position shapes differ: {est.shape} vs {tru.shape}")
    resid = est - tru
    resid = resid - resid.mean(axis=0)
    return float(np.sqrt(np.mean(np.sum(resid ** 2, axis=1))))


@dataclass
class MetricsReport:
    error_trace: list[float] = field(default_factory=list)
    position_rmse: float | None = None
    object_error: float | None = None
    seconds_per_iteration: list[float] = field(default_factory=list)

    def to_json(self, path: str | Path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(asdict(self), indent=2))
        return path
