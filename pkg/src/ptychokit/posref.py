"""Adam-driven scan-position refinement.

Each scan position gets its own Adam state (Kingma & Ba, 2015): the sensed
misalignment from upsampled cross-correlation stands in for the gradient, so
positions whose error is consistent across iterations accumulate corrections
of up to ``step_size`` pixels per iteration, while noisy estimates average
out. Two sensor placements are supported: XCORR_A registers the object crop
before vs after its update (complex, object plane); XCORR_B registers modeled
vs measured detector intensities (real, detector plane).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError
from .registration import register


@dataclass(frozen=True)
class PosRefConfig:
    sensor: str = "XCORR_A"       # XCORR_A | XCORR_B
    step_size: float = 0.5        # pixels per unit surrogate gradient (Adam lr)
    beta1: float = 0.9
    beta2: float = 0.999
    eps_adam: float = 1e-8
    warmup_iterations: int = 10
    kappa: int = 100              # registration upsample factor
    max_correction: float = 1.0   # per-iteration clip, pixels

    def __post_init__(self) -> None:
        if not (0 < self.beta1 < 1 and 0 < self.beta2 < 1):
            raise ValueError("beta1 and beta2 must lie in (0, 1)")
        if self.step_size <= 0:
            raise ValueError("step_size must be positive")
        if self.sensor not in ("XCORR_A", "XCORR_B"):
            raise ValueError(f"unknown sensor {self.sensor!r}")


@dataclass
class AdamBuffers:
    """Per-position first/second moment estimates; position j is never touched
    by updates of any other position."""
    m: np.ndarray   # (N, 2)
    v: np.ndarray   # (N, 2)
    t: np.ndarray   # (N,) int, engaged-iteration count

    @classmethod
    def zeros(cls, n_positions: int) -> "AdamBuffers":
        return cls(m=np.zeros((n_positions, 2)),
                   v=np.zeros((n_positions, 2)),
                   t=np.zeros(n_positions, dtype=np.int64))


def _sense(reference: np.ndarray, moving: np.ndarray, weighting: str,
           kappa: int) -> tuple[float, float, bool]:
    try:
        est = register(reference, moving, weighting=weighting, upsample=kappa)
    except DegenerateInputError:
        return 0.0, 0.0, False
    return est.dx, est.dy, True


def sense_shift_A(crop_before: np.ndarray, crop_after: np.ndarray,
                  kappa: int) -> tuple[float, float, bool]:
    """Shift between the object crop and its data-driven update (complex,
    upsampled cross-correlation). Returns (gx, gy, confident).

    Raw (matched-filter) weighting is essential here: the per-visit update is
    a small perturbation of the crop, and the displacement of the raw
    correlation peak is first-order in the update amplitude, whereas a
    spectrally whitened correlation pins its peak at zero to first order and
    senses nothing usable."""
    return _sense(crop_before, crop_after, "raw", kappa)


def sense_shift_B(intensity_model: np.ndarray, intensity_measured: np.ndarray,
                  kappa: int) -> tuple[float, float, bool]:
    """Shift between modeled and measured diffraction intensities (real,
    raw correlation). Returns (gx, gy, confident)."""
    return _sense(np.asarray(intensity_model, float),
                  np.asarray(intensity_measured, float), "raw", kappa)


def adam_step(buffers: AdamBuffers, j: int, g: tuple[float, float],
              config: PosRefConfig) -> tuple[float, float]:
    """One Adam update for position j; returns a clipped (dx, dy) correction."""
    g = np.asarray(g, float)
    buffers.t[j] += 1
    t = buffers.t[j]
    buffers.m[j] = config.beta1 * buffers.m[j] + (1 - config.beta1) * g
    buffers.v[j] = config.beta2 * buffers.v[j] + (1 - config.beta2) * g * g
    m_hat = buffers.m[j] / (1 - config.beta1 ** t)
    v_hat = buffers.v[j] / (1 - config.beta2 ** t)
    delta = config.step_size * m_hat / (np.sqrt(v_hat) + config.eps_adam)
    delta = np.clip(delta, -config.max_correction, config.max_correction)
    return float(delta[0]), float(delta[1])


def apply_correction(positions: np.ndarray, j: int, delta: tuple[float, float],
                     bounds: tuple[float, float, float, float]) -> bool:
    """Add (dx, dy) to position j, clamping to (xmin, ymin, xmax, ymax) so the
    crop box stays on the canvas. Returns False when clamping kicked in."""
    xmin, ymin, xmax, ymax = bounds
    x = positions[j, 0] + delta[0]
    y = positions[j, 1] + delta[1]
    cx = min(max(x, xmin), xmax)
    cy = min(max(y, ymin), ymax)
    positions[j, 0] = cx
    positions[j, 1] = cy
    return cx == x and cy == y
