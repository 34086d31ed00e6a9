"""2D weighted phase correlation with single-step upsampled-DFT refinement.

Subpixel localisation follows the efficient registration scheme of
Guizar-Sicairos, Thurman & Fienup, Opt. Lett. 33, 156 (2008): after a coarse
pixel-level peak search, the inverse DFT of the cross-power spectrum is
evaluated by explicit matrix products on a fine local grid around the coarse
peak, avoiding any zero-padded full-plane transform.

Sign convention: the returned (dy, dx) is the value to ADD to the moving
image's coordinates to align it with the reference. Equivalently, for
``moving = np.roll(reference, (s_y, s_x))`` the estimate is (-s_y, -s_x).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateInputError, ParameterError, ShapeError
from .fields import as_field

PHASE_EPS_REL = 1e-12  # spectrum-whitening guard, relative to the spectrum max


@dataclass(frozen=True)
class ShiftEstimate:
    """A sensed translation, resolved to 1/upsample pixel."""
    dy: float
    dx: float
    peak_value: float
    upsample: int


def _check_pair(reference: np.ndarray, moving: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    ref = as_field(reference)
    mov = as_field(moving)
    if ref.shape != mov.shape or ref.shape[0] != ref.shape[1]:
        raise ShapeError(f"need equal square shapes, got {ref.shape} vs {mov.shape}")
    return ref, mov


def cross_power_spectrum(reference: np.ndarray, moving: np.ndarray,
                         weighting: str = "phase") -> np.ndarray:
    """F(ref) * conj(F(mov)), optionally whitened to unit magnitude ("phase")."""
    ref, mov = _check_pair(reference, moving)
    spec = np.fft.fft2(ref) * np.conj(np.fft.fft2(mov))
    mag = np.abs(spec)
    peak = mag.max()
    if peak == 0.0:
        raise DegenerateInputError("cross-power spectrum is identically zero")
    if weighting == "raw":
        return spec
    if weighting == "phase":
        return spec / (mag + PHASE_EPS_REL * peak)
    raise ParameterError(f"weighting must be 'phase' or 'raw', got {weighting!r}")


def _signed(index: int, side: int) -> int:
    # map array index offset into (-side/2, side/2]
    v = index - side // 2
    if v <= -side // 2 and side % 2 == 0:
        v += side
    return v


def coarse_shift(xps: np.ndarray) -> ShiftEstimate:
    """Pixel-level shift: argmax of |IFFT(xps)|, ties broken toward zero shift."""
    xps = as_field(xps)
    side = xps.shape[0]
    corr = np.abs(np.fft.fftshift(np.fft.ifft2(xps)))
    peak = corr.max()
    ties = np.argwhere(corr == peak)
    best = None
    for iy, ix in ties:
        dy = _signed(int(iy), side)
        dx = _signed(int(ix), side)
        key = (abs(dy) + abs(dx), dy, dx)
        if best is None or key < best[0]:
            best = (key, dy, dx)
    return ShiftEstimate(float(best[1]), float(best[2]), float(peak), 1)


def upsampled_idft(xps: np.ndarray, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
    """Inverse DFT of ``xps`` evaluated at fractional (row, col) lags.

    Two explicit DFT-matrix products; matches ``np.fft.ifft2`` at integer lags.
    Cost is O(side^2 * (len(rows)+len(cols))), no zero padding.
    """
    xps = as_field(xps)
    h, w = xps.shape
    fy = np.fft.fftfreq(h) * h
    fx = np.fft.fftfreq(w) * w
    er = np.exp(2j * np.pi * np.outer(np.asarray(rows, float), fy) / h)
    ec = np.exp(2j * np.pi * np.outer(fx, np.asarray(cols, float)) / w)
    return (er @ xps @ ec) / (h * w)


def _refine_offsets(kappa: int) -> np.ndarray:
    # odd point count <= 1.5*kappa + 1, so the window never exceeds +-0.75 px
    n = int(np.floor(1.5 * kappa))
    if n % 2 == 0:
        n += 1
    half = n // 2
    return np.arange(-half, half + 1) / kappa


def refine_shift(xps: np.ndarray, coarse: ShiftEstimate, kappa: int) -> ShiftEstimate:
    """Refine a coarse shift to 1/kappa pixel on a local upsampled-DFT grid."""
    kappa = int(kappa)
    if kappa == 1:
        return coarse
    if not 2 <= kappa <= 1000:
        raise ParameterError(f"upsample factor must be in [1, 1000], got {kappa}")
    offs = _refine_offsets(kappa)
    rows = coarse.dy + offs
    cols = coarse.dx + offs
    corr = np.abs(upsampled_idft(xps, rows, cols))
    iy, ix = np.unravel_index(np.argmax(corr), corr.shape)
    return ShiftEstimate(float(rows[iy]), float(cols[ix]), float(corr[iy, ix]), kappa)


def register(reference: np.ndarray, moving: np.ndarray, weighting: str = "phase",
             upsample: int = 1) -> ShiftEstimate:
    """Full pipeline: cross-power spectrum, coarse peak, subpixel refinement."""
    xps = cross_power_spectrum(reference, moving, weighting)
    coarse = coarse_shift(xps)
    return refine_shift(xps, coarse, upsample)
