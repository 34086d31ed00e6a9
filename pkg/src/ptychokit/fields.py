"""Complex 2D field primitives.

Far-field propagation is the unitary centered DFT (fftshift . FFT . ifftshift),
with constant phase prefactors dropped: the reconstruction only ever consumes
|psi|^2 at the detector and the exact inverse, so the prefactor is unobservable.
All fields are square W x W complex128 arrays, row-major, DC at the center.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BoundsError, GeometryError, ShapeError


def sample_pixel_size(wavelength: float, distance: float, window: int,
                      detector_pixel: float) -> float:
    """Sample-plane pixel size of a far-field setup: lambda * z / (W * delta_D)."""
    if wavelength <= 0 or distance <= 0 or window <= 0 or detector_pixel <= 0:
        raise GeometryError("all geometry inputs must be strictly positive")
    return wavelength * distance / (window * detector_pixel)


@dataclass(frozen=True)
class Geometry:
    """Optical geometry of a far-field transmission setup.

    ``sample_pixel`` is derived; build instances with :meth:`create`.
    """
    wavelength: float        # meters
    distance: float          # sample-detector distance, meters
    detector_pixel: float    # detector pixel pitch, meters
    window: int              # square crop side, pixels
    sample_pixel: float      # meters, derived

    @classmethod
    def create(cls, wavelength: float, distance: float, detector_pixel: float,
               window: int) -> "Geometry":
        if window < 8 or window % 2 != 0:
            raise GeometryError(f"window must be even and >= 8, got {window}")
        delta_s = sample_pixel_size(wavelength, distance, window, detector_pixel)
        return cls(wavelength, distance, detector_pixel, int(window), delta_s)


@dataclass(frozen=True)
class CropBox:
    """Square window into an object canvas, anchored at its top-left pixel."""
    row: int
    col: int
    side: int

    def check_inside(self, canvas_shape: tuple[int, int]) -> None:
        h, w = canvas_shape
        if (self.row < 0 or self.col < 0 or self.side <= 0
                or self.row + self.side > h or self.col + self.side > w):
            raise BoundsError(
                f"crop box {self.side}px at ({self.row},{self.col}) "
                f"outside {h}x{w} canvas")


def as_field(a: np.ndarray) -> np.ndarray:
    """View/convert an array as a 2D complex128 field."""
    f = np.asarray(a)
    if f.ndim != 2:
        raise ShapeError(f"field must be 2D, got ndim={f.ndim}")
    return np.ascontiguousarray(f, dtype=np.complex128)


def propagate(field: np.ndarray, direction: str = "forward") -> np.ndarray:
    """Far-field propagation as a centered unitary 2D Fourier transform.

    ``forward`` maps the sample plane to the detector plane (DC at center);
    ``backward`` is its exact inverse. Energy is preserved.
    """
    f = as_field(field)
    if f.shape[0] != f.shape[1]:
        raise ShapeError(f"propagate requires a square field, got {f.shape}")
    if direction == "forward":
        return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(f), norm="ortho"))
    if direction == "backward":
        return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(f), norm="ortho"))
    raise ValueError(f"direction must be 'forward' or 'backward', got {direction!r}")


def crop(canvas: np.ndarray, box: CropBox) -> np.ndarray:
    """Copy the ``box`` region out of ``canvas``."""
    canvas = np.asarray(canvas)
    box.check_inside(canvas.shape)
    return canvas[box.row:box.row + box.side, box.col:box.col + box.side].copy()


def paste_add(canvas: np.ndarray, box: CropBox, delta: np.ndarray) -> np.ndarray:
    """Return a copy of ``canvas`` with ``delta`` added inside ``box``."""
    out = np.array(canvas, copy=True)
    paste_add_inplace(out, box, delta)
    return out


def paste_add_inplace(canvas: np.ndarray, box: CropBox, delta: np.ndarray) -> None:
    """In-place variant of :func:`paste_add` for single-writer loops."""
    box.check_inside(canvas.shape)
    delta = np.asarray(delta)
    if delta.shape != (box.side, box.side):
        raise ShapeError(f"delta shape {delta.shape} != box side {box.side}")
    canvas[box.row:box.row + box.side, box.col:box.col + box.side] += delta


def subpixel_shift(field: np.ndarray, dx: float, dy: float) -> np.ndarray:
    """Circularly shift a field by (dy, dx) pixels via a Fourier phase ramp.

    Integer (dy, dx) matches ``np.roll(field, (dy, dx), axis=(0, 1))``.
    """
    f = as_field(field)
    h, w = f.shape
    if abs(dy) >= h / 2 or abs(dx) >= w / 2:
        raise ShapeError(f"shift ({dy},{dx}) must satisfy |d| < side/2")
    fy = np.fft.fftfreq(h)[:, None]
    fx = np.fft.fftfreq(w)[None, :]
    ramp = np.exp(-2j * np.pi * (fy * dy + fx * dx))
    return np.fft.ifft2(np.fft.fft2(f) * ramp)
