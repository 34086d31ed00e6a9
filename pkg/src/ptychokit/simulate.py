"""Virtual experiment generator.

Builds procedural object/probe fields, jittered raster scan trajectories, and
synthesizes mixed-state diffraction datasets: each pattern is the incoherent
sum over probe modes of the far-field intensity of (mode x object crop).
Random jitter on the grid prevents the raster-scanning pathology of perfectly
regular scans.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import gaussian_filter

from .dataio import GroundTruth, PtychoDataset
from .errors import ParameterError, PlanError
from .fields import CropBox, Geometry, crop, propagate, subpixel_shift


@dataclass(frozen=True)
class ScanPlan:
    """Nominal and true scan positions, (x, y) = (col, row) of each crop anchor."""
    nominal: np.ndarray          # (N, 2) float
    true_positions: np.ndarray   # (N, 2) float, nominal + injected jitter
    grid_shape: tuple[int, int]
    step: float
    jitter_amplitude: float
    seed: int


@dataclass(frozen=True)
class ProbeSpec:
    """Recipe for a set of mutually orthogonal probe modes."""
    mode_count: int = 1
    mode_powers: tuple[float, ...] = (1.0,)
    base: str = "disk"           # disk | gaussian
    radius: float = 12.0         # pixels


def _jitter(seed: int, index: int, amplitude: float) -> np.ndarray:
    # per-position stream: serial and parallel synthesis agree bit-for-bit
    rng = np.random.default_rng([seed, index])
    return rng.uniform(-amplitude, amplitude, size=2)


def make_scan(grid_shape: tuple[int, int], step: float, jitter_amplitude: float,
              seed: int) -> ScanPlan:
    """Regular raster grid plus seeded uniform jitter in [-a, a]^2 per axis."""
    rows, cols = int(grid_shape[0]), int(grid_shape[1])
    if rows < 1 or cols < 1:
        raise PlanError(f"grid shape must be positive, got {grid_shape}")
    if step <= 0:
        raise PlanError(f"step must be positive, got {step}")
    if jitter_amplitude < 0:
        raise PlanError("jitter amplitude must be non-negative")
    margin = float(np.ceil(jitter_amplitude)) + 1.0
    nominal = np.empty((rows * cols, 2))
    for r in range(rows):
        for c in range(cols):
            nominal[r * cols + c] = (margin + c * step, margin + r * step)
    true = nominal.copy()
    if jitter_amplitude > 0:
        for j in range(rows * cols):
            true[j] += _jitter(seed, j, jitter_amplitude)
    if np.any(true < 0):
        raise PlanError("jitter would push a crop box outside the canvas")
    return ScanPlan(nominal, true, (rows, cols), float(step),
                    float(jitter_amplitude), int(seed))


def _base_profile(kind: str, side: int, radius: float) -> np.ndarray:
    y, x = np.mgrid[0:side, 0:side] - side // 2
    r = np.hypot(y, x)
    if kind == "disk":
        # one-pixel cosine edge keeps the far field well sampled
        prof = np.clip((radius - r) + 0.5, 0.0, 1.0)
        return prof.astype(np.complex128)
    if kind == "gaussian":
        return np.exp(-0.5 * (r / (radius / 2.0)) ** 2).astype(np.complex128)
    raise ParameterError(f"unknown probe base {kind!r}")


_MODE_POLYS = (
    lambda x, y: x,
    lambda x, y: y,
    lambda x, y: x * y,
    lambda x, y: x * x - y * y,
    lambda x, y: x * (x * x - 3 * y * y),
    lambda x, y: y * (3 * x * x - y * y),
    lambda x, y: x * x + y * y,
)


def make_probe(spec: ProbeSpec, geometry: Geometry) -> list[np.ndarray]:
    """Orthogonal probe modes with prescribed power fractions (unit total power)."""
    m = int(spec.mode_count)
    if m < 1 or m > 8:
        raise ParameterError(f"mode_count must be in [1, 8], got {m}")
    powers = np.asarray(spec.mode_powers, float)
    if powers.shape != (m,) or np.any(powers <= 0) or abs(powers.sum() - 1.0) > 1e-9:
        raise ParameterError("mode_powers must be positive and sum to 1")
    side = geometry.window
    if spec.radius >= side / 2:
        raise ParameterError("probe radius must be smaller than window/2")
    base = _base_profile(spec.base, side, spec.radius)
    yy, xx = (np.mgrid[0:side, 0:side] - side // 2) / max(spec.radius, 1.0)
    modes: list[np.ndarray] = [base.copy()]
    for p in range(1, m):
        cand = base * _MODE_POLYS[(p - 1) % len(_MODE_POLYS)](xx, yy)
        for prev in modes:  # Gram-Schmidt against all previous modes
            cand = cand - prev * (np.vdot(prev, cand) / np.vdot(prev, prev))
        norm = np.linalg.norm(cand)
        if norm < 1e-12 * np.linalg.norm(base):
            raise ParameterError(f"mode {p + 1} collapsed during orthogonalisation")
        modes.append(cand)
    out = []
    for mode, frac in zip(modes, powers):
        power = np.sum(np.abs(mode) ** 2)
        out.append(mode * np.sqrt(frac / power))
    return out


def make_object(shape: tuple[int, int], kind: str = "spokes", seed: int = 0) -> np.ndarray:
    """Procedural complex transmission canvas (magnitude in [0.5,1], smooth phase)."""
    h, w = int(shape[0]), int(shape[1])
    rng = np.random.default_rng([seed, 97])
    y, x = np.mgrid[0:h, 0:w]
    if kind == "checkerboard":
        cell = max(4, min(h, w) // 16)
        pattern = ((y // cell + x // cell) % 2).astype(float)
    elif kind == "spokes":
        theta = np.arctan2(y - h / 2, x - w / 2)
        pattern = 0.5 * (1 + np.sign(np.sin(12 * theta)))
    elif kind == "phase-screen":
        pattern = gaussian_filter(rng.standard_normal((h, w)), sigma=min(h, w) / 24)
        pattern = (pattern - pattern.min()) / np.ptp(pattern)
    else:
        raise ParameterError(f"unknown object kind {kind!r}")
    # soften hard edges so the diffraction signal stays band-limited
    pattern = gaussian_filter(pattern, sigma=1.0)
    screen = gaussian_filter(rng.standard_normal((h, w)), sigma=min(h, w) / 16)
    screen = screen / max(np.abs(screen).max(), 1e-12)
    magnitude = 0.5 + 0.5 * pattern
    phase = (np.pi / 3) * screen + (np.pi / 4) * (pattern - 0.5)
    return magnitude * np.exp(1j * phase)


def canvas_shape_for(plan: ScanPlan, window: int, pad: int = 2) -> tuple[int, int]:
    """Smallest canvas covering every true and nominal crop box, plus padding."""
    both = np.vstack([plan.nominal, plan.true_positions])
    max_x, max_y = both.max(axis=0)
    return (int(np.ceil(max_y)) + window + pad, int(np.ceil(max_x)) + window + pad)


def extract_view(canvas: np.ndarray, position_xy: np.ndarray, window: int) -> np.ndarray:
    """Object crop at a float position: integer-anchor crop plus residual
    subpixel Fourier shift, so sub-pixel scan truth is exactly representable."""
    x, y = float(position_xy[0]), float(position_xy[1])
    ar, ac = int(round(y)), int(round(x))
    view = crop(canvas, CropBox(ar, ac, window))
    ry, rx = y - ar, x - ac
    if rx != 0.0 or ry != 0.0:
        view = subpixel_shift(view, -rx, -ry)
    return view


def synthesize(obj: np.ndarray, probes: list[np.ndarray], plan: ScanPlan,
               geometry: Geometry, noise: str = "none",
               photon_budget: float = 1e6, seed: int = 0) -> PtychoDataset:
    """Forward-model a diffraction dataset; the dataset carries NOMINAL positions,
    with the jittered truth tagged separately as ground truth."""
    if noise not in ("none", "poisson"):
        raise ParameterError(f"noise must be 'none' or 'poisson', got {noise!r}")
    w = geometry.window
    n = plan.true_positions.shape[0]
    patterns = np.empty((n, w, w))
    for j in range(n):
        view = extract_view(obj, plan.true_positions[j], w)
        intensity = np.zeros((w, w))
        for mode in probes:
            intensity += np.abs(propagate(mode * view)) ** 2
        if noise == "poisson":
            total = intensity.sum()
            if total > 0:
                scale = photon_budget / total
                rng = np.random.default_rng([seed, 1, j])
                intensity = rng.poisson(intensity * scale).astype(float) / scale
        patterns[j] = intensity
    powers = tuple(float(np.sum(np.abs(p) ** 2)) for p in probes)
    truth = GroundTruth(true_positions=plan.true_positions.copy(),
                        obj=obj.copy(),
                        probes=[p.copy() for p in probes],
                        mode_powers=powers)
    return PtychoDataset(patterns=patterns, positions=plan.nominal.copy(),
                         geometry=geometry, ground_truth=truth,
                         seed=int(seed))
