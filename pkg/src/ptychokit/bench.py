"""Timing harness: matrix-product upsampled DFT vs zero-padded FFT upsampling.

Both paths locate the same correlation peak at 1/kappa resolution; the
zero-padded reference materialises (or streams, for large kappa*side) the full
upsampled correlation plane, which is the naive O((side*kappa)^2 log) approach
the single-step matrix method avoids.
"""

from __future__ import annotations

import csv
import time
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .errors import BenchmarkRegression
from .fields import subpixel_shift
from .registration import ShiftEstimate, coarse_shift, cross_power_spectrum, \
    refine_shift

# keep streamed row blocks of the padded plane around ~100 MB
_BLOCK_ELEMENTS = 4_000_000


def _pad_axis(spectrum: np.ndarray, axis: int, big: int) -> np.ndarray:
    """Zero-pad an unshifted FFT spectrum along one axis, splitting the Nyquist
    bin so the interpolant stays real-symmetric for even sizes."""
    spec = np.moveaxis(spectrum, axis, 0)
    n = spec.shape[0]
    out = np.zeros((big,) + spec.shape[1:], dtype=complex)
    half = n // 2
    if n % 2 == 0:
        out[:half] = spec[:half]
        out[big - half + 1:] = spec[half + 1:]
        out[half] += 0.5 * spec[half]
        out[big - half] += 0.5 * spec[half]
    else:
        out[:half + 1] = spec[:half + 1]
        out[big - half:] = spec[half + 1:]
    return np.moveaxis(out, 0, axis)


def _signed_index(i: int, big: int) -> float:
    return float(i) if i <= big // 2 else float(i - big)


def zero_padded_argmax(xps: np.ndarray, kappa: int) -> ShiftEstimate:
    """Peak of the zero-padded upsampled correlation, streamed in row blocks so
    large kappa*side planes never have to fit in memory at once."""
    n = xps.shape[0]
    big = n * int(kappa)
    if kappa == 1:
        return coarse_shift(xps)
    block = max(1, _BLOCK_ELEMENTS // big)
    col_ifft = np.fft.ifft(_pad_axis(xps, 0, big), axis=0)
    best_val = -1.0
    best_iy = best_ix = 0
    for start in range(0, big, block):
        rows = col_ifft[start:start + block]
        mag = np.abs(np.fft.ifft(_pad_axis(rows, 1, big), axis=1))
        iy, ix = np.unravel_index(np.argmax(mag), mag.shape)
        if mag[iy, ix] > best_val:
            best_val = float(mag[iy, ix])
            best_iy, best_ix = start + int(iy), int(ix)
    return ShiftEstimate(_signed_index(best_iy, big) / kappa,
                         _signed_index(best_ix, big) / kappa,
                         best_val, int(kappa))


def _test_pair(side: int, seed: int = 0) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng([seed, side])
    ref = gaussian_filter(rng.standard_normal((side, side)), sigma=2.0)
    mov = subpixel_shift(ref, 1.3, -2.1).real
    return ref, mov


def _median_time(fn, repeats: int) -> tuple[float, ShiftEstimate]:
    times = []
    result = None
    for _ in range(max(1, repeats)):
        t0 = time.perf_counter()
        result = fn()
        times.append(time.perf_counter() - t0)
    return float(np.median(times)), result


def bench_registration(sides: list[int], kappas: list[int], repeats: int = 3,
                       check: bool = True) -> list[dict]:
    """Time both refinement paths on every (side, kappa) pair.

    Returns one row per (side, kappa, method). When ``check`` is set, raises
    BenchmarkRegression unless the matrix-DFT path wins for every pair with
    kappa >= 10 and side >= 128.
    """
    rows: list[dict] = []
    for side in sides:
        ref, mov = _test_pair(side)
        xps = cross_power_spectrum(ref, mov, "phase")
        coarse = coarse_shift(xps)
        for kappa in kappas:
            secs, est = _median_time(
                lambda: refine_shift(xps, coarse, kappa) if kappa > 1
                else coarse_shift(xps), repeats)
            rows.append({"side": side, "kappa": kappa, "method": "matrix_dft",
                         "seconds": secs, "dy": est.dy, "dx": est.dx})
            secs, est = _median_time(lambda: zero_padded_argmax(xps, kappa),
                                     repeats)
            rows.append({"side": side, "kappa": kappa, "method": "zero_padded_fft",
                         "seconds": secs, "dy": est.dy, "dx": est.dx})
    if check:
        assert_matrix_dft_faster(rows)
    return rows


def assert_matrix_dft_faster(rows: list[dict], min_kappa: int = 10,
                             min_side: int = 128) -> None:
    by_key = {(r["side"], r["kappa"], r["method"]): r["seconds"] for r in rows}
    for (side, kappa, method), secs in by_key.items():
        if method != "matrix_dft" or kappa < min_kappa or side < min_side:
            continue
        reference = by_key.get((side, kappa, "zero_padded_fft"))
        if reference is not None and secs >= reference:
            raise BenchmarkRegression(
                f"matrix DFT ({secs:.4f}s) not faster than zero-padded FFT "
                f"({reference:.4f}s) at side={side}, kappa={kappa}")


def write_csv(rows: list[dict], path: str | Path) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=["side", "kappa", "method",
                                                "seconds", "dy", "dx"])
        writer.writeheader()
        writer.writerows(rows)
    return path
