"""Dataset container: raw little-endian arrays described by a JSON manifest.

A dataset is a directory holding ``manifest.json`` plus one raw binary file
per array. Arrays are row-major, little-endian; field arrays are stored as
complex64 (interleaved float32 re,im), intensities as float32, positions as
float64. The manifest declares path, dtype and shape for every file, so the
format is parseable from any language without this package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from .errors import DatasetIOError
from .fields import Geometry

FORMAT_VERSION = "1"
_SUPPORTED_VERSIONS = {"1"}

_DTYPES = {
    "float32": np.dtype("<f4"),
    "float64": np.dtype("<f8"),
    "complex64": np.dtype("<c8"),
}


@dataclass(frozen=True)
class GroundTruth:
    """Simulation truth, carried alongside a dataset but invisible to solvers."""
    true_positions: np.ndarray
    obj: np.ndarray | None = None
    probes: list[np.ndarray] | None = None
    mode_powers: tuple[float, ...] | None = None


@dataclass
class PtychoDataset:
    """Diffraction stack + nominal scan positions + geometry."""
    patterns: np.ndarray         # (N, W, W) nonnegative intensities
    positions: np.ndarray        # (N, 2) float (x, y) crop anchors, nominal
    geometry: Geometry
    ground_truth: GroundTruth | None = None
    seed: int = 0

    @property
    def n_positions(self) -> int:
        return self.patterns.shape[0]


def _write_array(directory: Path, name: str, array: np.ndarray, dtype: str) -> dict:
    data = np.ascontiguousarray(array).astype(_DTYPES[dtype])
    path = directory / name
    data.tofile(path)
    return {"path": name, "dtype": dtype, "shape": list(array.shape)}


def _read_array(directory: Path, entry: dict) -> np.ndarray:
    dtype = entry.get("dtype")
    if dtype not in _DTYPES:
        raise DatasetIOError(f"unsupported dtype {dtype!r} in manifest")
    path = directory / entry["path"]
    if not path.is_file():
        raise DatasetIOError(f"missing array file: {path}")
    shape = tuple(int(s) for s in entry["shape"])
    expected = int(np.prod(shape)) * _DTYPES[dtype].itemsize
    actual = path.stat().st_size
    if actual != expected:
        raise DatasetIOError(
            f"{path}: size {actual} bytes does not match shape {shape} "
            f"({expected} bytes expected)")
    return np.fromfile(path, dtype=_DTYPES[dtype]).reshape(shape)


def write_dataset(path: str | Path, dataset: PtychoDataset) -> Path:
    """Persist a dataset to a directory; returns the manifest path."""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    g = dataset.geometry
    manifest = {
        "format_version": FORMAT_VERSION,
        "wavelength_m": g.wavelength,
        "distance_m": g.distance,
        "detector_pixel_m": g.detector_pixel,
        "window_px": g.window,
        "positions_file": _write_array(directory, "positions.raw",
                                       dataset.positions, "float64"),
        "patterns_file": _write_array(directory, "patterns.raw",
                                      dataset.patterns, "float32"),
        "seed": int(dataset.seed),
        "created_utc": datetime.now(timezone.utc).isoformat(),
        "generator": "ptychokit",
    }
    truth = dataset.ground_truth
    if truth is not None:
        block: dict = {
            "true_positions_file": _write_array(
                directory, "true_positions.raw", truth.true_positions, "float64"),
        }
        if truth.obj is not None:
            block["object_file"] = _write_array(directory, "object.raw",
                                                truth.obj, "complex64")
        if truth.probes is not None:
            block["probe_files"] = [
                _write_array(directory, f"probe_{i:03d}.raw", p, "complex64")
                for i, p in enumerate(truth.probes)
            ]
        if truth.mode_powers is not None:
            block["mode_powers"] = list(truth.mode_powers)
        manifest["ground_truth"] = block
    manifest_path = directory / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest_path


def read_dataset(path: str | Path) -> PtychoDataset:
    """Load a dataset directory written by :func:`write_dataset`."""
    directory = Path(path)
    manifest_path = directory / "manifest.json"
    if not manifest_path.is_file():
        raise DatasetIOError(f"missing manifest: {manifest_path}")
    try:
        manifest = json.loads(manifest_path.read_text())
    except json.JSONDecodeError as exc:
        raise DatasetIOError(f"{manifest_path}: invalid JSON ({exc})") from exc
    version = manifest.get("format_version")
    if version not in _SUPPORTED_VERSIONS:
        raise DatasetIOError(f"unsupported format_version {version!r}")
    try:
        geometry = Geometry.create(manifest["wavelength_m"], manifest["distance_m"],
                                   manifest["detector_pixel_m"], manifest["window_px"])
        positions = _read_array(directory, manifest["positions_file"])
        patterns = _read_array(directory, manifest["patterns_file"])
    except KeyError as exc:
        raise DatasetIOError(f"manifest missing required key {exc}") from exc
    w = geometry.window
    if patterns.ndim != 3 or patterns.shape[1:] != (w, w):
        raise DatasetIOError(
            f"patterns shape {patterns.shape} inconsistent with window {w}")
    if positions.shape != (patterns.shape[0], 2):
        raise DatasetIOError(
            f"positions shape {positions.shape} inconsistent with "
            f"{patterns.shape[0]} patterns")
    truth = None
    block = manifest.get("ground_truth")
    if block is not None:
        true_positions = _read_array(directory, block["true_positions_file"])
        obj = (_read_array(directory, block["object_file"])
               if "object_file" in block else None)
        probes = ([_read_array(directory, e) for e in block["probe_files"]]
                  if "probe_files" in block else None)
        powers = (tuple(block["mode_powers"])
                  if "mode_powers" in block else None)
        truth = GroundTruth(true_positions, obj, probes, powers)
    return PtychoDataset(patterns=patterns.astype(np.float64),
                         positions=positions, geometry=geometry,
                         ground_truth=truth, seed=int(manifest.get("seed", 0)))


def write_checkpoint(path: str | Path, obj: np.ndarray, probes: list[np.ndarray],
                     positions: np.ndarray, canvas_origin: tuple[int, int],
                     error_trace: list[float], iteration: int) -> Path:
    """Persist a reconstruction state snapshot in the same raw+JSON idiom."""
    directory = Path(path)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "format_version": FORMAT_VERSION,
        "iteration": int(iteration),
        "canvas_origin": [int(canvas_origin[0]), int(canvas_origin[1])],
        "object_file": _write_array(directory, "object.raw", obj, "complex64"),
        "probe_files": [
            _write_array(directory, f"probe_{i:03d}.raw", p, "complex64")
            for i, p in enumerate(probes)
        ],
        "positions_file": _write_array(directory, "positions.raw",
                                       positions, "float64"),
        "error_trace": [float(e) for e in error_trace],
    }
    manifest_path = directory / "checkpoint.json"
    manifest_path.write_text(json.dumps(manifest, indent=2))
    return manifest_path


def read_checkpoint(path: str | Path) -> dict:
    """Load a checkpoint directory; returns a plain dict of arrays and metadata."""
    directory = Path(path)
    manifest_path = directory / "checkpoint.json"
    if not manifest_path.is_file():
        raise DatasetIOError(f"missing checkpoint manifest: {manifest_path}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format_version") not in _SUPPORTED_VERSIONS:
        raise DatasetIOError("unsupported checkpoint format_version")
    return {
        "iteration": int(manifest["iteration"]),
        "canvas_origin": tuple(manifest["canvas_origin"]),
        "object": _read_array(directory, manifest["object_file"]),
        "probes": [_read_array(directory, e) for e in manifest["probe_files"]],
        "positions": _read_array(directory, manifest["positions_file"]),
        "error_trace": [float(e) for e in manifest["error_trace"]],
    }
