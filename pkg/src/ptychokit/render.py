"""Field renders and report figures.

``render`` writes a 16-bit grayscale PNG of a field's magnitude or phase, with
the scaling recorded in a JSON sidecar so pixel values can be mapped back to
physical quantities. The plot_* helpers produce the matplotlib report figures
emitted next to the CSV outputs of the CLI.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np
from PIL import Image

from .errors import ParameterError

_U16_MAX = 65535


def render(field: np.ndarray, kind: str, path: str | Path) -> Path:
    """Write a 16-bit grayscale PNG plus a ``<path>.json`` scaling sidecar."""
    f = np.asarray(field)
    if kind == "magnitude":
        img = np.abs(f).astype(float)
        vmin, vmax = float(img.min()), float(img.max())
    elif kind == "phase":
        img = np.angle(f)
        vmin, vmax = -np.pi, np.pi
    else:
        raise ParameterError(f"kind must be 'magnitude' or 'phase', got {kind!r}")
    span = vmax - vmin
    scaled = (img - vmin) / span if span > 0 else np.zeros_like(img)
    png = np.round(scaled * _U16_MAX).astype(np.uint16)
    path = Path(path)
    Image.fromarray(png).save(path)  # uint16 -> 16-bit grayscale
    sidecar = {"kind": kind, "vmin": vmin, "vmax": vmax,
               "levels": _U16_MAX, "shape": list(f.shape)}
    Path(str(path) + ".json").write_text(json.dumps(sidecar, indent=2))
    return path


def load_render(path: str | Path) -> tuple[np.ndarray, dict]:
    """Read a rendered PNG back to physical values using its sidecar."""
    path = Path(path)
    sidecar = json.loads(Path(str(path) + ".json").read_text())
    png = np.asarray(Image.open(path), dtype=float)
    values = sidecar["vmin"] + png / sidecar["levels"] * (sidecar["vmax"] - sidecar["vmin"])
    return values, sidecar


def plot_error_trace(trace: list[float], path: str | Path) -> Path:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.semilogy(np.arange(1, len(trace) + 1), trace)
    ax.set_xlabel("iteration")
    ax.set_ylabel("normalized intensity error")
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_positions(nominal: np.ndarray, refined: np.ndarray, path: str | Path,
                   truth: np.ndarray | None = None) -> Path:
    fig, ax = plt.subplots(figsize=(5, 5))
    ax.scatter(nominal[:, 0], nominal[:, 1], marker="o", s=20,
               facecolors="none", edgecolors="tab:blue", label="nominal")
    ax.scatter(refined[:, 0], refined[:, 1], marker="+", s=30,
               color="tab:red", label="refined")
    if truth is not None:
        ax.scatter(truth[:, 0], truth[:, 1], marker="x", s=20,
                   color="tab:green", label="truth")
    ax.set_xlabel("x (px)")
    ax.set_ylabel("y (px)")
    ax.set_aspect("equal")
    ax.invert_yaxis()
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)


def plot_benchmark(rows: list[dict], path: str | Path) -> Path:
    """Timing-vs-upsample curves, one line per (side, method)."""
    fig, ax = plt.subplots(figsize=(6, 4))
    keys = sorted({(r["side"], r["method"]) for r in rows})
    for side, method in keys:
        pts = sorted((r["kappa"], r["seconds"]) for r in rows
                     if r["side"] == side and r["method"] == method)
        ax.loglog([k for k, _ in pts], [s for _, s in pts],
                  marker="o", label=f"{method}, side={side}")
    ax.set_xlabel("upsample factor")
    ax.set_ylabel("median seconds")
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return Path(path)
