"""JSON configuration files for the CLI.

Every default lives in the schema dictionaries below; a config file only
overrides what it names. Unknown keys are rejected so typos fail loudly.
The output directory may be overridden with the PTYCHOKIT_OUTPUT environment
variable (the only env-var knob).
"""

from __future__ import annotations

import copy
import json
import os
from pathlib import Path

from .errors import ParameterError

OUTPUT_ENV_VAR = "PTYCHOKIT_OUTPUT"

SIMULATE_DEFAULTS: dict = {
    "seed": 0,
    "geometry": {
        "wavelength_m": 8.3187e-10,
        "distance_m": 0.75,
        "detector_pixel_m": 20e-6,
        "window_px": 64,
    },
    "object": {
        "kind": "spokes",              # spokes | checkerboard | phase-screen
    },
    "probe": {
        "mode_count": 1,
        "mode_powers": [1.0],
        "base": "disk",                # disk | gaussian
        "radius_px": 12.0,
    },
    "scan": {
        "rows": 9,
        "cols": 9,
        "step_px": 19.0,
        "jitter_px": 1.0,
    },
    "noise": {
        "model": "none",               # none | poisson
        "photon_budget": 1e6,
    },
    "output_dir": "dataset",
}

RECONSTRUCT_DEFAULTS: dict = {
    "dataset": None,                   # required: path to a dataset directory
    "iterations": 100,
    "alpha_object": 0.9,
    "alpha_probe": 0.9,
    "beta": 1.0,
    "gamma": 1.0,
    "mode_count": 1,
    "position_order": "shuffled",      # fixed | shuffled
    "shuffle_seed": 0,
    "init_seed": 0,
    "epsilon_rel": 1e-12,
    "ortho_interval": 0,
    "update_probe": True,
    "checkpoint_every": 0,
    "posref": {
        "enabled": False,
        "sensor": "XCORR_A",           # XCORR_A | XCORR_B
        "step_size": 0.5,
        "beta1": 0.9,
        "beta2": 0.999,
        "eps_adam": 1e-8,
        "warmup_iterations": 10,
        "kappa": 100,
        "max_correction": 1.0,
        "dump_positions": False,       # per-iteration position snapshots
    },
    "output_dir": "recon",
}


def _merge(defaults: dict, overrides: dict, path: str = "") -> dict:
    out = copy.deepcopy(defaults)
    for key, value in overrides.items():
        where = f"{path}.{key}" if path else key
        if key not in defaults:
            raise ParameterError(f"unknown config key: {where}")
        if isinstance(defaults[key], dict) and isinstance(value, dict):
            out[key] = _merge(defaults[key], value, where)
        else:
            out[key] = value
    return out


def load_config(path: str | Path, defaults: dict) -> dict:
    """Read a JSON config file and merge it over ``defaults``."""
    path = Path(path)
    if not path.is_file():
        raise ParameterError(f"config file not found: {path}")
    try:
        overrides = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParameterError(f"{path}: invalid JSON ({exc})") from exc
    if not isinstance(overrides, dict):
        raise ParameterError(f"{path}: top level must be a JSON object")
    cfg = _merge(defaults, overrides)
    env_dir = os.environ.get(OUTPUT_ENV_VAR)
    if env_dir:
        cfg["output_dir"] = env_dir
    return cfg
