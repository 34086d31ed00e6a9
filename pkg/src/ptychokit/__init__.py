"""Ptychography toolkit: virtual experiments, multi-mode rPIE reconstruction,
Adam-driven scan-position refinement, and upsampled-DFT subpixel registration."""

from .fields import Geometry, CropBox, sample_pixel_size, propagate, crop, paste_add, subpixel_shift
from .registration import ShiftEstimate, cross_power_spectrum, coarse_shift, refine_shift, register
from .simulate import ScanPlan, ProbeSpec, make_scan, make_probe, make_object, synthesize
from .engine import SolverConfig, ReconState, initialize, sweep, run
from .posref import PosRefConfig, AdamBuffers
from .dataio import PtychoDataset, GroundTruth, write_dataset, read_dataset

__version__ = "0.1.0"

__all__ = [
    "Geometry", "CropBox", "sample_pixel_size", "propagate", "crop", "paste_add",
    "subpixel_shift",
    "ShiftEstimate", "cross_power_spectrum", "coarse_shift", "refine_shift", "register",
    "ScanPlan", "ProbeSpec", "make_scan", "make_probe", "make_object", "synthesize",
    "SolverConfig", "ReconState", "initialize", "sweep", "run",
    "PosRefConfig", "AdamBuffers",
    "PtychoDataset", "GroundTruth", "write_dataset", "read_dataset",
]
