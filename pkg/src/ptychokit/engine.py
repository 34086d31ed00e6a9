"""Multi-mode rPIE reconstruction engine.

One sweep visits every scan position: crop the object, enforce the measured
modulus on the mixed-state detector waves, then apply the rPIE probe/object
update rules. With beta = gamma = 1 the updates reduce exactly to multi-mode
ePIE (see Maiden & Rodenburg 2009 for ePIE, Maiden et al. 2017 for rPIE,
Thibault & Menzel 2013 for the mixed-state model).
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .dataio import PtychoDataset, write_checkpoint
from .errors import DataError, DegenerateInputError, ParameterError
from .fields import CropBox, crop, paste_add_inplace, propagate
from .posref import AdamBuffers, PosRefConfig, adam_step, apply_correction, \
    sense_shift_A, sense_shift_B


@dataclass(frozen=True)
class SolverConfig:
    alpha_obj: float = 0.9
    alpha_probe: float = 0.9
    beta: float = 1.0                 # probe-update regularisation, (0, 1]
    gamma: float = 1.0                # object-update regularisation, (0, 1]
    mode_count: int = 1
    iterations: int = 100
    position_order: str = "shuffled"  # fixed | shuffled
    shuffle_seed: int = 0
    init_seed: int = 0
    epsilon_rel: float = 1e-12        # denominator guard, relative to its max
    ortho_interval: int = 0           # Gram-Schmidt probe modes every k iters; 0 = off
    update_probe_modes: bool = True
    posref: PosRefConfig | None = None
    track_modulus_error: bool = False

    def __post_init__(self) -> None:
        if not (0 <= self.alpha_obj <= 1 and 0 <= self.alpha_probe <= 1):
            raise ParameterError("update rates must lie in [0, 1]")
        if not (0 < self.beta <= 1 and 0 < self.gamma <= 1):
            raise ParameterError("beta and gamma must lie in (0, 1]")
        if self.position_order not in ("fixed", "shuffled"):
            raise ParameterError(f"unknown position order {self.position_order!r}")
        if self.mode_count < 1:
            raise ParameterError("mode_count must be >= 1")


@dataclass
class ReconState:
    obj: np.ndarray                     # full canvas estimate
    probes: list[np.ndarray]            # M modes, window-sized
    positions: np.ndarray               # (N, 2) float (x, y), working copy
    canvas_origin: tuple[int, int]      # (row, col) of canvas pixel (0, 0)
    adam: AdamBuffers | None = None
    error_trace: list[float] = field(default_factory=list)
    modulus_error_trace: list[float] = field(default_factory=list)
    seconds_per_iteration: list[float] = field(default_factory=list)

    @property
    def iteration(self) -> int:
        return len(self.error_trace)


def _anchor(position_xy: np.ndarray) -> tuple[int, int]:
    return int(round(float(position_xy[1]))), int(round(float(position_xy[0])))


def initialize(dataset: PtychoDataset, config: SolverConfig) -> ReconState:
    """Unit-transmission object on the crop bounding box; probe mode 1 is the
    back-propagated mean diffraction amplitude, extra modes are 1%-power
    orthogonalised perturbations of it."""
    w = dataset.geometry.window
    anchors = np.stack([_anchor(p) for p in dataset.positions])
    origin = anchors.min(axis=0)
    extent = anchors.max(axis=0) - origin + w
    obj = np.ones((int(extent[0]), int(extent[1])), dtype=np.complex128)

    mean_amp = np.sqrt(np.maximum(dataset.patterns.mean(axis=0), 0.0))
    probe1 = propagate(mean_amp.astype(np.complex128), "backward")
    probes = [probe1]
    p1_power = np.sum(np.abs(probe1) ** 2)
    for p in range(1, config.mode_count):
        rng = np.random.default_rng([config.init_seed, p])
        cand = probe1 * (rng.standard_normal((w, w))
                         + 1j * rng.standard_normal((w, w)))
        for prev in probes:
            cand = cand - prev * (np.vdot(prev, cand) / np.vdot(prev, prev))
        cand *= np.sqrt(0.01 * p1_power / np.sum(np.abs(cand) ** 2))
        probes.append(cand)

    adam = (AdamBuffers.zeros(dataset.n_positions)
            if config.posref is not None else None)
    return ReconState(obj=obj, probes=probes,
                      positions=dataset.positions.astype(float).copy(),
                      canvas_origin=(int(origin[0]), int(origin[1])),
                      adam=adam)


def magnitude_correct(probes: list[np.ndarray], o_j: np.ndarray, i_j: np.ndarray,
                      epsilon_rel: float = 1e-12
                      ) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Mixed-state modulus constraint: rescale the detector-plane mode waves so
    their total intensity matches the measurement, then back-propagate.

    Returns (corrected exit waves, original detector waves)."""
    if np.any(i_j < 0):
        raise DataError("measured intensities must be non-negative")
    psi_det = [propagate(p * o_j) for p in probes]
    total = np.zeros_like(i_j, dtype=float)
    for psi in psi_det:
        total += np.abs(psi) ** 2
    eps = epsilon_rel * max(total.max(), np.finfo(float).tiny)
    scale = np.sqrt(i_j) / np.sqrt(total + eps)
    corrected = [propagate(scale * psi, "backward") for psi in psi_det]
    return corrected, psi_det


def update_object(o_j: np.ndarray, probes: list[np.ndarray],
                  psi_corrected: list[np.ndarray], alpha_obj: float,
                  gamma: float, epsilon_rel: float = 1e-12) -> np.ndarray:
    """rPIE object update on one crop; gamma = 1 gives the ePIE rule."""
    numer = np.zeros_like(o_j)
    probe_power = np.zeros(o_j.shape, dtype=float)
    for p, psi in zip(probes, psi_corrected):
        numer += (psi - p * o_j) * np.conj(p)
        probe_power += np.abs(p) ** 2
    peak = probe_power.max()
    if peak == 0.0:
        raise DegenerateInputError("all probe modes are zero")
    denom = gamma * peak + (1 - gamma) * probe_power
    denom = denom + epsilon_rel * denom.max()
    return o_j + alpha_obj * numer / denom


def update_probe(probe: np.ndarray, o_j: np.ndarray, psi_corrected: np.ndarray,
                 alpha_probe: float, beta: float,
                 epsilon_rel: float = 1e-12) -> np.ndarray:
    """rPIE probe update for a single mode; beta = 1 gives the ePIE rule."""
    obj_power = np.abs(o_j) ** 2
    peak = obj_power.max()
    if peak == 0.0:
        raise DegenerateInputError("object crop is identically zero")
    denom = beta * peak + (1 - beta) * obj_power
    denom = denom + epsilon_rel * denom.max()
    return probe + alpha_probe * (psi_corrected - probe * o_j) * np.conj(o_j) / denom


def _orthogonalize_modes(probes: list[np.ndarray]) -> list[np.ndarray]:
    # power-preserving Gram-Schmidt, strongest mode first
    total = sum(np.sum(np.abs(p) ** 2) for p in probes)
    out: list[np.ndarray] = []
    for p in probes:
        q = p.copy()
        for prev in out:
            q -= prev * (np.vdot(prev, q) / np.vdot(prev, prev))
        out.append(q)
    new_total = sum(np.sum(np.abs(p) ** 2) for p in out)
    scale = np.sqrt(total / new_total) if new_total > 0 else 1.0
    return [q * scale for q in out]


def _position_bounds(state: ReconState, window: int) -> tuple[float, float, float, float]:
    h, w = state.obj.shape
    r0, c0 = state.canvas_origin
    return (float(c0), float(r0), float(c0 + w - window), float(r0 + h - window))


def sweep(state: ReconState, dataset: PtychoDataset, config: SolverConfig) -> ReconState:
    """One full pass over all positions, mutating ``state`` in place."""
    w = dataset.geometry.window
    n = dataset.n_positions
    if config.position_order == "shuffled":
        order = np.random.default_rng(
            [config.shuffle_seed, state.iteration]).permutation(n)
    else:
        order = np.arange(n)
    posref = config.posref
    engaged = posref is not None and state.iteration >= posref.warmup_iterations
    bounds = _position_bounds(state, w)
    r0, c0 = state.canvas_origin

    err_num = 0.0
    err_den = 0.0
    modulus_worst = 0.0
    t0 = time.perf_counter()
    for j in order:
        i_j = dataset.patterns[j]
        ar, ac = _anchor(state.positions[j])
        box = CropBox(ar - r0, ac - c0, w)
        o_j = crop(state.obj, box)
        corrected, psi_det = magnitude_correct(state.probes, o_j, i_j,
                                               config.epsilon_rel)
        total = np.zeros_like(i_j)
        for psi in psi_det:
            total += np.abs(psi) ** 2
        err_num += float(np.sum((np.sqrt(total) - np.sqrt(i_j)) ** 2))
        err_den += float(np.sum(i_j))

        if config.track_modulus_error:
            after = np.zeros_like(i_j)
            for psi in corrected:
                after += np.abs(propagate(psi)) ** 2
            # identity: after = I * total/(total + eps), so on pixels with
            # total > 1e-3 * max the elementwise error is <= epsilon_rel * 1e3
            guard = total > 1e-3 * total.max()
            if np.any(guard):
                rel = (np.abs(after[guard] - i_j[guard])
                       / np.maximum(i_j[guard], np.finfo(float).tiny))
                modulus_worst = max(modulus_worst, float(rel.max()))

        new_o_j = update_object(o_j, state.probes, corrected,
                                config.alpha_obj, config.gamma, config.epsilon_rel)
        if config.update_probe_modes and config.alpha_probe > 0:
            state.probes = [
                update_probe(p, o_j, psi, config.alpha_probe, config.beta,
                             config.epsilon_rel)
                for p, psi in zip(state.probes, corrected)
            ]
        paste_add_inplace(state.obj, box, new_o_j - o_j)

        if engaged:
            if posref.sensor == "XCORR_A":
                gx, gy, ok = sense_shift_A(o_j, new_o_j, posref.kappa)
            else:
                gx, gy, ok = sense_shift_B(total, i_j, posref.kappa)
            if ok:
                delta = adam_step(state.adam, j, (gx, gy), posref)
                apply_correction(state.positions, j, delta, bounds)

    if (config.ortho_interval > 0 and len(state.probes) > 1
            and (state.iteration + 1) % config.ortho_interval == 0):
        state.probes = _orthogonalize_modes(state.probes)

    state.error_trace.append(err_num / max(err_den, np.finfo(float).tiny))
    if config.track_modulus_error:
        state.modulus_error_trace.append(modulus_worst)
    state.seconds_per_iteration.append(time.perf_counter() - t0)
    return state


def run(dataset: PtychoDataset, config: SolverConfig,
        state: ReconState | None = None, checkpoint_every: int = 0,
        checkpoint_dir=None) -> ReconState:
    """Initialize (unless resuming) and iterate ``config.iterations`` sweeps."""
    if state is None:
        state = initialize(dataset, config)
    for _ in range(config.iterations):
        sweep(state, dataset, config)
        if (checkpoint_every > 0 and checkpoint_dir is not None
                and state.iteration % checkpoint_every == 0):
            snapshot = Path(checkpoint_dir) / f"iter_{state.iteration:04d}"
            write_checkpoint(snapshot, state.obj, state.probes,
                             state.positions, state.canvas_origin,
                             state.error_trace, state.iteration)
    return state
