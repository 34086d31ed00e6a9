"""End-to-end acceptance suite.

Each test prints a single PASS/FAIL line (visible with ``pytest -s`` or in the
captured output on failure) and asserts the same condition.
"""

import json

import numpy as np

from ptychokit.bench import bench_registration, write_csv
from ptychokit.engine import SolverConfig, initialize, sweep
from ptychokit.fields import Geometry, subpixel_shift
from ptychokit.metrics import coverage_mask, object_error, position_rmse
from ptychokit.posref import PosRefConfig
from ptychokit.registration import register
from ptychokit.simulate import (ProbeSpec, canvas_shape_for, make_object,
                                make_probe, make_scan, synthesize)

GEOM64 = Geometry.create(8.3187e-10, 0.75, 20e-6, 64)


def report(criterion: str, passed: bool, detail: str) -> None:
    print(f"{'PASS' if passed else 'FAIL'} {criterion}: {detail}")
    assert passed, f"{criterion}: {detail}"


def recon_object_error(state, dataset) -> float:
    """Object error against truth over the illuminated region, restricted to
    where the solver canvas and the truth canvas overlap."""
    mask = coverage_mask(state.probes, state.positions, state.obj.shape,
                         state.canvas_origin)
    truth = dataset.ground_truth.obj
    r0, c0 = state.canvas_origin
    h, w = state.obj.shape
    ra, ca = max(r0, 0), max(c0, 0)
    rb, cb = min(r0 + h, truth.shape[0]), min(c0 + w, truth.shape[1])
    return object_error(state.obj[ra - r0:rb - r0, ca - c0:cb - c0],
                        truth[ra:rb, ca:cb],
                        mask[ra - r0:rb - r0, ca - c0:cb - c0])


# --------------------------------------------------------------------------
# Criterion 1: with beta = gamma = 1 the solver IS multi-mode ePIE.
# Reference: an independently written straight-line M-ePIE sweep.
# --------------------------------------------------------------------------

def _fft_c(a):
    return np.fft.fftshift(np.fft.fft2(np.fft.ifftshift(a), norm="ortho"))


def _ifft_c(a):
    return np.fft.fftshift(np.fft.ifft2(np.fft.ifftshift(a), norm="ortho"))


def _independent_mepie_sweep(obj, probes, positions, origin, patterns,
                             alpha_o, alpha_p, eps_rel=1e-12):
    """One multi-mode ePIE iteration in fixed scan order, written without any
    package internals: modulus projection, then object and probe updates with
    the max-power denominators."""
    w = probes[0].shape[0]
    r0, c0 = origin
    for j in range(len(positions)):
        x, y = positions[j]
        r = int(round(float(y))) - r0
        c = int(round(float(x))) - c0
        o_j = obj[r:r + w, c:c + w].copy()

        psi_det = [_fft_c(p * o_j) for p in probes]
        total = sum(np.abs(pd) ** 2 for pd in psi_det)
        eps = eps_rel * max(total.max(), np.finfo(float).tiny)
        corrected = [_ifft_c(np.sqrt(patterns[j]) * pd / np.sqrt(total + eps))
                     for pd in psi_det]

        probe_power = sum(np.abs(p) ** 2 for p in probes)
        denom_o = probe_power.max() * (1.0 + eps_rel)
        new_o = o_j + alpha_o * sum(
            (cp - p * o_j) * np.conj(p) for p, cp in zip(probes, corrected)
        ) / denom_o

        denom_p = (np.abs(o_j) ** 2).max() * (1.0 + eps_rel)
        probes = [p + alpha_p * (cp - p * o_j) * np.conj(o_j) / denom_p
                  for p, cp in zip(probes, corrected)]
        obj[r:r + w, c:c + w] = new_o
    return obj, probes


def test_criterion_1_epie_reduction():
    plan = make_scan((7, 7), 10.0, 1.0, seed=2)
    obj = make_object(canvas_shape_for(plan, 64), "spokes", seed=2)
    probes = make_probe(ProbeSpec(2, (0.85, 0.15), "disk", 14.0), GEOM64)
    ds = synthesize(obj, probes, plan, GEOM64, noise="none", seed=2)

    cfg = SolverConfig(alpha_obj=0.9, alpha_probe=0.8, beta=1.0, gamma=1.0,
                       mode_count=2, position_order="fixed")
    state = initialize(ds, cfg)
    ref_obj = state.obj.copy()
    ref_probes = [p.copy() for p in state.probes]

    worst = 0.0
    for _ in range(50):
        sweep(state, ds, cfg)
        ref_obj, ref_probes = _independent_mepie_sweep(
            ref_obj, ref_probes, ds.positions, state.canvas_origin,
            ds.patterns, 0.9, 0.8)
        scale_o = np.abs(ref_obj).max()
        worst = max(worst, float(np.abs(state.obj - ref_obj).max() / scale_o))
        for a, b in zip(state.probes, ref_probes):
            scale_p = np.abs(b).max()
            worst = max(worst, float(np.abs(a - b).max() / scale_p))

    report("criterion 1 (ePIE reduction)", worst <= 1e-12,
           f"max relative deviation from independent M-ePIE over 50 "
           f"iterations = {worst:.2e} (tolerance 1e-12)")


# --------------------------------------------------------------------------
# Criterion 2: modulus-constraint exactness through a full run.
# --------------------------------------------------------------------------

def test_criterion_2_modulus_exactness():
    plan = make_scan((7, 7), 10.0, 1.0, seed=3)
    obj = make_object(canvas_shape_for(plan, 64), "phase-screen", seed=3)
    probes = make_probe(ProbeSpec(1, (1.0,), "disk", 14.0), GEOM64)
    ds = synthesize(obj, probes, plan, GEOM64, noise="none", seed=3)

    cfg = SolverConfig(iterations=100, track_modulus_error=True)
    state = initialize(ds, cfg)
    for _ in range(100):
        sweep(state, ds, cfg)
    worst = max(state.modulus_error_trace)
    report("criterion 2 (modulus exactness)", worst <= 1e-9,
           f"worst per-pixel relative intensity mismatch across 100 "
           f"iterations x {ds.n_positions} positions = {worst:.2e} "
           f"(tolerance 1e-9)")


# --------------------------------------------------------------------------
# Criterion 3: noiseless single-mode recovery with a known probe.
# --------------------------------------------------------------------------

def test_criterion_3_noiseless_recovery():
    # probe radius 15 px on a 9 px grid: ~70% linear overlap between
    # neighbouring illumination spots
    plan = make_scan((9, 9), 9.0, 0.5, seed=5)
    obj = make_object(canvas_shape_for(plan, 64), "spokes", seed=5)
    probes = make_probe(ProbeSpec(1, (1.0,), "disk", 15.0), GEOM64)
    ds = synthesize(obj, probes, plan, GEOM64, noise="none", seed=5)
    ds.positions[:] = ds.ground_truth.true_positions  # known positions

    cfg = SolverConfig(iterations=200, update_probe_modes=False)
    state = initialize(ds, cfg)
    state.probes = [p.copy() for p in probes]  # known probe
    err = np.inf
    for _ in range(200):
        sweep(state, ds, cfg)
        err = min(err, recon_object_error(state, ds))
        if err < 1e-3:
            break
    report("criterion 3 (noiseless recovery)", err < 1e-3,
           f"object error reached {err:.2e} within {state.iteration} "
           f"iterations (target < 1e-3 within 200)")


# --------------------------------------------------------------------------
# Criterion 4: second probe mode helps on two-mode data.
# --------------------------------------------------------------------------

def _translation_aligned_object_error(state, dataset) -> float:
    """Object error modulo the joint object/probe translation, which leaves
    every diffraction intensity unchanged when the probe is reconstructed too.
    The displacement is estimated with the package's own subpixel registration
    on the coverage-masked canvases (zero-padded to square)."""
    raw = recon_object_error(state, dataset)
    mask = coverage_mask(state.probes, state.positions, state.obj.shape,
                         state.canvas_origin)
    r0, c0 = state.canvas_origin
    h, w = state.obj.shape
    truth = dataset.ground_truth.obj[r0:r0 + h, c0:c0 + w]
    side = max(h, w)
    a = np.zeros((side, side), complex)
    b = np.zeros((side, side), complex)
    a[:h, :w] = np.where(mask, state.obj, 0)
    b[:h, :w] = np.where(mask, truth, 0)
    est = register(b, a, weighting="raw", upsample=100)
    aligned = object_error(subpixel_shift(state.obj, est.dx, est.dy),
                           truth, mask)
    return min(raw, aligned)


def test_criterion_4_two_mode_recovery():
    plan = make_scan((7, 7), 9.0, 2.0, seed=4)
    obj = make_object(canvas_shape_for(plan, 64), "spokes", seed=4)
    probes = make_probe(ProbeSpec(2, (0.85, 0.15), "disk", 15.0), GEOM64)
    ds = synthesize(obj, probes, plan, GEOM64, noise="none", seed=4)
    ds.positions[:] = ds.ground_truth.true_positions  # known positions

    errs = {}
    for mode_count in (1, 2):
        cfg = SolverConfig(iterations=300, mode_count=mode_count,
                           shuffle_seed=1)
        state = initialize(ds, cfg)
        for _ in range(300):
            sweep(state, ds, cfg)
        errs[mode_count] = _translation_aligned_object_error(state, ds)

    ratio = errs[2] / errs[1]
    report("criterion 4 (two-mode recovery)", ratio <= 0.5,
           f"object error at iteration 300: M=2 {errs[2]:.3e} vs M=1 "
           f"{errs[1]:.3e}, ratio {ratio:.3f} (target <= 0.5)")


# --------------------------------------------------------------------------
# Criterion 5: subpixel registration accuracy, 500 random shifts.
# --------------------------------------------------------------------------

def test_criterion_5_registration_accuracy():
    from scipy.ndimage import gaussian_filter
    kappa = 50
    rng = np.random.default_rng(12)
    base = gaussian_filter(rng.standard_normal((64, 64)), sigma=2.0)

    worst = 0.0
    for _ in range(500):
        dx, dy = rng.uniform(-3, 3, 2)
        mov = subpixel_shift(base, dx, dy).real
        est = register(base, mov, weighting="raw", upsample=kappa)
        # returned shift aligns mov back onto base: expect (-dy, -dx)
        worst = max(worst, abs(est.dy + dy), abs(est.dx + dx))

    # integer shifts must match the brute-force argmax exactly
    integer_ok = True
    for s in [(0, 0), (3, -5), (-7, 2)]:
        mov = np.roll(base, s, axis=(0, 1))
        est = register(base, mov, weighting="raw", upsample=1)
        if (est.dy, est.dx) != (-float(s[0]), -float(s[1])):
            integer_ok = False

    passed = worst < 2.0 / kappa and integer_ok
    report("criterion 5 (registration accuracy)", passed,
           f"max per-axis error over 500 subpixel trials = {worst:.4f} px "
           f"(tolerance {2.0 / kappa}); integer shifts exact: {integer_ok}")


# --------------------------------------------------------------------------
# Criterion 6: recovery from corrupted scan positions.
# --------------------------------------------------------------------------

def test_criterion_6_position_refinement():
    # integer-valued scan jitter keeps the grid aperiodic while every true
    # position stays on the pixel lattice; the probe is known and fixed so
    # object error responds to position quality alone
    plan = make_scan((7, 7), 10.0, 3.0, seed=7)
    plan.true_positions[:] = np.round(plan.true_positions)
    obj = make_object(canvas_shape_for(plan, 64), "spokes", seed=7)
    probes = make_probe(ProbeSpec(1, (1.0,), "disk", 20.0), GEOM64)
    ds = synthesize(obj, probes, plan, GEOM64, noise="none", seed=7)
    true = ds.ground_truth.true_positions
    corrupt = true + np.random.default_rng(42).uniform(-2, 2, true.shape)
    initial_rmse = position_rmse(corrupt, true)

    def run(sensor, step_size):
        posref = None
        if sensor is not None:
            posref = PosRefConfig(sensor=sensor, step_size=step_size,
                                  warmup_iterations=10, kappa=100)
        ds.positions[:] = corrupt
        cfg = SolverConfig(iterations=150, shuffle_seed=3, posref=posref,
                           update_probe_modes=False)
        state = initialize(ds, cfg)
        state.probes = [p.copy() for p in probes]
        for _ in range(150):
            sweep(state, ds, cfg)
        return position_rmse(state.positions, true), \
            recon_object_error(state, ds)

    rmse_a, objerr_a = run("XCORR_A", 0.2)
    _, objerr_off = run(None, 0.0)
    rmse_b, _ = run("XCORR_B", 0.2)

    rmse_ok = rmse_a <= 0.30 * initial_rmse
    obj_ok = objerr_a <= 0.5 * objerr_off
    b_ok = rmse_b > rmse_a
    report("criterion 6 (position refinement)", rmse_ok and obj_ok and b_ok,
           f"XCORR_A RMSE {rmse_a:.3f} px from initial {initial_rmse:.3f} "
           f"(ratio {rmse_a / initial_rmse:.3f}, needs <= 0.30); object error "
           f"{objerr_a:.2e} vs posref-off {objerr_off:.2e} (needs <= 0.5x); "
           f"XCORR_B RMSE {rmse_b:.3f} worse than XCORR_A: {b_ok}")


# --------------------------------------------------------------------------
# Criterion 7: matrix-DFT refinement vs zero-padded FFT upsampling.
# --------------------------------------------------------------------------

def test_criterion_7_registration_benchmark(tmp_path):
    from ptychokit.bench import write_csv
    rows = bench_registration(sides=[256], kappas=[100], repeats=1, check=True)
    csv_path = write_csv(rows, tmp_path / "bench_registration.csv")
    by = {r["method"]: r for r in rows}
    fast = by["matrix_dft"]
    slow = by["zero_padded_fft"]
    speedup = slow["seconds"] / fast["seconds"]
    same = (abs(fast["dy"] - slow["dy"]) <= 1e-2 + 1e-12
            and abs(fast["dx"] - slow["dx"]) <= 1e-2 + 1e-12)
    passed = speedup >= 5.0 and same and csv_path.is_file()
    report("criterion 7 (registration benchmark)", passed,
           f"matrix DFT {fast['seconds']:.4f}s vs zero-padded "
           f"{slow['seconds']:.4f}s at side=256 kappa=100: speedup "
           f"{speedup:.1f}x (needs >= 5x), equal accuracy: {same}, "
           f"CSV written: {csv_path.is_file()}")


# --------------------------------------------------------------------------
# Criterion 8: bit-identical determinism of a full pipeline rerun.
# --------------------------------------------------------------------------

def test_criterion_8_determinism(tmp_path):
    from ptychokit.cli import main

    def one_run(name):
        data = tmp_path / f"{name}_data"
        recon = tmp_path / f"{name}_recon"
        sim_cfg = tmp_path / f"{name}_sim.json"
        sim_cfg.write_text(json.dumps({
            "seed": 21,
            "geometry": {"window_px": 32},
            "probe": {"radius_px": 8.0},
            "scan": {"rows": 3, "cols": 3, "step_px": 7.0, "jitter_px": 1.0},
            "noise": {"model": "poisson", "photon_budget": 1e6},
            "output_dir": str(data),
        }))
        rec_cfg = tmp_path / f"{name}_rec.json"
        rec_cfg.write_text(json.dumps({
            "dataset": str(data),
            "iterations": 10,
            "mode_count": 2,
            "posref": {"enabled": True, "warmup_iterations": 3},
            "output_dir": str(recon),
        }))
        assert main(["simulate", str(sim_cfg)]) == 0
        assert main(["reconstruct", str(rec_cfg)]) == 0
        return data, recon

    data_a, recon_a = one_run("a")
    data_b, recon_b = one_run("b")

    identical = True
    for fa, fb in [(data_a / "patterns.raw", data_b / "patterns.raw"),
                   (recon_a / "object.raw", recon_b / "object.raw"),
                   (recon_a / "probe_000.raw", recon_b / "probe_000.raw"),
                   (recon_a / "probe_001.raw", recon_b / "probe_001.raw"),
                   (recon_a / "positions.raw", recon_b / "positions.raw")]:
        if fa.read_bytes() != fb.read_bytes():
            identical = False

    report("criterion 8 (determinism)", identical,
           "two full simulate+reconstruct pipeline runs (Poisson noise, two "
           "modes, position refinement on) produced bit-identical arrays: "
           f"{identical}")
