"""Batch command-line interface.

Subcommands: ``simulate <config>``, ``reconstruct <config>``,
``register <ref> <mov>``, ``metrics <recon> <dataset>``, ``bench-reg``.
Report-producing commands write delimited output (CSV/JSON) and matplotlib
figures side by side in the output directory.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from pathlib import Path

import numpy as np

from . import bench, render
from .config import RECONSTRUCT_DEFAULTS, SIMULATE_DEFAULTS, load_config
from .dataio import read_checkpoint, read_dataset, write_checkpoint, write_dataset
from .engine import ReconState, SolverConfig, initialize, sweep
from .errors import PtychoError
from .fields import Geometry
from .metrics import MetricsReport, coverage_mask, object_error, position_rmse
from .posref import PosRefConfig
from .registration import register
from .simulate import ProbeSpec, canvas_shape_for, make_object, make_probe, \
    make_scan, synthesize


def _write_trace_csv(path: Path, state: ReconState) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "intensity_error", "seconds"])
        for i, err in enumerate(state.error_trace, start=1):
            secs = state.seconds_per_iteration[i - 1]
            writer.writerow([i, repr(err), f"{secs:.6f}"])


def cmd_simulate(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, SIMULATE_DEFAULTS)
    g = cfg["geometry"]
    geometry = Geometry.create(g["wavelength_m"], g["distance_m"],
                               g["detector_pixel_m"], g["window_px"])
    s = cfg["scan"]
    plan = make_scan((s["rows"], s["cols"]), s["step_px"], s["jitter_px"],
                     cfg["seed"])
    obj = make_object(canvas_shape_for(plan, geometry.window),
                      cfg["object"]["kind"], cfg["seed"])
    p = cfg["probe"]
    probes = make_probe(ProbeSpec(p["mode_count"], tuple(p["mode_powers"]),
                                  p["base"], p["radius_px"]), geometry)
    dataset = synthesize(obj, probes, plan, geometry,
                         noise=cfg["noise"]["model"],
                         photon_budget=cfg["noise"]["photon_budget"],
                         seed=cfg["seed"])
    out = Path(cfg["output_dir"])
    write_dataset(out, dataset)
    render.render(obj, "magnitude", out / "object_magnitude.png")
    render.render(obj, "phase", out / "object_phase.png")
    for i, mode in enumerate(probes):
        render.render(mode, "magnitude", out / f"probe_{i:03d}_magnitude.png")
    render.plot_positions(plan.nominal, plan.true_positions,
                          out / "scan_positions.png")
    print(f"wrote dataset with {dataset.n_positions} patterns to {out}")
    return 0


def _solver_config(cfg: dict) -> SolverConfig:
    pr = cfg["posref"]
    posref = None
    if pr["enabled"]:
        posref = PosRefConfig(sensor=pr["sensor"], step_size=pr["step_size"],
                              beta1=pr["beta1"], beta2=pr["beta2"],
                              eps_adam=pr["eps_adam"],
                              warmup_iterations=pr["warmup_iterations"],
                              kappa=pr["kappa"],
                              max_correction=pr["max_correction"])
    return SolverConfig(alpha_obj=cfg["alpha_object"],
                        alpha_probe=cfg["alpha_probe"],
                        beta=cfg["beta"], gamma=cfg["gamma"],
                        mode_count=cfg["mode_count"],
                        iterations=cfg["iterations"],
                        position_order=cfg["position_order"],
                        shuffle_seed=cfg["shuffle_seed"],
                        init_seed=cfg["init_seed"],
                        epsilon_rel=cfg["epsilon_rel"],
                        ortho_interval=cfg["ortho_interval"],
                        update_probe_modes=cfg["update_probe"],
                        posref=posref)


def _report_metrics(out: Path, state: ReconState, dataset) -> MetricsReport:
    report = MetricsReport(error_trace=[float(e) for e in state.error_trace],
                           seconds_per_iteration=[float(t) for t
                                                  in state.seconds_per_iteration])
    truth = dataset.ground_truth
    if truth is not None:
        report.position_rmse = position_rmse(state.positions,
                                             truth.true_positions)
        if truth.obj is not None:
            r0, c0 = state.canvas_origin
            h, w = state.obj.shape
            mask = coverage_mask(state.probes, state.positions, (h, w),
                                 state.canvas_origin)
            report.object_error = object_error(
                state.obj, truth.obj[r0:r0 + h, c0:c0 + w], mask)
    report.to_json(out / "metrics.json")
    return report


def cmd_reconstruct(args: argparse.Namespace) -> int:
    cfg = load_config(args.config, RECONSTRUCT_DEFAULTS)
    if not cfg["dataset"]:
        raise PtychoError("config must name a dataset directory")
    dataset = read_dataset(cfg["dataset"])
    config = _solver_config(cfg)
    out = Path(cfg["output_dir"])
    out.mkdir(parents=True, exist_ok=True)
    state = initialize(dataset, config)
    dump_positions = cfg["posref"]["dump_positions"]
    position_log = []
    for _ in range(config.iterations):
        sweep(state, dataset, config)
        if dump_positions:
            position_log.append(state.positions.copy())
        every = cfg["checkpoint_every"]
        if every > 0 and state.iteration % every == 0:
            write_checkpoint(out / f"checkpoint_{state.iteration:05d}",
                             state.obj, state.probes, state.positions,
                             state.canvas_origin, state.error_trace,
                             state.iteration)
    write_checkpoint(out, state.obj, state.probes, state.positions,
                     state.canvas_origin, state.error_trace, state.iteration)
    if position_log:
        np.stack(position_log).astype("<f8").tofile(out / "position_log.raw")
    render.render(state.obj, "magnitude", out / "object_magnitude.png")
    render.render(state.obj, "phase", out / "object_phase.png")
    for i, mode in enumerate(state.probes):
        render.render(mode, "magnitude", out / f"probe_{i:03d}_magnitude.png")
    _write_trace_csv(out / "error_trace.csv", state)
    render.plot_error_trace(state.error_trace, out / "error_trace.png")
    render.plot_positions(dataset.positions, state.positions,
                          out / "positions.png",
                          truth=(dataset.ground_truth.true_positions
                                 if dataset.ground_truth else None))
    report = _report_metrics(out, state, dataset)
    err = state.error_trace[-1] if state.error_trace else float("nan")
    print(f"finished {state.iteration} iterations, "
          f"intensity error {err:.3e}, output in {out}")
    if report.object_error is not None:
        print(f"object error vs truth: {report.object_error:.3e}")
    return 0


def _load_raw_field(path: str, shape: tuple[int, int], dtype: str) -> np.ndarray:
    arr = np.fromfile(path, dtype=np.dtype(dtype).newbyteorder("<"))
    expected = shape[0] * shape[1]
    if arr.size != expected:
        raise PtychoError(f"{path}: expected {expected} elements, got {arr.size}")
    return arr.reshape(shape)


def cmd_register(args: argparse.Namespace) -> int:
    side = args.side
    ref = _load_raw_field(args.reference, (side, side), args.dtype)
    mov = _load_raw_field(args.moving, (side, side), args.dtype)
    est = register(ref, mov, weighting=args.weighting, upsample=args.kappa)
    result = {"dy": est.dy, "dx": est.dx, "peak_value": est.peak_value,
              "upsample": est.upsample}
    print(json.dumps(result))
    if args.output:
        Path(args.output).write_text(json.dumps(result, indent=2))
    return 0


def cmd_metrics(args: argparse.Namespace) -> int:
    ckpt = read_checkpoint(args.recon)
    dataset = read_dataset(args.dataset)
    out = Path(args.output or args.recon)
    out.mkdir(parents=True, exist_ok=True)
    state = ReconState(obj=ckpt["object"].astype(complex),
                       probes=[p.astype(complex) for p in ckpt["probes"]],
                       positions=ckpt["positions"],
                       canvas_origin=ckpt["canvas_origin"],
                       error_trace=ckpt["error_trace"])
    report = _report_metrics(out, state, dataset)
    with open(out / "metrics.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "value"])
        writer.writerow(["final_intensity_error",
                         report.error_trace[-1] if report.error_trace else ""])
        writer.writerow(["position_rmse", report.position_rmse])
        writer.writerow(["object_error", report.object_error])
    render.plot_error_trace(report.error_trace, out / "error_trace.png")
    print(json.dumps({"position_rmse": report.position_rmse,
                      "object_error": report.object_error}))
    return 0


def cmd_bench_reg(args: argparse.Namespace) -> int:
    rows = bench.bench_registration(args.sides, args.kappas,
                                    repeats=args.repeats, check=not args.no_check)
    out = Path(args.output)
    out.mkdir(parents=True, exist_ok=True)
    bench.write_csv(rows, out / "bench_registration.csv")
    render.plot_benchmark(rows, out / "bench_registration.png")
    for row in rows:
        print(f"side={row['side']:4d} kappa={row['kappa']:4d} "
              f"{row['method']:16s} {row['seconds']:.6f}s")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ptychokit",
                                     description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="synthesize a diffraction dataset")
    p.add_argument("config", help="JSON config file")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="run the M-rPIE solver on a dataset")
    p.add_argument("config", help="JSON config file")
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("register", help="subpixel-register two raw field files")
    p.add_argument("reference")
    p.add_argument("moving")
    p.add_argument("--side", type=int, required=True, help="square side in px")
    p.add_argument("--dtype", default="complex64",
                   choices=["complex64", "float32", "float64"])
    p.add_argument("--kappa", type=int, default=50, help="upsample factor")
    p.add_argument("--weighting", default="phase", choices=["phase", "raw"])
    p.add_argument("--output", default=None, help="optional JSON output path")
    p.set_defaults(func=cmd_register)

    p = sub.add_parser("metrics", help="score a reconstruction against truth")
    p.add_argument("recon", help="reconstruction output directory")
    p.add_argument("dataset", help="dataset directory with ground truth")
    p.add_argument("--output", default=None)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("bench-reg", help="time matrix-DFT vs zero-padded upsampling")
    p.add_argument("--sides", type=int, nargs="+", default=[128, 256])
    p.add_argument("--kappas", type=int, nargs="+", default=[1, 10, 50, 100])
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--no-check", action="store_true",
                   help="skip the speedup assertion")
    p.add_argument("--output", default="bench")
    p.set_defaults(func=cmd_bench_reg)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PtychoError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
