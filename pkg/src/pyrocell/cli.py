"""Command-line interface: simulate, calibrate, metrics, and bench."""

from __future__ import annotations

import argparse
import os
import sys
import time
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import data_io, synthetic
from .calibration import Observation, ObservationSchedule, calibrate
from .kernel import run_simulation
from .losses import jaccard_index, manhattan_distance
from .model import Landscape, ModelParams, StepRings, validate_landscape
from .synthetic import center_ignition, make_landscape

_THREADS_ENV = "PYROCELL_THREADS"


def _default_threads() -> int:
    env = os.environ.get(_THREADS_ENV)
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _load_config(path: Optional[str]) -> Dict[str, str]:
    if not path:
        return {}
    return data_io.read_manifest(path)


def _setting(args, config: Dict[str, str], name: str, cast, default):
    """Flag > config file > default."""
    value = getattr(args, name.replace("-", "_"), None)
    if value is not None:
        return value
    if name in config:
        return cast(config[name])
    return default


def _load_landscape(args, config) -> Landscape:
    synthetic_kind = _setting(args, config, "synthetic", str, None)
    path = _setting(args, config, "landscape", str, None)
    if synthetic_kind:
        size = _setting(args, config, "size", int, 64)
        slope_sign = _setting(args, config, "slope-sign", str, "downhill-positive")
        land = make_landscape(synthetic_kind, size, slope_sign=slope_sign)
    elif path:
        land = data_io.read_landscape(path)
    else:
        raise SystemExit("error: need --landscape DIR or --synthetic KIND")
    problems = validate_landscape(land)
    if problems:
        raise SystemExit("error: invalid landscape: " + "; ".join(problems))
    return land


def _load_params(args, config) -> ModelParams:
    params_file = _setting(args, config, "params", str, None)
    base: Dict[str, float] = {}
    if params_file:
        entries = data_io.read_manifest(params_file)
        for key in ("c1", "c2", "a", "p_h", "p_continue"):
            if key in entries:
                base[key] = float(entries[key])
    defaults = ModelParams(**base)
    return ModelParams(
        c1=_setting(args, config, "c1", float, defaults.c1),
        c2=_setting(args, config, "c2", float, defaults.c2),
        a=_setting(args, config, "a", float, defaults.a),
        p_h=_setting(args, config, "p_h", float, defaults.p_h),
        p_continue=_setting(args, config, "p_continue", float, defaults.p_continue),
    )


def _load_init(args, config, land: Landscape) -> np.ndarray:
    init_path = _setting(args, config, "init", str, None)
    if init_path:
        mask = data_io.read_grid(init_path)
        if mask.dtype != bool:
            mask = mask != 0
        if mask.shape != land.shape:
            raise SystemExit(
                f"error: init mask shape {mask.shape} != landscape {land.shape}"
            )
        return mask
    return center_ignition(land.height, block=3)


def _params_entries(params: ModelParams) -> Dict[str, str]:
    return {
        "c1": repr(params.c1), "c2": repr(params.c2), "a": repr(params.a),
        "p_h": repr(params.p_h), "p_continue": repr(params.p_continue),
    }


def _effective_config(args, keys: Sequence[str]) -> Dict[str, str]:
    entries = {}
    for key in keys:
        value = getattr(args, key.replace("-", "_"), None)
        if value is not None:
            entries[key] = str(value)
    return entries


def cmd_simulate(args) -> int:
    config = _load_config(args.config)
    land = _load_landscape(args, config)
    params = _load_params(args, config)
    init = _load_init(args, config, land)
    steps = _setting(args, config, "steps", int, 100)
    seed = _setting(args, config, "seed", int, 0)
    threads = _setting(args, config, "threads", int, _default_threads())
    snapshot_every = _setting(args, config, "snapshot-every", int, 0)
    factor_site = _setting(args, config, "factor-site", str, "target")
    slope_units = _setting(args, config, "slope-units", str, "degrees")

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    sim = run_simulation(
        land, params, init, steps, seed,
        snapshot_every=snapshot_every, threads=threads,
        factor_site=factor_site, slope_units=slope_units,
    )

    data_io.write_grid(sim.state.burning, out / "final_burning.ptfg")
    data_io.write_grid(sim.state.burned, out / "final_burned.ptfg")
    data_io.write_grid(sim.state.affected(), out / "final_affected.ptfg")
    data_io.write_grid(
        sim.state.accumulator.astype(np.float32), out / "accumulator.ptfg"
    )
    data_io.write_series_csv(sim.series, out / "series.csv")
    data_io.write_snapshot(sim.state, land, out / "final_state.ppm")
    for t, snap in sim.snapshots:
        data_io.write_snapshot(snap, land, out / f"snapshot_{t:05d}.ppm")
        # affected-region grids double as calibration targets
        data_io.write_grid(snap.affected(), out / f"affected_{t:05d}.ptfg")

    manifest = {
        "command": "simulate", "steps": str(steps), "seed": str(seed),
        "threads": str(threads), "snapshot_every": str(snapshot_every),
        "factor_site": factor_site, "slope_units": slope_units,
        **_params_entries(params),
        **_effective_config(args, ("synthetic", "size", "landscape")),
    }
    data_io.write_manifest(manifest, out / "manifest.txt")
    print(f"simulated {steps} steps; affected cells: {sim.series[-1].affected if sim.series else int(np.count_nonzero(init))}")
    return 0


def cmd_calibrate(args) -> int:
    config = _load_config(args.config)
    land = _load_landscape(args, config)
    params = _load_params(args, config)
    init = _load_init(args, config, land)
    seed = _setting(args, config, "seed", int, 0)
    threads = _setting(args, config, "threads", int, _default_threads())
    interval = _setting(args, config, "steps-update-interval", int, 10)
    max_epochs = _setting(args, config, "max-epochs", int, 10)
    lr = _setting(args, config, "lr", float, 5e-3)
    rings_text = _setting(args, config, "rings", str, "2,5,10")
    factor_site = _setting(args, config, "factor-site", str, "target")
    rings = StepRings(*(int(x) for x in rings_text.split(",")))

    if not args.target:
        raise SystemExit("error: calibrate needs at least one --target grid")
    observations: List[Observation] = []
    for target_path in args.target:
        grid = data_io.read_grid(target_path)
        observations.append(Observation(target=grid != 0 if grid.dtype != bool else grid))
    schedule = ObservationSchedule(observations, steps_update_interval=interval)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    result = calibrate(
        land, init, schedule, params, rings,
        max_epochs=max_epochs, base_seed=seed, learning_rate=lr,
        threads=threads, factor_site=factor_site,
    )

    data_io.write_manifest(_params_entries(result.best_params), out / "best_params.txt")
    lines = ["epoch,iteration,loss,bce,mse,jaccard,manhattan"]
    for rec in result.records:
        lines.append(
            f"{rec.epoch},{rec.iteration},{rec.loss:.10g},{rec.bce:.10g},"
            f"{rec.mse:.10g},{rec.jaccard:.6f},{rec.manhattan}"
        )
    (out / "metrics.csv").write_bytes(("\n".join(lines) + "\n").encode("ascii"))

    traj_lines = ["epoch,iteration,c1,c2,a,p_h"]
    for epoch, iteration, p in result.manifest.trajectory:
        traj_lines.append(f"{epoch},{iteration},{p.c1!r},{p.c2!r},{p.a!r},{p.p_h!r}")
    (out / "trajectory.csv").write_bytes(("\n".join(traj_lines) + "\n").encode("ascii"))

    manifest = {
        "command": "calibrate", "base_seed": str(seed),
        "epoch_seeds": ",".join(str(s) for s in result.manifest.epoch_seeds),
        "steps_update_interval": str(interval), "max_epochs": str(max_epochs),
        "max_iterations": str(schedule.max_iterations), "learning_rate": repr(lr),
        "rings": rings_text, "threads": str(threads),
        "best_loss": repr(result.best_loss),
    }
    for epoch, reason in result.aborted_epochs:
        manifest[f"aborted_epoch_{epoch}"] = reason
    data_io.write_manifest(manifest, out / "manifest.txt")

    if result.aborted_epochs:
        print(f"calibration finished with {len(result.aborted_epochs)} aborted epoch(s)", file=sys.stderr)
    print(f"best loss {result.best_loss:.6g}; params written to {out / 'best_params.txt'}")
    return 0


def cmd_metrics(args) -> int:
    if len(args.pred) != len(args.target):
        raise SystemExit("error: --pred and --target counts differ")
    preds = [data_io.read_grid(p) for p in args.pred]
    targets = [data_io.read_grid(p) for p in args.target]
    pred_masks = [p != 0 if p.dtype != bool else p for p in preds]
    target_masks = [t != 0 if t.dtype != bool else t for t in targets]
    for pm, tm in zip(pred_masks, target_masks):
        if pm.shape != tm.shape:
            raise SystemExit(f"error: shape mismatch {pm.shape} vs {tm.shape}")
    jac = jaccard_index(pred_masks[-1], target_masks[-1])
    man = manhattan_distance(
        [int(np.count_nonzero(m)) for m in pred_masks],
        [int(np.count_nonzero(m)) for m in target_masks],
    )
    print(f"jaccard={jac:g}")
    print(f"manhattan={man}")
    return 0


def cmd_bench(args) -> int:
    sizes = [int(s) for s in args.sizes.split(",")]
    thread_counts = [int(t) for t in args.threads.split(",")]
    steps = args.steps
    params = ModelParams()
    rows = ["size,threads,seconds"]

    # Warm-up pass so timings exclude first-call overhead.
    warm_land = make_landscape("flat", 64)
    warm_land = Landscape(
        wind_speed=np.full((64, 64), 2.0), wind_direction=warm_land.wind_direction,
        slope=warm_land.slope, canopy=warm_land.canopy, density=warm_land.density,
        cell_side=warm_land.cell_side,
    )
    run_simulation(warm_land, params, center_ignition(64), 20, 1)

    for size in sizes:
        try:
            land = make_landscape("flat", size)
            land = Landscape(
                wind_speed=np.full((size, size), 2.0),
                wind_direction=land.wind_direction, slope=land.slope,
                canopy=land.canopy, density=land.density, cell_side=land.cell_side,
            )
            init = center_ignition(size)
            baseline_hash = None
            for threads in thread_counts:
                start = time.perf_counter()
                sim = run_simulation(land, params, init, steps, args.seed, threads=threads)
                elapsed = time.perf_counter() - start
                digest = hash((sim.state.burning.tobytes(), sim.state.burned.tobytes()))
                if baseline_hash is None:
                    baseline_hash = digest
                elif digest != baseline_hash:
                    print(f"warning: thread-count {threads} changed results at size {size}", file=sys.stderr)
                rows.append(f"{size},{threads},{elapsed:.4f}")
        except MemoryError:
            print(f"warning: size {size} exceeded available memory", file=sys.stderr)
            rows.append(f"{size},,error")
            continue

    output = "\n".join(rows) + "\n"
    if args.out:
        Path(args.out).write_text(output)
    else:
        sys.stdout.write(output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="pyrocell",
        description="Cellular-automata wildfire simulation and calibration",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(p):
        p.add_argument("--config", help="key=value config file (flags win)")
        p.add_argument("--landscape", help="landscape bundle directory")
        p.add_argument("--synthetic", help="flat | hill | valley | random:<seed>")
        p.add_argument("--size", type=int, help="synthetic landscape side length")
        p.add_argument("--init", help="initial fire mask grid file")
        p.add_argument("--seed", type=int, help="base random seed")
        p.add_argument("--threads", type=int, help=f"worker threads (default ${_THREADS_ENV} or CPU count)")
        p.add_argument("--params", help="params file (key=value)")
        p.add_argument("--c1", type=float)
        p.add_argument("--c2", type=float)
        p.add_argument("--a", type=float)
        p.add_argument("--p-h", type=float, dest="p_h")
        p.add_argument("--p-continue", type=float, dest="p_continue")
        p.add_argument("--factor-site", choices=("target", "source"))
        p.add_argument("--slope-sign", choices=("downhill-positive", "uphill-positive"),
                       dest="slope_sign", help="orientation of synthetic slope grids")

    sim = sub.add_parser("simulate", help="run a forward simulation")
    add_common(sim)
    sim.add_argument("--steps", type=int)
    sim.add_argument("--snapshot-every", type=int)
    sim.add_argument("--slope-units", choices=("degrees", "radians"))
    sim.add_argument("--out", required=True, help="output directory")
    sim.set_defaults(func=cmd_simulate)

    cal = sub.add_parser("calibrate", help="calibrate parameters against burn maps")
    add_common(cal)
    cal.add_argument("--target", action="append", help="observed burn map grid (repeat per observation)")
    cal.add_argument("--steps-update-interval", type=int)
    cal.add_argument("--max-epochs", type=int)
    cal.add_argument("--lr", type=float)
    cal.add_argument("--rings", help="r_first,r_between,r_last")
    cal.add_argument("--out", required=True, help="output directory")
    cal.set_defaults(func=cmd_calibrate)

    met = sub.add_parser("metrics", help="Jaccard / Manhattan between grids")
    met.add_argument("--pred", action="append", required=True)
    met.add_argument("--target", action="append", required=True)
    met.set_defaults(func=cmd_metrics)

    ben = sub.add_parser("bench", help="forward-simulation timing")
    ben.add_argument("--sizes", default="200,400", help="comma-separated map sizes")
    ben.add_argument("--steps", type=int, default=300)
    ben.add_argument("--threads", default="1", help="comma-separated thread counts")
    ben.add_argument("--seed", type=int, default=0)
    ben.add_argument("--out", help="CSV output path (default stdout)")
    ben.set_defaults(func=cmd_bench)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SystemExit:
        raise
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
