"""Command-line entry point: category selection, uniform sweeps, per-sample
worst-case attacks, and detector health checks."""

import csv
import json
import math
import sys
import time
from dataclasses import asdict
from pathlib import Path

import click
import numpy as np

from . import dataset as dataset_mod
from . import report as report_mod
from .detector import make_detector, score
from .errors import SemRobustError
from .imageops import AugParams
from .report import EvalReport, aggregate, emit_csv, emit_json, emit_sweep_csv
from .runner import attack_dataset, combo_name, parse_combo
from .wcsearch import SearchConfig, SweepGrid, uniform_sweep


def _load_config_file(path):
    values = {}
    if path is None:
        return values
    for line in Path(path).read_text().splitlines():
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        key, _, val = line.partition("=")
        values[key.strip().replace("-", "_")] = val.strip()
    return values


def _merge(flag_value, cfg_values, key, cast, default):
    # explicit flags win over the config file, which wins over defaults
    if flag_value is not None:
        return flag_value
    if key in cfg_values:
        return cast(cfg_values[key])
    return default


def _echo_config(out_dir, config):
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    with open(out_dir / "run_config.json", "w") as fh:
        json.dump(config, fh, indent=2, sort_keys=True)
        fh.write("\n")


@click.group()
def main():
    """Lower performance bounds for anomaly segmentation under bounded
    semantic perturbations."""


@main.command("select")
@click.option("--dataset", "root", required=True, type=click.Path(exists=True))
@click.option("--layout", type=click.Choice(["mvtec", "visa-organized"]), default="mvtec")
@click.option("--threshold", type=float, default=None, help="corner-MSE cutoff (inf allowed)")
@click.option("--include", multiple=True, help="force-include category")
@click.option("--exclude", multiple=True, default=None, help="force-exclude category")
@click.option("--out", type=click.Path(), default=None, help="CSV output path")
def cmd_select(root, layout, threshold, include, exclude, out):
    """Compute per-category corner MSE and the rotation-invariant selection."""
    samples = dataset_mod.load_dataset(root, layout)
    mse = dataset_mod.category_corner_mse(samples)
    if threshold is None:
        threshold = (
            dataset_mod.VISA_THRESHOLD if layout == "visa-organized" else dataset_mod.MVTEC_THRESHOLD
        )
    if exclude is None or len(exclude) == 0:
        exclude = (
            dataset_mod.VISA_EXCLUDES if layout == "visa-organized" else dataset_mod.MVTEC_EXCLUDES
        )
        exclude = tuple(c for c in exclude if c in mse)
    selections = dataset_mod.select_rotation_invariant(mse, threshold, include, exclude)
    click.echo(f"{'category':20s} {'corner_mse':>12s} {'used':>6s} reason")
    for sel in selections:
        click.echo(f"{sel.category:20s} {sel.corner_mse:12.6f} {str(sel.used):>6s} {sel.reason}")
    if out:
        with open(out, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["category", "corner_mse", "used", "reason"])
            for sel in selections:
                writer.writerow([sel.category, repr(sel.corner_mse), sel.used, sel.reason])


@main.command("sweep")
@click.option("--dataset", "root", required=True, type=click.Path(exists=True))
@click.option("--layout", type=click.Choice(["mvtec", "visa-organized"]), default="mvtec")
@click.option("--detector", "detector_spec", default="toy")
@click.option("--dim", type=click.Choice(["theta", "hue", "sat"]), required=True)
@click.option("--values", default=None, help="comma-separated grid values")
@click.option("--grid", "grid_spec", default=None, help="start:stop:num linspace grid")
@click.option("--fpr-limit", type=float, default=0.3)
@click.option("--seed", type=int, default=0)
@click.option("--out", required=True, type=click.Path())
def cmd_sweep(root, layout, detector_spec, dim, values, grid_spec, fpr_limit, seed, out):
    """Uniform single-parameter sweep over the whole test set."""
    if values:
        grid_values = tuple(float(v) for v in values.split(","))
    elif grid_spec:
        start, stop, num = grid_spec.split(":")
        grid_values = tuple(np.linspace(float(start), float(stop), int(num)))
    else:
        raise click.UsageError("provide --values or --grid")
    samples = dataset_mod.load_dataset(root, layout)
    d = make_detector(detector_spec)
    rows = uniform_sweep(samples, d, SweepGrid(dim, grid_values), fpr_limit)
    out_dir = Path(out)
    _echo_config(
        out_dir,
        {
            "command": "sweep",
            "dataset": str(root),
            "layout": layout,
            "detector": detector_spec,
            "dim": dim,
            "values": list(grid_values),
            "fpr_limit": fpr_limit,
            "seed": seed,
        },
    )
    emit_sweep_csv(rows, dim, out_dir / "sweep.csv", Path(root).name, seed)
    click.echo(f"wrote {out_dir / 'sweep.csv'}")


@main.command("attack")
@click.option("--dataset", "root", required=True, type=click.Path(exists=True))
@click.option("--layout", type=click.Choice(["mvtec", "visa-organized"]), default="mvtec")
@click.option("--detector", "detector_spec", default=None)
@click.option("--dims", multiple=True, help="dim combo per search, e.g. theta or theta+hue or 3d")
@click.option("--restarts", type=int, default=None)
@click.option("--max-steps", type=int, default=None)
@click.option("--budget-mode", type=click.Choice(["per-restart", "total"]), default=None)
@click.option("--fpr-limit", type=float, default=None)
@click.option("--seed", type=int, default=None)
@click.option("--jobs", type=int, default=None)
@click.option("--config", "config_file", type=click.Path(exists=True), default=None)
@click.option("--out", required=True, type=click.Path())
def cmd_attack(root, layout, detector_spec, dims, restarts, max_steps, budget_mode,
               fpr_limit, seed, jobs, config_file, out):
    """Per-sample worst-case search and aggregated report."""
    filecfg = _load_config_file(config_file)
    detector_spec = _merge(detector_spec, filecfg, "detector", str, "toy")
    restarts = _merge(restarts, filecfg, "restarts", int, 5)
    max_steps = _merge(max_steps, filecfg, "max_steps", int, 200)
    budget_mode = _merge(budget_mode, filecfg, "budget_mode", str, "per-restart")
    fpr_limit = _merge(fpr_limit, filecfg, "fpr_limit", float, 0.3)
    seed = _merge(seed, filecfg, "seed", int, 0)
    jobs = _merge(jobs, filecfg, "jobs", int, 1)
    if not dims:
        dims = tuple(filecfg.get("dims", "3d").split())
    combos = [parse_combo(t) for t in dims]

    cfg = SearchConfig(max_steps=max_steps, restarts=restarts, budget_mode=budget_mode)
    samples = dataset_mod.load_dataset(root, layout)
    out_dir = Path(out)
    _echo_config(
        out_dir,
        {
            "command": "attack",
            "dataset": str(root),
            "layout": layout,
            "detector": detector_spec,
            "dims": [combo_name(c) for c in combos],
            "restarts": restarts,
            "max_steps": max_steps,
            "budget_mode": budget_mode,
            "fpr_limit": fpr_limit,
            "seed": seed,
            "jobs": jobs,
        },
    )

    t0 = time.time()
    outcomes, traces, errors, histograms = attack_dataset(
        samples, lambda: make_detector(detector_spec), cfg, combos, seed, jobs
    )
    rep = aggregate(outcomes, Path(root).name, seed, fpr_limit)
    emit_csv(rep, out_dir / "report.csv")
    trace_doc = {
        path: {
            kind: {
                "chosen_restart": tr.chosen_restart,
                "chosen_params": asdict(tr.chosen_params) if tr.chosen_params else None,
                "chosen_loss": tr.chosen_loss,
                "chosen_selection": tr.chosen_selection,
                "selection_mode": tr.selection_mode,
                "gradient_mode": tr.gradient_mode,
                "n_steps": len(tr.steps),
            }
            for kind, tr in per_kind.items()
        }
        for path, per_kind in traces.items()
    }
    emit_json(rep, out_dir / "report.json", traces=trace_doc)
    with open(out_dir / "histograms.json", "w") as fh:
        json.dump(
            {k: {dim: asdict(h) for dim, h in per.items()} for k, per in histograms.items()},
            fh,
            indent=2,
            sort_keys=True,
        )
        fh.write("\n")
    with open(out_dir / "errors.json", "w") as fh:
        json.dump(errors, fh, indent=2, sort_keys=True)
        fh.write("\n")
    click.echo(f"attacked {len(outcomes)} samples in {time.time() - t0:.1f}s; "
               f"{len(errors)} errors; wrote {out_dir / 'report.csv'}")
    if errors:
        sys.exit(1)


@main.command("check-detector")
@click.option("--detector", "detector_spec", required=True)
def cmd_check_detector(detector_spec):
    """Handshake, latency, and determinism check for a detector spec."""
    try:
        d = make_detector(detector_spec)
        rng = np.random.default_rng(0)
        x = rng.uniform(size=(32, 32, 3))
        t0 = time.time()
        m1 = score(d, x)
        latency = time.time() - t0
        m2 = score(d, x)
    except SemRobustError as exc:
        click.echo(f"FAIL: {exc}", err=True)
        sys.exit(1)
    deterministic = bool(np.array_equal(m1, m2))
    click.echo(f"detector: {d.name}")
    click.echo(f"native_resolution: {d.native_resolution}")
    click.echo(f"latency_s: {latency:.4f}")
    click.echo(f"deterministic: {deterministic}")
    if not deterministic:
        sys.exit(1)


if __name__ == "__main__":
    main()
