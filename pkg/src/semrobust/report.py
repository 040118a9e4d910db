"""Aggregation of per-sample outcomes into per-category and overall tables,
plus CSV/JSON emission and worst-case parameter histograms."""

import csv
import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import UndefinedMetricError
from .segmetrics import compute_bundle

BOUND_KINDS = (
    "original",
    "theta",
    "hue",
    "sat",
    "theta+hue",
    "theta+sat",
    "hue+sat",
    "3d",
)

OVERALL_MEAN = "OVERALL_MEAN"
OVERALL_POOLED = "OVERALL_POOLED"

CSV_FIELDS = (
    "dataset",
    "category",
    "bound_kind",
    "pauroc",
    "aupro",
    "f1_max",
    "mean_loss",
    "n_samples",
    "n_pos_pixels",
    "gradient_mode",
    "seed",
)


@dataclass
class ReportRow:
    dataset: str
    category: str
    bound_kind: str
    pauroc: float
    aupro: float
    f1_max: float
    mean_loss: float
    n_samples: int
    n_pos_pixels: int
    gradient_mode: str
    seed: int


@dataclass
class SampleOutcome:
    """Evaluated maps and chosen losses for one sample, keyed by bound kind
    ('original' plus any attacked variants)."""

    category: str
    path: str
    mask: np.ndarray
    maps: dict
    losses: dict
    chosen_params: dict = field(default_factory=dict)
    gradient_mode: str = ""
    config_key: str = ""


@dataclass
class EvalReport:
    rows: list
    metadata: dict = field(default_factory=dict)


@dataclass
class ParamHistogram:
    dimension: str
    bin_edges: list
    counts: list


_HIST_RANGES = {"theta": (-90.0, 90.0), "hue": (-math.pi, math.pi), "sat": (-0.5, 0.5)}


def param_histogram(dimension, values, bins=36):
    lo, hi = _HIST_RANGES[dimension]
    counts, edges = np.histogram(np.asarray(values, dtype=np.float64), bins=bins, range=(lo, hi))
    return ParamHistogram(dimension, edges.tolist(), counts.tolist())


def _metric_row(dataset, category, kind, maps, gts, losses, meta, fpr_limit):
    try:
        bundle = compute_bundle(maps, gts, fpr_limit)
        pauroc, aupro_v, f1 = bundle.pauroc, bundle.aupro, bundle.f1_max
        n_pos = bundle.n_pos_pixels
    except UndefinedMetricError:
        pauroc = aupro_v = f1 = math.nan
        n_pos = int(sum(np.asarray(g).sum() for g in gts))
    return ReportRow(
        dataset=dataset,
        category=category,
        bound_kind=kind,
        pauroc=pauroc,
        aupro=aupro_v,
        f1_max=f1,
        mean_loss=float(np.mean(losses)),
        n_samples=len(maps),
        n_pos_pixels=n_pos,
        gradient_mode=meta["gradient_mode"],
        seed=meta["seed"],
    )


def aggregate(outcomes, dataset_name, seed, fpr_limit=0.3):
    """Pool pixels per category for every bound kind; overall rows are emitted
    both as unweighted category means and as pixel-pooled values."""
    if not outcomes:
        return EvalReport(rows=[], metadata={"dataset": dataset_name, "seed": seed})
    config_keys = {o.config_key for o in outcomes}
    if len(config_keys) > 1:
        raise ValueError(f"mixed-config outcomes: {sorted(config_keys)}")
    kinds = [k for k in outcomes[0].maps if all(k in o.maps for o in outcomes)]
    categories = sorted({o.category for o in outcomes})
    meta = {
        "dataset": dataset_name,
        "seed": seed,
        "fpr_limit": fpr_limit,
        "gradient_mode": outcomes[0].gradient_mode,
        "config_key": outcomes[0].config_key,
    }

    rows = []
    for kind in kinds:
        cat_rows = []
        for category in categories:
            subset = [o for o in outcomes if o.category == category]
            row = _metric_row(
                dataset_name,
                category,
                kind,
                [o.maps[kind] for o in subset],
                [o.mask for o in subset],
                [o.losses[kind] for o in subset],
                meta,
                fpr_limit,
            )
            cat_rows.append(row)
        rows.extend(cat_rows)
        rows.append(
            ReportRow(
                dataset=dataset_name,
                category=OVERALL_MEAN,
                bound_kind=kind,
                pauroc=float(np.mean([r.pauroc for r in cat_rows])),
                aupro=float(np.mean([r.aupro for r in cat_rows])),
                f1_max=float(np.mean([r.f1_max for r in cat_rows])),
                mean_loss=float(np.mean([r.mean_loss for r in cat_rows])),
                n_samples=sum(r.n_samples for r in cat_rows),
                n_pos_pixels=sum(r.n_pos_pixels for r in cat_rows),
                gradient_mode=meta["gradient_mode"],
                seed=seed,
            )
        )
        rows.append(
            _metric_row(
                dataset_name,
                OVERALL_POOLED,
                kind,
                [o.maps[kind] for o in outcomes],
                [o.mask for o in outcomes],
                [o.losses[kind] for o in outcomes],
                meta,
                fpr_limit,
            )
        )
    return EvalReport(rows=rows, metadata=meta)


def _fmt(value):
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def emit_csv(report, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for row in report.rows:
            writer.writerow([_fmt(getattr(row, f)) for f in CSV_FIELDS])


def parse_csv(path):
    rows = []
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        for rec in reader:
            rows.append(
                ReportRow(
                    dataset=rec["dataset"],
                    category=rec["category"],
                    bound_kind=rec["bound_kind"],
                    pauroc=float(rec["pauroc"]),
                    aupro=float(rec["aupro"]),
                    f1_max=float(rec["f1_max"]),
                    mean_loss=float(rec["mean_loss"]),
                    n_samples=int(rec["n_samples"]),
                    n_pos_pixels=int(rec["n_pos_pixels"]),
                    gradient_mode=rec["gradient_mode"],
                    seed=int(rec["seed"]),
                )
            )
    return EvalReport(rows=rows)


def emit_json(report, path, traces=None):
    doc = {
        "metadata": report.metadata,
        "rows": [asdict(r) for r in report.rows],
    }
    if traces is not None:
        doc["traces"] = traces
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def emit(report, fmt, path):
    if fmt == "csv":
        emit_csv(report, path)
    elif fmt == "json":
        emit_json(report, path)
    else:
        raise ValueError(f"unknown format {fmt!r}")


def emit_sweep_csv(rows, dimension, path, dataset_name, seed):
    """Plot-ready long-format CSV for sweep curves; bound_kind encodes the
    swept value as 'uniform:<dim>=<value>'."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(CSV_FIELDS)
        for rec in rows:
            b = rec["bundle"]
            writer.writerow(
                [
                    dataset_name,
                    rec["category"],
                    f"uniform:{dimension}={_fmt(float(rec['value']))}",
                    _fmt(b.pauroc if b else math.nan),
                    _fmt(b.aupro if b else math.nan),
                    _fmt(b.f1_max if b else math.nan),
                    _fmt(rec["mean_loss"]),
                    rec["n_samples"],
                    b.n_pos_pixels if b else 0,
                    "none",
                    seed,
                ]
            )
