"""Pixel-level AUROC, AUPRO (per-region overlap), and F1-max.

All metrics are threshold-sweep statistics over soft anomaly scores against
binary ground truth. They are invariant under strictly increasing transforms
of the scores.
"""

from dataclasses import dataclass

import numpy as np
import scipy.ndimage as ndi
from scipy.stats import rankdata

from .errors import UndefinedMetricError

DEFAULT_FPR_LIMIT = 0.3
_F1_UNIQUE_LIMIT = 100_000
_F1_QUANTILE_LEVELS = 200

_STRUCTURE_8 = np.ones((3, 3), dtype=np.int64)


@dataclass
class MetricBundle:
    pauroc: float
    aupro: float
    f1_max: float
    n_pos_pixels: int
    n_neg_pixels: int


def pixel_auroc(scores, labels):
    """Rank-statistic (Mann-Whitney) AUROC with average ranks for ties."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    n_pos = int(labels.sum())
    n_neg = labels.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("pixel_auroc needs both classes")
    ranks = rankdata(scores)
    return float((ranks[labels].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def per_sample_pauroc(anomaly_map, gt):
    """pixel_auroc restricted to one sample; undefined for single-class gt."""
    return pixel_auroc(np.ravel(anomaly_map), np.ravel(gt))


def connected_components(gt):
    """8-connectivity labeling of a binary mask, labels assigned in row-major
    first-pixel order (0 = background)."""
    gt = np.asarray(gt).astype(bool)
    labels, n = ndi.label(gt, structure=_STRUCTURE_8)
    if n == 0:
        return labels.astype(np.int64)
    # enforce deterministic label order by first occurrence
    flat = labels.ravel()
    first = {}
    for idx in np.flatnonzero(flat):
        lab = flat[idx]
        if lab not in first:
            first[lab] = idx
    order = sorted(first, key=first.get)
    remap = np.zeros(n + 1, dtype=np.int64)
    for new, old in enumerate(order, start=1):
        remap[old] = new
    return remap[labels]


def _region_scores(maps, gts):
    regions = []
    neg_scores = []
    for m, g in zip(maps, gts):
        m = np.asarray(m, dtype=np.float64)
        g = np.asarray(g).astype(bool)
        if m.shape != g.shape:
            raise ValueError(f"shape mismatch: map {m.shape} vs gt {g.shape}")
        neg_scores.append(m[~g].ravel())
        labels = connected_components(g)
        for k in range(1, labels.max() + 1):
            regions.append(np.sort(m[labels == k].ravel()))
    return regions, np.sort(np.concatenate(neg_scores))


def aupro(maps, gts, fpr_limit=DEFAULT_FPR_LIMIT):
    """Area under the per-region overlap curve up to ``fpr_limit``, normalized
    by the limit.

    Per threshold: mean over connected anomalous regions of the recovered
    fraction, against the global false-positive rate over all negative pixels.
    """
    if not (0.0 < fpr_limit <= 1.0):
        raise ValueError(f"fpr_limit must be in (0, 1], got {fpr_limit}")
    regions, neg_sorted = _region_scores(maps, gts)
    if not regions:
        raise UndefinedMetricError("aupro needs at least one anomalous region")
    if neg_sorted.size == 0:
        raise UndefinedMetricError("aupro needs at least one negative pixel")

    all_scores = np.concatenate([neg_sorted] + regions)
    thresholds = np.unique(all_scores)[::-1]
    n_neg = neg_sorted.size

    # counts of values >= t via searchsorted on ascending-sorted arrays
    fpr = (n_neg - np.searchsorted(neg_sorted, thresholds, side="left")) / n_neg
    pro = np.zeros_like(thresholds)
    for r in regions:
        pro += (r.size - np.searchsorted(r, thresholds, side="left")) / r.size
    pro /= len(regions)

    # curve starts at (0, 0): threshold above the maximum score
    fpr = np.concatenate([[0.0], fpr])
    pro = np.concatenate([[0.0], pro])
    return _integrate_to_limit(fpr, pro, fpr_limit) / fpr_limit


def _integrate_to_limit(fpr, pro, limit):
    """Trapezoidal integral of pro(fpr) over [0, limit] with linear
    interpolation at the limit; fpr must be nondecreasing."""
    area = 0.0
    for i in range(1, len(fpr)):
        x0, x1 = fpr[i - 1], fpr[i]
        y0, y1 = pro[i - 1], pro[i]
        if x0 >= limit:
            break
        if x1 > limit:
            y1 = y0 + (y1 - y0) * (limit - x0) / (x1 - x0)
            x1 = limit
        area += 0.5 * (y0 + y1) * (x1 - x0)
    return area


def f1_max(scores, labels):
    """Maximum F1 over score thresholds (all unique values, or 200 quantile
    levels above 1e5 uniques)."""
    scores = np.asarray(scores, dtype=np.float64).ravel()
    labels = np.asarray(labels).ravel().astype(bool)
    n_pos = int(labels.sum())
    if n_pos == 0:
        raise UndefinedMetricError("f1_max needs at least one positive")

    thresholds = np.unique(scores)
    if thresholds.size > _F1_UNIQUE_LIMIT:
        thresholds = np.unique(
            np.quantile(scores, np.linspace(0.0, 1.0, _F1_QUANTILE_LEVELS))
        )

    pos_sorted = np.sort(scores[labels])
    all_sorted = np.sort(scores)
    tp = n_pos - np.searchsorted(pos_sorted, thresholds, side="left")
    pred_pos = scores.size - np.searchsorted(all_sorted, thresholds, side="left")
    fp = pred_pos - tp
    fn = n_pos - tp
    denom = 2 * tp + fp + fn
    f1 = np.where(denom > 0, 2 * tp / np.maximum(denom, 1), 0.0)
    return float(f1.max())


def compute_bundle(maps, gts, fpr_limit=DEFAULT_FPR_LIMIT):
    """Pooled-pixel metrics over all samples of one category."""
    scores = np.concatenate([np.ravel(m) for m in maps])
    labels = np.concatenate([np.ravel(g) for g in gts]).astype(bool)
    return MetricBundle(
        pauroc=pixel_auroc(scores, labels),
        aupro=aupro(maps, gts, fpr_limit),
        f1_max=f1_max(scores, labels),
        n_pos_pixels=int(labels.sum()),
        n_neg_pixels=int(labels.size - labels.sum()),
    )
