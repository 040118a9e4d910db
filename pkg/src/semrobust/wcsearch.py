"""Per-sample worst-case perturbation search (Adam ascent with restarts) and
uniform single-parameter sweeps.

The search maximizes the segmentation loss over (theta, delta_h, delta_s)
subject to theta in [-90, 90] and delta_s in [-0.5, 0.5] (delta_h is periodic
and unconstrained). For samples with at least one anomalous pixel the selected
iterate is the one minimizing the per-sample pAUROC; for normal samples the
one maximizing the loss.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import detector as detector_mod
from .errors import UndefinedMetricError
from .imageops import (
    DELTA_S_MAX,
    THETA_MAX_DEG,
    AugParams,
    apply_augmentation,
    augmentation_jvp,
    bilinear_resize,
    canonical_hue_shift,
    derotate_map,
    rotate_with_tangent,
    ste_clip,
)
from .segloss import seg_loss, seg_loss_grad
from .segmetrics import compute_bundle, per_sample_pauroc

DIM_THETA = "theta"
DIM_HUE = "hue"
DIM_SAT = "sat"
ALL_DIMS = (DIM_THETA, DIM_HUE, DIM_SAT)


@dataclass(frozen=True)
class SearchConfig:
    max_steps: int = 200
    restarts: int = 5
    lr_theta: float = 5.0
    lr_delta: float = 0.1
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_eps: float = 1e-8
    enabled_dims: tuple = ALL_DIMS
    fd_step_theta: float = 0.5
    fd_step_delta: float = 5e-3
    budget_mode: str = "per-restart"  # or "total"
    grid_seeds: tuple = ()  # extra restart seeds, each an AugParams

    def __post_init__(self):
        if self.max_steps < 1 or self.restarts < 1:
            raise ValueError("max_steps and restarts must be >= 1")
        if self.lr_theta <= 0 or self.lr_delta <= 0:
            raise ValueError("learning rates must be positive")
        if self.budget_mode not in ("per-restart", "total"):
            raise ValueError(f"bad budget_mode {self.budget_mode!r}")
        bad = set(self.enabled_dims) - set(ALL_DIMS)
        if bad:
            raise ValueError(f"unknown dims {bad}")


@dataclass
class SearchTrace:
    steps: list = field(default_factory=list)  # (restart, AugParams, loss, sel)
    chosen_restart: int = -1
    chosen_params: AugParams = None
    chosen_loss: float = math.nan
    chosen_selection: float = math.nan
    selection_mode: str = ""  # "pauroc-selected" | "loss-selected"
    gradient_mode: str = ""  # "analytic" | "fd"
    error: str = ""


def _clip_params(raw, enabled):
    theta = ste_clip(raw[0], -THETA_MAX_DEG, THETA_MAX_DEG) if DIM_THETA in enabled else 0.0
    dh = raw[1] if DIM_HUE in enabled else 0.0
    ds = ste_clip(raw[2], -DELTA_S_MAX, DELTA_S_MAX) if DIM_SAT in enabled else 0.0
    return AugParams(theta, canonical_hue_shift(dh), ds)


def objective(x, y, d, p):
    """Full chain: augment, score, upsample, de-rotate, loss.

    Returns (loss, derotated_map)."""
    x_aug = apply_augmentation(x, p)
    m = detector_mod.score(d, x_aug)
    y_tilde = derotate_map(m, p.theta_deg)
    return seg_loss(y_tilde, y), y_tilde


def _objective_grad_analytic(x, y, d, p, enabled):
    """Loss gradient via forward tangents through the whole chain (detector
    must provide score_jvp)."""
    x_aug, d_theta, d_h, d_s = augmentation_jvp(x, p)
    m = detector_mod.score(d, x_aug)
    tangents = {}
    if DIM_THETA in enabled:
        tangents[DIM_THETA] = d.score_jvp(x_aug, d_theta)
    if DIM_HUE in enabled:
        tangents[DIM_HUE] = d.score_jvp(x_aug, d_h)
    if DIM_SAT in enabled:
        tangents[DIM_SAT] = d.score_jvp(x_aug, d_s)
    if m.shape != x.shape[:2]:
        m = bilinear_resize(m, x.shape[:2])
        tangents = {k: bilinear_resize(t, x.shape[:2]) for k, t in tangents.items()}

    grads = {}
    g = None
    for dim, tan in tangents.items():
        if dim == DIM_THETA:
            # de-rotation depends on theta as well: rotate by -theta, so the
            # angle tangent enters with a factor of -1
            y_tilde, dy = rotate_with_tangent(m, tan, -p.theta_deg, -1.0, "zero")
        else:
            y_tilde, dy = rotate_with_tangent(m, tan, -p.theta_deg, 0.0, "zero")
        dy = np.where((y_tilde > 0.0) & (y_tilde < 1.0), dy, 0.0)
        y_tilde = np.clip(y_tilde, 0.0, 1.0)
        if g is None:
            g = seg_loss_grad(y_tilde, y)
        grads[dim] = float(np.sum(g * dy))
    return grads


def _objective_grad_fd(x, y, d, p, enabled, cfg):
    """Central finite differences over the enabled parameters (black-box
    detectors); the stencil is shifted one-sided at parameter bounds."""
    grads = {}

    def eval_at(theta, dh, ds):
        return objective(x, y, d, AugParams(theta, canonical_hue_shift(dh), ds))[0]

    if DIM_THETA in enabled:
        hi = min(p.theta_deg + cfg.fd_step_theta, THETA_MAX_DEG)
        lo = max(p.theta_deg - cfg.fd_step_theta, -THETA_MAX_DEG)
        grads[DIM_THETA] = (eval_at(hi, p.delta_h, p.delta_s) - eval_at(lo, p.delta_h, p.delta_s)) / (hi - lo)
    if DIM_HUE in enabled:
        s = cfg.fd_step_delta
        grads[DIM_HUE] = (
            eval_at(p.theta_deg, p.delta_h + s, p.delta_s)
            - eval_at(p.theta_deg, p.delta_h - s, p.delta_s)
        ) / (2 * s)
    if DIM_SAT in enabled:
        s = cfg.fd_step_delta
        hi = min(p.delta_s + s, DELTA_S_MAX)
        lo = max(p.delta_s - s, -DELTA_S_MAX)
        grads[DIM_SAT] = (eval_at(p.theta_deg, p.delta_h, hi) - eval_at(p.theta_deg, p.delta_h, lo)) / (hi - lo)
    return grads


def _selection_value(y_tilde, y, loss, anomalous):
    """Lower-is-better selection criterion: per-sample pAUROC for anomalous
    samples, negated loss for normal samples."""
    if anomalous:
        return per_sample_pauroc(y_tilde, y)
    return -loss


def optimize_sample(x, y, d, cfg, rng_seed=0):
    """Adam ascent on the loss with random restarts; restart 0 starts at the
    identity parameters, extra grid seeds (if any) run after the random
    restarts. Returns a SearchTrace with the chosen parameters."""
    y = np.asarray(y)
    anomalous = bool(np.any(y > 0))
    enabled = tuple(cfg.enabled_dims)
    analytic = getattr(d, "provides_analytic_vjp", False)

    starts = [np.zeros(3)]
    for r in range(1, cfg.restarts):
        rng = np.random.default_rng(np.random.SeedSequence([rng_seed, r]))
        start = np.zeros(3)
        if DIM_THETA in enabled:
            start[0] = rng.uniform(-THETA_MAX_DEG, THETA_MAX_DEG)
        if DIM_HUE in enabled:
            start[1] = rng.uniform(-math.pi, math.pi)
        if DIM_SAT in enabled:
            start[2] = rng.uniform(-DELTA_S_MAX, DELTA_S_MAX)
        starts.append(start)
    for seed_params in cfg.grid_seeds:
        starts.append(
            np.array([seed_params.theta_deg, seed_params.delta_h, seed_params.delta_s])
        )

    if cfg.budget_mode == "total":
        steps_per_restart = max(1, cfg.max_steps // len(starts))
    else:
        steps_per_restart = cfg.max_steps

    trace = SearchTrace(
        selection_mode="pauroc-selected" if anomalous else "loss-selected",
        gradient_mode="analytic" if analytic else "fd",
    )
    lr = np.array([cfg.lr_theta, cfg.lr_delta, cfg.lr_delta])
    best = math.inf

    for restart, start in enumerate(starts):
        raw = start.copy()
        m1 = np.zeros(3)
        m2 = np.zeros(3)
        for t in range(steps_per_restart):
            p = _clip_params(raw, enabled)
            loss, y_tilde = objective(x, y, d, p)
            sel = _selection_value(y_tilde, y, loss, anomalous)
            trace.steps.append((restart, p, loss, sel))
            if sel < best:
                best = sel
                trace.chosen_restart = restart
                trace.chosen_params = p
                trace.chosen_loss = loss
                trace.chosen_selection = sel
            if t == steps_per_restart - 1:
                break
            if analytic:
                grads = _objective_grad_analytic(x, y, d, p, enabled)
            else:
                grads = _objective_grad_fd(x, y, d, p, enabled, cfg)
            gvec = np.array([grads.get(DIM_THETA, 0.0), grads.get(DIM_HUE, 0.0), grads.get(DIM_SAT, 0.0)])
            # Adam ascent; STE means the gradient at the clipped point updates
            # the raw (unclipped) parameters unchanged
            m1 = cfg.adam_beta1 * m1 + (1 - cfg.adam_beta1) * gvec
            m2 = cfg.adam_beta2 * m2 + (1 - cfg.adam_beta2) * gvec**2
            m1_hat = m1 / (1 - cfg.adam_beta1 ** (t + 1))
            m2_hat = m2 / (1 - cfg.adam_beta2 ** (t + 1))
            raw = raw + lr * m1_hat / (np.sqrt(m2_hat) + cfg.adam_eps)
    return trace


@dataclass(frozen=True)
class SweepGrid:
    dimension: str
    values: tuple

    def __post_init__(self):
        if self.dimension not in ALL_DIMS:
            raise ValueError(f"unknown sweep dimension {self.dimension!r}")
        for v in self.values:
            if self.dimension == DIM_THETA and not (-THETA_MAX_DEG <= v <= THETA_MAX_DEG):
                raise ValueError(f"theta value {v} out of range")
            if self.dimension == DIM_SAT and not (-DELTA_S_MAX <= v <= DELTA_S_MAX):
                raise ValueError(f"saturation value {v} out of range")
            if self.dimension == DIM_HUE and not (-math.pi <= v < math.pi):
                raise ValueError(f"hue value {v} outside [-pi, pi)")


def _params_for(dimension, value):
    if dimension == DIM_THETA:
        return AugParams(theta_deg=value)
    if dimension == DIM_HUE:
        return AugParams(delta_h=value)
    return AugParams(delta_s=value)


def uniform_sweep(samples, d, grid, fpr_limit=0.3):
    """Apply each grid value to every sample and evaluate category metrics.

    ``samples`` is a list of dataset.Sample. Returns a list of dicts with
    keys: value, category, bundle, mean_loss, n_samples.
    """
    by_category = {}
    for s in samples:
        by_category.setdefault(s.category, []).append(s)

    rows = []
    for value in grid.values:
        p = _params_for(grid.dimension, value)
        for category in sorted(by_category):
            maps, gts, losses = [], [], []
            for s in by_category[category]:
                loss, y_tilde = objective(s.image, s.mask, d, p)
                maps.append(y_tilde)
                gts.append(s.mask)
                losses.append(loss)
            try:
                bundle = compute_bundle(maps, gts, fpr_limit)
            except UndefinedMetricError:
                bundle = None
            rows.append(
                {
                    "value": value,
                    "category": category,
                    "bundle": bundle,
                    "mean_loss": float(np.mean(losses)),
                    "n_samples": len(maps),
                }
            )
    return rows
