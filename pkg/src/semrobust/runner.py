"""Drives per-sample worst-case searches over a dataset and collects
outcomes, traces, histograms, and per-sample errors."""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np

from .errors import SemRobustError
from .imageops import AugParams
from .report import SampleOutcome, param_histogram
from .wcsearch import ALL_DIMS, DIM_HUE, DIM_SAT, DIM_THETA, objective, optimize_sample

_COMBO_ORDER = (DIM_THETA, DIM_HUE, DIM_SAT)


def parse_combo(text):
    """'theta', 'theta+hue', '3d', or 'theta,hue,sat' -> canonical dim tuple."""
    if text.strip() == "3d":
        return ALL_DIMS
    parts = [p.strip() for p in text.replace(",", "+").split("+") if p.strip()]
    bad = set(parts) - set(ALL_DIMS)
    if bad:
        raise ValueError(f"unknown dims {sorted(bad)}")
    return tuple(d for d in _COMBO_ORDER if d in parts)


def combo_name(dims):
    dims = tuple(d for d in _COMBO_ORDER if d in dims)
    if dims == ALL_DIMS:
        return "3d"
    return "+".join(dims)


def _sample_seed(seed, sample_index, combo_index):
    # stable scalar seed per (run seed, sample, combo); independent of --jobs
    return int(
        np.random.SeedSequence([seed, sample_index, combo_index]).generate_state(1)[0]
    )


def attack_sample(sample, sample_index, d, cfg, combos, seed):
    """Run the original evaluation plus one search per dim combo for a single
    sample. Returns (SampleOutcome, traces_by_kind)."""
    maps = {}
    losses = {}
    chosen = {}
    traces = {}

    loss0, map0 = objective(sample.image, sample.mask, d, AugParams())
    maps["original"] = map0
    losses["original"] = loss0
    chosen["original"] = AugParams()

    gradient_mode = ""
    for ci, dims in enumerate(combos):
        kind = combo_name(dims)
        cfg_c = replace(cfg, enabled_dims=dims)
        trace = optimize_sample(
            sample.image,
            sample.mask,
            d,
            cfg_c,
            rng_seed=_sample_seed(seed, sample_index, ci),
        )
        gradient_mode = trace.gradient_mode
        loss_k, map_k = objective(sample.image, sample.mask, d, trace.chosen_params)
        maps[kind] = map_k
        losses[kind] = loss_k
        chosen[kind] = trace.chosen_params
        traces[kind] = trace

    outcome = SampleOutcome(
        category=sample.category,
        path=sample.path,
        mask=sample.mask,
        maps=maps,
        losses=losses,
        chosen_params=chosen,
        gradient_mode=gradient_mode,
        config_key=f"{cfg!r}|{tuple(map(combo_name, combos))}|seed={seed}",
    )
    return outcome, traces


def attack_dataset(samples, detector_factory, cfg, combos, seed, jobs=1):
    """Attack every sample; detector failures abort only the affected sample.

    Returns (outcomes, traces_by_path, errors, histograms). Outcomes are in
    sorted-path order regardless of the parallelism degree.
    """
    ordered = sorted(samples, key=lambda s: s.path)
    results = [None] * len(ordered)
    errors = []

    def work(i):
        d = detector_factory()
        try:
            return attack_sample(ordered[i], i, d, cfg, combos, seed)
        finally:
            close = getattr(d, "close", None)
            if close:
                close()

    if jobs <= 1:
        for i in range(len(ordered)):
            try:
                results[i] = work(i)
            except SemRobustError as exc:
                errors.append({"path": ordered[i].path, "error": str(exc)})
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = {pool.submit(work, i): i for i in range(len(ordered))}
            for fut, i in futures.items():
                try:
                    results[i] = fut.result()
                except SemRobustError as exc:
                    errors.append({"path": ordered[i].path, "error": str(exc)})
    errors.sort(key=lambda e: e["path"])

    outcomes = []
    traces = {}
    for res, s in zip(results, ordered):
        if res is None:
            continue
        outcome, sample_traces = res
        outcomes.append(outcome)
        traces[s.path] = sample_traces
    histograms = _histograms(outcomes, combos)
    return outcomes, traces, errors, histograms


def _histograms(outcomes, combos):
    hists = {}
    for dims in combos:
        kind = combo_name(dims)
        params = [o.chosen_params[kind] for o in outcomes if kind in o.chosen_params]
        if not params:
            continue
        per_dim = {}
        if DIM_THETA in dims:
            per_dim["theta"] = param_histogram("theta", [p.theta_deg for p in params])
        if DIM_HUE in dims:
            per_dim["hue"] = param_histogram("hue", [p.delta_h for p in params])
        if DIM_SAT in dims:
            per_dim["sat"] = param_histogram("sat", [p.delta_s for p in params])
        hists[kind] = per_dim
    return hists
