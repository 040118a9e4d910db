"""Shared generators for the test suite: differentiable-regime instances for
finite-difference checks, synthetic sample suites, and on-disk fixture trees.
"""

import math

import numpy as np
from PIL import Image
from scipy.ndimage import gaussian_filter

from semrobust.dataset import Sample
from semrobust.imageops import AugParams, canonical_hue_shift, hsv_to_rgb

SECTOR = math.pi / 3.0


def smooth_field(rng, size, lo, hi, sigma=2.0):
    """Smooth random scalar field rescaled onto [lo, hi]."""
    f = gaussian_filter(rng.uniform(size=(size, size)), sigma, mode="wrap")
    f = (f - f.min()) / max(float(np.ptp(f)), 1e-9)
    return lo + (hi - lo) * f


def differentiable_instance(seed, size=16):
    """Random image/parameter pair on which the augmentation pipeline is
    differentiable across the finite-difference stencil.

    The pipeline's true derivative has isolated kinks: hue sector boundaries,
    channel-order ties, and binding saturation or value clips. The gradient
    conventions (straight-through and true-subgradient clips) are exact almost
    everywhere, so finite-difference checks must sample away from those
    measure-zero sets. This generator does that by construction: per-pixel hue
    is clustered inside one sector (channel ordering is then preserved by the
    convex mixing of resampling), saturation and value stay interior to [0, 1],
    and the hue shift lands the cluster inside a sector with margin.
    """
    rng = np.random.default_rng(seed)
    h = (
        rng.integers(0, 6) * SECTOR
        + rng.uniform(0.25, 0.75) * SECTOR
        + smooth_field(rng, size, -0.01, 0.01)
    )
    s = smooth_field(rng, size, 0.40, 0.70)
    v = smooth_field(rng, size, 0.50, 0.90)
    x = np.clip(hsv_to_rgb(np.stack([h, s, v], axis=-1)), 0.0, 1.0)
    target = rng.integers(0, 6) * SECTOR + rng.uniform(0.2, 0.8) * SECTOR
    p = AugParams(
        theta_deg=float(rng.uniform(-80.0, 80.0)),
        delta_h=canonical_hue_shift(target - float(h.mean())),
        delta_s=float(rng.uniform(-0.25, 0.25)),
    )
    return x, p


def smooth_image(seed, size=32):
    """Smooth RGB image in [0.05, 0.95] without differentiability guarantees."""
    rng = np.random.default_rng(seed)
    return np.stack(
        [smooth_field(rng, size, 0.05, 0.95, sigma=3.0) for _ in range(3)], axis=-1
    )


def defect_image(seed, size=32):
    """Smooth background with one high-frequency square patch; returns
    (image, mask) with the mask marking the patch."""
    rng = np.random.default_rng(seed)
    img = np.stack(
        [smooth_field(rng, size, 0.25, 0.65, sigma=4.0) for _ in range(3)], axis=-1
    )
    side = int(rng.integers(4, 7))
    r = int(rng.integers(size // 4, 3 * size // 4 - side))
    c = int(rng.integers(size // 4, 3 * size // 4 - side))
    noise = rng.uniform(0.0, 1.0, size=(side, side, 3))
    img[r : r + side, c : c + side] = 0.5 * img[r : r + side, c : c + side] + 0.5 * noise
    mask = np.zeros((size, size), dtype=np.uint8)
    mask[r : r + side, c : c + side] = 1
    return np.clip(img, 0.0, 1.0), mask


def synthetic_suite(n_samples=50, size=32, n_categories=2, normal_every=5, seed=0):
    """In-memory suite of Sample objects: mostly defective images plus some
    normal ones, split across categories."""
    samples = []
    for i in range(n_samples):
        category = f"cat{i % n_categories}"
        if i % normal_every == normal_every - 1:
            image = smooth_image(seed * 10_000 + i, size)
            mask = np.zeros((size, size), dtype=np.uint8)
            anomalous = False
        else:
            image, mask = defect_image(seed * 10_000 + i, size)
            anomalous = True
        samples.append(
            Sample(
                category=category,
                path=f"mem://{category}/{i:04d}.png",
                image=image,
                mask=mask,
                is_anomalous=anomalous,
            )
        )
    return samples


def _save_png(path, arr):
    if arr.ndim == 2:
        Image.fromarray((arr * 255).astype(np.uint8), mode="L").save(path)
    else:
        Image.fromarray((arr * 255 + 0.5).clip(0, 255).astype(np.uint8)).save(path)


def write_fixture_tree(root, categories=("widget", "gadget"), n_good=2, n_defect=2, size=24, seed=0):
    """MVTec-style directory tree with synthetic PNGs; returns the root path."""
    root.mkdir(parents=True, exist_ok=True)
    idx = 0
    for cat in categories:
        good_dir = root / cat / "test" / "good"
        bad_dir = root / cat / "test" / "crack"
        gt_dir = root / cat / "ground_truth" / "crack"
        for d in (good_dir, bad_dir, gt_dir):
            d.mkdir(parents=True, exist_ok=True)
        for i in range(n_good):
            _save_png(good_dir / f"{i:03d}.png", smooth_image(seed + idx, size))
            idx += 1
        for i in range(n_defect):
            img, mask = defect_image(seed + idx, size)
            _save_png(bad_dir / f"{i:03d}.png", img)
            _save_png(gt_dir / f"{i:03d}_mask.png", mask.astype(np.float64))
            idx += 1
    return root
