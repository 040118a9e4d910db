"""MVTec-style test-set ingestion and rotation-invariant category selection.

Expected layout (both for MVTec and for the reorganized VisA tree):

    <root>/<category>/test/<defect_type>/*.png
    <root>/<category>/ground_truth/<defect_type>/<stem>_mask.png

Samples under ``test/good`` have no mask file and get an all-zero mask.
"""

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import DatasetError
from .imageops import extrapolation_mask, rotate_three_pass

log = logging.getLogger(__name__)

IMAGE_EXTENSIONS = (".png", ".jpg", ".jpeg", ".JPG", ".PNG")

# selection defaults reverse-engineered from the per-object corner-MSE tables
MVTEC_THRESHOLD = 0.027
MVTEC_EXCLUDES = ("leather", "wood")  # whole-frame textures, excluded manually
VISA_THRESHOLD = 0.05
VISA_EXCLUDES = ()


@dataclass
class Sample:
    category: str
    path: str
    image: np.ndarray  # (H, W, 3) float64 in [0, 1]
    mask: np.ndarray  # (H, W) uint8 binary
    is_anomalous: bool


@dataclass
class CategorySelection:
    category: str
    corner_mse: float
    used: bool
    reason: str  # below-threshold | above-threshold | manual-exclude | manual-include


def _read_image(path):
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.float64) / 255.0


def _read_mask(path, shape):
    with Image.open(path) as im:
        m = np.asarray(im.convert("L"), dtype=np.float64) / 255.0
    if m.shape != shape:
        raise DatasetError(f"mask shape {m.shape} != image shape {shape}: {path}")
    return (m >= 0.5).astype(np.uint8)


def _find_mask(gt_dir, stem):
    for candidate in (gt_dir / f"{stem}_mask.png", gt_dir / f"{stem}.png"):
        if candidate.is_file():
            return candidate
    return None


def load_category(root, category):
    """Load one category's test split in lexicographic path order."""
    test_dir = Path(root) / category / "test"
    samples = []
    if not test_dir.is_dir():
        return samples
    for defect_dir in sorted(p for p in test_dir.iterdir() if p.is_dir()):
        is_good = defect_dir.name == "good"
        gt_dir = Path(root) / category / "ground_truth" / defect_dir.name
        for img_path in sorted(defect_dir.iterdir()):
            if img_path.suffix not in IMAGE_EXTENSIONS:
                continue
            try:
                image = _read_image(img_path)
            except OSError as exc:
                log.warning("skipping unreadable image %s: %s", img_path, exc)
                continue
            if is_good:
                mask = np.zeros(image.shape[:2], dtype=np.uint8)
            else:
                mask_path = _find_mask(gt_dir, img_path.stem)
                if mask_path is None:
                    raise DatasetError(f"anomalous sample {img_path} has no mask")
                mask = _read_mask(mask_path, image.shape[:2])
            samples.append(
                Sample(
                    category=category,
                    path=str(img_path),
                    image=image,
                    mask=mask,
                    is_anomalous=not is_good,
                )
            )
    return samples


def load_dataset(root, layout="mvtec"):
    """Load every category under ``root``. ``layout`` is 'mvtec' or
    'visa-organized'; both use the MVTec directory convention."""
    if layout not in ("mvtec", "visa-organized"):
        raise ValueError(f"unknown layout {layout!r}")
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} does not exist")
    samples = []
    for cat_dir in sorted(p for p in root.iterdir() if p.is_dir()):
        samples.extend(load_category(root, cat_dir.name))
    return samples


def corner_mse(x):
    """Mean squared replicate-extrapolation error over the pixels touched by a
    45-degree rotation, channel-averaged."""
    x = np.asarray(x, dtype=np.float64)
    h, w = x.shape[:2]
    m = extrapolation_mask(45.0, h, w).astype(np.float64)
    total = m.sum()
    if total == 0:
        return 0.0
    rotated = rotate_three_pass(x, 45.0, padding="replicate")
    sq = ((x - rotated) ** 2).mean(axis=2)
    return float((m * sq).sum() / total)


def category_corner_mse(samples):
    """Per-category mean corner MSE over the category's test images."""
    by_cat = {}
    for s in samples:
        by_cat.setdefault(s.category, []).append(corner_mse(s.image))
    return {cat: float(np.mean(v)) for cat, v in sorted(by_cat.items())}


def select_rotation_invariant(mse_by_category, threshold, include=(), exclude=()):
    """Threshold the per-category corner MSE, then apply manual overrides."""
    if threshold <= 0:
        raise ValueError("threshold must be positive")
    known = set(mse_by_category)
    for name in list(include) + list(exclude):
        if name not in known:
            raise ValueError(f"unknown category in overrides: {name!r}")
    selections = []
    for category, mse in mse_by_category.items():
        if category in exclude:
            used, reason = False, "manual-exclude"
        elif category in include:
            used, reason = True, "manual-include"
        elif mse < threshold:
            used, reason = True, "below-threshold"
        else:
            used, reason = False, "above-threshold"
        selections.append(CategorySelection(category, float(mse), used, reason))
    return selections
