"""Lower performance bounds for anomaly-segmentation detectors under bounded
semantic perturbations (rotation, hue shift, saturation shift)."""

from .imageops import AugParams, apply_augmentation, derotate_map, rotate_three_pass
from .segloss import seg_loss, seg_loss_grad
from .segmetrics import MetricBundle, aupro, f1_max, pixel_auroc
from .wcsearch import SearchConfig, SweepGrid, objective, optimize_sample, uniform_sweep

__version__ = "0.1.0"

__all__ = [
    "AugParams",
    "apply_augmentation",
    "derotate_map",
    "rotate_three_pass",
    "seg_loss",
    "seg_loss_grad",
    "MetricBundle",
    "pixel_auroc",
    "aupro",
    "f1_max",
    "SearchConfig",
    "SweepGrid",
    "objective",
    "optimize_sample",
    "uniform_sweep",
    "__version__",
]
