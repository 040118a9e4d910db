"""Simplified Dice-style segmentation loss and its closed-form gradient.

l(pred, gt) = sum(pred * (1 - gt)) / (sum(1 - gt) + eps)
            - sum(pred * gt)       / (sum(gt) + eps)

The predicted map never appears in a denominator, which keeps gradients to the
inputs stable. Maximizing this loss pushes predictions toward the wrong class.
"""

import numpy as np

EPS = 1e-8


def _check(pred, gt):
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: pred {pred.shape} vs gt {gt.shape}")
    return pred, gt


def seg_loss(pred, gt):
    """Loss value in [-1, 1] (up to eps slack) for pred in [0, 1]^N.

    numpy's pairwise summation keeps this reproducible at 1e-12 even for maps
    above 2^20 pixels.
    """
    pred, gt = _check(pred, gt)
    n_pos = gt.sum()
    n_neg = gt.size - n_pos
    fp_mass = (pred * (1.0 - gt)).sum()
    tp_mass = (pred * gt).sum()
    return float(fp_mass / (n_neg + EPS) - tp_mass / (n_pos + EPS))


def seg_loss_grad(pred, gt):
    """d loss / d pred: piecewise constant, one value per ground-truth class."""
    pred, gt = _check(pred, gt)
    n_pos = gt.sum()
    n_neg = gt.size - n_pos
    return (1.0 - gt) / (n_neg + EPS) - gt / (n_pos + EPS)
