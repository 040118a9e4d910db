"""Differentiable augmentation pipeline: three-pass rotation, HSV shifts, and
their derivatives with respect to the three scalar parameters.

Conventions:
  - images are float64 arrays in [0, 1]; RGB images are (H, W, 3), maps (H, W)
  - positive angles rotate the content clockwise (row index increases downward)
  - hue is in radians in [0, 2*pi); saturation and value in [0, 1]
"""

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConstraintViolationError
from .kernels import PAD_REPLICATE, PAD_ZERO, SUPPORT, shear_lines

TWO_PI = 2.0 * math.pi
DEG = math.pi / 180.0

THETA_MAX_DEG = 90.0
DELTA_S_MAX = 0.5

_PADDING_CODES = {"replicate": PAD_REPLICATE, "zero": PAD_ZERO}


def canonical_hue_shift(delta_h):
    """Map a hue shift onto its unique representative in [-pi, pi)."""
    return float((delta_h + math.pi) % TWO_PI - math.pi)


@dataclass(frozen=True)
class AugParams:
    """Perturbation triple: rotation angle (degrees), hue shift (radians),
    saturation shift (unitless)."""

    theta_deg: float = 0.0
    delta_h: float = 0.0
    delta_s: float = 0.0

    def __post_init__(self):
        if not (-THETA_MAX_DEG <= self.theta_deg <= THETA_MAX_DEG):
            raise ConstraintViolationError(
                f"theta_deg {self.theta_deg} outside [-90, 90]"
            )
        if not (-DELTA_S_MAX <= self.delta_s <= DELTA_S_MAX):
            raise ConstraintViolationError(
                f"delta_s {self.delta_s} outside [-0.5, 0.5]"
            )
        object.__setattr__(self, "theta_deg", float(self.theta_deg))
        object.__setattr__(self, "delta_h", canonical_hue_shift(self.delta_h))
        object.__setattr__(self, "delta_s", float(self.delta_s))


def validate_image(x, name="image"):
    x = np.asarray(x)
    if x.ndim != 3 or x.shape[2] != 3:
        raise ConstraintViolationError(f"{name} must be (H, W, 3), got {x.shape}")
    if x.shape[0] < 8 or x.shape[1] < 8:
        raise ConstraintViolationError(f"{name} smaller than 8x8: {x.shape}")
    if not np.all(np.isfinite(x)):
        raise ConstraintViolationError(f"{name} contains non-finite values")
    if x.min() < 0.0 or x.max() > 1.0:
        raise ConstraintViolationError(f"{name} values outside [0, 1]")
    return x


def ste_clip(v, lo, hi):
    """Clip ``v`` to [lo, hi]. The backward convention is pass-through: callers
    propagating gradients treat the derivative as 1 everywhere."""
    if lo >= hi:
        raise ConstraintViolationError(f"ste_clip bounds degenerate: [{lo}, {hi}]")
    return min(max(v, lo), hi)


# ---------------------------------------------------------------------------
# Three-pass rotation
# ---------------------------------------------------------------------------

def _shear_factors(theta_deg):
    t = theta_deg * DEG
    alpha = -math.tan(t / 2.0)
    beta = math.sin(t)
    # derivatives per degree of angle
    dalpha = -0.5 / math.cos(t / 2.0) ** 2 * DEG
    dbeta = math.cos(t) * DEG
    return alpha, beta, dalpha, dbeta


def _pad_amounts(h, w, alpha, beta):
    hc = (h - 1) / 2.0
    wc = (w - 1) / 2.0
    a, b = abs(alpha), abs(beta)
    pad_y = int(math.ceil(b * (wc + a * hc))) + SUPPORT + 1
    pad_x = int(math.ceil(a * (2 * hc + b * (wc + a * hc)))) + SUPPORT + 1
    return pad_y, pad_x


def _rotate2d_dual(img, tangent, theta_deg, dtheta, pad_code):
    """Rotate a 2-D array by the three-shear decomposition, propagating a
    forward tangent.

    ``tangent`` may be None (treated as zero). ``dtheta`` scales the angle
    derivative folded into the output tangent (0 disables it). Returns
    (rotated, tangent_out); tangent_out is None when both tangent sources are
    absent.
    """
    h, w = img.shape
    alpha, beta, dalpha, dbeta = _shear_factors(theta_deg)
    pad_y, pad_x = _pad_amounts(h, w, alpha, beta)

    mode = "edge" if pad_code == PAD_REPLICATE else "constant"
    cur = np.pad(img, ((pad_y, pad_y), (pad_x, pad_x)), mode=mode)
    want_tan = tangent is not None or dtheta != 0.0
    if want_tan:
        dtan = (
            np.pad(tangent, ((pad_y, pad_y), (pad_x, pad_x)), mode=mode)
            if tangent is not None
            else np.zeros_like(cur)
        )
    ph, pw = cur.shape
    cy = (ph - 1) / 2.0
    cx = (pw - 1) / 2.0
    rows = np.arange(ph, dtype=np.float64) - cy
    cols = np.arange(pw, dtype=np.float64) - cx

    def x_pass(a, da, cur, dtan):
        shifts = a * rows
        out, dpos = shear_lines(cur, shifts, pad_code)
        if not want_tan:
            return out, None
        dval, _ = shear_lines(dtan, shifts, pad_code)
        # sampling position is j - shift, so d(out)/d(shift) = -dpos
        dshifts = (da * dtheta) * rows
        return out, dval - dpos * dshifts[:, None]

    def y_pass(b, db, cur, dtan):
        shifts = b * cols
        out, dpos = shear_lines(cur.T, shifts, pad_code)
        if not want_tan:
            return out.T, None
        dval, _ = shear_lines(dtan.T, shifts, pad_code)
        dshifts = (db * dtheta) * cols
        return out.T, (dval - dpos * dshifts[:, None]).T

    cur, dtan = x_pass(alpha, dalpha, cur, dtan if want_tan else None)
    cur, dtan = y_pass(beta, dbeta, cur, dtan)
    cur, dtan = x_pass(alpha, dalpha, cur, dtan)

    sl = (slice(pad_y, pad_y + h), slice(pad_x, pad_x + w))
    return cur[sl], dtan[sl] if want_tan else None


def _check_angle(theta_deg):
    if not (-THETA_MAX_DEG <= theta_deg <= THETA_MAX_DEG):
        raise ConstraintViolationError(f"angle {theta_deg} outside [-90, 90]")


def rotate_three_pass(img, theta_deg, padding="replicate"):
    """Rotate an (H, W) map or (H, W, 3) image clockwise by ``theta_deg`` via
    three 1-D shear passes. Output is clipped to [0, 1]."""
    _check_angle(theta_deg)
    img = np.asarray(img, dtype=np.float64)
    if not np.all(np.isfinite(img)):
        raise ConstraintViolationError("image contains non-finite values")
    if theta_deg == 0.0:
        return img.copy()
    pad_code = _PADDING_CODES[padding]
    if img.ndim == 2:
        out, _ = _rotate2d_dual(img, None, theta_deg, 0.0, pad_code)
    else:
        out = np.empty_like(img)
        for c in range(img.shape[2]):
            out[:, :, c], _ = _rotate2d_dual(img[:, :, c], None, theta_deg, 0.0, pad_code)
    return np.clip(out, 0.0, 1.0)


def rotate_with_tangent(img, tangent, theta_deg, dtheta, padding):
    """Rotation plus forward tangent through input and angle; no clipping.

    Used internally by the gradient chain. Callers clip the value themselves
    and zero the tangent wherever the clip binds (the windowed-sinc kernel can
    overshoot the input hull slightly near sharp edges).
    """
    _check_angle(theta_deg)
    pad_code = _PADDING_CODES[padding]
    img = np.asarray(img, dtype=np.float64)
    if img.ndim == 2:
        return _rotate2d_dual(img, tangent, theta_deg, dtheta, pad_code)
    out = np.empty_like(img)
    dout = np.empty_like(img)
    for c in range(img.shape[2]):
        tc = None if tangent is None else tangent[:, :, c]
        out[:, :, c], dc = _rotate2d_dual(img[:, :, c], tc, theta_deg, dtheta, pad_code)
        dout[:, :, c] = dc
    return out, dout


def derotate_map(m, theta_deg):
    """Undo a clockwise rotation of an anomaly map: counter-clockwise rotation
    with zero extrapolation in the corners. Ground-truth masks are never
    transformed."""
    return rotate_three_pass(m, -theta_deg, padding="zero")


def extrapolation_mask(theta_deg, h, w):
    """Binary mask of pixels extrapolated by a rotation: rotate an all-ones
    image with zero padding and threshold below 0.999."""
    _check_angle(theta_deg)
    if theta_deg == 0.0:
        return np.zeros((h, w), dtype=np.uint8)
    ones = np.ones((h, w), dtype=np.float64)
    rotated = rotate_three_pass(ones, theta_deg, padding="zero")
    return (rotated < 0.999).astype(np.uint8)


# ---------------------------------------------------------------------------
# HSV conversion and its forward-mode derivatives
# ---------------------------------------------------------------------------

_V_FLOOR = 1e-8
_C_FLOOR = 1e-12
_SIXTH = math.pi / 3.0


def rgb_to_hsv(rgb):
    """Hexcone RGB -> HSV; hue in radians [0, 2*pi); h = 0 on gray pixels."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    maxc = np.maximum(np.maximum(r, g), b)
    minc = np.minimum(np.minimum(r, g), b)
    v = maxc
    c = maxc - minc
    s = c / np.maximum(v, _V_FLOOR)

    cc = np.maximum(c, _C_FLOOR)
    mr = (r >= g) & (r >= b)
    mg = ~mr & (g >= b)
    hp = np.where(
        mr, ((g - b) / cc) % 6.0, np.where(mg, (b - r) / cc + 2.0, (r - g) / cc + 4.0)
    )
    h = np.where(c > _C_FLOOR, hp * _SIXTH, 0.0) % TWO_PI
    return np.stack([h, np.clip(s, 0.0, 1.0), np.clip(v, 0.0, 1.0)], axis=-1)


def hsv_to_rgb(hsv):
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    hp = (h % TWO_PI) / _SIXTH
    i = np.minimum(np.floor(hp), 5.0)
    f = hp - i
    p = v * (1.0 - s)
    q = v * (1.0 - f * s)
    t = v * (1.0 - (1.0 - f) * s)
    i = i.astype(np.int64)
    r = np.choose(i, [v, q, p, p, t, v])
    g = np.choose(i, [t, v, v, q, p, p])
    b = np.choose(i, [p, p, t, v, v, q])
    return np.stack([r, g, b], axis=-1)


def _rgb_to_hsv_jvp(rgb, drgb):
    """Forward tangent through rgb_to_hsv. Gray pixels use the h=0, dh=0
    convention."""
    r, g, b = rgb[..., 0], rgb[..., 1], rgb[..., 2]
    dr, dg, db = drgb[..., 0], drgb[..., 1], drgb[..., 2]

    mr = (r >= g) & (r >= b)
    mg = ~mr & (g >= b)
    mb = ~mr & ~mg
    nr = (r <= g) & (r <= b)
    ng = ~nr & (g <= b)
    nb = ~nr & ~ng

    v = np.where(mr, r, np.where(mg, g, b))
    dv = np.where(mr, dr, np.where(mg, dg, db))
    minc = np.where(nr, r, np.where(ng, g, b))
    dmin = np.where(nr, dr, np.where(ng, dg, db))
    c = v - minc
    dc = dv - dmin

    chrom = c > _C_FLOOR
    cc = np.maximum(c, _C_FLOOR)
    vc = np.maximum(v, _V_FLOOR)
    ds = np.where(v > _V_FLOOR, (dc * v - c * dv) / (vc * vc), 0.0)

    dhp = np.where(
        mr,
        ((dg - db) - (g - b) / cc * dc) / cc,
        np.where(
            mg,
            ((db - dr) - (b - r) / cc * dc) / cc,
            ((dr - dg) - (r - g) / cc * dc) / cc,
        ),
    )
    dh = np.where(chrom, dhp * _SIXTH, 0.0)
    del mb
    return np.stack([dh, ds, dv], axis=-1)


def _hsv_to_rgb_jvp(hsv, dhsv):
    """Forward tangent through hsv_to_rgb."""
    h, s, v = hsv[..., 0], hsv[..., 1], hsv[..., 2]
    dh, ds, dv = dhsv[..., 0], dhsv[..., 1], dhsv[..., 2]
    hp = (h % TWO_PI) / _SIXTH
    i = np.minimum(np.floor(hp), 5.0)
    f = hp - i
    df = dh / _SIXTH

    dp = dv * (1.0 - s) - v * ds
    dq = dv * (1.0 - f * s) - v * (df * s + f * ds)
    dt = dv * (1.0 - (1.0 - f) * s) + v * (df * s - (1.0 - f) * ds)
    i = i.astype(np.int64)
    drout = np.choose(i, [dv, dq, dp, dp, dt, dv])
    dgout = np.choose(i, [dt, dv, dv, dq, dp, dp])
    dbout = np.choose(i, [dp, dp, dt, dv, dv, dq])
    return np.stack([drout, dgout, dbout], axis=-1)


# ---------------------------------------------------------------------------
# Full augmentation pipeline
# ---------------------------------------------------------------------------

def _shift_hsv(hsv, delta_h, delta_s):
    out = hsv.copy()
    out[..., 0] = (hsv[..., 0] + delta_h) % TWO_PI
    out[..., 1] = np.clip(hsv[..., 1] + delta_s, 0.0, 1.0)
    return out


def apply_augmentation(x, p):
    """Rotate clockwise by theta, then shift hue and saturation in HSV space.

    Zero hue/saturation shifts skip the HSV round-trip entirely; the all-zero
    parameter triple returns the input bit-identically.
    """
    x = validate_image(np.asarray(x, dtype=np.float64))
    out = x
    if p.theta_deg != 0.0:
        out = rotate_three_pass(out, p.theta_deg, padding="replicate")
    if p.delta_h != 0.0 or p.delta_s != 0.0:
        hsv = _shift_hsv(rgb_to_hsv(out), p.delta_h, p.delta_s)
        out = np.clip(hsv_to_rgb(hsv), 0.0, 1.0)
    return out.copy() if out is x else out


def augmentation_jvp(x, p):
    """Forward value plus the three parameter tangents of the pipeline.

    Returns (x_aug, d/dtheta, d/ddelta_h, d/ddelta_s), each image-shaped.
    Saturation clipping uses the straight-through convention.
    """
    x = np.asarray(x, dtype=np.float64)
    x_aug = apply_augmentation(x, p)

    rotated, dtheta_img = rotate_with_tangent(
        x, None, p.theta_deg, 1.0, padding="replicate"
    )
    # the clip after rotation uses the true subgradient: overshoot pixels are
    # saturated and insensitive to the angle
    dtheta_img = np.where((rotated > 0.0) & (rotated < 1.0), dtheta_img, 0.0)
    rotated = np.clip(rotated, 0.0, 1.0)

    hsv = rgb_to_hsv(rotated)
    shifted = _shift_hsv(hsv, p.delta_h, p.delta_s)

    # theta tangent: through the HSV round-trip (identity map when shifts are
    # zero, so the skipped branch has the same derivative)
    if p.delta_h == 0.0 and p.delta_s == 0.0:
        d_theta = dtheta_img
    else:
        dhsv = _rgb_to_hsv_jvp(rotated, dtheta_img)
        d_theta = _hsv_to_rgb_jvp(shifted, dhsv)

    unit_h = np.zeros_like(shifted)
    unit_h[..., 0] = 1.0
    d_h = _hsv_to_rgb_jvp(shifted, unit_h)

    unit_s = np.zeros_like(shifted)
    unit_s[..., 1] = 1.0  # STE through the saturation clip
    d_s = _hsv_to_rgb_jvp(shifted, unit_s)

    return x_aug, d_theta, d_h, d_s


def augmentation_vjp(x, p, upstream):
    """Scalar partial derivatives (d_theta, d_delta_h, d_delta_s) of any
    objective whose gradient with respect to x_aug is ``upstream``."""
    upstream = np.asarray(upstream, dtype=np.float64)
    _, d_theta, d_h, d_s = augmentation_jvp(x, p)
    return (
        float(np.sum(upstream * d_theta)),
        float(np.sum(upstream * d_h)),
        float(np.sum(upstream * d_s)),
    )


def bilinear_resize(m, shape):
    """Bilinear upsampling/downsampling of a 2-D map onto ``shape`` (H, W)."""
    m = np.asarray(m, dtype=np.float64)
    h, w = m.shape
    out_h, out_w = shape
    if (h, w) == (out_h, out_w):
        return m.copy()
    ys = np.linspace(0.0, h - 1.0, out_h)
    xs = np.linspace(0.0, w - 1.0, out_w)
    y0 = np.clip(np.floor(ys).astype(np.int64), 0, h - 2) if h > 1 else np.zeros(out_h, np.int64)
    x0 = np.clip(np.floor(xs).astype(np.int64), 0, w - 2) if w > 1 else np.zeros(out_w, np.int64)
    fy = (ys - y0) if h > 1 else np.zeros(out_h)
    fx = (xs - x0) if w > 1 else np.zeros(out_w)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    top = m[np.ix_(y0, x0)] * (1 - fx)[None, :] + m[np.ix_(y0, x1)] * fx[None, :]
    bot = m[np.ix_(y1, x0)] * (1 - fx)[None, :] + m[np.ix_(y1, x1)] * fx[None, :]
    return top * (1 - fy)[:, None] + bot * fy[:, None]
