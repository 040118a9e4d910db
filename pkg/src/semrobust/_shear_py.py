"""Pure-numpy 1-D shear resampling kernel (fallback for the compiled extension).

Resampling uses a normalized windowed-sinc kernel (support radius A, cos^4
window). The window vanishes to fourth order at the support edge, so the
interpolant is C^3 in the sampling position: analytic position derivatives
match central finite differences everywhere, which piecewise-linear kernels
cannot guarantee. Weight normalization reproduces constants exactly.
"""

import numpy as np

PAD_ZERO = 0
PAD_REPLICATE = 1

A = 3  # support radius in pixels; 2*A taps per output sample
_PI = np.pi


def _kern(x):
    """sinc(x) * cos^4(pi*x/(2A)) on |x| < A (zero outside, not checked)."""
    c = np.cos(_PI * x / (2.0 * A))
    return np.sinc(x) * c**4


def _dkern(x):
    """Derivative of the windowed-sinc kernel."""
    c = np.cos(_PI * x / (2.0 * A))
    s = np.sin(_PI * x / (2.0 * A))
    w = c**4
    dw = -4.0 * c**3 * s * (_PI / (2.0 * A))
    sinc = np.sinc(x)
    small = np.abs(x) < 1e-6
    safe = np.where(small, 1.0, x)
    dsinc = np.where(small, -(_PI**2) * x / 3.0, (np.cos(_PI * x) - sinc) / safe)
    return dsinc * w + sinc * dw


def shear_lines(arr, shifts, padding):
    """Resample each row of ``arr`` at positions ``j - shifts[l]``.

    Returns ``(out, dpos)`` where ``dpos[l, j]`` is the derivative of the
    resampled value with respect to the sampling position (needed for angle
    gradients).
    """
    arr = np.ascontiguousarray(arr, dtype=np.float64)
    shifts = np.asarray(shifts, dtype=np.float64)
    L, N = arr.shape
    p = np.arange(N, dtype=np.float64)[None, :] - shifts[:, None]
    k = np.floor(p).astype(np.int64)
    f = p - k

    num = np.zeros((L, N))
    dnum = np.zeros((L, N))
    den = np.zeros((L, N))
    dden = np.zeros((L, N))
    for m in range(-A + 1, A + 1):
        x = f - m
        w = _kern(x)
        dw = _dkern(x)
        idx = k + m
        if padding == PAD_REPLICATE:
            v = np.take_along_axis(arr, np.clip(idx, 0, N - 1), axis=1)
        else:
            valid = (idx >= 0) & (idx < N)
            v = np.take_along_axis(arr, np.clip(idx, 0, N - 1), axis=1)
            v = np.where(valid, v, 0.0)
        num += w * v
        dnum += dw * v
        den += w
        dden += dw

    out = num / den
    dpos = (dnum * den - num * dden) / (den * den)
    return out, dpos
