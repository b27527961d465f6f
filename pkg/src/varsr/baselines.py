"""Reference upscalers and the digital TV filter.

All resamplers share the pixel-center mapping: output pixel ``X`` samples
source coordinate ``s = (X + 0.5) / z - 0.5``, clamped to ``[0, n - 1]``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .image import OFFSETS, as_image, neighbor_stack, neighbor_sum, shifted
from .weights import NumericalError, WeightField


@dataclass(frozen=True)
class TvFilterConfig:
    lambda_fit: float = 1.0
    eps: float = 1e-4
    max_iters: int = 200
    stop_tol: float = 1e-6

    def __post_init__(self):
        if self.lambda_fit < 0:
            raise ValueError("lambda_fit must be >= 0")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")


def _check_zoom(z: int) -> None:
    if int(z) != z or z < 2:
        raise ValueError(f"zoom factor must be an integer >= 2, got {z}")


def source_coords(n: int, z: int) -> np.ndarray:
    """Clamped pixel-center source coordinates for an ``n -> n*z`` axis."""
    s = (np.arange(n * z) + 0.5) / z - 0.5
    return np.clip(s, 0.0, n - 1)


def upscale_nearest(img: np.ndarray, z: int) -> np.ndarray:
    img = as_image(img)
    _check_zoom(z)
    return np.repeat(np.repeat(img, z, axis=0), z, axis=1)


def _linear_axis(a: np.ndarray, z: int, axis: int) -> np.ndarray:
    n = a.shape[axis]
    s = source_coords(n, z)
    i0 = np.floor(s).astype(np.intp)
    i1 = np.minimum(i0 + 1, n - 1)
    t = s - i0
    shape = [1] * a.ndim
    shape[axis] = -1
    t = t.reshape(shape)
    lo = np.take(a, i0, axis=axis)
    hi = np.take(a, i1, axis=axis)
    # lo + t*(hi - lo) reproduces constants exactly.
    return lo + t * (hi - lo)


def upscale_bilinear(img: np.ndarray, z: int) -> np.ndarray:
    img = as_image(img)
    _check_zoom(z)
    return _linear_axis(_linear_axis(img, z, 0), z, 1)


def cubic_kernel(t, a: float = -0.5):
    """Keys cubic convolution kernel; ``a = -0.5`` is Catmull-Rom."""
    t = np.abs(np.asarray(t, dtype=np.float64))
    t2 = t * t
    t3 = t2 * t
    near = (a + 2) * t3 - (a + 3) * t2 + 1
    far = a * t3 - 5 * a * t2 + 8 * a * t - 4 * a
    return np.where(t <= 1, near, np.where(t < 2, far, 0.0))


def _cubic_axis(a: np.ndarray, z: int, axis: int) -> np.ndarray:
    n = a.shape[axis]
    s = source_coords(n, z)
    f = np.floor(s).astype(np.intp)
    shape = [1] * a.ndim
    shape[axis] = -1
    base = np.take(a, f, axis=axis)
    out = base.copy()
    # base + sum_k K_k (u_k - base) equals sum_k K_k u_k because the kernel
    # taps sum to one, and keeps constant rows exact.
    for k in (-1, 0, 1, 2):
        idx = np.clip(f + k, 0, n - 1)
        wk = cubic_kernel(s - (f + k)).reshape(shape)
        out += wk * (np.take(a, idx, axis=axis) - base)
    return out


def upscale_bicubic(img: np.ndarray, z: int) -> np.ndarray:
    """Separable Catmull-Rom upscaling. Output is not clamped."""
    img = as_image(img)
    _check_zoom(z)
    return _cubic_axis(_cubic_axis(img, z, 0), z, 1)


# --- digital TV filter -----------------------------------------------------


def _central_grad_norm(u: np.ndarray, eps: float) -> np.ndarray:
    gx = 0.5 * (shifted(u, 1, 0) - shifted(u, -1, 0))
    gy = 0.5 * (shifted(u, 0, 1) - shifted(u, 0, -1))
    return np.sqrt((gx * gx + gy * gy) + eps * eps)


def tv_filter_coeffs(img: np.ndarray, cfg: TvFilterConfig | None = None) -> WeightField:
    """Filter coefficients ``h_1..h_8`` and anchor ``h_0`` for one step.

    Neighbor affinity is ``1/g(x) + 1/g(y)`` with ``g`` the regularized
    central-difference gradient magnitude; the coefficients are affinities
    normalized together with ``lambda_fit``, so ``h_0 + sum h_i = 1``.
    """
    cfg = cfg or TvFilterConfig()
    img = as_image(img)
    inv_g = 1.0 / _central_grad_norm(img, cfg.eps)
    affinity = inv_g + np.stack([shifted(inv_g, dx, dy) for dx, dy in OFFSETS])
    denom = cfg.lambda_fit + neighbor_sum(affinity)
    return WeightField(affinity / denom, cfg.lambda_fit / denom)


def tv_filter(
    u0: np.ndarray,
    cfg: TvFilterConfig | None = None,
    *,
    callback: Callable[[int, np.ndarray], None] | None = None,
) -> np.ndarray:
    """Iterate ``u <- sum_i h_i u(. + delta_i) + h_0 u0`` to convergence.

    Coefficients are recomputed from the current iterate each step and the
    anchor always refers to the original ``u0``.
    """
    cfg = cfg or TvFilterConfig()
    u0 = as_image(u0)
    lo, hi = u0.min(), u0.max()
    u = u0
    for it in range(1, cfg.max_iters + 1):
        h = tv_filter_coeffs(u, cfg)
        nb = neighbor_stack(u)
        new = u + (neighbor_sum(h.planes * (nb - u)) + h.anchor * (u0 - u))
        if not np.all(np.isfinite(new)):
            raise NumericalError(f"digital TV filter diverged at iteration {it}")
        # Each step is a convex combination; the clip only removes rounding.
        new = np.clip(new, lo, hi)
        delta = float(np.max(np.abs(new - u)))
        u = new
        if callback is not None:
            callback(it, u)
        if delta < cfg.stop_tol:
            break
    return u


def tv_filter_upscale(img: np.ndarray, z: int, cfg: TvFilterConfig | None = None) -> np.ndarray:
    """Nearest-neighbor upscaling followed by the digital TV filter."""
    return tv_filter(upscale_nearest(img, z), cfg)
