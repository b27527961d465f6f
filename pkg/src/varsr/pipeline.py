"""Super-resolution by adaptive filtering with estimated neighbor weights.

The weights estimated on the low-resolution image are upsampled
bilinearly and applied once, as a spatially varying 8-neighbor filter, to
an initial high-resolution estimate.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baselines import upscale_bicubic, upscale_bilinear, upscale_nearest
from .image import as_image, neighbor_stack, neighbor_sum
from .weights import SolverConfig, WeightField, estimate_weights, renormalize

INIT_METHODS = {
    "nearest": upscale_nearest,
    "bilinear": upscale_bilinear,
    "bicubic": upscale_bicubic,
}


@dataclass(frozen=True)
class SRConfig:
    z: int = 3
    solver: SolverConfig = field(default_factory=SolverConfig)
    init_method: str = "nearest"
    renormalize_weights: bool = False
    renorm_floor: float = 1e-6

    def __post_init__(self):
        if int(self.z) != self.z or self.z < 2:
            raise ValueError(f"z must be an integer >= 2, got {self.z}")
        if self.init_method not in INIT_METHODS:
            raise ValueError(
                f"init_method must be one of {sorted(INIT_METHODS)}, got {self.init_method!r}"
            )


@dataclass(frozen=True)
class SRResult:
    image: np.ndarray
    iters: int
    energy: float


def upsample_weight_field(w: WeightField, z: int) -> WeightField:
    """Bilinearly upsample every plane (and the anchor, if any)."""
    planes = np.stack([upscale_bilinear(p, z) for p in w.planes])
    anchor = None if w.anchor is None else upscale_bilinear(w.anchor, z)
    return WeightField(planes, anchor)


def apply_adaptive_filter(hr_init: np.ndarray, w_hr: WeightField) -> np.ndarray:
    """Single pass of ``sum_i w_i(x) u(x + delta_i)``; no clamping."""
    hr_init = as_image(hr_init)
    if hr_init.shape != w_hr.shape:
        raise ValueError(
            f"image shape {hr_init.shape} does not match weight field {w_hr.shape}"
        )
    return neighbor_sum(w_hr.planes * neighbor_stack(hr_init))


def super_resolve(lr: np.ndarray, cfg: SRConfig | None = None, *, workers: int = 1) -> SRResult:
    cfg = cfg or SRConfig()
    lr = as_image(lr)
    if min(lr.shape) < 2:
        raise ValueError(f"input must be at least 2x2, got {lr.shape[1]}x{lr.shape[0]}")
    est = estimate_weights(lr, cfg.solver, workers=workers)
    w = est.weights
    if cfg.renormalize_weights:
        w = renormalize(w, cfg.renorm_floor)
    w_hr = upsample_weight_field(w, cfg.z)
    hr_init = INIT_METHODS[cfg.init_method](lr, cfg.z)
    out = np.clip(apply_adaptive_filter(hr_init, w_hr), 0.0, 1.0)
    return SRResult(out, est.iters, est.energy)
