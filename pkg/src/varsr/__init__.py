"""Single-image super-resolution with variationally estimated neighbor weights."""

__version__ = "0.1.0"

from .analysis import IDENTICAL, CompareReport, compare, edge_count, mse, psnr, sobel_magnitude
from .baselines import (
    TvFilterConfig,
    tv_filter,
    tv_filter_coeffs,
    tv_filter_upscale,
    upscale_bicubic,
    upscale_bilinear,
    upscale_nearest,
)
from .image import OFFSETS, downsample_block, load_pgm, neighbor_value, save_pgm
from .pipeline import SRConfig, apply_adaptive_filter, super_resolve, upsample_weight_field
from .weights import (
    NumericalError,
    SolverConfig,
    WeightField,
    estimate_weights,
    evolve_step,
    fidelity_energy,
    init_weights,
    load_vwf,
    renormalize,
    residual,
    save_vwf,
    total_energy,
    tv_curvature,
    tv_energy,
)
