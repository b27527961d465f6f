"""Image quality metrics, Sobel edge response and method comparison."""

from __future__ import annotations

import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .baselines import (
    TvFilterConfig,
    tv_filter_upscale,
    upscale_bicubic,
    upscale_bilinear,
    upscale_nearest,
)
from .image import as_image, downsample_block, shifted
from .pipeline import SRConfig, super_resolve

# psnr() of two identical images.
IDENTICAL = math.inf

METHODS = ("ours", "bicubic", "bilinear", "nearest", "tv")
DEFAULT_SOBEL_THRESHOLD = 0.25


def _same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise ValueError(f"image shapes differ: {a.shape} vs {b.shape}")


def mse(a: np.ndarray, b: np.ndarray) -> float:
    a, b = as_image(a), as_image(b)
    _same_shape(a, b)
    d = a - b
    return float(np.mean(d * d))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    """PSNR in dB with peak 1; ``IDENTICAL`` (inf) when the images match."""
    m = mse(a, b)
    if m == 0.0:
        return IDENTICAL
    return -10.0 * math.log10(m)


def sobel_magnitude(img: np.ndarray) -> np.ndarray:
    img = as_image(img)

    def s(dx, dy):
        return shifted(img, dx, dy)

    gx = (s(1, -1) + 2.0 * s(1, 0) + s(1, 1)) - (s(-1, -1) + 2.0 * s(-1, 0) + s(-1, 1))
    gy = (s(-1, 1) + 2.0 * s(0, 1) + s(1, 1)) - (s(-1, -1) + 2.0 * s(0, -1) + s(1, -1))
    return np.sqrt(gx * gx + gy * gy)


def edge_count(mag: np.ndarray, threshold: float) -> int:
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    return int(np.count_nonzero(np.asarray(mag) > threshold))


@dataclass(frozen=True)
class MethodResult:
    name: str
    psnr: float
    edge_count: int
    wall_time: float
    image: np.ndarray = field(repr=False, compare=False)


@dataclass
class CompareReport:
    reference: str
    z: int
    sobel_threshold: float
    rows: list[MethodResult]

    def records(self, timing: bool = True) -> list[dict]:
        out = [
            {
                "record": "compare",
                "reference": self.reference,
                "z": self.z,
                "sobel_threshold": self.sobel_threshold,
            }
        ]
        for row in self.rows:
            rec = {
                "record": "method",
                "name": row.name,
                "psnr_db": "identical" if row.psnr == IDENTICAL else row.psnr,
                "edge_count": row.edge_count,
            }
            if timing:
                rec["wall_time_s"] = row.wall_time
            out.append(rec)
        return out

    def to_jsonl(self, timing: bool = True) -> str:
        """One JSON object per line: a header, then one per method."""
        return "".join(json.dumps(r, sort_keys=True) + "\n" for r in self.records(timing))

    def format_table(self, timing: bool = True) -> str:
        header = f"{'method':<10} {'psnr_db':>10} {'edges':>7}"
        if timing:
            header += f" {'time_s':>8}"
        lines = [
            f"reference={self.reference} z={self.z} threshold={self.sobel_threshold:g}",
            header,
        ]
        for row in self.rows:
            p = "identical" if row.psnr == IDENTICAL else f"{row.psnr:.4f}"
            line = f"{row.name:<10} {p:>10} {row.edge_count:>7d}"
            if timing:
                line += f" {row.wall_time:>8.3f}"
            lines.append(line)
        return "\n".join(lines) + "\n"


def run_method(
    name: str,
    lr: np.ndarray,
    z: int,
    sr_config: SRConfig | None = None,
    tv_config: TvFilterConfig | None = None,
) -> np.ndarray:
    """Upscale ``lr`` by ``z`` with one of ``METHODS``."""
    if name == "ours":
        cfg = sr_config or SRConfig(z=z)
        if cfg.z != z:
            cfg = replace(cfg, z=z)
        return super_resolve(lr, cfg).image
    if name == "tv":
        return tv_filter_upscale(lr, z, tv_config)
    if name == "bicubic":
        return upscale_bicubic(lr, z)
    if name == "bilinear":
        return upscale_bilinear(lr, z)
    if name == "nearest":
        return upscale_nearest(lr, z)
    raise ValueError(f"unknown method {name!r}; choose from {', '.join(METHODS)}")


def compare(
    hr_ref: np.ndarray,
    z: int = 3,
    methods: Sequence[str] = METHODS,
    sobel_threshold: float = DEFAULT_SOBEL_THRESHOLD,
    sr_config: SRConfig | None = None,
    tv_config: TvFilterConfig | None = None,
    *,
    reference: str = "reference",
    workers: int = 1,
) -> CompareReport:
    """Block-downsample ``hr_ref`` by ``z``, upscale with each method and score.

    Rows follow the order of ``methods``.  With ``workers > 1`` methods run
    on a thread pool; only ``wall_time`` can differ from a serial run.
    """
    hr_ref = as_image(hr_ref)
    for m in methods:
        if m not in METHODS:
            raise ValueError(f"unknown method {m!r}; choose from {', '.join(METHODS)}")
    lr = downsample_block(hr_ref, z)

    def score(name: str) -> MethodResult:
        t0 = time.perf_counter()
        out = run_method(name, lr, z, sr_config, tv_config)
        elapsed = time.perf_counter() - t0
        return MethodResult(
            name,
            psnr(out, hr_ref),
            edge_count(sobel_magnitude(out), sobel_threshold),
            elapsed,
            out,
        )

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(score, methods))
    else:
        rows = [score(m) for m in methods]
    return CompareReport(reference, z, sobel_threshold, rows)
