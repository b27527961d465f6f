"""Variational estimation of per-pixel neighbor weights.

Every pixel is modelled as a weighted combination of its eight neighbors,

    u(x) ~ sum_i w_i(x) u(x + delta_i),

and the weight planes are found by gradient flow on

    E(w) = sum_i TV_eps(w_i) + (lam / 2) * sum_x r(x)^2,
    r(x) = sum_i w_i(x) u(x + delta_i) - u(x),

where ``TV_eps`` is the eps-regularized isotropic total variation with
forward differences.  ``lam`` multiplies the fidelity term, and the ``1/2``
makes the discrete update an exact negative gradient of ``E``.
"""

from __future__ import annotations

import logging
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, NamedTuple

import numpy as np

from .image import as_image, neighbor_stack, neighbor_sum

logger = logging.getLogger(__name__)

VWF_MAGIC = b"VWF1\n"

# Smallest trial step, relative to cfg.dt, before the solver declares a stall.
_MIN_STEP_FRACTION = 2.0**-40


class NumericalError(ArithmeticError):
    """A computation produced NaN or Inf."""


@dataclass
class WeightField:
    """Eight neighbor weight planes, plus an optional anchor plane.

    ``planes[i]`` is aligned with ``OFFSETS[i]``.  The anchor plane is only
    used by the digital TV filter, where it weights the original image.
    """

    planes: np.ndarray
    anchor: np.ndarray | None = None

    def __post_init__(self):
        self.planes = np.asarray(self.planes, dtype=np.float64)
        if self.planes.ndim != 3 or self.planes.shape[0] != 8:
            raise ValueError(f"expected planes of shape (8, h, w), got {self.planes.shape}")
        if self.anchor is not None:
            self.anchor = np.asarray(self.anchor, dtype=np.float64)
            if self.anchor.shape != self.planes.shape[1:]:
                raise ValueError("anchor plane shape does not match weight planes")

    @property
    def height(self) -> int:
        return self.planes.shape[1]

    @property
    def width(self) -> int:
        return self.planes.shape[2]

    @property
    def shape(self) -> tuple[int, int]:
        return self.planes.shape[1], self.planes.shape[2]

    def plane_sum(self) -> np.ndarray:
        """Per-pixel sum of the eight neighbor weights."""
        return neighbor_sum(self.planes)

    def stacked(self) -> np.ndarray:
        """Planes as one ``(8, h, w)`` or ``(9, h, w)`` array, anchor last."""
        if self.anchor is None:
            return self.planes
        return np.concatenate([self.planes, self.anchor[None]])


@dataclass(frozen=True)
class SolverConfig:
    lam: float = 0.1
    dt: float = 0.05
    eps: float = 1e-4
    max_iters: int = 500
    stop_tol: float = 1e-5

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lam must be >= 0")
        if not self.dt > 0:
            raise ValueError("dt must be > 0")
        if not self.eps > 0:
            raise ValueError("eps must be > 0")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.stop_tol < 0:
            raise ValueError("stop_tol must be >= 0")


class Estimate(NamedTuple):
    weights: WeightField
    iters: int
    energy: float


def init_weights(width: int, height: int) -> WeightField:
    if width < 1 or height < 1:
        raise ValueError("width and height must be >= 1")
    return WeightField(np.full((8, height, width), 0.125))


def _check_dims(img: np.ndarray, w: WeightField) -> None:
    if img.shape != w.shape:
        raise ValueError(f"image shape {img.shape} does not match weight field {w.shape}")


def _residual(img: np.ndarray, planes: np.ndarray, nb: np.ndarray) -> np.ndarray:
    return neighbor_sum(planes * nb) - img


def residual(img: np.ndarray, w: WeightField) -> np.ndarray:
    """Per-pixel prediction error ``sum_i w_i u(. + delta_i) - u``."""
    img = as_image(img)
    _check_dims(img, w)
    return _residual(img, w.planes, neighbor_stack(img))


def fidelity_energy(img: np.ndarray, w: WeightField) -> float:
    r = residual(img, w)
    return float(np.sum(r * r))


def forward_diff(f: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Forward differences along x and y; zero on the far edge."""
    dx = np.zeros_like(f)
    dy = np.zeros_like(f)
    dx[:, :-1] = f[:, 1:] - f[:, :-1]
    dy[:-1, :] = f[1:, :] - f[:-1, :]
    return dx, dy


def _grad_norm(dx: np.ndarray, dy: np.ndarray, eps: float) -> np.ndarray:
    return np.sqrt((dx * dx + dy * dy) + eps * eps)


def tv_energy(w: WeightField, eps: float) -> float:
    """Regularized total variation summed over the eight planes (no lam)."""
    if not eps > 0:
        raise ValueError("eps must be > 0")
    total = 0.0
    for plane in w.planes:
        total += float(np.sum(_grad_norm(*forward_diff(plane), eps)))
    return total


def tv_curvature(plane: np.ndarray, eps: float) -> np.ndarray:
    """Discrete ``div(grad w / |grad w|_eps)``.

    Backward-difference divergence of the normalized forward gradient; the
    two are adjoint, so ``-tv_curvature`` is the exact gradient of the
    per-plane term of :func:`tv_energy`.
    """
    dx, dy = forward_diff(plane)
    g = _grad_norm(dx, dy, eps)
    px = dx / g
    py = dy / g
    div_x = px.copy()
    div_x[:, 1:] -= px[:, :-1]
    div_y = py.copy()
    div_y[1:, :] -= py[:-1, :]
    return div_x + div_y


def total_energy(img: np.ndarray, w: WeightField, cfg: SolverConfig) -> float:
    """``tv_energy + (lam / 2) * fidelity_energy``."""
    return tv_energy(w, cfg.eps) + 0.5 * cfg.lam * fidelity_energy(img, w)


def _map_planes(fn, planes, workers: int):
    if workers <= 1:
        return [fn(p) for p in planes]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, planes))


def evolve_step(
    img: np.ndarray, w: WeightField, cfg: SolverConfig, *, workers: int = 1
) -> tuple[WeightField, float]:
    """One explicit Euler (Jacobi) step of the weight gradient flow.

    Returns the new field and the max-abs change over all planes and pixels.
    Planes are independent given the residual, so ``workers > 1`` only
    spreads them over threads; the result is bit-identical.
    """
    img = as_image(img)
    _check_dims(img, w)
    nb = neighbor_stack(img)

    def update(i: int) -> np.ndarray:
        force = tv_curvature(w.planes[i], cfg.eps) - cfg.lam * r * nb[i]
        return w.planes[i] + cfg.dt * force

    with np.errstate(over="ignore", invalid="ignore"):
        r = _residual(img, w.planes, nb)
        new = np.stack(_map_planes(update, range(8), workers))
    if not np.all(np.isfinite(new)):
        raise NumericalError(f"weight update is not finite (dt={cfg.dt} too large?)")
    max_update = float(np.max(np.abs(new - w.planes)))
    return WeightField(new), max_update


def estimate_weights(
    img: np.ndarray,
    cfg: SolverConfig | None = None,
    *,
    workers: int = 1,
    callback: Callable[[int, float, float], None] | None = None,
) -> Estimate:
    """Run the weight gradient flow from uniform weights.

    Each iteration takes an explicit Jacobi step of size at most ``cfg.dt``;
    if that step would raise the energy, the step is halved until it does
    not.  The explicit TV flow is only stable for ``dt`` on the order of
    ``eps``, so without this safeguard the default step diverges.  The trial
    step is warm-started from twice the previously accepted one.

    Iteration stops when the update a full ``cfg.dt`` step would make drops
    below ``cfg.stop_tol``, when ``cfg.max_iters`` steps have been taken, or
    when no step down to ``dt * 2**-40`` decreases the energy.

    ``callback(iteration, energy, dt_used)`` is called after every accepted
    step.
    """
    cfg = cfg or SolverConfig()
    img = as_image(img)
    h, w_ = img.shape
    field = init_weights(w_, h)
    energy = total_energy(img, field, cfg)
    if h * w_ == 1:
        return Estimate(field, 0, energy)

    step = cfg.dt
    min_step = cfg.dt * _MIN_STEP_FRACTION
    iters = 0
    while iters < cfg.max_iters:
        trial = min(cfg.dt, 2.0 * step)
        while True:
            cand, max_update = evolve_step(img, field, replace(cfg, dt=trial), workers=workers)
            cand_energy = total_energy(img, cand, cfg)
            if not np.isfinite(cand_energy):
                raise NumericalError(f"energy is not finite at iteration {iters + 1}")
            if cand_energy <= energy or trial <= min_step:
                break
            trial *= 0.5
        if cand_energy > energy:
            logger.debug("stalled at iteration %d, energy %.12g", iters, energy)
            break
        field, energy, step = cand, cand_energy, trial
        iters += 1
        if callback is not None:
            callback(iters, energy, trial)
        if max_update * (cfg.dt / trial) < cfg.stop_tol:
            break
    logger.debug("weights: %d iterations, energy %.12g", iters, energy)
    return Estimate(field, iters, energy)


def renormalize(w: WeightField, floor: float = 1e-6) -> WeightField:
    """Rescale weights to sum to one per pixel; reset near-zero sums to 1/8.

    Negative weights are kept.
    """
    if not floor > 0:
        raise ValueError("floor must be > 0")
    s = w.plane_sum()
    ok = np.abs(s) >= floor
    planes = np.where(ok, w.planes / np.where(ok, s, 1.0), 0.125)
    return WeightField(planes, w.anchor)


# --- VWF1 dump -------------------------------------------------------------


def save_vwf(w: WeightField, path: str | os.PathLike) -> None:
    """Write the field as ``VWF1``: magic, ``"width height planes\\n"``, then
    little-endian float64 planes in index order (anchor last)."""
    data = w.stacked()
    with open(path, "wb") as f:
        f.write(VWF_MAGIC)
        f.write(b"%d %d %d\n" % (w.width, w.height, data.shape[0]))
        f.write(data.astype("<f8").tobytes())


def load_vwf(path: str | os.PathLike) -> WeightField:
    with open(path, "rb") as f:
        buf = f.read()
    if not buf.startswith(VWF_MAGIC):
        raise ValueError("not a VWF1 file")
    end = buf.find(b"\n", len(VWF_MAGIC))
    if end < 0:
        raise ValueError("truncated VWF1 header")
    try:
        width, height, nplanes = (int(t) for t in buf[len(VWF_MAGIC) : end].split())
    except ValueError:
        raise ValueError("malformed VWF1 header") from None
    if nplanes not in (8, 9) or width < 1 or height < 1:
        raise ValueError(f"bad VWF1 dimensions {width}x{height}x{nplanes}")
    count = width * height * nplanes
    if len(buf) - end - 1 < count * 8:
        raise ValueError("truncated VWF1 data")
    data = np.frombuffer(buf, dtype="<f8", count=count, offset=end + 1)
    data = data.astype(np.float64).reshape(nplanes, height, width)
    return WeightField(data[:8].copy(), data[8].copy() if nplanes == 9 else None)
