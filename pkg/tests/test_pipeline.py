import numpy as np
import pytest

import oracles
from conftest import affine, edge_scene, rel_err
from varsr.analysis import compare
from varsr.baselines import tv_filter_upscale, upscale_bicubic, upscale_bilinear, upscale_nearest
from varsr.image import downsample_block
from varsr.pipeline import (
    SRConfig,
    apply_adaptive_filter,
    super_resolve,
    upsample_weight_field,
)
from varsr.weights import SolverConfig, WeightField, estimate_weights, init_weights, renormalize

FAST = SolverConfig(max_iters=40)


def test_config_defaults_and_validation():
    cfg = SRConfig()
    assert cfg.z == 3 and cfg.init_method == "nearest" and not cfg.renormalize_weights
    assert cfg.solver == SolverConfig() and cfg.renorm_floor == 1e-6
    with pytest.raises(ValueError):
        SRConfig(z=1)
    with pytest.raises(ValueError):
        SRConfig(init_method="lanczos")


class TestUpsampleWeights:
    def test_uniform(self):
        out = upsample_weight_field(init_weights(4, 3), 3)
        assert out.shape == (9, 12)
        assert np.all(out.planes == 0.125)

    def test_matches_per_plane_bilinear(self, rng):
        w = WeightField(rng.standard_normal((8, 4, 4)))
        out = upsample_weight_field(w, 2)
        for i in range(8):
            assert np.array_equal(out.planes[i], upscale_bilinear(w.planes[i], 2))

    def test_sum_bounds(self, rng):
        w = WeightField(rng.random((8, 5, 5)) / 4)
        s = w.plane_sum()
        hs = upsample_weight_field(w, 3).plane_sum()
        assert hs.min() >= s.min() - 1e-15 and hs.max() <= s.max() + 1e-15


class TestAdaptiveFilter:
    def test_affine_interior(self):
        u = affine(8, 9)
        out = apply_adaptive_filter(u, init_weights(9, 8))
        assert np.max(np.abs(out - u)[1:-1, 1:-1]) < 1e-12

    def test_selector_shift(self, rng):
        u = rng.random((5, 6))
        planes = np.zeros((8, 5, 6))
        planes[4] = 1.0  # delta = (+1, 0)
        out = apply_adaptive_filter(u, WeightField(planes))
        expected = np.concatenate([u[:, 1:], u[:, -1:]], axis=1)
        assert np.array_equal(out, expected)

    def test_matches_oracle(self, rng):
        u = rng.random((6, 6))
        w = WeightField(rng.standard_normal((8, 6, 6)))
        assert rel_err(apply_adaptive_filter(u, w), oracles.apply_filter(u, w.planes)) < 1e-12

    def test_mismatch(self):
        with pytest.raises(ValueError):
            apply_adaptive_filter(np.zeros((4, 4)), init_weights(3, 4))


class TestSuperResolve:
    @pytest.mark.parametrize("init", ["nearest", "bilinear", "bicubic"])
    @pytest.mark.parametrize("renorm", [False, True])
    def test_constant(self, init, renorm):
        lr = np.full((5, 4), 0.3141)
        res = super_resolve(lr, SRConfig(z=3, init_method=init, renormalize_weights=renorm))
        assert res.image.shape == (15, 12)
        assert np.all(res.image == 0.3141)

    def test_shape(self, rng):
        res = super_resolve(rng.random((6, 5)), SRConfig(z=4, solver=FAST))
        assert res.image.shape == (24, 20)
        assert 0.0 <= res.image.min() and res.image.max() <= 1.0

    def test_rejects_tiny(self):
        with pytest.raises(ValueError):
            super_resolve(np.zeros((1, 5)))

    def test_stage_composition(self, rng):
        lr = rng.random((8, 8))
        cfg = SRConfig(z=2, solver=FAST, init_method="bicubic", renormalize_weights=True)
        res = super_resolve(lr, cfg)
        est = estimate_weights(lr, cfg.solver)
        w = upsample_weight_field(renormalize(est.weights, cfg.renorm_floor), 2)
        manual = np.clip(apply_adaptive_filter(upscale_bicubic(lr, 2), w), 0, 1)
        assert np.array_equal(res.image, manual)
        assert (res.iters, res.energy) == (est.iters, est.energy)

    def test_deterministic_across_workers(self, rng):
        lr = rng.random((7, 7))
        a = super_resolve(lr, SRConfig(solver=FAST))
        b = super_resolve(lr, SRConfig(solver=FAST), workers=4)
        assert np.array_equal(a.image, b.image)

    def test_renormalized_brightness_bound(self, rng):
        lr = rng.random((6, 6)) * 0.5 + 0.25
        cfg = SRConfig(z=2, solver=FAST, renormalize_weights=True)
        res = super_resolve(lr, cfg)
        est = estimate_weights(lr, cfg.solver)
        w_hr = upsample_weight_field(renormalize(est.weights, cfg.renorm_floor), 2)
        nonneg = np.all(w_hr.planes >= 0, axis=0)
        init = upscale_nearest(lr, 2)
        assert nonneg.any()
        vals = res.image[nonneg]
        assert vals.min() >= init.min() - 1e-12 and vals.max() <= init.max() + 1e-12

    def test_step_edge_scene(self):
        hr = edge_scene(48)
        lr = downsample_block(hr, 3)
        res = super_resolve(lr, SRConfig(solver=FAST))
        assert res.image.shape == hr.shape
        assert np.all(np.isfinite(res.image))


def test_inputs_not_mutated(rng):
    lr = rng.random((6, 6))
    lr_copy = lr.copy()
    est = estimate_weights(lr, FAST)
    planes = est.weights.planes.copy()
    super_resolve(lr, SRConfig(z=2, solver=FAST, renormalize_weights=True))
    apply_adaptive_filter(lr, est.weights)
    upsample_weight_field(est.weights, 2)
    renormalize(est.weights)
    tv_filter_upscale(lr, 2)
    hr = rng.random((12, 12))
    hr_copy = hr.copy()
    compare(hr, 2, ["nearest", "tv", "ours"], sr_config=SRConfig(solver=FAST))
    assert np.array_equal(lr, lr_copy) and np.array_equal(hr, hr_copy)
    assert np.array_equal(est.weights.planes, planes)
