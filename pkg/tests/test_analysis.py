import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import oracles
from conftest import edge_scene, rel_err
from varsr.analysis import (
    IDENTICAL,
    METHODS,
    compare,
    edge_count,
    mse,
    psnr,
    sobel_magnitude,
)
from varsr.pipeline import SRConfig
from varsr.weights import SolverConfig

FAST_SR = SRConfig(solver=SolverConfig(max_iters=30))


class TestMetrics:
    def test_mse(self, rng):
        a = rng.random((4, 4))
        assert mse(a, a) == 0.0
        assert mse(np.zeros((3, 3)), np.full((3, 3), 16 / 255)) == pytest.approx((16 / 255) ** 2, rel=1e-15)
        b = rng.random((4, 4))
        assert mse(a, b) == pytest.approx(oracles.mse(a, b), rel=1e-14)

    def test_psnr(self, rng):
        a = rng.random((5, 5))
        assert psnr(a, a) == IDENTICAL
        assert psnr(np.zeros((2, 2)), np.full((2, 2), 16 / 255)) == pytest.approx(
            20 * math.log10(255 / 16), abs=1e-9
        )
        b = rng.random((5, 5))
        assert psnr(a, b) == psnr(b, a)

    def test_shape_mismatch(self):
        with pytest.raises(ValueError):
            mse(np.zeros((2, 2)), np.zeros((2, 3)))

    @settings(max_examples=50, deadline=None)
    @given(st.floats(1e-6, 0.5), st.floats(1e-6, 0.5))
    def test_psnr_monotone(self, d1, d2):
        z = np.zeros((2, 2))
        p1 = psnr(z, np.full((2, 2), d1))
        p2 = psnr(z, np.full((2, 2), d2))
        if mse(z, np.full((2, 2), d1)) < mse(z, np.full((2, 2), d2)):
            assert p1 > p2


class TestSobel:
    def test_constant(self):
        assert np.all(sobel_magnitude(np.full((5, 5), 0.7)) == 0.0)

    def test_unit_step(self):
        u = np.zeros((6, 6))
        u[:, 3:] = 1.0
        m = sobel_magnitude(u)
        assert np.all(m[1:-1, 2] == 4.0) and np.all(m[1:-1, 3] == 4.0)
        assert np.all(m[:, [0, 1, 4, 5]] == 0.0)

    def test_matches_oracle(self, rng):
        u = rng.random((5, 5))
        assert rel_err(sobel_magnitude(u), oracles.sobel(u)) < 1e-12

    def test_translation_equivariant(self, rng):
        u = rng.random((10, 10))
        shifted = np.roll(u, (1, 2), axis=(0, 1))
        a = sobel_magnitude(u)
        b = sobel_magnitude(shifted)
        np.testing.assert_allclose(b[3:-1, 4:-1], a[2:-2, 2:-3], rtol=0, atol=1e-14)


class TestEdgeCount:
    def test_basic(self):
        assert edge_count(np.zeros((3, 3)), 0.0) == 0
        assert edge_count(np.array([[3.0, 5.0]]), 4.0) == 1
        assert edge_count(np.array([[4.0, 5.0]]), 4.0) == 1
        field = np.zeros((4, 4))
        field[0, :3] = [0.1, 2, 3]
        assert edge_count(field, 0.0) == 3

    def test_negative_threshold(self):
        with pytest.raises(ValueError):
            edge_count(np.zeros(2), -1.0)

    def test_monotone_in_threshold(self, rng):
        m = sobel_magnitude(rng.random((12, 12)))
        counts = [edge_count(m, t) for t in np.linspace(0, 4, 40)]
        assert all(a >= b for a, b in zip(counts, counts[1:]))


class TestCompare:
    def test_constant_nearest(self):
        rep = compare(np.full((9, 9), 0.5), 3, ["nearest"])
        (row,) = rep.rows
        assert row.psnr == IDENTICAL and row.edge_count == 0

    def test_row_order_and_timing(self):
        methods = ["tv", "nearest", "ours", "bicubic"]
        rep = compare(edge_scene(24), 3, methods, sr_config=FAST_SR)
        assert [r.name for r in rep.rows] == methods
        assert all(math.isfinite(r.wall_time) and r.wall_time >= 0 for r in rep.rows)

    def test_not_divisible(self):
        with pytest.raises(ValueError, match="divisible"):
            compare(np.zeros((10, 10)), 3, ["nearest"])

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            compare(np.zeros((9, 9)), 3, ["lanczos"])

    def test_serialization(self):
        rep = compare(np.full((6, 6), 0.2), 2, ["nearest", "bilinear"], reference="flat")
        lines = rep.to_jsonl().splitlines()
        records = [json.loads(line) for line in lines]
        assert records[0] == {"record": "compare", "reference": "flat", "z": 2,
                              "sobel_threshold": 0.25}
        assert [r["name"] for r in records[1:]] == ["nearest", "bilinear"]
        assert records[1]["psnr_db"] == "identical"
        assert set(records[1]) == {"record", "name", "psnr_db", "edge_count", "wall_time_s"}
        assert "wall_time_s" not in json.loads(rep.to_jsonl(timing=False).splitlines()[1])
        table = rep.format_table()
        assert "identical" in table and "nearest" in table

    def test_reproducible_and_worker_invariant(self):
        hr = edge_scene(24)
        a = compare(hr, 3, METHODS, sr_config=FAST_SR)
        b = compare(hr, 3, METHODS, sr_config=FAST_SR, workers=4)
        assert a.to_jsonl(timing=False) == b.to_jsonl(timing=False)
        assert a.format_table(timing=False) == b.format_table(timing=False)
        for ra, rb in zip(a.rows, b.rows):
            assert np.array_equal(ra.image, rb.image)
