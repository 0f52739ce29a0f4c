import numpy as np
import pytest
import torch

from spdseq import (
    batch_wfm,
    consistency_report,
    recursive_stein_step,
    recursive_stein_wfm,
    stein_distance,
)
from spdseq.frechet import check_weights, wfm_objective

from conftest import random_spd, random_spd_batch


def grid_minimizer_1d(values, weights, lo, hi, points=200001):
    """Brute-force weighted Frechet mean for 1x1 matrices on a grid."""
    grid = np.linspace(lo, hi, points)
    obj = np.zeros_like(grid)
    for v, w in zip(values, weights):
        # squared Stein distance between 1x1 matrices [grid] and [v]
        obj += w * (np.log((grid + v) / 2.0) - 0.5 * np.log(grid * v))
    return grid[int(np.argmin(obj))]


class TestRecursiveStep:
    def test_endpoints(self, rng):
        m, x = random_spd(3, rng), random_spd(3, rng)
        assert torch.allclose(recursive_stein_step(m, x, 0.0), m, atol=1e-12)
        assert torch.allclose(recursive_stein_step(m, x, 1.0), x, atol=1e-12)

    def test_midpoint_is_stein_midpoint_scalar(self):
        m = torch.tensor([[1.0]], dtype=torch.float64)
        x = torch.tensor([[4.0]], dtype=torch.float64)
        mid = float(recursive_stein_step(m, x, 0.5))
        oracle = grid_minimizer_1d([1.0, 4.0], [0.5, 0.5], 0.5, 5.0)
        assert mid == pytest.approx(oracle, abs=1e-4)

    def test_midpoint_equidistant(self, rng):
        for _ in range(20):
            m, x = random_spd(3, rng), random_spd(3, rng)
            mid = recursive_stein_step(m, x, 0.5)
            assert float(stein_distance(mid, m)) == pytest.approx(
                float(stein_distance(mid, x)), abs=1e-9)

    def test_symmetric_output(self, rng):
        m, x = random_spd(4, rng), random_spd(4, rng)
        out = recursive_stein_step(m, x, 0.3)
        assert torch.allclose(out, out.mT, atol=1e-12)
        torch.linalg.cholesky(out)

    def test_commuting_reduces_to_scalar_recursion(self, rng):
        # Diagonal inputs stay diagonal and each diagonal entry follows
        # the 1-dimensional recursion independently.
        m = torch.diag(torch.tensor([1.0, 9.0], dtype=torch.float64))
        x = torch.diag(torch.tensor([4.0, 1.0], dtype=torch.float64))
        out = recursive_stein_step(m, x, 0.4)
        for i, (mi, xi) in enumerate([(1.0, 4.0), (9.0, 1.0)]):
            si = float(recursive_stein_step(
                torch.tensor([[mi]], dtype=torch.float64),
                torch.tensor([[xi]], dtype=torch.float64), 0.4))
            assert float(out[i, i]) == pytest.approx(si, abs=1e-12)
        assert float(out[0, 1]) == pytest.approx(0.0, abs=1e-12)

    def test_batched_matches_loop(self, rng):
        m = random_spd_batch(8, 3, rng)
        x = random_spd_batch(8, 3, rng)
        batched = recursive_stein_step(m, x, 0.37)
        for i in range(8):
            single = recursive_stein_step(m[i], x[i], 0.37)
            assert torch.allclose(batched[i], single, atol=1e-12)

    def test_differentiable(self, rng):
        m = random_spd(3, rng).requires_grad_(True)
        x = random_spd(3, rng)
        out = recursive_stein_step(m, x, 0.5)
        out.sum().backward()
        assert torch.isfinite(m.grad).all()


class TestCheckWeights:
    def test_rejects_negative(self):
        with pytest.raises(ValueError):
            check_weights(torch.tensor([0.5, -0.1], dtype=torch.float64), 2)

    def test_rejects_zero_sum(self):
        with pytest.raises(ValueError):
            check_weights(torch.tensor([0.0, 0.0], dtype=torch.float64), 2)

    def test_rejects_wrong_length(self):
        with pytest.raises(ValueError):
            check_weights(torch.tensor([1.0], dtype=torch.float64), 2)


class TestBatchWfm:
    def test_single_point(self, rng):
        a = random_spd(3, rng)
        out = batch_wfm(a.unsqueeze(0))
        assert float(stein_distance(out, a)) < 1e-6

    def test_scalar_pair_against_grid(self):
        x = torch.tensor([[[1.0]], [[4.0]]], dtype=torch.float64)
        out = float(batch_wfm(x))
        oracle = grid_minimizer_1d([1.0, 4.0], [0.5, 0.5], 0.5, 5.0)
        assert out == pytest.approx(oracle, abs=1e-4)

    def test_scalar_weighted_against_grid(self):
        x = torch.tensor([[[1.0]], [[4.0]], [[9.0]]], dtype=torch.float64)
        w = torch.tensor([0.5, 0.3, 0.2], dtype=torch.float64)
        out = float(batch_wfm(x, w))
        oracle = grid_minimizer_1d([1.0, 4.0, 9.0], [0.5, 0.3, 0.2], 0.5, 9.5)
        assert out == pytest.approx(oracle, abs=1e-4)

    def test_identical_points(self, rng):
        a = random_spd(3, rng)
        x = a.unsqueeze(0).expand(5, 3, 3)
        assert float(stein_distance(batch_wfm(x), a)) < 1e-6

    def test_first_order_stationarity(self, rng):
        x = random_spd_batch(6, 3, rng)
        w = torch.full((6,), 1.0 / 6.0, dtype=torch.float64)
        m = batch_wfm(x)
        base = wfm_objective(x, w, m)
        for _ in range(20):
            d = torch.as_tensor(rng.standard_normal((3, 3)))
            d = 1e-5 * (d + d.mT) / 2
            # batch_wfm stops on objective decrease < 1e-10, so allow the
            # matching slack around the numerical minimizer
            assert wfm_objective(x, w, m + d) >= base - 1e-8

    def test_weight_concentration(self, rng):
        x = random_spd_batch(3, 3, rng)
        w = torch.tensor([1e-8, 1e-8, 1.0 - 2e-8], dtype=torch.float64)
        out = batch_wfm(x, w)
        assert float(stein_distance(out, x[2])) < 1e-3


class TestRecursiveWfm:
    def test_matches_batch_on_small_sets(self, rng):
        # The recursive estimator is consistent, not exact; on small
        # well-conditioned sets it should land near the true mean.
        x = random_spd_batch(100, 3, rng, scale=0.3)
        rec = recursive_stein_wfm(x)
        orc = batch_wfm(x)
        assert float(stein_distance(rec, orc)) < 0.05

    def test_weighted_two_points_exact(self, rng):
        # With two points, one recursion step solves the problem exactly.
        x = torch.stack([random_spd(3, rng), random_spd(3, rng)])
        w = torch.tensor([0.7, 0.3], dtype=torch.float64)
        rec = recursive_stein_wfm(x, w)
        orc = batch_wfm(x, w)
        assert float(stein_distance(rec, orc)) < 1e-4

    def test_uniform_weights_match_default(self, rng):
        x = random_spd_batch(10, 3, rng)
        w = torch.full((10,), 0.1, dtype=torch.float64)
        a = recursive_stein_wfm(x, w)
        b = recursive_stein_wfm(x)
        assert float(stein_distance(a, b)) < 1e-12

    def test_rejects_unnormalized_weights(self, rng):
        x = random_spd_batch(3, 2, rng)
        with pytest.raises(ValueError):
            recursive_stein_wfm(x, torch.tensor([1.0, 1.0, 1.0], dtype=torch.float64))

    def test_convergence_to_population_mean(self, rng):
        # Samples centered at a known matrix: estimate error should shrink
        # with more data.
        center = random_spd(3, rng)
        l = torch.linalg.cholesky(center)
        def sample(n):
            pert = torch.as_tensor(rng.standard_normal((n, 3, 3))) * 0.05
            g = torch.eye(3, dtype=torch.float64) + pert
            return l @ g @ g.mT @ l.mT

        small = recursive_stein_wfm(sample(50))
        large = recursive_stein_wfm(sample(2000))
        assert float(stein_distance(large, center)) < float(stein_distance(small, center)) + 0.02
        assert float(stein_distance(large, center)) < 0.05


class TestDiagnostics:
    def test_consistency_report(self, rng):
        x = random_spd_batch(60, 3, rng, scale=0.3)
        rep = consistency_report(x, shuffles=5, ks=(10, 30, 60), seed=0)
        assert list(rep.ks) == [10, 30, 60]
        assert len(rep.variance) == 3
        assert len(rep.oracle_distance) == 3
        assert all(v >= 0 for v in rep.variance)
        # More data should track the full-stream oracle more closely.
        assert rep.oracle_distance[-1] <= rep.oracle_distance[0] + 0.05

    def test_report_csv(self, rng, tmp_path):
        x = random_spd_batch(20, 2, rng)
        rep = consistency_report(x, shuffles=3, ks=(5, 20), seed=1)
        path = tmp_path / "report.csv"
        rep.to_csv(path)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "k,variance,oracle_distance"
        assert len(lines) == 3
