import math

import numpy as np
import pytest
import torch

from photorevive.sphist import (BinCenters, InvalidConfigError,
                                InvalidInputError, SpHist, compute_sphist,
                                downsample_sphist, emd_loss, init_bin_centers,
                                pool_global)


class TestInitBinCenters:
    def test_equally_spaced_four_bins(self):
        c = init_bin_centers(4, -1.0, 1.0)
        assert torch.allclose(c.u, torch.tensor([-1.0, -0.5, 0.0, 0.5]))

    def test_single_bin_sits_at_v_min(self):
        c = init_bin_centers(1, -1.0, 1.0)
        assert torch.allclose(c.u, torch.tensor([-1.0]))

    def test_two_bins_unit_interval(self):
        c = init_bin_centers(2, 0.0, 1.0)
        assert torch.allclose(c.u, torch.tensor([0.0, 0.5]))

    @pytest.mark.parametrize("K,vmin,vmax", [(0, -1, 1), (4, 1, -1), (4, 0, 0)])
    def test_invalid_config_rejected(self, K, vmin, vmax):
        with pytest.raises(InvalidConfigError):
            init_bin_centers(K, vmin, vmax)


class TestComputeSphist:
    def test_symmetric_centers_split_mass_evenly(self):
        c = BinCenters(2, sigma=0.1)
        with torch.no_grad():
            c.u.copy_(torch.tensor([-0.5, 0.5]))
        h = compute_sphist(torch.zeros(3, 3), c)
        assert torch.allclose(h.h, torch.full((3, 3, 2), 0.5))

    def test_single_bin_absorbs_all_mass(self):
        c = init_bin_centers(1)
        h = compute_sphist(torch.rand(4, 4) * 2 - 1, c)
        assert torch.allclose(h.h, torch.ones(4, 4, 1))

    def test_scalar_case_matches_hand_evaluation(self):
        # D=0.3, centers (-0.5, 0.5), sigma=0.1:
        # bin-2 weight = exp(-2) / (exp(-32) + exp(-2))
        c = BinCenters(2, sigma=0.1)
        with torch.no_grad():
            c.u.copy_(torch.tensor([-0.5, 0.5]))
        h = compute_sphist(torch.full((1, 1), 0.3), c)
        expected = math.exp(-2) / (math.exp(-32) + math.exp(-2))
        assert h.h[0, 0, 1].item() == pytest.approx(expected, abs=1e-7)

    @pytest.mark.parametrize("K", [1, 2, 8, 64])
    def test_rows_sum_to_one(self, K):
        c = init_bin_centers(K)
        h = compute_sphist(torch.rand(16, 16) * 2 - 1, c)
        sums = h.h.sum(dim=-1)
        assert torch.allclose(sums, torch.ones_like(sums), atol=1e-5)
        assert (h.h >= 0).all()

    def test_argmax_is_nearest_center(self):
        c = init_bin_centers(8)
        vals = torch.rand(20, 20) * 2 - 1
        h = compute_sphist(vals, c)
        nearest = (vals.unsqueeze(-1) - c.u).abs().argmin(dim=-1)
        assert (h.h.argmax(dim=-1) == nearest).all()

    def test_non_finite_rejected(self):
        with pytest.raises(InvalidInputError):
            compute_sphist(torch.full((2, 2), float("nan")), init_bin_centers(4))

    def test_gradients_match_finite_differences(self):
        # central differences, step 1e-4, relative error < 1e-3
        torch.manual_seed(7)
        for _ in range(20):
            K = int(torch.randint(2, 6, ()).item())
            c = BinCenters(K)
            vals = (torch.rand(3, 3, dtype=torch.float64) * 2 - 1)
            u0 = torch.rand(K, dtype=torch.float64) * 2 - 1

            def f(v, u):
                d = v.unsqueeze(-1) - u
                logits = -(d * d) / (2 * c.sigma**2)
                h = torch.softmax(logits, dim=-1)
                w = torch.arange(1.0, K + 1, dtype=torch.float64)
                return (h * w).sum()

            v = vals.clone().requires_grad_(True)
            u = u0.clone().requires_grad_(True)
            f(v, u).backward()
            eps = 1e-4
            for tensor, grad in ((v, v.grad), (u, u.grad)):
                flat = tensor.detach().reshape(-1)
                gflat = grad.reshape(-1)
                for i in range(flat.numel()):
                    plus = flat.clone()
                    minus = flat.clone()
                    plus[i] += eps
                    minus[i] -= eps
                    if tensor is v:
                        hi = f(plus.reshape(3, 3), u0)
                        lo = f(minus.reshape(3, 3), u0)
                    else:
                        hi = f(vals, plus)
                        lo = f(vals, minus)
                    num = (hi - lo) / (2 * eps)
                    denom = max(abs(num.item()), abs(gflat[i].item()), 1e-6)
                    assert abs(num.item() - gflat[i].item()) / denom < 1e-3


class TestPoolGlobal:
    def test_constant_field_pools_to_pixel_distribution(self):
        base = torch.softmax(torch.randn(5), dim=0)
        h = SpHist(base.expand(4, 4, 5).clone())
        assert torch.allclose(pool_global(h), base, atol=1e-7)

    def test_one_hot_average(self):
        h = SpHist(torch.tensor([[[1.0, 0.0]], [[0.0, 1.0]]]))
        assert torch.allclose(pool_global(h), torch.tensor([0.5, 0.5]))

    def test_pooled_sums_to_one(self):
        h = SpHist(torch.softmax(torch.randn(8, 8, 16), dim=-1))
        assert pool_global(h).sum().item() == pytest.approx(1.0, abs=1e-5)


class TestEmdLoss:
    def test_identical_distributions_give_zero(self):
        p = torch.softmax(torch.randn(6), dim=0)
        assert emd_loss(p, p).item() == 0.0

    def test_opposite_one_hots_k3(self):
        p = torch.tensor([1.0, 0.0, 0.0])
        q = torch.tensor([0.0, 0.0, 1.0])
        assert emd_loss(p, q).item() == pytest.approx(2.0)

    def test_adjacent_one_hots_k3(self):
        p = torch.tensor([1.0, 0.0, 0.0])
        q = torch.tensor([0.0, 1.0, 0.0])
        assert emd_loss(p, q).item() == pytest.approx(1.0)

    def test_symmetry(self):
        p = torch.softmax(torch.randn(10), dim=0)
        q = torch.softmax(torch.randn(10), dim=0)
        assert emd_loss(p, q).item() == pytest.approx(emd_loss(q, p).item())

    def test_nonnegative(self):
        for _ in range(20):
            p = torch.softmax(torch.randn(7), dim=0)
            q = torch.softmax(torch.randn(7), dim=0)
            assert emd_loss(p, q).item() >= 0.0

    def test_unnormalized_rejected(self):
        p = torch.tensor([0.7, 0.7])
        q = torch.tensor([0.5, 0.5])
        with pytest.raises(InvalidInputError):
            emd_loss(p, q)

    def test_gradient_matches_finite_differences(self):
        torch.manual_seed(3)
        logits = torch.randn(8, dtype=torch.float64)
        q = torch.softmax(torch.randn(8, dtype=torch.float64), dim=0)

        def f(lg):
            return emd_loss(torch.softmax(lg, dim=0), q)

        x = logits.clone().requires_grad_(True)
        f(x).backward()
        eps = 1e-4
        for i in range(8):
            plus = logits.clone()
            minus = logits.clone()
            plus[i] += eps
            minus[i] -= eps
            num = (f(plus) - f(minus)).item() / (2 * eps)
            denom = max(abs(num), abs(x.grad[i].item()), 1e-6)
            assert abs(num - x.grad[i].item()) / denom < 1e-3


class TestDownsampleSphist:
    def test_constant_field_preserved(self):
        base = torch.softmax(torch.randn(4), dim=0)
        h = SpHist(base.expand(2, 2, 4).clone())
        out = downsample_sphist(h, (1, 1))
        assert torch.allclose(out.h[0, 0], base, atol=1e-7)

    def test_one_hot_pair_averages(self):
        h = SpHist(torch.tensor([[[1.0, 0.0]], [[0.0, 1.0]]]))
        out = downsample_sphist(h, (1, 1))
        assert torch.allclose(out.h[0, 0], torch.tensor([0.5, 0.5]))

    def test_rows_stay_normalized(self):
        h = SpHist(torch.softmax(torch.randn(8, 8, 6), dim=-1))
        out = downsample_sphist(h, (2, 2))
        sums = out.h.sum(dim=-1)
        assert torch.allclose(sums, torch.ones_like(sums), atol=1e-5)

    def test_non_divisible_target_rejected(self):
        h = SpHist(torch.softmax(torch.randn(8, 8, 4), dim=-1))
        with pytest.raises(InvalidConfigError):
            downsample_sphist(h, (3, 3))
