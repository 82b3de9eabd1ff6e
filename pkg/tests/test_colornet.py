import numpy as np
import pytest
import torch

from photorevive.colornet import (ColorizationNet, ColorizeConfig,
                                  InvalidInputError, assemble_output,
                                  pack_hist_pair, tiny_colorize_config)
from photorevive.colorspace import lab_to_rgb, rgb_to_lab
from photorevive.metrics import psnr
from photorevive.model import RepairModel, tiny_model_config
from photorevive.sphist import SpHist


def _hists(B, K, H, W):
    return [torch.softmax(torch.randn(B, 2 * K, H // (4 * 2**i), W // (4 * 2**i)),
                          dim=1)
            for i in range(4)]


@pytest.fixture(scope="module")
def net():
    torch.manual_seed(0)
    return ColorizationNet(tiny_colorize_config(K=4))


class TestColorize:
    def test_output_shape_and_range(self, net):
        L = torch.rand(1, 1, 64, 64)
        with torch.no_grad():
            ab = net(L, _hists(1, 4, 64, 64))
        assert ab.shape == (1, 2, 64, 64)
        assert ab.min() >= -1.0 and ab.max() <= 1.0

    def test_fusion_happens_at_four_scales(self, net):
        # wrong histogram resolution at any scale is rejected
        L = torch.rand(1, 1, 64, 64)
        bad = _hists(1, 4, 64, 64)
        bad[2] = torch.randn(1, 8, 5, 5)
        with pytest.raises(InvalidInputError):
            net(L, bad)

    def test_default_encoder_units(self):
        cfg = ColorizeConfig()
        assert cfg.encoder_units == (6, 12, 24, 16)
        assert cfg.fusion_units == 6


class TestPackHistPair:
    def test_packs_to_2k_planes(self):
        h_a = SpHist(torch.softmax(torch.randn(8, 8, 4), dim=-1), "a")
        h_b = SpHist(torch.softmax(torch.randn(8, 8, 4), dim=-1), "b")
        t = pack_hist_pair(h_a, h_b)
        assert t.shape == (1, 8, 8, 8)
        assert torch.equal(t[0, :4].permute(1, 2, 0), h_a.h)
        assert torch.equal(t[0, 4:].permute(1, 2, 0), h_b.h)


class TestAssembleOutput:
    def test_zero_chroma_is_grayscale(self):
        lab = assemble_output(np.random.rand(8, 8), np.zeros((8, 8, 2)))
        assert np.array_equal(lab.ab, np.zeros((8, 8, 2)))

    def test_assemble_then_split_is_identity(self):
        L = np.random.rand(8, 8)
        ab = np.random.uniform(-1, 1, (8, 8, 2))
        lab = assemble_output(L, ab)
        assert np.allclose(lab.L, L)
        assert np.allclose(lab.ab, ab)

    def test_ground_truth_roundtrip_psnr(self, rng):
        rgb = rng.uniform(0, 1, (32, 32, 3))
        lab = rgb_to_lab(rgb)
        out = assemble_output(lab.L, lab.ab)
        assert psnr(lab_to_rgb(out), rgb) > 40.0

    def test_shape_mismatch_rejected(self):
        with pytest.raises(InvalidInputError):
            assemble_output(np.random.rand(8, 8), np.zeros((4, 4, 2)))


class TestGradientFlow:
    def test_bin_centers_receive_gradients(self):
        torch.manual_seed(0)
        model = RepairModel(tiny_model_config())
        before = model.centers_a.u.detach().clone()
        opt = torch.optim.Adam(model.parameters(), lr=1e-2)
        L = torch.rand(1, 1, 64, 64)
        ref_L = torch.rand(1, 1, 64, 64)
        ref_ab = torch.rand(64, 64, 2) * 2 - 1
        _, ab = model(L, ref_L, ref_ab)
        loss = ab.abs().mean()
        opt.zero_grad()
        loss.backward()
        opt.step()
        assert not torch.equal(model.centers_a.u.detach(), before)
