import numpy as np
import pytest
import torch

from uranker.histograms import HistogramPrior, channel_histogram


def test_constant_midgray_lands_in_bin_32():
    img = torch.full((3, 8, 8), 0.5)
    hist = channel_histogram(img, bins=64)
    assert hist.shape == (64, 3)
    assert torch.all(hist[32] == 1.0)
    assert hist.sum() == pytest.approx(3.0)
    assert (hist > 0).sum() == 3


def test_all_black_lands_in_bin_0():
    hist = channel_histogram(torch.zeros(3, 4, 4), bins=64)
    assert torch.all(hist[0] == 1.0)


def test_extremes_split_between_first_and_last_bin():
    img = torch.tensor([0.0, 1.0]).reshape(1, 2, 1).expand(3, 2, 1)
    hist = channel_histogram(img, bins=64)
    assert torch.all(hist[0] == 0.5)
    assert torch.all(hist[63] == 0.5)
    assert hist.sum() == pytest.approx(3.0)


def test_values_clamped_before_binning():
    img = torch.tensor([-1.0, 2.0]).reshape(1, 2, 1).expand(3, 2, 1)
    hist = channel_histogram(img, bins=8)
    assert torch.all(hist[0] == 0.5)
    assert torch.all(hist[7] == 0.5)


def test_permutation_invariance():
    g = torch.Generator().manual_seed(0)
    img = torch.rand(3, 6, 7, generator=g)
    perm = torch.randperm(6 * 7, generator=g)
    shuffled = img.reshape(3, -1)[:, perm].reshape(3, 6, 7)
    assert torch.equal(channel_histogram(img, 32), channel_histogram(shuffled, 32))


def test_per_channel_normalization():
    g = torch.Generator().manual_seed(1)
    img = torch.rand(2, 3, 10, 12, generator=g)
    hist = channel_histogram(img, 16)
    assert hist.shape == (2, 16, 3)
    assert torch.allclose(hist.sum(dim=1), torch.ones(2, 3), atol=1e-6)
    assert torch.all(hist >= 0)


def test_empty_image_rejected():
    with pytest.raises(ValueError):
        channel_histogram(torch.zeros(3, 0, 4), bins=8)


def test_bad_bins_rejected():
    with pytest.raises(ValueError):
        channel_histogram(torch.zeros(3, 2, 2), bins=1)


def test_zero_histogram_zero_bias_gives_zero_token():
    prior = HistogramPrior(bins=8, dims=(6, 12))
    with torch.no_grad():
        for lin in prior.proj:
            lin.bias.zero_()
    tok = prior.embed(torch.zeros(8, 3), scale_id=0)
    assert torch.all(tok == 0)


def test_embedding_deterministic():
    prior = HistogramPrior(bins=8, dims=(6,))
    h = torch.rand(8, 3)
    assert torch.equal(prior.embed(h, 0), prior.embed(h, 0))


def test_embedding_linearity_against_reference_matvec():
    torch.manual_seed(2)
    prior = HistogramPrior(bins=8, dims=(10,))
    h = torch.rand(8, 3)
    lin = prior.proj[0]
    bias = lin.bias.detach()

    out1 = prior.embed(h, 0).squeeze(0)
    out2 = prior.embed(2 * h, 0).squeeze(0)
    assert torch.allclose(out2 - bias, 2 * (out1 - bias), atol=1e-6)

    # reference matrix-vector product
    ref = lin.weight.detach().numpy() @ h.flatten().numpy() + bias.numpy()
    np.testing.assert_allclose(out1.detach().numpy(), ref, atol=1e-6)


def test_embedding_scale_out_of_range():
    prior = HistogramPrior(bins=8, dims=(6,))
    with pytest.raises(IndexError):
        prior.embed(torch.zeros(8, 3), scale_id=5)
