"""Color-histogram prior: per-channel histograms embedded as attention tokens."""

import torch
import torch.nn as nn

DEFAULT_BINS = 64


def channel_histogram(image, bins=DEFAULT_BINS):
    """Normalized per-channel histogram of an RGB image.

    `image` is (3, H, W) or (B, 3, H, W) with values nominally in [0, 1];
    values are clamped before binning. [0, 1] is split into `bins` equal
    intervals, the last one right-closed, and each channel is normalized to
    sum to 1. Returns (bins, 3) or (B, bins, 3).
    """
    if bins < 2:
        raise ValueError("bins must be >= 2")
    squeeze = image.dim() == 3
    x = image.unsqueeze(0) if squeeze else image
    if x.dim() != 4 or x.shape[1] != 3:
        raise ValueError(f"expected an RGB image, got shape {tuple(image.shape)}")
    b, _, h, w = x.shape
    n_px = h * w
    if n_px == 0:
        raise ValueError("image has no pixels")

    with torch.no_grad():
        v = x.detach().clamp(0.0, 1.0)
        idx = (v * bins).floor().clamp(max=bins - 1).long()  # (B,3,H,W)
        flat = idx.reshape(b * 3, n_px)
        hist = torch.zeros(b * 3, bins, dtype=x.dtype, device=x.device)
        hist.scatter_add_(1, flat, torch.ones_like(flat, dtype=x.dtype))
        hist = hist.reshape(b, 3, bins).transpose(1, 2) / n_px
    return hist.squeeze(0) if squeeze else hist


class HistogramPrior(nn.Module):
    """Embeds the shared per-channel histogram as one token per scale.

    The (bins x 3) histogram is flattened to a 3*bins vector and passed
    through a per-scale affine projection.
    """

    def __init__(self, bins, dims):
        super().__init__()
        if bins < 2:
            raise ValueError("bins must be >= 2")
        self.bins = bins
        self.proj = nn.ModuleList([nn.Linear(3 * bins, d) for d in dims])

    def embed(self, hist, scale_id):
        """Token (..., 1, C_s) for one scale from a (bins, 3) histogram."""
        if scale_id >= len(self.proj):
            raise IndexError(f"scale {scale_id} out of range")
        flat = hist.flatten(-2)
        return self.proj[scale_id](flat).unsqueeze(-2)

    def forward(self, image):
        hist = channel_histogram(image, self.bins)
        return [self.embed(hist, s) for s in range(len(self.proj))]
