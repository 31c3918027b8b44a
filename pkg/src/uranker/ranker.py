"""Quality ranker: histogram token, serial downsampling transformer blocks,
cross-scale parallel blocks with configurable connections, and per-scale score
heads averaged into a single unbounded quality score (higher = better)."""

from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from .attention import ConvAttention, FeedForward, TransformerLayer
from .histograms import HistogramPrior

CONNECTION_MODES = ("dynamic", "direct", "neighbour", "dense")

MAX_EVAL_SIDE = 512


@dataclass
class RankerConfig:
    num_scales: int = 4
    channels: tuple = (64, 128, 256, 320)
    patch_size: int = 2
    first_patch_size: int = 4
    heads: tuple = (2, 4, 8, 10)
    serial_depth: int = 2
    dcpb_groups: int = 2
    connection_mode: str = "dynamic"
    histogram_bins: int = 64
    conv_pos: bool = True
    ffn_ratio: float = 2.0

    def validate(self):
        if self.connection_mode not in CONNECTION_MODES:
            raise ValueError(
                f"connection_mode must be one of {CONNECTION_MODES}, got {self.connection_mode!r}"
            )
        if self.histogram_bins < 2:
            raise ValueError("histogram_bins must be >= 2")
        if self.num_scales < 1:
            raise ValueError("num_scales must be >= 1")
        if len(self.channels) != self.num_scales or len(self.heads) != self.num_scales:
            raise ValueError("channels and heads must list one entry per scale")
        for c, h in zip(self.channels, self.heads):
            if c % h:
                raise ValueError(f"channel width {c} not divisible by {h} heads")
        if self.patch_size < 2 or self.first_patch_size < 1:
            raise ValueError("patch sizes must downsample")
        if self.dcpb_groups < 0 or self.serial_depth < 1:
            raise ValueError("bad depth configuration")

    @property
    def total_stride(self):
        return self.first_patch_size * self.patch_size ** (self.num_scales - 1)

    @property
    def parallel_scale_ids(self):
        n = min(3, self.num_scales)
        return tuple(range(self.num_scales))[-n:]

    def to_dict(self):
        return {
            "num_scales": self.num_scales,
            "channels": list(self.channels),
            "patch_size": self.patch_size,
            "first_patch_size": self.first_patch_size,
            "heads": list(self.heads),
            "serial_depth": self.serial_depth,
            "dcpb_groups": self.dcpb_groups,
            "connection_mode": self.connection_mode,
            "histogram_bins": self.histogram_bins,
            "conv_pos": self.conv_pos,
            "ffn_ratio": self.ffn_ratio,
        }

    @classmethod
    def from_dict(cls, d):
        cfg = cls(
            num_scales=int(d["num_scales"]),
            channels=tuple(d["channels"]),
            patch_size=int(d["patch_size"]),
            first_patch_size=int(d["first_patch_size"]),
            heads=tuple(d["heads"]),
            serial_depth=int(d["serial_depth"]),
            dcpb_groups=int(d["dcpb_groups"]),
            connection_mode=str(d["connection_mode"]),
            histogram_bins=int(d["histogram_bins"]),
            conv_pos=bool(d["conv_pos"]),
            ffn_ratio=float(d["ffn_ratio"]),
        )
        cfg.validate()
        return cfg


def blend_scales(base, feats, amplitudes):
    """Elementwise cross-scale blend: base + sum(amp_i * feat_i).

    Every feature must already match `base` in shape (resampled and projected
    by the caller)."""
    out = base
    for f, a in zip(feats, amplitudes):
        if f.shape != base.shape:
            raise ValueError(f"shape mismatch in cross-scale blend: {tuple(f.shape)} vs {tuple(base.shape)}")
        out = out + a * f
    return out


def dynamic_connect(base, feat1, feat2, amp1, amp2):
    """Two-source cross-scale blend with learnable amplitudes."""
    return blend_scales(base, [feat1, feat2], [amp1, amp2])


class SerialBlock(nn.Module):
    """Patch-embed downsampling + transformer layers over [class, histogram,
    image...] tokens. Image tokens are reshaped back to a spatial map; the
    class and histogram tokens ride along in attention only."""

    def __init__(self, in_ch, dim, stride, num_heads, depth=1, conv_pos=True, ffn_ratio=2.0):
        super().__init__()
        self.dim = dim
        self.stride = stride
        self.embed = nn.Conv2d(in_ch, dim, kernel_size=stride, stride=stride)
        self.embed_norm = nn.LayerNorm(dim)
        self.cls_token = nn.Parameter(torch.zeros(1, 1, dim))
        nn.init.trunc_normal_(self.cls_token, std=0.02)
        self.layers = nn.ModuleList(
            [TransformerLayer(dim, num_heads, conv_pos, ffn_ratio) for _ in range(depth)]
        )

    def forward(self, x, hist_token):
        b, _, h, w = x.shape
        if h % self.stride or w % self.stride:
            raise ValueError(f"spatial dims {h}x{w} not divisible by stride {self.stride}")
        fmap = self.embed(x)
        hh, ww = fmap.shape[-2:]
        img_tokens = self.embed_norm(fmap.flatten(2).transpose(1, 2))
        cls = self.cls_token.expand(b, -1, -1)
        if hist_token.dim() == 2:
            hist_token = hist_token.unsqueeze(0)
        tokens = torch.cat([cls, hist_token.expand(b, -1, -1), img_tokens], dim=1)
        for layer in self.layers:
            tokens = layer(tokens, (hh, ww))
        fmap_out = tokens[:, 2:].transpose(1, 2).reshape(b, self.dim, hh, ww)
        return fmap_out, tokens[:, 0:1], tokens[:, 1:2]


class ParallelGroup(nn.Module):
    """One group of parallel per-scale blocks with cross-scale mixing.

    Each scale runs its own attention, then image-token maps are blended
    across scales according to the connection mode, then each scale runs its
    own feed-forward. Class/histogram tokens stay at their scale and are
    never resampled.
    """

    def __init__(self, dims, heads, conv_pos=True, ffn_ratio=2.0):
        super().__init__()
        self.dims = tuple(dims)
        n = len(dims)
        self.norm1 = nn.ModuleList([nn.LayerNorm(d) for d in dims])
        self.attn = nn.ModuleList(
            [ConvAttention(d, h, conv_pos=conv_pos) for d, h in zip(dims, heads)]
        )
        self.norm2 = nn.ModuleList([nn.LayerNorm(d) for d in dims])
        self.ffn = nn.ModuleList([FeedForward(d, ffn_ratio) for d in dims])
        self.cross_proj = nn.ModuleDict(
            {
                f"s{src}_to_s{tgt}": nn.Conv2d(dims[src], dims[tgt], 1)
                for src in range(n)
                for tgt in range(n)
                if src != tgt
            }
        )
        # learnable amplitudes for dynamic mode, zero-initialized so the first
        # forward matches the direct connection
        self.amplitudes = nn.Parameter(torch.zeros(n, n))

    def _amplitude(self, mode, tgt, src):
        if mode == "direct":
            return None
        if mode == "neighbour":
            return 1.0 if abs(tgt - src) == 1 else None
        if mode == "dense":
            return 1.0
        return self.amplitudes[tgt, src]

    def forward(self, states, mode):
        """states: list of (tokens, (h, w)) per scale, tokens laid out
        [class, histogram, image...]."""
        if mode not in CONNECTION_MODES:
            raise ValueError(f"unknown connection mode {mode!r}")
        mid = []
        for (tokens, grid), norm, attn in zip(states, self.norm1, self.attn):
            mid.append((tokens + attn(norm(tokens), grid), grid))

        maps = []
        for (tokens, (h, w)), d in zip(mid, self.dims):
            maps.append(tokens[:, 2:].transpose(1, 2).reshape(tokens.shape[0], d, h, w))

        mixed = []
        for tgt in range(len(maps)):
            feats, amps = [], []
            for src in range(len(maps)):
                if src == tgt:
                    continue
                amp = self._amplitude(mode, tgt, src)
                if amp is None:
                    continue
                f = F.interpolate(
                    maps[src], size=maps[tgt].shape[-2:], mode="bilinear", align_corners=False
                )
                feats.append(self.cross_proj[f"s{src}_to_s{tgt}"](f))
                amps.append(amp)
            mixed.append(blend_scales(maps[tgt], feats, amps))

        out = []
        for s, ((tokens, grid), fmap) in enumerate(zip(mid, mixed)):
            tokens = torch.cat([tokens[:, :2], fmap.flatten(2).transpose(1, 2)], dim=1)
            tokens = tokens + self.ffn[s](self.norm2[s](tokens))
            out.append((tokens, grid))
        return out


class Ranker(nn.Module):
    """Full quality-ranking network; `forward` maps (B, 3, H, W) images in
    [0, 1] to (B,) unbounded scores."""

    def __init__(self, config: RankerConfig | None = None):
        super().__init__()
        self.config = config or RankerConfig()
        self.config.validate()
        cfg = self.config

        self.hist_prior = HistogramPrior(cfg.histogram_bins, cfg.channels)
        strides = (cfg.first_patch_size,) + (cfg.patch_size,) * (cfg.num_scales - 1)
        blocks = []
        prev = 3
        for dim, stride, heads in zip(cfg.channels, strides, cfg.heads):
            blocks.append(
                SerialBlock(prev, dim, stride, heads, cfg.serial_depth, cfg.conv_pos, cfg.ffn_ratio)
            )
            prev = dim
        self.serial = nn.ModuleList(blocks)

        par_ids = cfg.parallel_scale_ids
        par_dims = [cfg.channels[i] for i in par_ids]
        par_heads = [cfg.heads[i] for i in par_ids]
        self.parallel = nn.ModuleList(
            [
                ParallelGroup(par_dims, par_heads, cfg.conv_pos, cfg.ffn_ratio)
                for _ in range(cfg.dcpb_groups)
            ]
        )
        self.score_heads = nn.ModuleList([nn.Linear(d, 1) for d in par_dims])

    def forward(self, images):
        squeeze = images.dim() == 3
        x = images.unsqueeze(0) if squeeze else images
        if x.dim() != 4 or x.shape[1] != 3:
            raise ValueError(f"expected RGB input, got shape {tuple(images.shape)}")
        h, w = x.shape[-2:]
        stride = self.config.total_stride
        if h < stride or w < stride:
            raise ValueError(f"image {h}x{w} smaller than the scale pyramid stride {stride}")
        if h % stride or w % stride:
            raise ValueError(f"image {h}x{w} not divisible by the pyramid stride {stride}")

        hist_tokens = self.hist_prior(x)
        feats = []
        for block, htok in zip(self.serial, hist_tokens):
            x, cls, hist = block(x, htok)
            feats.append((x, cls, hist))

        states = []
        for i in self.config.parallel_scale_ids:
            fmap, cls, hist = feats[i]
            tokens = torch.cat([cls, hist, fmap.flatten(2).transpose(1, 2)], dim=1)
            states.append((tokens, fmap.shape[-2:]))
        for group in self.parallel:
            states = group(states, self.config.connection_mode)

        scores = [
            head(tokens[:, 0]).squeeze(-1) for head, (tokens, _) in zip(self.score_heads, states)
        ]
        score = torch.stack(scores, dim=0).mean(dim=0)
        return score.squeeze(0) if squeeze else score


def fit_size(h, w, stride, max_side=MAX_EVAL_SIDE):
    """Evaluation sizing rule: scale the long side down to at most `max_side`,
    then snap both sides to the nearest multiple of `stride` (at least one)."""
    scale = min(1.0, max_side / max(h, w))
    nh = max(stride, round(h * scale / stride) * stride)
    nw = max(stride, round(w * scale / stride) * stride)
    return nh, nw


def prepare_image(image, stride, max_side=MAX_EVAL_SIDE):
    """Bilinearly resize an image tensor so the ranker can consume it."""
    squeeze = image.dim() == 3
    x = image.unsqueeze(0) if squeeze else image
    h, w = x.shape[-2:]
    nh, nw = fit_size(h, w, stride, max_side)
    if (nh, nw) != (h, w):
        x = F.interpolate(x, size=(nh, nw), mode="bilinear", align_corners=False)
    return x.squeeze(0) if squeeze else x
