"""Residual U-shaped enhancement network built from Conv-IN-ELU blocks.

The network predicts a residual on top of its input and finishes with a
conditional per-channel min-max rescale ("normalization tail") that only
touches channels whose values overflow [0, 1].
"""

from dataclasses import dataclass, field

import torch
import torch.nn as nn
import torch.nn.functional as F

TAIL_DELTA = 1e-8


@dataclass
class EnhancerConfig:
    widths: tuple = (32, 64, 128)
    use_tail: bool = True

    def validate(self):
        if len(self.widths) < 1:
            raise ValueError("widths must name at least one stage")
        if any(w < 1 for w in self.widths):
            raise ValueError("stage widths must be positive")

    def to_dict(self):
        return {"widths": list(self.widths), "use_tail": self.use_tail}

    @classmethod
    def from_dict(cls, d):
        return cls(widths=tuple(d["widths"]), use_tail=bool(d["use_tail"]))


def normalization_tail(image, delta=TAIL_DELTA):
    """Per-channel min-max rescale applied only where a channel leaves [0, 1].

    `image` is (B, C, H, W) or (C, H, W). Channels already inside [0, 1] pass
    through bitwise unchanged; a constant overflowing channel collapses to
    zeros via the `delta` guard.
    """
    squeeze = image.dim() == 3
    x = image.unsqueeze(0) if squeeze else image
    mn = x.amin(dim=(2, 3), keepdim=True)
    mx = x.amax(dim=(2, 3), keepdim=True)
    overflow = (mn < 0.0) | (mx > 1.0)
    rescaled = (x - mn) / (mx - mn + delta)
    out = torch.where(overflow, rescaled, x)
    return out.squeeze(0) if squeeze else out


class ConvINELU(nn.Module):
    """3x3 convolution + instance norm + ELU."""

    def __init__(self, in_ch, out_ch, stride=1):
        super().__init__()
        self.conv = nn.Conv2d(in_ch, out_ch, 3, stride=stride, padding=1)
        self.norm = nn.InstanceNorm2d(out_ch, affine=True)
        self.act = nn.ELU()

    def forward(self, x):
        return self.act(self.norm(self.conv(x)))


class Enhancer(nn.Module):
    """U-shaped residual enhancement network.

    Encoder stages halve the resolution; the decoder mirrors them with
    bilinear upsampling and skip concatenation. The global residual keeps
    the identity easy to represent, and the normalization tail bounds the
    output to [0, 1].
    """

    def __init__(self, config: EnhancerConfig | None = None):
        super().__init__()
        self.config = config or EnhancerConfig()
        self.config.validate()
        widths = self.config.widths

        self.stem = ConvINELU(3, widths[0])
        downs = []
        prev = widths[0]
        for w in widths:
            downs.append(nn.Sequential(ConvINELU(prev, w, stride=2), ConvINELU(w, w)))
            prev = w
        self.downs = nn.ModuleList(downs)

        ups = []
        skip_widths = [widths[0]] + list(widths[:-1])
        for w, skip_w in zip(reversed(widths), reversed(skip_widths)):
            ups.append(nn.Sequential(ConvINELU(w + skip_w, skip_w), ConvINELU(skip_w, skip_w)))
        self.ups = nn.ModuleList(ups)
        self.out_conv = nn.Conv2d(widths[0], 3, 3, padding=1)

    @property
    def total_stride(self):
        return 2 ** len(self.config.widths)

    def residual(self, x):
        h, w = x.shape[-2:]
        if h % self.total_stride or w % self.total_stride:
            raise ValueError(
                f"spatial dims {h}x{w} must be divisible by {self.total_stride}"
            )
        feat = self.stem(x)
        skips = [feat]
        for down in self.downs:
            skips.append(down(skips[-1]))
        y = skips.pop()
        for up in self.ups:
            skip = skips.pop()
            y = F.interpolate(y, size=skip.shape[-2:], mode="bilinear", align_corners=False)
            y = up(torch.cat([y, skip], dim=1))
        return self.out_conv(y)

    def forward(self, x):
        y = x + self.residual(x)
        if self.config.use_tail:
            y = normalization_tail(y)
        return y
