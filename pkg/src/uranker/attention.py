"""Token attention layers for the ranker.

`ConvAttention` is multi-head self-attention over the full token sequence
with an optional depthwise-convolutional position term that is applied to the
image tokens only. Disabling the position term (`conv_pos=False`) yields a
plain multi-head self-attention, used as the oracle-comparison fallback.
"""

import torch
import torch.nn as nn

# tokens are laid out [class, histogram, image...]
N_SPECIAL = 2


class ConvAttention(nn.Module):
    def __init__(self, dim, num_heads, conv_pos=True, pos_kernel=3):
        super().__init__()
        if dim % num_heads:
            raise ValueError(f"dim {dim} not divisible by {num_heads} heads")
        self.num_heads = num_heads
        self.scale = (dim // num_heads) ** -0.5
        self.qkv = nn.Linear(dim, dim * 3)
        self.proj = nn.Linear(dim, dim)
        if conv_pos:
            self.pos_conv = nn.Conv2d(dim, dim, pos_kernel, padding=pos_kernel // 2, groups=dim)
        else:
            self.pos_conv = None

    def forward(self, tokens, grid=None, n_special=N_SPECIAL):
        """tokens: (B, N, C); grid: (h, w) of the image-token region.

        Shape-preserving. When the position term is enabled, the image tokens
        (everything past the first `n_special`) must form an h*w grid.
        """
        b, n, c = tokens.shape
        qkv = self.qkv(tokens).reshape(b, n, 3, self.num_heads, c // self.num_heads)
        q, k, v = qkv.permute(2, 0, 3, 1, 4)
        attn = (q @ k.transpose(-2, -1)) * self.scale
        attn = attn.softmax(dim=-1)
        out = (attn @ v).transpose(1, 2).reshape(b, n, c)

        if self.pos_conv is not None:
            if grid is None:
                raise ValueError("grid required when the conv position term is enabled")
            h, w = grid
            if n - n_special != h * w:
                raise ValueError(f"{n - n_special} image tokens do not fill a {h}x{w} grid")
            q_flat = q.transpose(1, 2).reshape(b, n, c)
            v_flat = v.transpose(1, 2).reshape(b, n, c)
            v_map = v_flat[:, n_special:].transpose(1, 2).reshape(b, c, h, w)
            pos = self.pos_conv(v_map).flatten(2).transpose(1, 2)
            out = torch.cat(
                [out[:, :n_special], out[:, n_special:] + q_flat[:, n_special:] * pos], dim=1
            )
        return self.proj(out)


class FeedForward(nn.Module):
    def __init__(self, dim, ratio=2.0):
        super().__init__()
        hidden = max(1, int(dim * ratio))
        self.fc1 = nn.Linear(dim, hidden)
        self.act = nn.GELU()
        self.fc2 = nn.Linear(hidden, dim)

    def forward(self, x):
        return self.fc2(self.act(self.fc1(x)))


class TransformerLayer(nn.Module):
    """Pre-norm attention + feed-forward pair; maps a token sequence to a
    sequence of identical shape."""

    def __init__(self, dim, num_heads, conv_pos=True, ffn_ratio=2.0):
        super().__init__()
        self.norm1 = nn.LayerNorm(dim)
        self.attn = ConvAttention(dim, num_heads, conv_pos=conv_pos)
        self.norm2 = nn.LayerNorm(dim)
        self.ffn = FeedForward(dim, ffn_ratio)

    def forward(self, tokens, grid=None):
        tokens = tokens + self.attn(self.norm1(tokens), grid)
        tokens = tokens + self.ffn(self.norm2(tokens))
        return tokens
