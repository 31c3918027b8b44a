import torch

from uranker.attention import N_SPECIAL, ConvAttention, TransformerLayer


def reference_mhsa(attn: ConvAttention, tokens):
    """Plain multi-head softmax attention computed from the module's weights,
    written independently of the forward path."""
    b, n, c = tokens.shape
    heads = attn.num_heads
    d = c // heads
    w = attn.qkv.weight.detach()
    bias = attn.qkv.bias.detach()
    qkv = tokens @ w.t() + bias
    q, k, v = qkv.split(c, dim=-1)

    def split_heads(t):
        return t.reshape(b, n, heads, d).permute(0, 2, 1, 3)

    q, k, v = split_heads(q), split_heads(k), split_heads(v)
    logits = q @ k.transpose(-2, -1) * d**-0.5
    weights = torch.softmax(logits, dim=-1)
    out = (weights @ v).permute(0, 2, 1, 3).reshape(b, n, c)
    return out @ attn.proj.weight.detach().t() + attn.proj.bias.detach()


def test_shape_preserving_various_sizes():
    torch.manual_seed(0)
    for n_img, c, heads in ((4, 8, 2), (9, 12, 3), (1, 16, 4)):
        attn = ConvAttention(c, heads, conv_pos=False)
        tokens = torch.randn(2, N_SPECIAL + n_img, c)
        out = attn(tokens)
        assert out.shape == tokens.shape


def test_fallback_matches_reference_attention():
    torch.manual_seed(1)
    attn = ConvAttention(8, 2, conv_pos=False).eval()
    tokens = torch.randn(3, N_SPECIAL + 6, 8)
    with torch.no_grad():
        out = attn(tokens)
    ref = reference_mhsa(attn, tokens)
    assert torch.allclose(out, ref, atol=1e-6)


def test_image_token_permutation_equivariance_without_position_term():
    torch.manual_seed(2)
    attn = ConvAttention(8, 2, conv_pos=False).eval()
    tokens = torch.randn(1, N_SPECIAL + 12, 8)
    perm = torch.randperm(12)
    permuted = tokens.clone()
    permuted[:, N_SPECIAL:] = tokens[:, N_SPECIAL:][:, perm]
    with torch.no_grad():
        out = attn(tokens)
        out_perm = attn(permuted)
    # permuting image-token contents permutes their outputs the same way
    assert torch.allclose(out_perm[:, N_SPECIAL:], out[:, N_SPECIAL:][:, perm], atol=1e-6)
    assert torch.allclose(out_perm[:, :N_SPECIAL], out[:, :N_SPECIAL], atol=1e-6)


def test_single_token_attention_is_value_projection():
    torch.manual_seed(3)
    attn = ConvAttention(6, 1, conv_pos=False).eval()
    tokens = torch.randn(1, 1, 6)
    with torch.no_grad():
        out = attn(tokens, n_special=0)
    c = 6
    qkv = tokens @ attn.qkv.weight.detach().t() + attn.qkv.bias.detach()
    v = qkv[..., 2 * c :]
    expected = v @ attn.proj.weight.detach().t() + attn.proj.bias.detach()
    assert torch.allclose(out, expected, atol=1e-6)


def test_position_term_affects_image_tokens_only():
    torch.manual_seed(4)
    with_pos = ConvAttention(8, 2, conv_pos=True).eval()
    plain = ConvAttention(8, 2, conv_pos=False).eval()
    plain.qkv.load_state_dict(with_pos.qkv.state_dict())
    plain.proj.load_state_dict(with_pos.proj.state_dict())

    tokens = torch.randn(2, N_SPECIAL + 4, 8)
    with torch.no_grad():
        out_pos = with_pos(tokens, grid=(2, 2))
        out_plain = plain(tokens)
    assert torch.allclose(out_pos[:, :N_SPECIAL], out_plain[:, :N_SPECIAL], atol=1e-6)
    assert not torch.allclose(out_pos[:, N_SPECIAL:], out_plain[:, N_SPECIAL:], atol=1e-6)


def test_grid_required_and_checked_with_position_term():
    attn = ConvAttention(8, 2, conv_pos=True)
    tokens = torch.randn(1, N_SPECIAL + 4, 8)
    try:
        attn(tokens)
        assert False, "expected grid error"
    except ValueError:
        pass
    try:
        attn(tokens, grid=(3, 2))
        assert False, "expected grid mismatch error"
    except ValueError:
        pass


def test_transformer_layer_preserves_shape():
    torch.manual_seed(5)
    layer = TransformerLayer(8, 2, conv_pos=True)
    tokens = torch.randn(2, N_SPECIAL + 9, 8)
    out = layer(tokens, grid=(3, 3))
    assert out.shape == tokens.shape
