"""Training losses: margin ranking for the quality ranker, and the combined
content + frozen-ranker objective for enhancement networks."""

import torch
import torch.nn.functional as F

DEFAULT_MARGIN = 0.5


def margin_ranking_loss(score_a, score_b, a_is_better, margin=DEFAULT_MARGIN):
    """Hinge loss on an ordered score pair.

    Returns max(0, worse - better + margin); the margin keeps the two scores
    from collapsing onto each other. Works on scalars or equal-shaped batches.
    """
    if margin <= 0:
        raise ValueError("margin must be positive")
    score_a = torch.as_tensor(score_a)
    score_b = torch.as_tensor(score_b)
    if a_is_better:
        gap = score_b - score_a
    else:
        gap = score_a - score_b
    return torch.clamp(gap + margin, min=0.0)


def ranker_guidance_loss(images, ranker):
    """Quality loss from a frozen pre-trained ranker: sigmoid(-score).

    Lies in (0, 1) and strictly decreases as the ranker score grows. The
    ranker's parameters must not receive gradients; the caller is expected to
    have frozen them (see `checkpoints.load_ranker`).
    """
    scores = ranker(images)
    return torch.sigmoid(-scores).mean()


CONTENT_LOSSES = ("l1", "l2")


def total_enhancement_loss(enhanced, reference, trade_off, ranker=None, content_loss="l1"):
    """Content loss plus `trade_off` times the ranker guidance term.

    Content loss defaults to mean absolute error ("l1"; "l2" selects MSE).
    Returns (total, content, guidance) so training loops can log the
    decomposition; guidance is None when the trade-off is zero.
    """
    if trade_off < 0:
        raise ValueError("trade-off coefficient must be >= 0")
    if content_loss not in CONTENT_LOSSES:
        raise ValueError(f"content_loss must be one of {CONTENT_LOSSES}")
    if enhanced.shape != reference.shape:
        raise ValueError(f"shape mismatch: {tuple(enhanced.shape)} vs {tuple(reference.shape)}")
    if content_loss == "l1":
        content = F.l1_loss(enhanced, reference)
    else:
        content = F.mse_loss(enhanced, reference)
    if trade_off == 0:
        return content, content, None
    if ranker is None:
        raise ValueError("a ranker checkpoint is required when the trade-off is > 0")
    guidance = ranker_guidance_loss(enhanced, ranker)
    return content + trade_off * guidance, content, guidance
