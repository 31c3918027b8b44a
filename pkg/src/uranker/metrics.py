"""Rank-correlation and fidelity metrics shared by the evaluation harnesses.

All functions are pure and operate on numpy arrays / sequences; they are safe
to call from multiple threads.
"""

import math

import numpy as np
from scipy.signal import fftconvolve

PSNR_CAP_DB = 100.0

# standard SSIM constants (Wang et al.), peak = 1.0
_SSIM_K1 = 0.01
_SSIM_K2 = 0.03
_SSIM_WIN = 11
_SSIM_SIGMA = 1.5


def rank_scores(scores):
    """Ranks for `scores` where rank 1 = highest score; ties get average ranks."""
    s = np.asarray(scores, dtype=np.float64)
    if s.ndim != 1:
        raise ValueError("scores must be a 1-D sequence")
    order = np.argsort(-s, kind="mergesort")
    ranks = np.empty(len(s), dtype=np.float64)
    ranks[order] = np.arange(1, len(s) + 1, dtype=np.float64)
    # average ranks over tied values
    for v in np.unique(s):
        mask = s == v
        if mask.sum() > 1:
            ranks[mask] = ranks[mask].mean()
    return ranks


def _check_rank_inputs(pred_scores, gt_ranks):
    pred = np.asarray(pred_scores, dtype=np.float64)
    gt = np.asarray(gt_ranks, dtype=np.float64)
    if pred.shape != gt.shape or pred.ndim != 1:
        raise ValueError("pred_scores and gt_ranks must be 1-D and equal length")
    if len(pred) < 2:
        raise ValueError("rank correlation needs at least 2 items")
    if sorted(gt.tolist()) != list(range(1, len(gt) + 1)):
        raise ValueError("gt_ranks must be a permutation of 1..K")
    return pred, gt


def srcc(pred_scores, gt_ranks):
    """Spearman rank-order correlation between predicted scores and ground-truth
    ranks (1 = best). Ties in predictions take average ranks."""
    pred, gt = _check_rank_inputs(pred_scores, gt_ranks)
    pr = rank_scores(pred)
    pr = pr - pr.mean()
    gr = gt - gt.mean()
    denom = math.sqrt(float(pr @ pr) * float(gr @ gr))
    if denom == 0.0:
        return 0.0
    return float(pr @ gr) / denom


def krcc(pred_scores, gt_ranks):
    """Kendall rank-order correlation (tau-b when predictions contain ties)."""
    pred, gt = _check_rank_inputs(pred_scores, gt_ranks)
    n = len(pred)
    concordant = discordant = 0
    tied_pred = 0
    for i in range(n - 1):
        for j in range(i + 1, n):
            dp = pred[i] - pred[j]
            # gt ranks: smaller = better, so invert the sign to compare quality
            dg = gt[j] - gt[i]
            if dp == 0.0:
                tied_pred += 1
                continue
            if dp * dg > 0:
                concordant += 1
            else:
                discordant += 1
    n_pairs = n * (n - 1) // 2
    denom = math.sqrt(float(n_pairs) * float(n_pairs - tied_pred))
    if denom == 0.0:
        return 0.0
    return (concordant - discordant) / denom


def psnr(a, b, peak=1.0):
    """Peak signal-to-noise ratio in dB, capped at 100 dB for zero error."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return PSNR_CAP_DB
    return min(PSNR_CAP_DB, -10.0 * math.log10(mse / (peak * peak)))


def _gaussian_window(size=_SSIM_WIN, sigma=_SSIM_SIGMA):
    half = (size - 1) / 2.0
    coords = np.arange(size, dtype=np.float64) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    win = np.outer(g, g)
    return win / win.sum()


def ssim(a, b, peak=1.0):
    """Mean structural similarity with an 11x11 Gaussian window.

    Accepts HxW or HxWxC arrays; channels are averaged. Images smaller than
    the window are rejected.
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    if a.ndim == 2:
        a = a[..., None]
        b = b[..., None]
    if a.ndim != 3:
        raise ValueError("expected HxW or HxWxC images")
    if min(a.shape[0], a.shape[1]) < _SSIM_WIN:
        raise ValueError(f"image smaller than the {_SSIM_WIN}x{_SSIM_WIN} SSIM window")

    win = _gaussian_window()
    c1 = (_SSIM_K1 * peak) ** 2
    c2 = (_SSIM_K2 * peak) ** 2

    vals = []
    for ch in range(a.shape[2]):
        x, y = a[:, :, ch], b[:, :, ch]
        mu_x = fftconvolve(x, win, mode="valid")
        mu_y = fftconvolve(y, win, mode="valid")
        xx = fftconvolve(x * x, win, mode="valid") - mu_x**2
        yy = fftconvolve(y * y, win, mode="valid") - mu_y**2
        xy = fftconvolve(x * y, win, mode="valid") - mu_x * mu_y
        num = (2 * mu_x * mu_y + c1) * (2 * xy + c2)
        den = (mu_x**2 + mu_y**2 + c1) * (xx + yy + c2)
        vals.append(np.mean(num / den))
    return float(np.mean(vals))
