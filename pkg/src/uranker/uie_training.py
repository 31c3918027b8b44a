"""Enhancement-network training with content loss plus optional frozen-ranker
guidance, and PSNR/SSIM evaluation over paired data."""

import json
import math
import random
from dataclasses import dataclass

import torch

from . import checkpoints
from .datasets import load_pair_tensors
from .enhancer import Enhancer, EnhancerConfig
from .losses import total_enhancement_loss
from .metrics import psnr, ssim
from .utils import seed_everything


@dataclass
class UieRecipe:
    epochs: int = 250
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    batch_size: int = 16
    crop: int = 256
    flip_prob: float = 0.5
    content_loss: str = "l1"
    seed: int = 0

    def validate(self):
        if self.epochs < 0 or self.batch_size < 1 or self.crop < 1:
            raise ValueError("bad epochs/batch_size/crop")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError("flip_prob must lie in [0, 1]")
        if self.content_loss not in ("l1", "l2"):
            raise ValueError("content_loss must be 'l1' or 'l2'")

    def to_dict(self):
        return dict(self.__dict__)


def cosine_lr(base_lr, epoch, total_epochs):
    """Cosine-annealed learning rate for a given epoch (0-based)."""
    if total_epochs <= 1:
        return base_lr
    return base_lr * 0.5 * (1.0 + math.cos(math.pi * epoch / total_epochs))


def _crop_pair(a, b, size, rng):
    h, w = a.shape[-2:]
    ch, cw = min(size, h), min(size, w)
    top = rng.randrange(h - ch + 1)
    left = rng.randrange(w - cw + 1)
    return a[:, top : top + ch, left : left + cw], b[:, top : top + ch, left : left + cw]


def _flip_pair(a, b, flip_prob, rng):
    # the same flip goes to both sides to keep them aligned
    if flip_prob > 0 and rng.random() < flip_prob:
        a, b = torch.flip(a, dims=(-1,)), torch.flip(b, dims=(-1,))
    if flip_prob > 0 and rng.random() < flip_prob:
        a, b = torch.flip(a, dims=(-2,)), torch.flip(b, dims=(-2,))
    return a, b


def train_enhancer(
    manifest,
    recipe: UieRecipe,
    trade_off,
    ranker_ckpt=None,
    config: EnhancerConfig | None = None,
    out_path=None,
    log_path=None,
):
    """Train the enhancement network on (degraded, reference) pairs.

    With `trade_off` > 0 the frozen ranker adds its guidance term; the log
    then carries both loss components per epoch. Returns (summary, model,
    log rows).
    """
    recipe.validate()
    if trade_off < 0:
        raise ValueError("trade-off coefficient must be >= 0")
    if trade_off > 0 and ranker_ckpt is None:
        raise ValueError("ranker checkpoint required when the trade-off is > 0")
    if not manifest.pairs:
        raise ValueError("no (input, gt) pairs to train on")
    seed_everything(recipe.seed)
    rng = random.Random(recipe.seed)

    ranker = None
    if trade_off > 0:
        ranker, _ = checkpoints.load_ranker(ranker_ckpt, frozen=True)

    model = Enhancer(config or EnhancerConfig())
    pairs = load_pair_tensors(manifest.pairs)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=recipe.learning_rate, betas=(recipe.beta1, recipe.beta2)
    )

    log_rows = []
    log_file = open(log_path, "w") if log_path else None
    try:
        for epoch in range(recipe.epochs):
            lr = cosine_lr(recipe.learning_rate, epoch, recipe.epochs)
            for pg in optimizer.param_groups:
                pg["lr"] = lr
            model.train()
            order = list(range(len(pairs)))
            rng.shuffle(order)

            sums = {"total": 0.0, "content": 0.0, "guidance": 0.0}
            n_batches = 0
            for start in range(0, len(order), recipe.batch_size):
                chunk = [pairs[i] for i in order[start : start + recipe.batch_size]]
                crops = [_crop_pair(a, b, recipe.crop, rng) for a, b in chunk]
                crops = [_flip_pair(a, b, recipe.flip_prob, rng) for a, b in crops]
                x = torch.stack([c[0] for c in crops])
                y = torch.stack([c[1] for c in crops])
                out = model(x)
                total, content, guidance = total_enhancement_loss(
                    out, y, trade_off, ranker, recipe.content_loss
                )
                if not math.isfinite(total.item()):
                    raise RuntimeError(f"training diverged: non-finite loss at epoch {epoch}")
                optimizer.zero_grad()
                total.backward()
                optimizer.step()
                sums["total"] += total.item()
                sums["content"] += content.item()
                if guidance is not None:
                    sums["guidance"] += guidance.item()
                n_batches += 1

            row = {
                "epoch": epoch,
                "lr": lr,
                "total_loss": sums["total"] / n_batches,
                "content_loss": sums["content"] / n_batches,
            }
            if trade_off > 0:
                row["guidance_loss"] = sums["guidance"] / n_batches
                row["trade_off"] = trade_off
            log_rows.append(row)
            if log_file:
                log_file.write(json.dumps(row) + "\n")
                log_file.flush()
    finally:
        if log_file:
            log_file.close()

    model.eval()
    summary = {
        "epochs": recipe.epochs,
        "trade_off": trade_off,
        "first_epoch_content": log_rows[0]["content_loss"] if log_rows else None,
        "last_epoch_content": log_rows[-1]["content_loss"] if log_rows else None,
    }
    if out_path is not None:
        checkpoints.save_enhancer(
            out_path, model, extra={"recipe": recipe.to_dict(), "trade_off": trade_off, "summary": summary}
        )
    return summary, model, log_rows


def evaluate_enhancer(model, manifest):
    """Mean PSNR/SSIM of enhanced outputs against references."""
    if not manifest.pairs:
        raise ValueError("no (input, gt) pairs to evaluate")
    pairs = load_pair_tensors(manifest.pairs)
    model.eval()
    per_image = []
    for (x, y), (in_path, _) in zip(pairs, manifest.pairs):
        with torch.no_grad():
            out = model(x.unsqueeze(0)).squeeze(0)
        if out.shape != y.shape:
            raise ValueError(f"output/reference shape mismatch for {in_path}")
        a = out.permute(1, 2, 0).numpy()
        b = y.permute(1, 2, 0).numpy()
        per_image.append({"name": in_path.name, "psnr": psnr(a, b), "ssim": ssim(a, b)})
    return {
        "psnr": sum(r["psnr"] for r in per_image) / len(per_image),
        "ssim": sum(r["ssim"] for r in per_image) / len(per_image),
        "per_image": per_image,
    }
