"""Ranker learning: pair sampling from sorted groups, the margin-ranking
training loop (twin evaluation through shared weights), and rank-quality
evaluation."""

import json
import math
import random
import warnings
from dataclasses import dataclass
from pathlib import Path

import torch

from . import checkpoints
from .datasets import load_group_tensors
from .losses import margin_ranking_loss
from .metrics import krcc, srcc
from .ranker import Ranker, RankerConfig, prepare_image
from .utils import seed_everything


@dataclass
class TrainRecipe:
    epochs: int = 100
    learning_rate: float = 1e-5
    beta1: float = 0.9
    beta2: float = 0.999
    flip_prob: float = 0.5
    margin: float = 0.5
    pair_strategy: str = "all"
    batch_pairs: int = 16
    holdout_fraction: float = 0.1
    seed: int = 0

    def validate(self):
        if self.margin <= 0:
            raise ValueError("margin must be > 0")
        if not 0.0 <= self.flip_prob <= 1.0:
            raise ValueError("flip_prob must lie in [0, 1]")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise ValueError("holdout_fraction must lie in [0, 1)")
        if self.epochs < 0 or self.batch_pairs < 1:
            raise ValueError("bad epochs/batch_pairs")
        _parse_strategy(self.pair_strategy)

    def to_dict(self):
        return dict(self.__dict__)


@dataclass(frozen=True)
class RankPair:
    better_index: int
    worse_index: int
    group_id: str


def _parse_strategy(strategy):
    if strategy == "all":
        return None
    if strategy.startswith("random-"):
        try:
            j = int(strategy.split("-", 1)[1])
        except ValueError:
            raise ValueError(f"bad pair strategy {strategy!r}")
        if j < 1:
            raise ValueError("random-j needs j >= 1")
        return j
    raise ValueError(f"unknown pair strategy {strategy!r}")


def sample_pairs(group, strategy="all", rng=None):
    """Ordered training pairs from one ranked group.

    "all" yields every unordered pair labeled by the ground-truth order;
    "random-j" draws j distinct pairs uniformly (use a fresh draw per epoch).
    """
    k = len(group)
    if k < 2:
        raise ValueError(f"group {group.group_id} needs at least 2 images")
    all_pairs = [
        RankPair(i, j, group.group_id) for i in range(k - 1) for j in range(i + 1, k)
    ]
    j = _parse_strategy(strategy)
    if j is None:
        return all_pairs
    if j > len(all_pairs):
        raise ValueError(f"cannot draw {j} distinct pairs from {len(all_pairs)}")
    rng = rng or random.Random()
    return rng.sample(all_pairs, j)


def _random_flip(batch, flip_prob, rng):
    # quality-preserving augmentation: flips never change pair labels
    out = batch
    if flip_prob > 0 and rng.random() < flip_prob:
        out = torch.flip(out, dims=(-1,))
    if flip_prob > 0 and rng.random() < flip_prob:
        out = torch.flip(out, dims=(-2,))
    return out


def _mean_pair_loss(model, group_tensors, group_pairs, margin):
    """Mean margin loss over all given pairs, without gradients."""
    losses = []
    with torch.no_grad():
        for gi, pairs in group_pairs:
            scores = model(group_tensors[gi])
            for p in pairs:
                losses.append(
                    margin_ranking_loss(scores[p.better_index], scores[p.worse_index], True, margin)
                )
    return float(torch.stack([l.detach() for l in losses]).mean())


def group_scores(model, images):
    with torch.no_grad():
        return model(images).tolist()


def evaluate_groups(model, groups, group_tensors):
    """Per-group SRCC/KRCC of model scores against the stored order."""
    per_group = []
    model.eval()
    for group, images in zip(groups, group_tensors):
        if len(group) < 2:
            warnings.warn(f"skipping group {group.group_id} with fewer than 2 images")
            continue
        scores = group_scores(model, images)
        gt_ranks = list(range(1, len(group) + 1))
        per_group.append(
            {
                "group_id": group.group_id,
                "srcc": srcc(scores, gt_ranks),
                "krcc": krcc(scores, gt_ranks),
                "scores": scores,
            }
        )
    if not per_group:
        raise ValueError("no evaluable groups (all have K < 2)")
    return {
        "srcc": sum(g["srcc"] for g in per_group) / len(per_group),
        "krcc": sum(g["krcc"] for g in per_group) / len(per_group),
        "per_group": per_group,
    }


def evaluate_ranker(ckpt_path, manifest):
    """Load a ranker checkpoint and score a manifest's groups."""
    model, _ = checkpoints.load_ranker(ckpt_path, frozen=True)
    resize = lambda im: prepare_image(im, model.config.total_stride)
    tensors = load_group_tensors(manifest.groups, transform=resize)
    return evaluate_groups(model, manifest.groups, tensors)


def train_ranker(manifest, recipe: TrainRecipe, config: RankerConfig, out_path, log_path=None):
    """Train a ranker on a manifest's groups; returns a summary dict.

    Emits a line-delimited JSON training log (per-epoch loss plus SRCC on a
    holdout slice of the training groups) and saves a checkpoint with its
    config sidecar.
    """
    recipe.validate()
    config.validate()
    if not manifest.groups:
        raise ValueError("no ranked groups to train on")
    seed_everything(recipe.seed)
    rng = random.Random(recipe.seed)

    model = Ranker(config)
    resize = lambda im: prepare_image(im, config.total_stride)
    tensors = load_group_tensors(manifest.groups, transform=resize)
    groups = list(manifest.groups)

    n_holdout = int(len(groups) * recipe.holdout_fraction)
    train_ids = list(range(len(groups) - n_holdout))
    holdout_ids = list(range(len(groups) - n_holdout, len(groups)))
    if not train_ids:
        raise ValueError("holdout fraction leaves no training groups")

    optimizer = torch.optim.Adam(
        model.parameters(), lr=recipe.learning_rate, betas=(recipe.beta1, recipe.beta2)
    )

    def epoch_pairs():
        out = []
        for gi in train_ids:
            if len(groups[gi]) < 2:
                continue
            out.append((gi, sample_pairs(groups[gi], recipe.pair_strategy, rng)))
        return out

    initial_loss = _mean_pair_loss(model, tensors, epoch_pairs(), recipe.margin)

    log_rows = []
    log_file = open(log_path, "w") if log_path else None
    try:
        for epoch in range(recipe.epochs):
            model.train()
            flat = [(gi, p) for gi, pairs in epoch_pairs() for p in pairs]
            rng.shuffle(flat)

            # bucket by image shape so pairs can be stacked into batches
            buckets = {}
            for gi, p in flat:
                buckets.setdefault(tuple(tensors[gi].shape[-2:]), []).append((gi, p))

            epoch_losses = []
            for bucket in buckets.values():
                for start in range(0, len(bucket), recipe.batch_pairs):
                    chunk = bucket[start : start + recipe.batch_pairs]
                    better = torch.stack(
                        [_random_flip(tensors[gi][p.better_index], recipe.flip_prob, rng) for gi, p in chunk]
                    )
                    worse = torch.stack(
                        [_random_flip(tensors[gi][p.worse_index], recipe.flip_prob, rng) for gi, p in chunk]
                    )
                    s_better = model(better)
                    s_worse = model(worse)
                    loss = margin_ranking_loss(s_better, s_worse, True, recipe.margin).mean()
                    if not math.isfinite(loss.item()):
                        raise RuntimeError(
                            f"training diverged: non-finite loss at epoch {epoch}"
                        )
                    optimizer.zero_grad()
                    loss.backward()
                    optimizer.step()
                    epoch_losses.append(loss.item())

            row = {
                "epoch": epoch,
                "loss": sum(epoch_losses) / max(1, len(epoch_losses)),
            }
            if holdout_ids:
                holdout = evaluate_groups(
                    model, [groups[i] for i in holdout_ids], [tensors[i] for i in holdout_ids]
                )
                row["holdout_srcc"] = holdout["srcc"]
            log_rows.append(row)
            if log_file:
                log_file.write(json.dumps(row) + "\n")
                log_file.flush()
    finally:
        if log_file:
            log_file.close()

    model.eval()
    final_loss = _mean_pair_loss(model, tensors, epoch_pairs(), recipe.margin)
    train_eval = evaluate_groups(
        model, [groups[i] for i in train_ids], [tensors[i] for i in train_ids]
    )
    summary = {
        "initial_loss": initial_loss,
        "final_loss": final_loss,
        "train_srcc": train_eval["srcc"],
        "train_krcc": train_eval["krcc"],
        "epochs": recipe.epochs,
    }
    if holdout_ids:
        holdout = evaluate_groups(
            model, [groups[i] for i in holdout_ids], [tensors[i] for i in holdout_ids]
        )
        summary["holdout_srcc"] = holdout["srcc"]

    checkpoints.save_ranker(out_path, model, extra={"recipe": recipe.to_dict(), "summary": summary})
    return summary, model, log_rows
