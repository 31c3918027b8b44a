"""Report rendering: delimited per-item tables and matplotlib figures written
next to the JSON reports."""

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt


def write_ranker_csv(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["group_id", "srcc", "krcc"])
        for row in report["per_group"]:
            writer.writerow([row["group_id"], f"{row['srcc']:.6f}", f"{row['krcc']:.6f}"])
    return path


def write_uie_csv(report, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(["name", "psnr_db", "ssim"])
        for row in report["per_image"]:
            writer.writerow([row["name"], f"{row['psnr']:.4f}", f"{row['ssim']:.6f}"])
    return path


def ranker_report_figures(report, prefix):
    """Per-group correlation bars and pooled score-vs-rank scatter."""
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    files = []

    groups = report["per_group"]
    ids = [g["group_id"] for g in groups]
    fig, ax = plt.subplots(figsize=(max(6, 0.35 * len(ids)), 4))
    xs = range(len(ids))
    ax.bar(xs, [g["srcc"] for g in groups], width=0.4, label="SRCC")
    ax.bar([x + 0.4 for x in xs], [g["krcc"] for g in groups], width=0.4, label="KRCC")
    ax.axhline(report["srcc"], color="C0", ls="--", lw=1, label=f"mean SRCC {report['srcc']:.3f}")
    ax.set_xticks([x + 0.2 for x in xs])
    ax.set_xticklabels(ids, rotation=90, fontsize=7)
    ax.set_ylim(-1.05, 1.05)
    ax.set_ylabel("rank correlation")
    ax.legend(loc="lower right", fontsize=8)
    fig.tight_layout()
    p = prefix.with_name(prefix.name + "_correlations.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    files.append(p)

    fig, ax = plt.subplots(figsize=(5, 4))
    for g in groups:
        ranks = range(1, len(g["scores"]) + 1)
        ax.plot(ranks, g["scores"], "o-", alpha=0.4, lw=0.8, ms=3)
    ax.set_xlabel("ground-truth rank (1 = best)")
    ax.set_ylabel("predicted score")
    fig.tight_layout()
    p = prefix.with_name(prefix.name + "_scores.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    files.append(p)
    return files


def uie_report_figures(report, prefix):
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    rows = report["per_image"]
    fig, axes = plt.subplots(1, 2, figsize=(10, 4))
    axes[0].hist([r["psnr"] for r in rows], bins=min(20, max(3, len(rows))), color="C0")
    axes[0].axvline(report["psnr"], color="k", ls="--", label=f"mean {report['psnr']:.2f} dB")
    axes[0].set_xlabel("PSNR (dB)")
    axes[0].legend(fontsize=8)
    axes[1].hist([r["ssim"] for r in rows], bins=min(20, max(3, len(rows))), color="C1")
    axes[1].axvline(report["ssim"], color="k", ls="--", label=f"mean {report['ssim']:.4f}")
    axes[1].set_xlabel("SSIM")
    axes[1].legend(fontsize=8)
    fig.tight_layout()
    p = prefix.with_name(prefix.name + "_fidelity.png")
    fig.savefig(p, dpi=120)
    plt.close(fig)
    return [p]


def training_curves(log_rows, path):
    """Loss (and holdout SRCC / loss components, when present) over epochs."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    epochs = [r["epoch"] for r in log_rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    if "loss" in log_rows[0]:
        ax.plot(epochs, [r["loss"] for r in log_rows], label="train loss")
    for key, label in (("total_loss", "total"), ("content_loss", "content"), ("guidance_loss", "guidance")):
        if key in log_rows[0]:
            ax.plot(epochs, [r[key] for r in log_rows], label=label)
    ax.set_xlabel("epoch")
    ax.set_ylabel("loss")
    ax.legend(fontsize=8, loc="upper right")
    if "holdout_srcc" in log_rows[0]:
        ax2 = ax.twinx()
        ax2.plot(epochs, [r["holdout_srcc"] for r in log_rows], "C2--", label="holdout SRCC")
        ax2.set_ylabel("holdout SRCC")
        ax2.set_ylim(-1.05, 1.05)
        ax2.legend(fontsize=8, loc="lower right")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
