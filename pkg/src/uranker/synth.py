"""Synthetic ranked-group generator.

Produces clean base scenes (smooth random color fields plus texture) and
degraded variants at strictly increasing severity, mimicking underwater
degradation: wavelength-dependent channel attenuation (strongest on red),
contrast compression toward the mean, and additive veiling light. The
severity order is the ground-truth quality ranking.
"""

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .datasets import MANIFEST_SCHEMA, DatasetManifest, load_dataset

DEFAULT_SIZE = 256


@dataclass
class DegradationSpec:
    """Severity-driven degradation family; all effects scale monotonically
    with the severity scalar in [0, 1]."""

    attenuation: tuple = (1.1, 0.5, 0.2)  # per-channel decay, red strongest
    contrast_scale: float = 0.6  # max fraction of contrast removed
    haze_weight: float = 0.45  # max veiling-light blend
    haze_color: tuple = (0.30, 0.45, 0.50)

    def apply(self, image, severity):
        """Degrade a float HxWx3 image in [0, 1] at the given severity."""
        if not 0.0 <= severity <= 1.0:
            raise ValueError("severity must lie in [0, 1]")
        out = image.astype(np.float64, copy=True)
        if severity == 0.0:
            return out
        decay = np.exp(-np.asarray(self.attenuation) * severity)
        out *= decay[None, None, :]
        w = self.haze_weight * severity
        out = (1.0 - w) * out + w * np.asarray(self.haze_color)[None, None, :]
        mean = out.mean()
        out = mean + (out - mean) * (1.0 - self.contrast_scale * severity)
        return np.clip(out, 0.0, 1.0)


def base_scene(rng, size=DEFAULT_SIZE):
    """Clean scene: low-frequency color fields + fine texture, stretched so
    every channel spans the full [0, 1] range."""
    coarse = rng.uniform(0.0, 1.0, size=(6, 6, 3))
    img = np.asarray(
        Image.fromarray((coarse * 255).astype(np.uint8)).resize((size, size), Image.BILINEAR),
        dtype=np.float64,
    ) / 255.0
    texture = rng.normal(0.0, 1.0, size=(size, size, 1))
    img = img + 0.08 * texture
    # per-channel stretch to full range
    mn = img.min(axis=(0, 1), keepdims=True)
    mx = img.max(axis=(0, 1), keepdims=True)
    return (img - mn) / np.maximum(mx - mn, 1e-9)


def group_severities(k, severity_range=(0.0, 1.0)):
    """Severity ladder for one group's k-1 degraded variants: equally spaced
    steps of (hi - lo)/k above lo, so the default range yields i/k."""
    lo, hi = severity_range
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError("severity_range must satisfy 0 <= lo < hi <= 1")
    return [lo + (hi - lo) * i / k for i in range(1, k)]


def mean_saturation(image):
    """Mean HSV-style saturation: (max - min) / max over channels."""
    mx = image.max(axis=2)
    mn = image.min(axis=2)
    return float(np.mean((mx - mn) / (mx + 1e-8)))


def _save_png(image, path):
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray((np.clip(image, 0.0, 1.0) * 255.0).round().astype(np.uint8)).save(path)


def synth_generate(
    n_groups,
    k,
    seed,
    out_root,
    size=DEFAULT_SIZE,
    spec: DegradationSpec | None = None,
    make_pairs=True,
    pair_severity=0.5,
    severity_range=(0.0, 1.0),
) -> DatasetManifest:
    """Write a synthetic ranked dataset and return its validated manifest.

    Each group holds one clean scene (rank 1) and k-1 degraded variants in
    severity order. With `make_pairs`, a (degraded, clean) pair per group is
    written for enhancement training; `pair_severity` is either a fixed value
    or a (lo, hi) range sampled per group.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    if n_groups < 1:
        raise ValueError("n_groups must be >= 1")
    spec = spec or DegradationSpec()
    out_root = Path(out_root)

    for g in range(n_groups):
        rng = np.random.default_rng([seed, g])
        base = base_scene(rng, size)
        gid = f"g{g:04d}"
        gdir = out_root / "groups" / gid
        names = ["00_clean.png"]
        _save_png(base, gdir / "images" / names[0])
        for i, severity in enumerate(group_severities(k, severity_range), start=1):
            name = f"{i:02d}_s{round(severity * 100):03d}.png"
            _save_png(spec.apply(base, severity), gdir / "images" / name)
            names.append(name)
        (gdir / "ranking.json").write_text(json.dumps(names, indent=2) + "\n")

        if make_pairs:
            if isinstance(pair_severity, (tuple, list)):
                sev = float(rng.uniform(pair_severity[0], pair_severity[1]))
            else:
                sev = float(pair_severity)
            _save_png(spec.apply(base, sev), out_root / "pairs" / "input" / f"{gid}.png")
            _save_png(base, out_root / "pairs" / "gt" / f"{gid}.png")

    meta = {
        "schema_version": MANIFEST_SCHEMA,
        "generator": "synthetic-degradation",
        "n_groups": n_groups,
        "k": k,
        "seed": seed,
        "size": size,
        "pairs": bool(make_pairs),
    }
    (out_root / "manifest.json").write_text(json.dumps(meta, indent=2) + "\n")
    return load_dataset(out_root)
