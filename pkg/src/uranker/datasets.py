"""Ranked-group dataset loading, train/test splitting, paired enhancement
data, and PNG <-> [0,1] tensor conversion.

On-disk layout::

    root/manifest.json                      (schema version + generation info)
    root/groups/<gid>/ranking.json          (ordered file names, best first)
    root/groups/<gid>/images/*.png
    root/pairs/input/<name>.png             (optional, for enhancement training)
    root/pairs/gt/<name>.png
"""

import json
import os
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch
from PIL import Image

MANIFEST_SCHEMA = 1

WORKERS_ENV = "URANKER_NUM_WORKERS"


class DatasetError(Exception):
    pass


def num_workers(default=4):
    """Data-loading parallelism, capped by the URANKER_NUM_WORKERS env var."""
    cap = os.environ.get(WORKERS_ENV)
    if cap is not None:
        try:
            return max(1, int(cap))
        except ValueError:
            raise DatasetError(f"{WORKERS_ENV} must be an integer, got {cap!r}")
    return max(1, min(default, os.cpu_count() or 1))


def load_image(path):
    """8-bit image file -> float32 (3, H, W) tensor in [0, 1]."""
    try:
        with Image.open(path) as im:
            arr = np.asarray(im.convert("RGB"), dtype=np.float32) / 255.0
    except (OSError, ValueError) as e:
        raise DatasetError(f"unreadable image {path}: {e}") from e
    return torch.from_numpy(arr).permute(2, 0, 1).contiguous()


def save_image(tensor, path):
    """Float tensor (3, H, W) -> 8-bit PNG; values are clipped to [0, 1]."""
    arr = tensor.detach().cpu().numpy()
    if arr.ndim != 3 or arr.shape[0] != 3:
        raise ValueError(f"expected (3, H, W), got {arr.shape}")
    arr = np.clip(arr, 0.0, 1.0)
    img = (arr * 255.0).round().astype(np.uint8).transpose(1, 2, 0)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(img).save(path)
    return path


@dataclass
class RankedGroup:
    """One scene's images with a strict best-to-worst ordering."""

    group_id: str
    images: list  # of Path, index 0 = best

    def __len__(self):
        return len(self.images)


@dataclass
class DatasetManifest:
    root: Path
    groups: list = field(default_factory=list)
    pairs: list = field(default_factory=list)  # of (input_path, gt_path)

    def __post_init__(self):
        self.root = Path(self.root)


def _check_image(path):
    try:
        with Image.open(path) as im:
            im.verify()
    except (OSError, ValueError) as e:
        raise DatasetError(f"unreadable image {path}: {e}") from e


def _load_group(group_dir: Path) -> RankedGroup:
    ranking_file = group_dir / "ranking.json"
    if not ranking_file.exists():
        raise DatasetError(f"missing ranking file {ranking_file}")
    try:
        names = json.loads(ranking_file.read_text())
    except json.JSONDecodeError as e:
        raise DatasetError(f"malformed {ranking_file}: {e}") from e
    if not isinstance(names, list) or not names:
        raise DatasetError(f"{ranking_file} must hold a non-empty list of file names")
    if len(set(names)) != len(names):
        dupes = sorted({n for n in names if names.count(n) > 1})
        raise DatasetError(f"duplicate entries {dupes} in {ranking_file}")
    img_dir = group_dir / "images"
    paths = []
    for name in names:
        p = img_dir / name
        if not p.exists():
            raise DatasetError(f"{ranking_file} lists missing image {p}")
        _check_image(p)
        paths.append(p)
    on_disk = {p.name for p in img_dir.glob("*.png")}
    extra = on_disk - set(names)
    if extra:
        raise DatasetError(f"images {sorted(extra)} in {img_dir} are not listed in the ranking")
    return RankedGroup(group_id=group_dir.name, images=paths)


def load_dataset(root) -> DatasetManifest:
    """Validate and load a dataset directory into a manifest."""
    root = Path(root)
    if not root.is_dir():
        raise DatasetError(f"dataset root {root} is not a directory")
    manifest_file = root / "manifest.json"
    if manifest_file.exists():
        meta = json.loads(manifest_file.read_text())
        if meta.get("schema_version") != MANIFEST_SCHEMA:
            raise DatasetError(
                f"unsupported manifest schema {meta.get('schema_version')!r} in {manifest_file}"
            )

    groups = []
    groups_dir = root / "groups"
    if groups_dir.is_dir():
        for group_dir in sorted(d for d in groups_dir.iterdir() if d.is_dir()):
            groups.append(_load_group(group_dir))

    pairs = []
    pairs_dir = root / "pairs"
    if pairs_dir.is_dir():
        in_dir, gt_dir = pairs_dir / "input", pairs_dir / "gt"
        in_names = {p.name for p in in_dir.glob("*.png")} if in_dir.is_dir() else set()
        gt_names = {p.name for p in gt_dir.glob("*.png")} if gt_dir.is_dir() else set()
        if in_names != gt_names:
            raise DatasetError(
                f"unmatched pair files: only-input={sorted(in_names - gt_names)} "
                f"only-gt={sorted(gt_names - in_names)}"
            )
        for name in sorted(in_names):
            pairs.append((in_dir / name, gt_dir / name))

    if not groups and not pairs:
        raise DatasetError(f"no groups/ or pairs/ data found under {root}")
    return DatasetManifest(root=root, groups=groups, pairs=pairs)


def split_dataset(manifest: DatasetManifest, n_train, seed):
    """Disjoint, exhaustive, seed-reproducible group split."""
    total = len(manifest.groups)
    if not 0 < n_train < total:
        raise ValueError(f"n_train must be in (0, {total}), got {n_train}")
    order = list(manifest.groups)
    random.Random(seed).shuffle(order)
    train = DatasetManifest(root=manifest.root, groups=order[:n_train], pairs=manifest.pairs)
    test = DatasetManifest(root=manifest.root, groups=order[n_train:], pairs=manifest.pairs)
    return train, test


def load_group_tensors(groups, transform=None):
    """Load every group's images as a list of (K, 3, H, W) tensors.

    Loading is parallelized across images with a thread pool capped by
    URANKER_NUM_WORKERS.
    """
    def load_one(group):
        imgs = [load_image(p) for p in group.images]
        if transform is not None:
            imgs = [transform(im) for im in imgs]
        return torch.stack(imgs)

    with ThreadPoolExecutor(max_workers=num_workers()) as pool:
        return list(pool.map(load_one, groups))


def load_pair_tensors(pairs, transform=None):
    """Load (input, gt) image pairs as a list of tensor tuples."""
    def load_one(pair):
        a, b = load_image(pair[0]), load_image(pair[1])
        if transform is not None:
            a, b = transform(a), transform(b)
        if a.shape != b.shape:
            raise DatasetError(f"pair shape mismatch: {pair[0]} vs {pair[1]}")
        return a, b

    with ThreadPoolExecutor(max_workers=num_workers()) as pool:
        return list(pool.map(load_one, pairs))
