"""Checkpoint I/O: a serialized weight archive plus a JSON sidecar that
records the model configuration and a schema version."""

import json
from pathlib import Path

import torch

from .enhancer import Enhancer, EnhancerConfig
from .ranker import Ranker, RankerConfig

SCHEMA_VERSION = "1"


def sidecar_path(ckpt_path):
    return Path(str(ckpt_path) + ".json")


def _save(path, model, kind, config_dict, extra=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), path)
    meta = {"schema_version": SCHEMA_VERSION, "kind": kind, "config": config_dict}
    if extra:
        meta.update(extra)
    sidecar_path(path).write_text(json.dumps(meta, indent=2) + "\n")
    return path


def _load_meta(path, expected_kind):
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint not found: {path}")
    side = sidecar_path(path)
    if not side.exists():
        raise FileNotFoundError(f"checkpoint sidecar not found: {side}")
    meta = json.loads(side.read_text())
    if meta.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported checkpoint schema {meta.get('schema_version')!r}")
    if meta.get("kind") != expected_kind:
        raise ValueError(f"checkpoint kind {meta.get('kind')!r}, expected {expected_kind!r}")
    return meta


def save_ranker(path, model: Ranker, extra=None):
    return _save(path, model, "ranker", model.config.to_dict(), extra)


def load_ranker(path, frozen=False):
    meta = _load_meta(path, "ranker")
    config = RankerConfig.from_dict(meta["config"])
    model = Ranker(config)
    state = torch.load(Path(path), map_location="cpu", weights_only=True)
    try:
        model.load_state_dict(state, strict=True)
    except RuntimeError as e:
        raise ValueError(f"checkpoint/config mismatch for {path}: {e}") from e
    if frozen:
        model.eval()
        for p in model.parameters():
            p.requires_grad_(False)
    return model, meta


def save_enhancer(path, model: Enhancer, extra=None):
    return _save(path, model, "enhancer", model.config.to_dict(), extra)


def load_enhancer(path):
    meta = _load_meta(path, "enhancer")
    config = EnhancerConfig.from_dict(meta["config"])
    model = Enhancer(config)
    state = torch.load(Path(path), map_location="cpu", weights_only=True)
    try:
        model.load_state_dict(state, strict=True)
    except RuntimeError as e:
        raise ValueError(f"checkpoint/config mismatch for {path}: {e}") from e
    return model, meta
