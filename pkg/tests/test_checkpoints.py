import json

import pytest
import torch

from uranker import checkpoints
from uranker.enhancer import Enhancer, EnhancerConfig
from uranker.ranker import Ranker

from conftest import toy_ranker_config


def test_ranker_roundtrip(tmp_path):
    torch.manual_seed(0)
    model = Ranker(toy_ranker_config())
    path = checkpoints.save_ranker(tmp_path / "r.pt", model)
    loaded, meta = checkpoints.load_ranker(path)
    assert meta["kind"] == "ranker"
    for a, b in zip(model.parameters(), loaded.parameters()):
        assert torch.equal(a, b)


def test_frozen_load_disables_grads(tmp_path):
    model = Ranker(toy_ranker_config())
    path = checkpoints.save_ranker(tmp_path / "r.pt", model)
    loaded, _ = checkpoints.load_ranker(path, frozen=True)
    assert not loaded.training
    assert all(not p.requires_grad for p in loaded.parameters())


def test_enhancer_roundtrip(tmp_path):
    model = Enhancer(EnhancerConfig(widths=(4, 8), use_tail=False))
    path = checkpoints.save_enhancer(tmp_path / "e.pt", model)
    loaded, meta = checkpoints.load_enhancer(path)
    assert loaded.config == model.config
    assert meta["config"]["use_tail"] is False


def test_kind_mismatch_rejected(tmp_path):
    model = Ranker(toy_ranker_config())
    path = checkpoints.save_ranker(tmp_path / "r.pt", model)
    with pytest.raises(ValueError, match="kind"):
        checkpoints.load_enhancer(path)


def test_missing_sidecar_rejected(tmp_path):
    model = Ranker(toy_ranker_config())
    path = checkpoints.save_ranker(tmp_path / "r.pt", model)
    checkpoints.sidecar_path(path).unlink()
    with pytest.raises(FileNotFoundError, match="sidecar"):
        checkpoints.load_ranker(path)


def test_tampered_config_is_a_load_error(tmp_path):
    model = Ranker(toy_ranker_config())
    path = checkpoints.save_ranker(tmp_path / "r.pt", model)
    side = checkpoints.sidecar_path(path)
    meta = json.loads(side.read_text())
    meta["config"]["channels"] = [8, 8]  # no longer matches the weights
    side.write_text(json.dumps(meta))
    with pytest.raises(ValueError, match="mismatch"):
        checkpoints.load_ranker(path)


def test_unsupported_schema_rejected(tmp_path):
    model = Ranker(toy_ranker_config())
    path = checkpoints.save_ranker(tmp_path / "r.pt", model)
    side = checkpoints.sidecar_path(path)
    meta = json.loads(side.read_text())
    meta["schema_version"] = "999"
    side.write_text(json.dumps(meta))
    with pytest.raises(ValueError, match="schema"):
        checkpoints.load_ranker(path)
