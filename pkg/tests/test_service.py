import json
import threading
import time

import pytest
import torch
from fastapi.testclient import TestClient

from uranker.datasets import save_image
from uranker.service import create_app, simulate_voters


@pytest.fixture()
def data_root(tmp_path):
    for i in range(4):
        save_image(torch.rand(3, 8, 8), tmp_path / "imgs" / f"im{i}.png")
    return tmp_path


def _image_ids(n=4):
    return [f"imgs/im{i}.png" for i in range(n)]


def _make_client(data_root, state_dir=None):
    app = create_app(data_root, state_dir=state_dir)
    return TestClient(app)


def test_session_lifecycle_and_result(data_root):
    client = _make_client(data_root)
    r = client.post(
        "/sessions", json={"images": _image_ids(3), "voters": ["a", "b", "c"], "seed": 1}
    )
    assert r.status_code == 200
    sid = r.json()["session_id"]

    # result blocked while active
    assert client.get(f"/sessions/{sid}/result").status_code == 409

    pair = client.get(f"/sessions/{sid}/pair").json()
    assert set(pair) >= {"left", "right", "left_url", "right_url", "pass_no", "cursor",
                         "voters_remaining"}
    assert pair["left_url"] == f"/images/{pair['left']}"
    assert sorted(pair["voters_remaining"]) == ["a", "b", "c"]

    # drive to completion with oracle voters that prefer im0 > im1 > im2
    spec = {
        "session_id": sid,
        "voters": [{"voter_id": v, "ranking": _image_ids(3)} for v in ["a", "b", "c"]],
    }
    result = simulate_voters(spec, client=client, poll_interval=0.0)
    assert result["ranking"] == _image_ids(3)
    assert client.get(f"/sessions/{sid}/result").json()["ranking"] == _image_ids(3)

    log = client.get(f"/sessions/{sid}/log").json()
    assert log["status"] == "complete"
    assert len(log["decisions"]) >= 2


def test_duplicate_and_stale_votes(data_root):
    client = _make_client(data_root)
    sid = client.post(
        "/sessions", json={"images": _image_ids(3), "voters": ["a", "b", "c"], "seed": 2}
    ).json()["session_id"]
    pair = client.get(f"/sessions/{sid}/pair").json()

    ok = client.post(
        f"/sessions/{sid}/votes",
        json={"voter_id": "a", "choice": "left", "left": pair["left"], "right": pair["right"]},
    )
    assert ok.status_code == 200
    dup = client.post(f"/sessions/{sid}/votes", json={"voter_id": "a", "choice": "left"})
    assert dup.status_code == 409
    assert dup.json()["detail"]["error"] == "duplicate_vote"

    stale = client.post(
        f"/sessions/{sid}/votes",
        json={"voter_id": "b", "choice": "left", "left": pair["right"], "right": pair["left"]},
    )
    assert stale.status_code == 409
    assert stale.json()["detail"]["error"] == "stale_pair"

    remaining = client.get(f"/sessions/{sid}/pair").json()["voters_remaining"]
    assert sorted(remaining) == ["b", "c"]


def test_create_session_validations(data_root):
    client = _make_client(data_root)
    r = client.post("/sessions", json={"images": ["imgs/nope.png", "imgs/im0.png"],
                                       "voters": ["a"], "seed": 0})
    assert r.status_code == 400
    assert r.json()["detail"]["error"] == "missing_image"
    r = client.post("/sessions", json={"images": _image_ids(2), "voters": ["a", "b"], "seed": 0})
    assert r.status_code == 400  # even roster without tiebreaker
    r = client.post("/sessions", json={"images": ["../secret.png", "imgs/im0.png"],
                                       "voters": ["a"], "seed": 0})
    assert r.status_code == 400


def test_image_endpoint_serves_bytes(data_root):
    client = _make_client(data_root)
    r = client.get("/images/imgs/im0.png")
    assert r.status_code == 200
    assert r.content[:8] == b"\x89PNG\r\n\x1a\n"
    assert client.get("/images/imgs/absent.png").status_code == 404


def test_unknown_session_404(data_root):
    client = _make_client(data_root)
    assert client.get("/sessions/feedbeef/pair").status_code == 404


def test_event_log_recovery(data_root, tmp_path):
    state = tmp_path / "state"
    client = _make_client(data_root, state_dir=state)
    sid = client.post(
        "/sessions", json={"images": _image_ids(3), "voters": ["solo"], "seed": 3}
    ).json()["session_id"]
    pair = client.get(f"/sessions/{sid}/pair").json()
    client.post(f"/sessions/{sid}/votes", json={"voter_id": "solo", "choice": "left"})

    # a fresh app over the same state dir must resume mid-session
    client2 = _make_client(data_root, state_dir=state)
    pair2 = client2.get(f"/sessions/{sid}/pair").json()
    assert pair2["cursor"] == 1
    assert pair2["pass_no"] == 0

    # drive to completion on the recovered instance, then recover again
    spec = {"session_id": sid,
            "voters": [{"voter_id": "solo", "ranking": _image_ids(3)}]}
    result = simulate_voters(spec, client=client2, poll_interval=0.0)
    client3 = _make_client(data_root, state_dir=state)
    assert client3.get(f"/sessions/{sid}/result").json()["ranking"] == result["ranking"]

    events = [json.loads(l) for l in (state / f"{sid}.jsonl").read_text().splitlines()]
    kinds = [e["type"] for e in events]
    assert kinds[0] == "created"
    assert "decision" in kinds and kinds[-1] == "complete"


def test_simulation_over_real_http(data_root):
    import socket

    import uvicorn

    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()

    config = uvicorn.Config(create_app(data_root), host="127.0.0.1", port=port,
                            log_level="error")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.02)
    try:
        spec = {
            "server": f"http://127.0.0.1:{port}",
            "session": {"images": _image_ids(4), "voters": ["a", "b", "c"], "seed": 5},
            "voters": [{"voter_id": v, "ranking": _image_ids(4)} for v in ["a", "b", "c"]],
        }
        result = simulate_voters(spec, poll_interval=0.01)
        assert result["ranking"] == _image_ids(4)
    finally:
        server.should_exit = True
        thread.join(timeout=5)
