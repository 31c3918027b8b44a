"""HTTP JSON service for annotation sessions, plus an oracle-voter simulator
that drives the same endpoints.

Every state transition is appended to a per-session line-delimited JSON event
log under `<state_dir>/<session_id>.jsonl`, so sessions survive a restart.
Image ids are paths relative to the data root and are served back under
`/images/`.
"""

import json
import threading
import time
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.responses import FileResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from . import protocol
from .protocol import ProtocolError

_ERROR_STATUS = {
    "bad_request": 400,
    "unknown_voter": 400,
    "duplicate_vote": 409,
    "stale_pair": 409,
    "session_complete": 409,
    "not_ready": 409,
}


class SessionStore:
    """In-memory sessions backed by append-only event logs."""

    def __init__(self, state_dir: Path):
        self.state_dir = Path(state_dir)
        self.state_dir.mkdir(parents=True, exist_ok=True)
        self.sessions = {}
        self.locks = {}
        self._registry_lock = threading.Lock()
        self._recover()

    def _log_path(self, session_id):
        return self.state_dir / f"{session_id}.jsonl"

    def _append(self, session_id, event):
        with self._log_path(session_id).open("a") as f:
            f.write(json.dumps(event) + "\n")

    def _recover(self):
        for path in sorted(self.state_dir.glob("*.jsonl")):
            events = [json.loads(line) for line in path.read_text().splitlines() if line]
            if not events or events[0]["type"] != "created":
                continue
            head = events[0]
            session = protocol.create_session(
                head["images"],
                head["voters"],
                head["seed"],
                tiebreak_voter=head.get("tiebreak_voter"),
                session_id=head["session_id"],
            )
            for ev in events[1:]:
                if ev["type"] == "vote":
                    protocol.submit_vote(
                        session, ev["voter_id"], ev["choice"], timestamp=ev["timestamp"]
                    )
            self.sessions[session.session_id] = session
            self.locks[session.session_id] = threading.Lock()

    def create(self, images, voters, seed, tiebreak_voter=None):
        session = protocol.create_session(images, voters, seed, tiebreak_voter=tiebreak_voter)
        with self._registry_lock:
            self.sessions[session.session_id] = session
            self.locks[session.session_id] = threading.Lock()
        self._append(
            session.session_id,
            {
                "type": "created",
                "session_id": session.session_id,
                "images": list(images),
                "voters": list(voters),
                "seed": seed,
                "tiebreak_voter": tiebreak_voter,
                "arrangement": list(session.arrangement),
            },
        )
        return session

    def get(self, session_id):
        session = self.sessions.get(session_id)
        if session is None:
            raise HTTPException(404, detail={"error": "unknown_session"})
        return session, self.locks[session_id]

    def vote(self, session_id, voter_id, choice, seen_pair=None):
        session, lock = self.get(session_id)
        with lock:
            ts = time.time()
            decision = protocol.submit_vote(
                session, voter_id, choice, seen_pair=seen_pair, timestamp=ts
            )
            self._append(
                session_id,
                {"type": "vote", "voter_id": voter_id, "choice": choice, "timestamp": ts},
            )
            if decision is not None:
                self._append(session_id, {"type": "decision", **decision})
                if session.status == "complete":
                    self._append(
                        session_id,
                        {"type": "complete", "ranking": list(session.arrangement)},
                    )
            return decision


class CreateSessionRequest(BaseModel):
    images: list[str]
    voters: list[str]
    seed: int = 0
    tiebreak_voter: str | None = None


class VoteRequest(BaseModel):
    voter_id: str
    choice: str
    # pair the voter was looking at; lets the server reject stale votes
    left: str | None = None
    right: str | None = None


def _http_error(e: ProtocolError):
    return HTTPException(_ERROR_STATUS.get(e.code, 400), detail={"error": e.code, "message": str(e)})


def create_app(data_root, state_dir=None, ui_dir=None) -> FastAPI:
    data_root = Path(data_root)
    store = SessionStore(Path(state_dir) if state_dir else data_root / "sessions")
    app = FastAPI(title="annotation-service")
    app.state.store = store

    def check_image_id(image_id):
        p = (data_root / image_id).resolve()
        if not str(p).startswith(str(data_root.resolve())):
            raise HTTPException(400, detail={"error": "bad_image_path"})
        return p

    @app.post("/sessions")
    def create_session(req: CreateSessionRequest):
        for image_id in req.images:
            if not check_image_id(image_id).exists():
                raise HTTPException(400, detail={"error": "missing_image", "image": image_id})
        try:
            session = store.create(req.images, req.voters, req.seed, req.tiebreak_voter)
        except ProtocolError as e:
            raise _http_error(e)
        return {"session_id": session.session_id}

    @app.get("/sessions/{session_id}/pair")
    def get_pair(session_id: str):
        session, lock = store.get(session_id)
        with lock:
            if session.status != "active":
                raise HTTPException(
                    409, detail={"error": "session_complete", "result_url": f"/sessions/{session_id}/result"}
                )
            left, right = session.current_pair
            return {
                "session_id": session_id,
                "left": left,
                "right": right,
                "left_url": f"/images/{left}",
                "right_url": f"/images/{right}",
                "pass_no": session.pass_no,
                "cursor": session.cursor,
                "voters_remaining": session.voters_remaining(),
            }

    @app.post("/sessions/{session_id}/votes")
    def post_vote(session_id: str, req: VoteRequest):
        seen_pair = (req.left, req.right) if req.left and req.right else None
        try:
            decision = store.vote(session_id, req.voter_id, req.choice, seen_pair)
        except ProtocolError as e:
            raise _http_error(e)
        session, _ = store.get(session_id)
        return {
            "recorded": True,
            "resolved": decision is not None,
            "status": session.status,
        }

    @app.get("/sessions/{session_id}/result")
    def get_result(session_id: str):
        session, lock = store.get(session_id)
        with lock:
            try:
                ranking = protocol.session_result(session)
            except ProtocolError as e:
                raise _http_error(e)
            return {"session_id": session_id, "ranking": ranking}

    @app.get("/sessions/{session_id}/log")
    def get_log(session_id: str):
        session, lock = store.get(session_id)
        with lock:
            return {
                "session_id": session_id,
                "status": session.status,
                "pass_no": session.pass_no,
                "decisions": list(session.audit),
            }

    @app.get("/images/{image_id:path}")
    def get_image(image_id: str):
        p = check_image_id(image_id)
        if not p.is_file():
            raise HTTPException(404, detail={"error": "missing_image"})
        return FileResponse(p)

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/ui", StaticFiles(directory=Path(ui_dir), html=True), name="ui")

    return app


def simulate_voters(spec, client=None, poll_interval=0.02, max_steps=100000):
    """Drive oracle voters against a running service per a simulation spec.

    Spec keys: `server` (base URL, unless `client` is given), either
    `session_id` or `session` ({images, voters, seed, tiebreak_voter?}),
    and `voters`: [{voter_id, ranking}, ...] where ranking lists image ids
    best-first. Returns the final ranking.
    """
    own_client = False
    if client is None:
        import httpx

        client = httpx.Client(base_url=spec["server"], timeout=30.0)
        own_client = True
    try:
        if "session_id" in spec:
            session_id = spec["session_id"]
        else:
            r = client.post("/sessions", json=spec["session"])
            r.raise_for_status()
            session_id = r.json()["session_id"]

        oracles = {
            v["voter_id"]: protocol.OracleVoter(v["voter_id"], v["ranking"])
            for v in spec["voters"]
        }
        for _ in range(max_steps):
            r = client.get(f"/sessions/{session_id}/pair")
            if r.status_code == 409:
                break
            r.raise_for_status()
            pair = r.json()
            remaining = [v for v in pair["voters_remaining"] if v in oracles]
            if not remaining:
                time.sleep(poll_interval)
                continue
            for voter_id in remaining:
                choice = oracles[voter_id].choose(pair["left"], pair["right"])
                resp = client.post(
                    f"/sessions/{session_id}/votes",
                    json={
                        "voter_id": voter_id,
                        "choice": choice,
                        "left": pair["left"],
                        "right": pair["right"],
                    },
                )
                if resp.status_code == 409:
                    break  # pair moved on under us; refetch
                resp.raise_for_status()
        else:
            raise RuntimeError("simulation did not converge")

        r = client.get(f"/sessions/{session_id}/result")
        r.raise_for_status()
        return {"session_id": session_id, "ranking": r.json()["ranking"]}
    finally:
        if own_client:
            client.close()
