"""Majority-vote bubble-sort annotation protocol.

A session holds a left-to-right arrangement of one group's images (left =
better). Voters compare the adjacent pair under the cursor; once every voter
has voted, the majority-preferred image moves to (or stays at) the left of
the pair and the cursor advances. Passes repeat until one completes without a
swap. Each completed pass settles the rightmost unsorted position, so the
next pass scans one pair fewer; a session therefore never needs more than
K(K-1)/2 + (K-1) comparisons.
"""

import time
import uuid
from dataclasses import dataclass, field

CHOICES = ("left", "right")


class ProtocolError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


@dataclass(frozen=True)
class Vote:
    voter_id: str
    left_image: str
    right_image: str
    choice: str
    timestamp: float


@dataclass
class ComparisonSession:
    session_id: str
    arrangement: list  # current left-to-right order, left = better
    voters: list
    shuffle_seed: int
    tiebreak_voter: str | None = None
    pass_no: int = 0
    cursor: int = 0
    swapped_this_pass: bool = False
    status: str = "active"
    votes: dict = field(default_factory=dict)  # voter -> Vote for the current pair
    audit: list = field(default_factory=list)  # resolved comparisons
    initial_arrangement: list = field(default_factory=list)

    @property
    def k(self):
        return len(self.arrangement)

    @property
    def pass_length(self):
        """Comparisons in the current pass; each earlier pass settled one
        position at the right end."""
        return self.k - 1 - self.pass_no

    @property
    def current_pair(self):
        if self.status != "active":
            raise ProtocolError("session_complete", "session already complete")
        return self.arrangement[self.cursor], self.arrangement[self.cursor + 1]

    def voters_remaining(self):
        return [v for v in self.voters if v not in self.votes]


def create_session(images, voters, shuffle_seed, tiebreak_voter=None, session_id=None):
    """New session with a seeded random initial arrangement."""
    import random

    images = list(images)
    voters = list(voters)
    if len(images) < 2:
        raise ProtocolError("bad_request", "need at least 2 images")
    if len(set(images)) != len(images):
        raise ProtocolError("bad_request", "duplicate image ids")
    if not voters:
        raise ProtocolError("bad_request", "need at least 1 voter")
    if len(set(voters)) != len(voters):
        raise ProtocolError("bad_request", "duplicate voter ids")
    if len(voters) % 2 == 0 and tiebreak_voter is None:
        raise ProtocolError(
            "bad_request", "even voter count requires a designated tiebreak voter"
        )
    if tiebreak_voter is not None and tiebreak_voter not in voters:
        raise ProtocolError("bad_request", f"tiebreak voter {tiebreak_voter!r} not in roster")

    arrangement = list(images)
    random.Random(shuffle_seed).shuffle(arrangement)
    return ComparisonSession(
        session_id=session_id or uuid.uuid4().hex[:12],
        arrangement=arrangement,
        voters=voters,
        shuffle_seed=shuffle_seed,
        tiebreak_voter=tiebreak_voter,
        initial_arrangement=list(arrangement),
    )


def submit_vote(session: ComparisonSession, voter_id, choice, seen_pair=None, timestamp=None):
    """Record one vote for the current pair; resolves the comparison once
    every voter has voted. Returns the resolved decision dict or None."""
    if session.status != "active":
        raise ProtocolError("session_complete", "session already complete")
    if voter_id not in session.voters:
        raise ProtocolError("unknown_voter", f"voter {voter_id!r} not in roster")
    if choice not in CHOICES:
        raise ProtocolError("bad_request", f"choice must be one of {CHOICES}")
    pair = session.current_pair
    if seen_pair is not None and tuple(seen_pair) != pair:
        raise ProtocolError("stale_pair", "the pair under comparison has changed; refresh")
    if voter_id in session.votes:
        raise ProtocolError("duplicate_vote", f"voter {voter_id!r} already voted on this pair")

    session.votes[voter_id] = Vote(
        voter_id=voter_id,
        left_image=pair[0],
        right_image=pair[1],
        choice=choice,
        timestamp=timestamp if timestamp is not None else time.time(),
    )
    if len(session.votes) == len(session.voters):
        return resolve_comparison(session)
    return None


def resolve_comparison(session: ComparisonSession):
    """Apply the majority decision for the current pair and advance."""
    if session.status != "active":
        raise ProtocolError("session_complete", "session already complete")
    if len(session.votes) != len(session.voters):
        raise ProtocolError("not_ready", "not all votes are in")

    left, right = session.current_pair
    n_left = sum(1 for v in session.votes.values() if v.choice == "left")
    n_right = len(session.votes) - n_left
    if n_left == n_right:
        winner = session.votes[session.tiebreak_voter].choice
    else:
        winner = "left" if n_left > n_right else "right"

    swapped = winner == "right"
    if swapped:
        session.arrangement[session.cursor], session.arrangement[session.cursor + 1] = (
            session.arrangement[session.cursor + 1],
            session.arrangement[session.cursor],
        )
        session.swapped_this_pass = True

    decision = {
        "pass_no": session.pass_no,
        "cursor": session.cursor,
        "left": left,
        "right": right,
        "votes": {v.voter_id: v.choice for v in session.votes.values()},
        "winner": winner,
        "swapped": swapped,
    }
    session.audit.append(decision)
    session.votes = {}

    session.cursor += 1
    if session.cursor >= session.pass_length:
        if not session.swapped_this_pass:
            session.status = "complete"
        else:
            session.pass_no += 1
            session.cursor = 0
            session.swapped_this_pass = False
            if session.pass_length <= 0:
                # nothing left to scan: the settled suffix covers the list
                session.status = "complete"
    return decision


def session_result(session: ComparisonSession):
    """Final ranking (left = rank 1); only for completed sessions."""
    if session.status != "complete":
        raise ProtocolError("not_ready", "session still active")
    return list(session.arrangement)


def replay_audit(images, shuffle_seed, audit):
    """Re-derive the final arrangement from the initial seed plus the audit
    log of resolved comparisons."""
    import random

    arrangement = list(images)
    random.Random(shuffle_seed).shuffle(arrangement)
    for decision in audit:
        c = decision["cursor"]
        if decision["swapped"]:
            arrangement[c], arrangement[c + 1] = arrangement[c + 1], arrangement[c]
    return arrangement


class OracleVoter:
    """Deterministic voter that follows a fixed total order (best first)."""

    def __init__(self, voter_id, order):
        self.voter_id = voter_id
        self.rank = {img: i for i, img in enumerate(order)}

    def choose(self, left, right):
        return "left" if self.rank[left] < self.rank[right] else "right"


def run_session_with_oracles(images, true_order, n_voters=3, shuffle_seed=0):
    """Drive a whole session with order-following oracle voters; returns the
    completed session."""
    voters = [f"v{i}" for i in range(n_voters)]
    tiebreak = voters[0] if n_voters % 2 == 0 else None
    session = create_session(images, voters, shuffle_seed, tiebreak_voter=tiebreak)
    oracles = [OracleVoter(v, true_order) for v in voters]
    while session.status == "active":
        left, right = session.current_pair
        for o in oracles:
            submit_vote(session, o.voter_id, o.choose(left, right), seen_pair=(left, right))
    return session
