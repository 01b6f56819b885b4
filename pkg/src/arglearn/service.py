"""Local HTTP service that feeds pending preference queries to the labeling
UI and records the choices.

The synthetic auto-labeler drives the same endpoints as the browser, so the
human-in-the-loop path can be exercised headlessly. Queue transitions and
label-log writes are serialized through one lock; live comparators block on a
condition variable until their query is answered.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass
from pathlib import Path

from .argumentation import PreferredExtension
from .env import ACTION_NAMES, Action, MazeEnv, maze_to_json
from .preference import (
    ComparisonResult,
    Comparator,
    PreferenceRecord,
    QueryBudget,
    append_log_entry,
    log_entry,
    read_log,
    synthetic_pair_label,
)
from .trajectories import TrajectoryStore

CHOICES = ("left", "right", "skip")


class UnknownQueryError(KeyError):
    pass


class DuplicateLabelError(RuntimeError):
    pass


class QueryTimeoutError(TimeoutError):
    pass


@dataclass
class Query:
    query_id: int
    left: int
    right: int
    status: str = "pending"  # pending | answered | skipped


class ElicitationSession:
    """Query queue plus append-only label log for one maze/trajectory set."""

    def __init__(self, env: MazeEnv, store: TrajectoryStore, attack_pairs, log_path):
        self.env = env
        self.store = store
        self.attacks = {(min(a, b), max(a, b)) for a, b in attack_pairs}
        self.log_path = Path(log_path)
        self._queries: list[Query] = []
        self._by_id: dict[int, Query] = {}
        self._records: dict[int, PreferenceRecord] = {}
        self._lock = threading.Lock()
        self._answered = threading.Condition(self._lock)

    def enqueue(self, pairs) -> list[Query]:
        """Append queries in order with fresh monotone ids; pairs keep their
        given left/right orientation but must be attacking pairs."""
        with self._lock:
            created = []
            for left, right in pairs:
                if (min(left, right), max(left, right)) not in self.attacks:
                    raise ValueError(f"pair ({left}, {right}) is not an attacking pair")
                q = Query(query_id=len(self._queries), left=left, right=right)
                self._queries.append(q)
                self._by_id[q.query_id] = q
                created.append(q)
            return created

    def next_query(self) -> Query | None:
        """Oldest pending query; repeated calls return the same one until answered."""
        with self._lock:
            for q in self._queries:
                if q.status == "pending":
                    return q
            return None

    def submit_label(self, query_id: int, choice: str, source: str = "human") -> PreferenceRecord | None:
        """Record a choice; returns the record, or None for a skip."""
        if choice not in CHOICES:
            raise ValueError(f"choice must be one of {CHOICES}")
        with self._lock:
            rec = self._apply(query_id, choice, source, time.time(), write_log=True)
            self._answered.notify_all()
            return rec

    def _apply(self, query_id, choice, source, ts, write_log: bool) -> PreferenceRecord | None:
        q = self._by_id.get(query_id)
        if q is None:
            raise UnknownQueryError(f"unknown query_id {query_id}")
        if q.status != "pending":
            raise DuplicateLabelError(f"query {query_id} already {q.status}")
        if write_log:
            append_log_entry(self.log_path, log_entry(query_id, q.left, q.right, choice, source, ts))
        if choice == "skip":
            q.status = "skipped"
            return None
        q.status = "answered"
        winner, loser = (q.left, q.right) if choice == "left" else (q.right, q.left)
        rec = PreferenceRecord(winner=winner, loser=loser, source=source, query_id=query_id, timestamp=ts)
        self._records[query_id] = rec
        return rec

    def wait_for(self, query_id: int, timeout: float | None = None) -> Query:
        """Block until the query leaves pending; returns it answered or skipped."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._answered:
            q = self._by_id.get(query_id)
            if q is None:
                raise UnknownQueryError(f"unknown query_id {query_id}")
            while q.status == "pending":
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    raise QueryTimeoutError(f"query {query_id} unanswered after {timeout}s")
                self._answered.wait(remaining)
            return q

    def record_for(self, query_id: int) -> PreferenceRecord | None:
        with self._lock:
            return self._records.get(query_id)

    def records(self) -> list[PreferenceRecord]:
        with self._lock:
            return [self._records[q.query_id] for q in self._queries if q.query_id in self._records]

    def counts(self) -> dict:
        with self._lock:
            out = {"pending": 0, "answered": 0, "skipped": 0}
            for q in self._queries:
                out[q.status] += 1
            return out

    def replay_log(self) -> int:
        """Re-apply an existing label log to the queue state (crash recovery)."""
        if not self.log_path.exists():
            return 0
        applied = 0
        with self._lock:
            for e in read_log(self.log_path):
                q = self._by_id.get(e["query_id"])
                if q is None or q.status != "pending":
                    continue
                if (q.left, q.right) != (e["left"], e["right"]):
                    raise ValueError(f"log entry {e['query_id']} does not match the enqueued pair")
                self._apply(e["query_id"], e["choice"], e.get("source", "human"), e.get("ts", 0.0), write_log=False)
                applied += 1
        return applied


def _trajectory_payload(store: TrajectoryStore, traj_id: int) -> dict:
    t = store[traj_id]
    steps = [[[float(x), float(y)], ACTION_NAMES[Action(a)]] for (x, y), a in t.steps()]
    return {"id": t.id, "steps": steps}


def create_app(session: ElicitationSession, frontend_dir=None):
    from fastapi import FastAPI, Response
    from fastapi.responses import JSONResponse

    app = FastAPI(title="preference elicitation service")

    @app.get("/api/maze")
    def get_maze():
        return maze_to_json(session.env)

    @app.get("/api/session")
    def get_session():
        return {"maze": maze_to_json(session.env), **session.counts()}

    @app.get("/api/query/next")
    def get_next():
        q = session.next_query()
        if q is None:
            return Response(status_code=204)
        return {
            "query_id": q.query_id,
            "left": _trajectory_payload(session.store, q.left),
            "right": _trajectory_payload(session.store, q.right),
        }

    @app.post("/api/label")
    def post_label(body: dict):
        query_id = body.get("query_id")
        choice = body.get("choice")
        source = body.get("source", "human")
        if not isinstance(query_id, int) or choice not in CHOICES:
            return JSONResponse({"error": "need integer query_id and choice left|right|skip"}, status_code=422)
        try:
            rec = session.submit_label(query_id, choice, source=source)
        except UnknownQueryError:
            return JSONResponse({"error": f"unknown query_id {query_id}"}, status_code=404)
        except DuplicateLabelError:
            return JSONResponse({"error": f"query {query_id} already labeled"}, status_code=409)
        return {"recorded": rec is not None}

    if frontend_dir is not None and Path(frontend_dir).exists():
        from fastapi.staticfiles import StaticFiles

        app.mount("/", StaticFiles(directory=str(frontend_dir), html=True), name="ui")
    return app


def serve(session: ElicitationSession, port: int = 8321, frontend_dir=None):
    """Blocking localhost server; Ctrl-C to stop."""
    import uvicorn

    app = create_app(session, frontend_dir=frontend_dir)
    uvicorn.run(app, host="127.0.0.1", port=port, log_level="warning")


def make_live_comparator(
    session: ElicitationSession,
    budget: QueryBudget | None = None,
    timeout: float | None = None,
) -> Comparator:
    """Extension comparator that asks the service one query per comparison.

    The queried pair is the lexicographically smallest attacking pair across
    the two extensions (left drawn from the first extension); a skip falls
    back to the lower-index tie-break and is excluded from counts.
    """

    def cmp(p_i: PreferredExtension, p_j: PreferredExtension) -> ComparisonResult:
        if budget is not None:
            budget.spend()
        pair = _cross_attacking_pair(session, p_i, p_j)
        if pair is None:
            return ComparisonResult("first" if p_i.index < p_j.index else "second", tied=True)
        q = session.enqueue([pair])[0]
        done = session.wait_for(q.query_id, timeout=timeout)
        if done.status == "skipped":
            return ComparisonResult("first" if p_i.index < p_j.index else "second", tied=True)
        rec = session.record_for(q.query_id)
        return ComparisonResult("first" if rec.winner == pair[0] else "second")

    return Comparator(cmp)


def _cross_attacking_pair(session, p_i: PreferredExtension, p_j: PreferredExtension):
    only_i = sorted(p_i.members - p_j.members)
    only_j = sorted(p_j.members - p_i.members)
    for a in only_i:
        for b in only_j:
            if (min(a, b), max(a, b)) in session.attacks:
                return (a, b)
    return None


def auto_label_http(client, env: MazeEnv, store: TrajectoryStore, stop_event=None, poll_interval: float = 0.02, max_labels: int | None = None) -> int:
    """Drive the service endpoints with the true-return oracle.

    `client` is any httpx-compatible client bound to the service base URL.
    Runs until the queue drains (one empty poll after stop_event, if given);
    returns the number of labels posted.
    """
    posted = 0
    while max_labels is None or posted < max_labels:
        resp = client.get("/api/query/next")
        if resp.status_code == 204:
            if stop_event is None or stop_event.is_set():
                return posted
            time.sleep(poll_interval)
            continue
        payload = resp.json()
        left, right = payload["left"]["id"], payload["right"]["id"]
        rec = synthetic_pair_label(env, store[left], store[right])
        choice = "left" if rec.winner == left else "right"
        out = client.post(
            "/api/label",
            json={"query_id": payload["query_id"], "choice": choice, "source": "synthetic"},
        )
        if out.status_code == 200:
            posted += 1
    return posted
