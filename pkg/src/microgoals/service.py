"""HTTP session service exposing the microworld to interactive clients.

Each session runs one trial: a client posts an action vector per round, the
service applies the dynamics, retires satisfied subgoals at round boundaries
exactly as the episode kernel does, and reports the active goal view, the
running bonus and the distance to the active goal. Finished sessions persist
a replayable trajectory record, one JSON document per session.
"""

from __future__ import annotations

import datetime
import math
import threading
import uuid
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from fastapi import FastAPI, HTTPException, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse

from .core import (GoalProgram, GoalSpec, Trajectory, distance_score,
                   goal_achievement_score, is_achieved, scale_to_tolerance,
                   step, weighted_distance)
from .envfile import SCHEMA_VERSION, TaskConfig, dump_json, trajectory_to_dict

SESSION_DIR_ENV = "MICROGOALS_SESSION_DIR"
CONDITIONS = ("subgoal", "control")


@dataclass(frozen=True)
class EnvEntry:
    """An environment the service can instantiate sessions for."""

    config: TaskConfig
    subgoals: tuple[GoalSpec, ...] = ()


def _error(status: int, field: str, message: str) -> HTTPException:
    return HTTPException(status_code=status,
                         detail={"field": field, "message": message})


def _utcnow() -> str:
    return datetime.datetime.now(datetime.timezone.utc).isoformat()


class Session:
    """State of one trial; mutated only under its lock via apply/finalize."""

    def __init__(self, session_id: str, entry: EnvEntry, condition: str):
        cfg = entry.config
        subgoals = entry.subgoals if condition == "subgoal" else ()
        self.id = session_id
        self.entry = entry
        self.condition = condition
        self.program = GoalProgram(subgoals=subgoals, final=cfg.program.final)
        self.t = 0
        self.state = cfg.initial_state.copy()
        self.states = [self.state.copy()]
        self.actions: list[np.ndarray] = []
        self.active_rounds: list[int] = []
        self.hits: list[bool] = []
        self.events: list[dict] = []
        self.resources = 0.0
        self.status = "running"
        self.ptr = 0
        self.lock = threading.Lock()
        self.created_at = _utcnow()
        self.record: dict | None = None
        self._retire_satisfied()

    @property
    def config(self) -> TaskConfig:
        return self.entry.config

    @property
    def active_goal(self) -> GoalSpec:
        return self.program.goals[self.ptr]

    @property
    def bonus(self) -> float:
        """GAS over the rounds played so far, remaining rounds counting nothing."""
        w = self.config.weights
        return max(0.0, w.w1 + w.w2 * sum(self.hits) - w.w3 * self.resources)

    def _retire_satisfied(self) -> bool:
        """Permanently retire satisfied subgoals, first unachieved becomes active."""
        goals = self.program.goals
        fired = False
        while self.ptr < len(goals) - 1 and is_achieved(self.state, goals[self.ptr]):
            self.events.append({"round": self.t, "event": "subgoal_achieved",
                                "goal_index": self.ptr})
            self.ptr += 1
            fired = True
        return fired

    def apply(self, action: np.ndarray) -> tuple[bool, bool]:
        """Run one round; returns (subgoal retired this step, final goal hit)."""
        self.active_rounds.append(self.ptr)
        self.state = step(self.config.env, self.state, action)
        self.t += 1
        self.states.append(self.state.copy())
        self.actions.append(action)
        self.resources += float(np.abs(action).sum())
        hit = is_achieved(self.state, self.program.final)
        self.hits.append(hit)
        fired = self._retire_satisfied()
        if self.t >= self.config.horizon:
            self.status = "finished"
        return fired, hit

    def trajectory(self) -> Trajectory:
        m = self.config.env.n_actions
        return Trajectory(
            states=np.array(self.states, dtype=float),
            actions=(np.array(self.actions, dtype=float)
                     if self.actions else np.empty((0, m))),
            final_goal_achieved=np.array(self.hits, dtype=bool),
            active_goal_index=np.array(self.active_rounds, dtype=np.int64),
        )

    def finalize(self, session_dir: Path) -> dict:
        """Compute final scores and persist the session record (idempotent)."""
        if self.record is not None:
            return self.record
        self.status = "finished"
        traj = self.trajectory()
        final = self.program.final
        w = self.config.weights
        scores = {
            "gas": goal_achievement_score(traj, final, w),
            "ds": distance_score(traj, final, w),
            "resources": self.resources,
            "rounds": self.t,
            "rounds_goal_met": int(sum(self.hits)),
        }
        record = {
            "schema_version": SCHEMA_VERSION,
            "kind": "session_record",
            "session_id": self.id,
            "env_id": self.config.env_id,
            "condition": self.condition,
            "created_at": self.created_at,
            "finished_at": _utcnow(),
            "horizon": self.config.horizon,
            "events": list(self.events),
            "final_scores": scores,
            "trajectory": trajectory_to_dict(traj),
        }
        session_dir.mkdir(parents=True, exist_ok=True)
        path = session_dir / f"{self.id}.json"
        dump_json(record, path)
        record["trajectory_path"] = str(path)
        self.record = record
        return record


def _goal_view(sess: Session) -> dict:
    """Active goal as shown to clients: targets and rounded tolerances for
    the active goal's dimensions only."""
    goal = sess.active_goal
    names = sess.config.env.state_names
    tol = scale_to_tolerance(goal)
    is_final = sess.ptr == len(sess.program.goals) - 1
    return {
        "kind": "final" if is_final else "subgoal",
        "index": sess.ptr,
        "dims": list(goal.dims),
        "names": [names[d] for d in goal.dims],
        "targets": [float(x) for x in goal.targets],
        "tolerances": [int(round(float(x))) for x in tol],
        "threshold": float(goal.threshold),
    }


def _state_view(sess: Session) -> dict:
    cfg = sess.config
    return {
        "session_id": sess.id,
        "env_id": cfg.env_id,
        "condition": sess.condition,
        "status": sess.status,
        "round": sess.t,
        "horizon": cfg.horizon,
        "state": [float(x) for x in sess.state],
        "active_goal": _goal_view(sess),
        "distance": weighted_distance(sess.state, sess.active_goal),
        "bonus": sess.bonus,
        "resources": sess.resources,
        "rounds_goal_met": int(sum(sess.hits)),
        "finished": sess.status == "finished",
        "environment": {
            "state_names": list(cfg.env.state_names),
            "action_names": list(cfg.env.action_names),
            "A": [[float(x) for x in row] for row in cfg.env.A],
            "B": [[float(x) for x in row] for row in cfg.env.B],
            "layout": ({name: list(xy) for name, xy in cfg.layout.items()}
                       if cfg.layout else None),
        },
    }


def _parse_action(body, n_actions: int) -> np.ndarray:
    if not isinstance(body, dict):
        raise _error(400, "$", "request body must be a JSON object")
    if "action" not in body:
        raise _error(400, "action", "missing required field")
    raw = body["action"]
    if not isinstance(raw, list):
        raise _error(400, "action",
                     f"expected a list of numbers, got {type(raw).__name__}")
    if len(raw) != n_actions:
        raise _error(400, "action",
                     f"expected {n_actions} entries, got {len(raw)}")
    out = np.empty(n_actions)
    for i, x in enumerate(raw):
        if isinstance(x, bool) or not isinstance(x, (int, float)) \
                or not math.isfinite(x):
            raise _error(400, f"action[{i}]", "must be a finite number")
        out[i] = float(x)
    return out


def create_app(entries: dict[str, EnvEntry],
               session_dir: str | Path = "sessions") -> FastAPI:
    """Build the service around a registry of environments.

    session_dir names the directory finished trajectories persist to; the
    caller resolves it (the CLI honours the MICROGOALS_SESSION_DIR variable).
    """
    app = FastAPI(title="microgoals session service")
    sessions: dict[str, Session] = {}
    registry_lock = threading.Lock()
    out_dir = Path(session_dir)
    app.state.sessions = sessions

    @app.exception_handler(RequestValidationError)
    async def malformed_body(request: Request, exc: RequestValidationError):
        first = exc.errors()[0] if exc.errors() else {}
        loc = ".".join(str(p) for p in first.get("loc", ())) or "$"
        return JSONResponse(status_code=400, content={"detail": {
            "field": loc, "message": first.get("msg", "malformed request")}})

    def lookup(session_id: str) -> Session:
        with registry_lock:
            sess = sessions.get(session_id)
        if sess is None:
            raise _error(404, "session_id", f"unknown session {session_id!r}")
        return sess

    @app.post("/sessions")
    async def create_session(body: dict):
        env_id = body.get("env_id")
        if not isinstance(env_id, str):
            raise _error(400, "env_id", "missing or non-string field")
        entry = entries.get(env_id)
        if entry is None:
            raise _error(404, "env_id", f"unknown environment {env_id!r}")
        condition = body.get("condition")
        if condition not in CONDITIONS:
            raise _error(400, "condition",
                         f"must be one of {list(CONDITIONS)}, got {condition!r}")
        if condition == "subgoal" and not entry.subgoals:
            raise _error(400, "condition",
                         f"environment {env_id!r} has no subgoal on offer")
        session_id = uuid.uuid4().hex
        sess = Session(session_id, entry, condition)
        with registry_lock:
            sessions[session_id] = sess
        return {"session_id": session_id, "view": _state_view(sess)}

    @app.post("/sessions/{session_id}/step")
    async def step_session(session_id: str, body: dict):
        sess = lookup(session_id)
        action = _parse_action(body, sess.config.env.n_actions)
        if not sess.lock.acquire(blocking=False):
            raise _error(409, "session_id", "a concurrent step is in progress")
        try:
            if sess.status == "finished":
                raise _error(409, "session_id", "session is finished")
            fired, hit = sess.apply(action)
            return {
                "session_id": sess.id,
                "round": sess.t,
                "state": [float(x) for x in sess.state],
                "active_goal": _goal_view(sess),
                "subgoal_achieved": fired,
                "final_goal_achieved": hit,
                "bonus": sess.bonus,
                "distance": weighted_distance(sess.state, sess.active_goal),
                "resources": sess.resources,
                "finished": sess.status == "finished",
            }
        finally:
            sess.lock.release()

    @app.get("/sessions/{session_id}")
    async def get_session(session_id: str):
        sess = lookup(session_id)
        with sess.lock:
            return _state_view(sess)

    @app.post("/sessions/{session_id}/finish")
    async def finish_session(session_id: str):
        sess = lookup(session_id)
        with sess.lock:
            record = sess.finalize(out_dir)
        scores = dict(record["final_scores"])
        scores.update({
            "session_id": sess.id,
            "condition": sess.condition,
            "trajectory_path": record["trajectory_path"],
        })
        return scores

    return app
