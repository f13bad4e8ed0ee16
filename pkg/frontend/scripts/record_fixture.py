"""Record the scripted-session fixture the frontend tests replay.

Drives the real session service in-process: a noiseless lambda=1 hill
climber plays the packaged farm task in the subgoal condition, and every
request/response pair the browser client would see is captured verbatim.

Run from frontend/:  python3 scripts/record_fixture.py
"""

import json
import tempfile
from pathlib import Path

import numpy as np
from fastapi.testclient import TestClient

from microgoals.agents import make_population, run_episode
from microgoals.core import GoalProgram
from microgoals.envfile import (default_environment_path, load_environment,
                                subgoals_from_file)
from microgoals.service import EnvEntry, create_app

OUT = Path(__file__).parent.parent / "tests" / "fixtures" / "scripted_session.json"


def main():
    cfg = load_environment(default_environment_path())
    subgoals = subgoals_from_file(default_environment_path().parent
                                  / "farm_subgoal.json")
    agent = make_population([1.0], enable_noise=False).agents[0]
    traj = run_episode(cfg.env, agent,
                       GoalProgram(subgoals=subgoals, final=cfg.final_goal),
                       cfg.initial_state, cfg.horizon, np.random.default_rng(0))

    with tempfile.TemporaryDirectory() as tmp:
        app = create_app({"farm": EnvEntry(config=cfg, subgoals=subgoals)},
                         session_dir=tmp)
        client = TestClient(app)
        create = client.post("/sessions", json={
            "env_id": "farm", "condition": "subgoal"}).json()
        sid = create["session_id"]
        steps = []
        for t in range(cfg.horizon):
            action = [float(x) for x in traj.actions[t]]
            resp = client.post(f"/sessions/{sid}/step",
                               json={"action": action})
            resp.raise_for_status()
            steps.append({"action": action, "response": resp.json()})
        finish = client.post(f"/sessions/{sid}/finish").json()
        final_view = client.get(f"/sessions/{sid}").json()

    # the absolute temp path would churn the fixture; keep a stable name
    finish["trajectory_path"] = f"sessions/{sid}.json"

    fired = [s["response"]["round"] for s in steps
             if s["response"]["subgoal_achieved"]]
    if not fired or fired[0] <= 1 or fired[0] >= cfg.horizon:
        raise SystemExit(f"fixture not interesting: subgoal fired at {fired}")
    if not any(s["response"]["final_goal_achieved"] for s in steps):
        raise SystemExit("fixture never reaches the final goal")

    fixture = {
        "note": "recorded from the session service by scripts/record_fixture.py",
        "create": create,
        "steps": steps,
        "finish": finish,
        "final_view": final_view,
    }
    OUT.parent.mkdir(parents=True, exist_ok=True)
    OUT.write_text(json.dumps(fixture, indent=2) + "\n")
    print(f"wrote {OUT}: subgoal achieved at round {fired[0]}, "
          f"final goal held {finish['rounds_goal_met']} rounds, "
          f"GAS {finish['gas']:.4f}")


if __name__ == "__main__":
    main()
