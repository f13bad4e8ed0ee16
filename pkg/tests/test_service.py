import datetime
import json
from pathlib import Path

import numpy as np
import numpy.testing as npt
import pytest
from fastapi.testclient import TestClient

from microgoals.agents import make_population, run_episode
from microgoals.core import (GoalProgram, goal_achievement_score, step,
                             weighted_distance)
from microgoals.envfile import trajectory_from_dict
from microgoals.service import CONDITIONS, EnvEntry, create_app


@pytest.fixture()
def service(tmp_path, farm, farm_subgoals):
    entries = {
        "farm": EnvEntry(config=farm, subgoals=farm_subgoals),
        "bare": EnvEntry(config=farm),
    }
    session_dir = tmp_path / "sessions"
    app = create_app(entries, session_dir=session_dir)
    return {"app": app, "client": TestClient(app), "dir": session_dir}


def create(service, condition="subgoal", env_id="farm"):
    r = service["client"].post("/sessions", json={"env_id": env_id,
                                                  "condition": condition})
    assert r.status_code == 200
    return r.json()


class TestCreateSession:
    def test_subgoal_view(self, service, farm, farm_subgoals):
        created = create(service)
        view = created["view"]
        assert created["session_id"] == view["session_id"]
        assert view["env_id"] == "farm"
        assert view["condition"] == "subgoal"
        assert view["status"] == "running"
        assert view["round"] == 0
        assert view["horizon"] == farm.horizon
        npt.assert_array_equal(view["state"], farm.initial_state)
        assert view["bonus"] == pytest.approx(0.2)
        assert view["resources"] == 0.0
        assert view["finished"] is False
        goal = view["active_goal"]
        assert goal["kind"] == "subgoal"
        assert goal["index"] == 0
        assert goal["dims"] == [0, 1]
        assert goal["names"] == ["Crowding", "SpaceWorms"]
        npt.assert_array_equal(goal["targets"], farm_subgoals[0].targets)
        assert goal["tolerances"] == [0, 2]
        assert goal["threshold"] == 1.0

    def test_control_view_shows_final_goal(self, service, farm):
        view = create(service, condition="control")["view"]
        goal = view["active_goal"]
        assert goal["kind"] == "final"
        assert goal["dims"] == [0, 1, 2, 3, 4]
        assert goal["names"] == list(farm.env.state_names)
        assert goal["tolerances"] == [22, 22, 22, 22, 22]
        assert goal["threshold"] == 50.0

    def test_view_carries_environment_and_layout(self, service, farm):
        view = create(service)["view"]
        env = view["environment"]
        assert env["state_names"] == list(farm.env.state_names)
        assert env["action_names"] == list(farm.env.action_names)
        npt.assert_array_equal(env["A"], farm.env.A)
        npt.assert_array_equal(env["B"], farm.env.B)
        assert set(env["layout"]) == set(farm.layout)

    def test_distance_matches_oracle(self, service, farm, farm_subgoals):
        view = create(service)["view"]
        expected = weighted_distance(farm.initial_state, farm_subgoals[0])
        assert view["distance"] == pytest.approx(expected, rel=1e-12)

    def test_create_validation(self, service):
        client = service["client"]
        r = client.post("/sessions", json={"condition": "subgoal"})
        assert r.status_code == 400
        assert r.json()["detail"]["field"] == "env_id"
        r = client.post("/sessions", json={"env_id": 7, "condition": "subgoal"})
        assert r.status_code == 400
        r = client.post("/sessions", json={"env_id": "swamp",
                                           "condition": "subgoal"})
        assert r.status_code == 404
        assert r.json()["detail"]["field"] == "env_id"
        r = client.post("/sessions", json={"env_id": "farm",
                                           "condition": "treatment"})
        assert r.status_code == 400
        assert r.json()["detail"]["field"] == "condition"
        r = client.post("/sessions", json={"env_id": "bare",
                                           "condition": "subgoal"})
        assert r.status_code == 400
        assert "no subgoal" in r.json()["detail"]["message"]

    def test_control_allowed_without_subgoals(self, service):
        view = create(service, condition="control", env_id="bare")["view"]
        assert view["active_goal"]["kind"] == "final"

    def test_malformed_json_body(self, service):
        r = service["client"].post(
            "/sessions", content=b"{not json",
            headers={"content-type": "application/json"})
        assert r.status_code == 400
        detail = r.json()["detail"]
        assert set(detail) == {"field", "message"}

    def test_conditions_constant(self):
        assert CONDITIONS == ("subgoal", "control")


class TestStep:
    def test_one_round_matches_dynamics(self, service, farm):
        created = create(service, condition="control")
        sid = created["session_id"]
        action = [1.0, -2.0, 0.5]
        r = service["client"].post(f"/sessions/{sid}/step",
                                   json={"action": action})
        assert r.status_code == 200
        body = r.json()
        assert body["round"] == 1
        expected = step(farm.env, farm.initial_state, action)
        npt.assert_array_equal(body["state"], expected)
        assert body["resources"] == pytest.approx(3.5)
        assert body["final_goal_achieved"] is False
        assert body["subgoal_achieved"] is False
        assert body["finished"] is False
        w = farm.weights
        assert body["bonus"] == pytest.approx(
            max(0.0, w.w1 - w.w3 * 3.5))

    def test_action_validation(self, service):
        sid = create(service)["session_id"]
        client = service["client"]
        url = f"/sessions/{sid}/step"
        r = client.post(url, json={})
        assert r.status_code == 400
        assert r.json()["detail"]["field"] == "action"
        r = client.post(url, json={"action": "big"})
        assert r.status_code == 400
        r = client.post(url, json={"action": [1.0, 2.0]})
        assert r.status_code == 400
        assert "expected 3 entries, got 2" in r.json()["detail"]["message"]
        r = client.post(url, json={"action": [1.0, True, 0.0]})
        assert r.status_code == 400
        assert r.json()["detail"]["field"] == "action[1]"
        r = client.post(url, json={"action": [1.0, None, 0.0]})
        assert r.status_code == 400

    def test_unknown_session(self, service):
        r = service["client"].post("/sessions/nope/step",
                                   json={"action": [0, 0, 0]})
        assert r.status_code == 404
        assert r.json()["detail"]["field"] == "session_id"
        assert service["client"].get("/sessions/nope").status_code == 404
        assert service["client"].post("/sessions/nope/finish").status_code == 404

    def test_horizon_finishes_session(self, service, farm):
        sid = create(service, condition="control")["session_id"]
        client = service["client"]
        for t in range(farm.horizon):
            r = client.post(f"/sessions/{sid}/step",
                            json={"action": [0.0, 0.0, 0.0]})
            assert r.status_code == 200
        assert r.json()["finished"] is True
        assert r.json()["round"] == farm.horizon
        r = client.post(f"/sessions/{sid}/step",
                        json={"action": [0.0, 0.0, 0.0]})
        assert r.status_code == 409
        assert "finished" in r.json()["detail"]["message"]

    def test_concurrent_step_conflicts(self, service):
        sid = create(service)["session_id"]
        sess = service["app"].state.sessions[sid]
        assert sess.lock.acquire(blocking=False)
        try:
            r = service["client"].post(f"/sessions/{sid}/step",
                                       json={"action": [0.0, 0.0, 0.0]})
            assert r.status_code == 409
            assert "concurrent" in r.json()["detail"]["message"]
        finally:
            sess.lock.release()
        r = service["client"].post(f"/sessions/{sid}/step",
                                   json={"action": [0.0, 0.0, 0.0]})
        assert r.status_code == 200

    def test_get_view_tracks_steps(self, service):
        sid = create(service)["session_id"]
        client = service["client"]
        client.post(f"/sessions/{sid}/step", json={"action": [1.0, 0.0, 0.0]})
        view = client.get(f"/sessions/{sid}").json()
        assert view["round"] == 1
        assert view["resources"] == 1.0
        assert view["status"] == "running"


class TestKernelAgreement:
    def test_scripted_episode_matches_kernel(self, service, farm,
                                             farm_subgoals):
        agent = make_population([1.0], enable_noise=False).agents[0]
        program = GoalProgram(subgoals=farm_subgoals, final=farm.final_goal)
        traj = run_episode(farm.env, agent, program, farm.initial_state,
                           farm.horizon, np.random.default_rng(0))

        sid = create(service)["session_id"]
        client = service["client"]
        fired_rounds = []
        for t in range(farm.horizon):
            r = client.post(f"/sessions/{sid}/step",
                            json={"action": [float(x) for x in traj.actions[t]]})
            body = r.json()
            npt.assert_allclose(body["state"], traj.states[t + 1], rtol=1e-9,
                                atol=1e-9)
            assert body["final_goal_achieved"] == bool(
                traj.final_goal_achieved[t])
            if body["subgoal_achieved"]:
                fired_rounds.append(body["round"])

        transitions = np.nonzero(np.diff(traj.active_goal_index) > 0)[0]
        assert fired_rounds == [int(t) + 1 for t in transitions]

        scores = client.post(f"/sessions/{sid}/finish").json()
        assert scores["gas"] == pytest.approx(
            goal_achievement_score(traj, farm.final_goal, farm.weights),
            rel=1e-9)
        assert scores["rounds_goal_met"] == int(np.sum(traj.final_goal_achieved))

    def test_subgoal_view_switches_to_final_after_retirement(self, service,
                                                             farm,
                                                             farm_subgoals):
        agent = make_population([1.0], enable_noise=False).agents[0]
        program = GoalProgram(subgoals=farm_subgoals, final=farm.final_goal)
        traj = run_episode(farm.env, agent, program, farm.initial_state,
                           farm.horizon, np.random.default_rng(0))
        sid = create(service)["session_id"]
        client = service["client"]
        for t in range(farm.horizon):
            active = client.get(f"/sessions/{sid}").json()["active_goal"]
            if traj.active_goal_index[t] == 0:
                assert active["kind"] == "subgoal"
                assert active["dims"] == [0, 1]
            else:
                assert active["kind"] == "final"
                assert active["dims"] == [0, 1, 2, 3, 4]
            client.post(f"/sessions/{sid}/step",
                        json={"action": [float(x) for x in traj.actions[t]]})


class TestFinish:
    def test_zero_round_session_scores(self, service, farm):
        sid = create(service, condition="control")["session_id"]
        scores = service["client"].post(f"/sessions/{sid}/finish").json()
        assert scores["gas"] == pytest.approx(farm.weights.w1)
        assert scores["resources"] == 0.0
        assert scores["rounds"] == 0
        assert scores["rounds_goal_met"] == 0
        expected_ds = weighted_distance(farm.initial_state, farm.final_goal)
        assert scores["ds"] == pytest.approx(expected_ds, rel=1e-12)
        assert scores["session_id"] == sid
        assert scores["condition"] == "control"

    def test_finish_is_idempotent(self, service):
        sid = create(service)["session_id"]
        client = service["client"]
        client.post(f"/sessions/{sid}/step", json={"action": [1.0, 1.0, 1.0]})
        first = client.post(f"/sessions/{sid}/finish").json()
        path = Path(first["trajectory_path"])
        stamp = path.read_bytes()
        second = client.post(f"/sessions/{sid}/finish").json()
        assert first == second
        assert path.read_bytes() == stamp

    def test_finished_session_rejects_steps_but_serves_views(self, service):
        sid = create(service)["session_id"]
        client = service["client"]
        client.post(f"/sessions/{sid}/finish")
        r = client.post(f"/sessions/{sid}/step",
                        json={"action": [0.0, 0.0, 0.0]})
        assert r.status_code == 409
        view = client.get(f"/sessions/{sid}").json()
        assert view["status"] == "finished"
        assert view["finished"] is True

    def test_persisted_record_replays_byte_identically(self, service, farm):
        sid = create(service)["session_id"]
        client = service["client"]
        rng = np.random.default_rng(3)
        for _ in range(6):
            client.post(f"/sessions/{sid}/step",
                        json={"action": [float(x) for x in rng.normal(size=3)]})
        scores = client.post(f"/sessions/{sid}/finish").json()
        path = Path(scores["trajectory_path"])
        assert path.parent == service["dir"]
        assert path.name == f"{sid}.json"
        record = json.loads(path.read_text())
        assert record["kind"] == "session_record"
        assert record["session_id"] == sid
        assert record["condition"] == "subgoal"
        assert record["horizon"] == farm.horizon
        datetime.datetime.fromisoformat(record["created_at"])
        datetime.datetime.fromisoformat(record["finished_at"])
        traj = trajectory_from_dict(record["trajectory"])
        assert traj.horizon == record["final_scores"]["rounds"] == 6
        for t in range(traj.horizon):
            replayed = step(farm.env, traj.states[t], traj.actions[t])
            assert np.array_equal(replayed, traj.states[t + 1])
        assert record["final_scores"]["gas"] == goal_achievement_score(
            traj, farm.final_goal, farm.weights)

    def test_events_record_subgoal_retirement(self, service, farm,
                                              farm_subgoals):
        agent = make_population([1.0], enable_noise=False).agents[0]
        program = GoalProgram(subgoals=farm_subgoals, final=farm.final_goal)
        traj = run_episode(farm.env, agent, program, farm.initial_state,
                           farm.horizon, np.random.default_rng(0))
        sid = create(service)["session_id"]
        client = service["client"]
        for t in range(farm.horizon):
            client.post(f"/sessions/{sid}/step",
                        json={"action": [float(x) for x in traj.actions[t]]})
        client.post(f"/sessions/{sid}/finish")
        record = json.loads(
            (service["dir"] / f"{sid}.json").read_text())
        events = [e for e in record["events"]
                  if e["event"] == "subgoal_achieved"]
        assert len(events) == 1
        transition = int(np.nonzero(np.diff(traj.active_goal_index) > 0)[0][0])
        assert events[0]["round"] == transition + 1
        assert events[0]["goal_index"] == 0
