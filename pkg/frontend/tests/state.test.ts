import { describe, expect, it } from "vitest";

import {
  finishApplied,
  formatDistance,
  formatExact,
  formatUsd,
  initialState,
  inputChanged,
  inputNudged,
  invalidSubmit,
  parseActions,
  serviceUnreachable,
  sessionReloaded,
  sessionStarted,
  stepApplied,
  stepPending,
} from "../src/state.js";
import { loadFixture } from "./helpers.js";

const fixture = loadFixture();

function started() {
  return sessionStarted(initialState(), fixture.create.view);
}

describe("initialState", () => {
  it("begins on the start screen with nothing pending", () => {
    const state = initialState();
    expect(state.screen).toBe("start");
    expect(state.view).toBeNull();
    expect(state.pending).toBe(false);
    expect(state.subgoalAchieved).toBe(false);
  });
});

describe("sessionStarted", () => {
  it("enters the task screen with zeroed inputs", () => {
    const state = started();
    expect(state.screen).toBe("task");
    expect(state.view?.session_id).toBe(fixture.create.session_id);
    expect(state.inputs).toEqual(["0", "0", "0"]);
    expect(state.fieldErrors).toEqual([null, null, null]);
    expect(state.subgoalAchieved).toBe(false);
  });

  it("flags a restored session whose subgoal is already retired", () => {
    const state = sessionStarted(initialState(), fixture.final_view);
    expect(state.subgoalAchieved).toBe(true);
    expect(state.screen).toBe("summary");
  });

  it("never flags the control condition", () => {
    const view = {
      ...fixture.final_view,
      condition: "control" as const,
      finished: false,
    };
    const state = sessionStarted(initialState(), view);
    expect(state.subgoalAchieved).toBe(false);
    expect(state.screen).toBe("task");
  });
});

describe("parseActions", () => {
  it("accepts finite numbers, negatives and whitespace included", () => {
    const parsed = parseActions([" 2.5 ", "-3", "0"]);
    expect(parsed).toEqual({ ok: true, actions: [2.5, -3, 0] });
  });

  it("rejects non-numeric entries with per-field messages", () => {
    const parsed = parseActions(["1", "abc", ""]);
    expect(parsed.ok).toBe(false);
    if (!parsed.ok) {
      expect(parsed.errors).toEqual([null, "enter a number", "enter a number"]);
    }
  });

  it("rejects non-finite values", () => {
    const parsed = parseActions(["Infinity", "1", "NaN"]);
    expect(parsed.ok).toBe(false);
    if (!parsed.ok) {
      expect(parsed.errors[0]).not.toBeNull();
      expect(parsed.errors[1]).toBeNull();
      expect(parsed.errors[2]).not.toBeNull();
    }
  });
});

describe("input editing", () => {
  it("stores the raw text and clears the field error", () => {
    let state = invalidSubmit(started(), [null, "enter a number", null]);
    state = inputChanged(state, 1, "4");
    expect(state.inputs[1]).toBe("4");
    expect(state.fieldErrors[1]).toBeNull();
  });

  it("nudges numeric values by the arrow delta", () => {
    let state = started();
    state = inputChanged(state, 0, "3");
    state = inputNudged(state, 0, 1);
    expect(state.inputs[0]).toBe("4");
    state = inputNudged(state, 0, -1);
    expect(state.inputs[0]).toBe("3");
  });

  it("treats blank or broken text as zero when nudging", () => {
    let state = inputChanged(started(), 2, "");
    state = inputNudged(state, 2, 1);
    expect(state.inputs[2]).toBe("1");
    state = inputChanged(state, 2, "abc");
    state = inputNudged(state, 2, -1);
    expect(state.inputs[2]).toBe("-1");
  });
});

describe("stepApplied", () => {
  it("folds the response into the view and resets the form", () => {
    let state = stepPending(started());
    state = inputChanged(state, 0, "7");
    const resp = fixture.steps[0].response;
    state = stepApplied(state, resp);
    expect(state.pending).toBe(false);
    expect(state.view?.round).toBe(resp.round);
    expect(state.view?.state).toEqual(resp.state);
    expect(state.view?.bonus).toBe(resp.bonus);
    expect(state.view?.distance).toBe(resp.distance);
    expect(state.view?.active_goal).toEqual(resp.active_goal);
    expect(state.inputs).toEqual(["0", "0", "0"]);
  });

  it("keeps the achievement flag sticky across later rounds", () => {
    let state = started();
    for (const step of fixture.steps.slice(0, 5)) {
      state = stepApplied(state, step.response);
    }
    expect(state.subgoalAchieved).toBe(true);
    expect(fixture.steps[4].response.subgoal_achieved).toBe(false);
  });

  it("marks the view finished on the last round", () => {
    let state = started();
    for (const step of fixture.steps) {
      state = stepApplied(state, step.response);
    }
    expect(state.view?.finished).toBe(true);
    expect(state.view?.round).toBe(fixture.create.view.horizon);
  });
});

describe("sessionReloaded", () => {
  it("replaces the view after a conflict and keeps the sticky flag", () => {
    let state = started();
    state = stepApplied(state, fixture.steps[1].response);
    expect(state.subgoalAchieved).toBe(true);
    state = sessionReloaded(state, fixture.create.view);
    expect(state.view?.round).toBe(0);
    expect(state.subgoalAchieved).toBe(true);
    expect(state.pending).toBe(false);
  });
});

describe("finish and errors", () => {
  it("shows the summary screen with the final scores", () => {
    const state = finishApplied(started(), fixture.finish);
    expect(state.screen).toBe("summary");
    expect(state.summary?.gas).toBe(fixture.finish.gas);
  });

  it("moves to the error screen when the service is unreachable", () => {
    const state = serviceUnreachable(stepPending(started()), "down");
    expect(state.screen).toBe("error");
    expect(state.error).toBe("down");
    expect(state.pending).toBe(false);
  });
});

describe("formatting", () => {
  it("renders the bonus in dollars rounded to cents", () => {
    expect(formatUsd(0.2)).toBe("$0.20");
    expect(formatUsd(fixture.finish.gas)).toBe("$4.17");
    expect(formatUsd(0)).toBe("$0.00");
  });

  it("renders state values exactly, round-trippable to the same number", () => {
    for (const value of fixture.steps[7].response.state) {
      expect(Number(formatExact(value))).toBe(value);
    }
  });

  it("rounds distances to two decimals", () => {
    expect(formatDistance(112.98765)).toBe("112.99");
  });
});
