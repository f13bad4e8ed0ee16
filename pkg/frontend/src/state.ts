/** Application state and its pure transitions. The view is always whatever
 * the service last reported; the client never simulates dynamics itself. */

import type {
  Condition,
  FinishResponse,
  SessionView,
  StepResponse,
} from "./api.js";

export type Screen = "start" | "task" | "summary" | "error";

export interface AppState {
  screen: Screen;
  view: SessionView | null;
  /** Sticky: set when the service first reports subgoal_achieved. */
  subgoalAchieved: boolean;
  /** Raw text of each action input. */
  inputs: string[];
  /** Inline per-field validation messages; null when the field is fine. */
  fieldErrors: (string | null)[];
  /** A step or bootstrap request is in flight; submit is disabled. */
  pending: boolean;
  summary: FinishResponse | null;
  error: string | null;
}

export function initialState(): AppState {
  return {
    screen: "start",
    view: null,
    subgoalAchieved: false,
    inputs: [],
    fieldErrors: [],
    pending: false,
    summary: null,
    error: null,
  };
}

function blankInputs(view: SessionView): string[] {
  return view.environment.action_names.map(() => "0");
}

/** A session was created or restored; enter the task screen. */
export function sessionStarted(state: AppState, view: SessionView): AppState {
  return {
    ...state,
    screen: view.finished ? "summary" : "task",
    view,
    subgoalAchieved:
      view.condition === "subgoal" && view.active_goal.kind === "final",
    inputs: blankInputs(view),
    fieldErrors: view.environment.action_names.map(() => null),
    pending: false,
    error: null,
  };
}

/** The user edited one action field. */
export function inputChanged(
  state: AppState,
  index: number,
  value: string,
): AppState {
  const inputs = state.inputs.slice();
  inputs[index] = value;
  const fieldErrors = state.fieldErrors.slice();
  fieldErrors[index] = null;
  return { ...state, inputs, fieldErrors };
}

/** Arrow-key increment: parse, add delta, write back; blank counts as 0. */
export function inputNudged(
  state: AppState,
  index: number,
  delta: number,
): AppState {
  const current = Number(state.inputs[index].trim() || "0");
  const base = Number.isFinite(current) ? current : 0;
  return inputChanged(state, index, String(base + delta));
}

export type ParsedActions =
  | { ok: true; actions: number[] }
  | { ok: false; errors: (string | null)[] };

/** Validate the action fields; finite numbers only, negatives allowed. */
export function parseActions(inputs: string[]): ParsedActions {
  const actions: number[] = [];
  const errors: (string | null)[] = inputs.map(() => null);
  let bad = false;
  inputs.forEach((raw, i) => {
    const value = Number(raw.trim());
    if (raw.trim() === "" || !Number.isFinite(value)) {
      errors[i] = "enter a number";
      bad = true;
    } else {
      actions.push(value);
    }
  });
  return bad ? { ok: false, errors } : { ok: true, actions };
}

/** Validation failed: show inline errors, nothing was submitted. */
export function invalidSubmit(
  state: AppState,
  errors: (string | null)[],
): AppState {
  return { ...state, fieldErrors: errors };
}

export function stepPending(state: AppState): AppState {
  return { ...state, pending: true };
}

/** Fold a step response into the current view. */
export function stepApplied(state: AppState, resp: StepResponse): AppState {
  if (state.view === null) {
    return state;
  }
  const view: SessionView = {
    ...state.view,
    status: resp.finished ? "finished" : state.view.status,
    round: resp.round,
    state: resp.state,
    active_goal: resp.active_goal,
    distance: resp.distance,
    bonus: resp.bonus,
    resources: resp.resources,
    finished: resp.finished,
  };
  return {
    ...state,
    view,
    subgoalAchieved: state.subgoalAchieved || resp.subgoal_achieved,
    inputs: blankInputs(view),
    fieldErrors: view.environment.action_names.map(() => null),
    pending: false,
  };
}

/** A conflicting or failed step was resolved by re-reading the session. */
export function sessionReloaded(state: AppState, view: SessionView): AppState {
  const next = sessionStarted(state, view);
  return {
    ...next,
    subgoalAchieved: next.subgoalAchieved || state.subgoalAchieved,
  };
}

export function finishApplied(
  state: AppState,
  resp: FinishResponse,
): AppState {
  return { ...state, screen: "summary", summary: resp, pending: false };
}

/** The service could not be reached; offer a retry. */
export function serviceUnreachable(state: AppState, message: string): AppState {
  return { ...state, screen: "error", error: message, pending: false };
}

/** Bonus display: United States dollars, rounded to cents; the underlying
 * value keeps full precision in the state. */
export function formatUsd(amount: number): string {
  return `$${amount.toFixed(2)}`;
}

/** Exact decimal rendering: JavaScript's shortest round-trip form, so the
 * displayed text parses back to the identical number. */
export function formatExact(value: number): string {
  return String(value);
}

export function formatDistance(value: number): string {
  return value.toFixed(2);
}

export type { Condition, SessionView, StepResponse, FinishResponse };
