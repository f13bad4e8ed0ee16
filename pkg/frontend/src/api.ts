/** Typed client for the session service. All calls are same-origin; the
 * dev server proxies /sessions to the Python service. */

export type Condition = "subgoal" | "control";

export interface GoalView {
  kind: "subgoal" | "final";
  index: number;
  dims: number[];
  names: string[];
  targets: number[];
  tolerances: number[];
  threshold: number;
}

export interface EnvironmentView {
  state_names: string[];
  action_names: string[];
  A: number[][];
  B: number[][];
  layout: Record<string, [number, number]> | null;
}

export interface SessionView {
  session_id: string;
  env_id: string;
  condition: Condition;
  status: string;
  round: number;
  horizon: number;
  state: number[];
  active_goal: GoalView;
  distance: number;
  bonus: number;
  resources: number;
  rounds_goal_met: number;
  finished: boolean;
  environment: EnvironmentView;
}

export interface StepResponse {
  session_id: string;
  round: number;
  state: number[];
  active_goal: GoalView;
  subgoal_achieved: boolean;
  final_goal_achieved: boolean;
  bonus: number;
  distance: number;
  resources: number;
  finished: boolean;
}

export interface FinishResponse {
  gas: number;
  ds: number;
  resources: number;
  rounds: number;
  rounds_goal_met: number;
  session_id: string;
  condition: Condition;
  trajectory_path: string;
}

export interface CreateResponse {
  session_id: string;
  view: SessionView;
}

export class ApiError extends Error {
  constructor(
    readonly status: number,
    readonly field: string,
    message: string,
  ) {
    super(message);
    this.name = "ApiError";
  }
}

async function request<T>(
  method: string,
  path: string,
  body?: unknown,
): Promise<T> {
  let resp: Response;
  try {
    resp = await fetch(path, {
      method,
      headers:
        body === undefined ? undefined : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
  } catch {
    throw new ApiError(0, "$", "session service unreachable");
  }
  let data: unknown = null;
  try {
    data = await resp.json();
  } catch {
    // non-JSON bodies fall through to the status check below
  }
  if (!resp.ok) {
    const detail = (data as { detail?: { field?: string; message?: string } })
      ?.detail;
    throw new ApiError(
      resp.status,
      detail?.field ?? "$",
      detail?.message ?? `request failed with status ${resp.status}`,
    );
  }
  return data as T;
}

export const ENV_ID = "farm";

export function createSession(condition: Condition): Promise<CreateResponse> {
  return request("POST", "/sessions", { env_id: ENV_ID, condition });
}

export function getSession(sessionId: string): Promise<SessionView> {
  return request("GET", `/sessions/${sessionId}`);
}

export function stepSession(
  sessionId: string,
  action: number[],
): Promise<StepResponse> {
  return request("POST", `/sessions/${sessionId}/step`, { action });
}

export function finishSession(sessionId: string): Promise<FinishResponse> {
  return request("POST", `/sessions/${sessionId}/finish`);
}
