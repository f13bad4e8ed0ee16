/** Shared fixture loading and stub handlers for the UI tests. */

import { readFileSync } from "node:fs";
import { resolve } from "node:path";

import type {
  CreateResponse,
  FinishResponse,
  SessionView,
  StepResponse,
} from "../src/api.js";
import type { Handlers } from "../src/render.js";

export interface Fixture {
  note: string;
  create: CreateResponse;
  steps: { action: number[]; response: StepResponse }[];
  finish: FinishResponse;
  final_view: SessionView;
}

// vitest runs with frontend/ as the working directory; import.meta.url is
// no use here because the jsdom environment rewrites it to an http scheme
const FIXTURE_PATH = resolve(
  process.cwd(),
  "tests/fixtures/scripted_session.json",
);

export function loadFixture(): Fixture {
  return JSON.parse(readFileSync(FIXTURE_PATH, "utf-8")) as Fixture;
}

export function nullHandlers(): Handlers {
  return {
    onStart() {},
    onInput() {},
    onNudge() {},
    onSubmit() {},
    onRetry() {},
  };
}
