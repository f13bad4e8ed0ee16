/** Bootstrap: wires the state machine, the service client, and the DOM.
 * The session id is kept in sessionStorage so a refresh restores the task
 * from the GET endpoint. */

import {
  ApiError,
  createSession,
  finishSession,
  getSession,
  stepSession,
} from "./api.js";
import type { Condition } from "./state.js";
import {
  finishApplied,
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
} from "./state.js";
import { renderApp, type Handlers } from "./render.js";

const STORAGE_KEY = "microgoals-session-id";

function run(root: HTMLElement): void {
  let state = initialState();

  const rerender = () => renderApp(root, state, handlers);
  const update = (next: typeof state) => {
    state = next;
    rerender();
  };

  const fail = (err: unknown) => {
    const message =
      err instanceof ApiError ? err.message : "unexpected error";
    update(serviceUnreachable(state, message));
  };

  const finish = async (sessionId: string) => {
    try {
      update(finishApplied(state, await finishSession(sessionId)));
    } catch (err) {
      fail(err);
    }
  };

  const handlers: Handlers = {
    onStart(condition: Condition) {
      update(stepPending(state));
      createSession(condition)
        .then((resp) => {
          sessionStorage.setItem(STORAGE_KEY, resp.session_id);
          update(sessionStarted(state, resp.view));
        })
        .catch(fail);
    },
    onInput(index, value) {
      update(inputChanged(state, index, value));
    },
    onNudge(index, delta) {
      update(inputNudged(state, index, delta));
    },
    onSubmit() {
      const view = state.view;
      if (!view || state.pending || view.finished) return;
      const parsed = parseActions(state.inputs);
      if (!parsed.ok) {
        update(invalidSubmit(state, parsed.errors));
        return;
      }
      update(stepPending(state));
      stepSession(view.session_id, parsed.actions)
        .then((resp) => {
          update(stepApplied(state, resp));
          if (resp.finished) {
            void finish(view.session_id);
          }
        })
        .catch((err) => {
          if (err instanceof ApiError && err.status === 409) {
            // someone else advanced the session; re-read it
            getSession(view.session_id)
              .then((fresh) => update(sessionReloaded(state, fresh)))
              .catch(fail);
          } else {
            fail(err);
          }
        });
    },
    onRetry() {
      const stored = sessionStorage.getItem(STORAGE_KEY);
      if (stored) {
        resume(stored);
      } else {
        update(initialState());
      }
    },
  };

  const resume = (sessionId: string) => {
    update(stepPending(state));
    getSession(sessionId)
      .then((view) => {
        update(sessionStarted(state, view));
        if (view.finished) {
          void finish(sessionId);
        }
      })
      .catch((err) => {
        if (err instanceof ApiError && err.status === 404) {
          sessionStorage.removeItem(STORAGE_KEY);
          update(initialState());
        } else {
          fail(err);
        }
      });
  };

  const stored = sessionStorage.getItem(STORAGE_KEY);
  if (stored) {
    resume(stored);
  } else {
    rerender();
  }
}

const mount = document.getElementById("app");
if (mount) {
  run(mount);
}

export { run };
