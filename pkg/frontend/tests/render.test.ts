import { describe, expect, it, vi } from "vitest";

import {
  finishApplied,
  initialState,
  invalidSubmit,
  sessionStarted,
  stepPending,
  formatUsd,
} from "../src/state.js";
import { hasSelfLoop, renderApp, renderGraph } from "../src/render.js";
import { loadFixture, nullHandlers } from "./helpers.js";

const fixture = loadFixture();

function mount() {
  document.body.innerHTML = "";
  const root = document.createElement("div");
  document.body.appendChild(root);
  return root;
}

function taskState() {
  return sessionStarted(initialState(), fixture.create.view);
}

describe("hasSelfLoop", () => {
  it("requires the self-weight to exceed one in magnitude", () => {
    expect(hasSelfLoop([[1.5]], 0)).toBe(true);
    expect(hasSelfLoop([[1.0]], 0)).toBe(false);
    expect(hasSelfLoop([[0.8]], 0)).toBe(false);
    expect(hasSelfLoop([[-1.2]], 0)).toBe(true);
  });
});

describe("renderGraph", () => {
  const env = fixture.create.view.environment;
  const svg = renderGraph(env);

  it("draws a node for every state and action", () => {
    expect(svg.querySelectorAll(".state-node").length).toBe(5);
    expect(svg.querySelectorAll(".action-node").length).toBe(3);
    for (const name of [...env.state_names, ...env.action_names]) {
      expect(svg.querySelector(`[data-name="${name}"]`)).not.toBeNull();
    }
  });

  it("draws one weighted edge per nonzero off-diagonal influence", () => {
    const offDiag = env.A.flatMap((row, i) =>
      row.filter((w, j) => w !== 0 && i !== j),
    ).length;
    const actions = env.B.flat().filter((w) => w !== 0).length;
    expect(svg.querySelectorAll(".edge.state-edge").length).toBe(offDiag);
    expect(svg.querySelectorAll(".edge.action-edge").length).toBe(actions);
  });

  it("shows the self-loop only on the self-amplifying state", () => {
    const loops = svg.querySelectorAll(".self-loop");
    expect(loops.length).toBe(1);
    expect(loops[0].closest("[data-name]")?.getAttribute("data-name")).toBe(
      "Crowding",
    );
  });

  it("labels edges with their weights and styles negatives", () => {
    const labels = [...svg.querySelectorAll(".edge-label")].map(
      (n) => n.textContent,
    );
    expect(labels).toContain("1.5");
    expect(labels).toContain("-0.5");
    expect(labels).toContain("-2");
    expect(svg.querySelectorAll(".edge.neg").length).toBeGreaterThan(0);
  });
});

describe("task screen", () => {
  it("shows the round counter, bonus in dollars, and distance", () => {
    const root = mount();
    renderApp(root, taskState(), nullHandlers());
    expect(root.querySelector(".round-counter")?.textContent).toBe(
      "Round 0 / 20",
    );
    expect(root.querySelector(".bonus")?.textContent).toBe(
      `Bonus: ${formatUsd(fixture.create.view.bonus)}`,
    );
    expect(root.querySelector(".distance")?.textContent).toContain("subgoal");
  });

  it("shows current values exactly as the service reported them", () => {
    const root = mount();
    renderApp(root, taskState(), nullHandlers());
    const cells = root.querySelectorAll(".state-value");
    fixture.create.view.state.forEach((value, i) => {
      expect(cells[i].textContent).toBe(String(value));
    });
  });

  it("targets only the subgoal dimensions while the subgoal is active", () => {
    const root = mount();
    renderApp(root, taskState(), nullHandlers());
    const targets = [...root.querySelectorAll(".state-target")].map(
      (n) => n.textContent,
    );
    expect(targets[0]).toBe("0.37 ± 0");
    expect(targets[1]).toBe("1.75 ± 2");
    expect(targets.slice(2)).toEqual(["—", "—", "—"]);
    expect(root.querySelector(".goal-box h2")?.textContent).toBe("Subgoal");
    expect(root.querySelectorAll(".goal-target").length).toBe(2);
    expect(root.querySelector(".subgoal-banner")).toBeNull();
  });

  it("renders one input per action and reports field errors inline", () => {
    const root = mount();
    const state = invalidSubmit(taskState(), [null, "enter a number", null]);
    renderApp(root, state, nullHandlers());
    expect(root.querySelectorAll(".action-field input").length).toBe(3);
    const errors = root.querySelectorAll(".field-error");
    expect(errors.length).toBe(1);
    expect(errors[0].textContent).toBe("enter a number");
  });

  it("disables the form while a step is pending", () => {
    const root = mount();
    renderApp(root, stepPending(taskState()), nullHandlers());
    const submit = root.querySelector(".submit-step") as HTMLButtonElement;
    expect(submit.disabled).toBe(true);
    const input = root.querySelector(".action-field input") as HTMLInputElement;
    expect(input.disabled).toBe(true);
  });

  it("wires typing, arrow keys, and submission to the handlers", () => {
    const root = mount();
    const handlers = nullHandlers();
    const onInput = vi.spyOn(handlers, "onInput");
    const onNudge = vi.spyOn(handlers, "onNudge");
    const onSubmit = vi.spyOn(handlers, "onSubmit");
    renderApp(root, taskState(), handlers);
    const input = root.querySelector("#action-1") as HTMLInputElement;
    input.value = "5";
    input.dispatchEvent(new Event("input", { bubbles: true }));
    expect(onInput).toHaveBeenCalledWith(1, "5");
    input.dispatchEvent(
      new KeyboardEvent("keydown", { key: "ArrowUp", bubbles: true }),
    );
    expect(onNudge).toHaveBeenCalledWith(1, 1);
    input.dispatchEvent(
      new KeyboardEvent("keydown", { key: "ArrowDown", bubbles: true }),
    );
    expect(onNudge).toHaveBeenCalledWith(1, -1);
    (root.querySelector(".action-form") as HTMLFormElement).dispatchEvent(
      new Event("submit", { bubbles: true, cancelable: true }),
    );
    expect(onSubmit).toHaveBeenCalledOnce();
  });
});

describe("start, summary, and error screens", () => {
  it("offers both conditions on the start screen", () => {
    const root = mount();
    const handlers = nullHandlers();
    const onStart = vi.spyOn(handlers, "onStart");
    renderApp(root, initialState(), handlers);
    (root.querySelector(".start-subgoal") as HTMLButtonElement).click();
    expect(onStart).toHaveBeenCalledWith("subgoal");
    (root.querySelector(".start-control") as HTMLButtonElement).click();
    expect(onStart).toHaveBeenCalledWith("control");
  });

  it("shows the GAS-equal bonus in dollars on the summary screen", () => {
    const root = mount();
    renderApp(root, finishApplied(taskState(), fixture.finish), nullHandlers());
    expect(root.querySelector(".summary-bonus")?.textContent).toBe("$4.17");
  });

  it("lets the user retry from the error screen", () => {
    const root = mount();
    const handlers = nullHandlers();
    const onRetry = vi.spyOn(handlers, "onRetry");
    const state = {
      ...initialState(),
      screen: "error" as const,
      error: "session service unreachable",
    };
    renderApp(root, state, handlers);
    expect(root.querySelector(".error-message")?.textContent).toBe(
      "session service unreachable",
    );
    (root.querySelector(".retry") as HTMLButtonElement).click();
    expect(onRetry).toHaveBeenCalledOnce();
  });
});
