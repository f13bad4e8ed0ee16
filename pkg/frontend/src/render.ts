/** DOM rendering. The whole app re-renders from AppState on every change;
 * every number shown comes from the latest service response. */

import type { EnvironmentView, SessionView } from "./api.js";
import type { AppState, Condition } from "./state.js";
import { formatDistance, formatExact, formatUsd } from "./state.js";

export interface Handlers {
  onStart(condition: Condition): void;
  onInput(index: number, value: string): void;
  onNudge(index: number, delta: number): void;
  onSubmit(): void;
  onRetry(): void;
}

const SVG_NS = "http://www.w3.org/2000/svg";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

/** A state variable amplifies itself when its self-weight exceeds one in
 * magnitude; only then is the self-loop drawn. */
export function hasSelfLoop(A: number[][], index: number): boolean {
  return Math.abs(A[index][index]) > 1;
}

function fallbackLayout(env: EnvironmentView): Record<string, [number, number]> {
  const layout: Record<string, [number, number]> = {};
  env.state_names.forEach((name, i) => {
    layout[name] = [120 + 160 * i, 180];
  });
  env.action_names.forEach((name, j) => {
    layout[name] = [160 + 200 * j, 430];
  });
  return layout;
}

function edgeLine(
  from: [number, number],
  to: [number, number],
  weight: number,
  kind: string,
): SVGGElement {
  const group = document.createElementNS(SVG_NS, "g");
  group.setAttribute("class", `edge ${kind} ${weight > 0 ? "pos" : "neg"}`);
  // shorten toward the target so the arrowhead sits outside the node circle
  const dx = to[0] - from[0];
  const dy = to[1] - from[1];
  const len = Math.hypot(dx, dy) || 1;
  const trim = 34;
  const tx = to[0] - (dx / len) * trim;
  const ty = to[1] - (dy / len) * trim;
  const line = document.createElementNS(SVG_NS, "line");
  line.setAttribute("x1", String(from[0]));
  line.setAttribute("y1", String(from[1]));
  line.setAttribute("x2", String(tx));
  line.setAttribute("y2", String(ty));
  line.setAttribute("marker-end", "url(#arrow)");
  group.appendChild(line);
  const label = document.createElementNS(SVG_NS, "text");
  label.setAttribute("x", String((from[0] + tx) / 2 + 6));
  label.setAttribute("y", String((from[1] + ty) / 2 - 6));
  label.setAttribute("class", "edge-label");
  label.textContent = String(weight);
  group.appendChild(label);
  return group;
}

export function renderGraph(env: EnvironmentView): SVGSVGElement {
  const layout = env.layout ?? fallbackLayout(env);
  const svg = document.createElementNS(SVG_NS, "svg");
  svg.setAttribute("class", "graph");
  const xs = Object.values(layout).map((p) => p[0]);
  const ys = Object.values(layout).map((p) => p[1]);
  const pad = 80;
  svg.setAttribute(
    "viewBox",
    `${Math.min(...xs) - pad} ${Math.min(...ys) - pad} ` +
      `${Math.max(...xs) - Math.min(...xs) + 2 * pad} ` +
      `${Math.max(...ys) - Math.min(...ys) + 2 * pad}`,
  );

  const defs = document.createElementNS(SVG_NS, "defs");
  const marker = document.createElementNS(SVG_NS, "marker");
  marker.setAttribute("id", "arrow");
  marker.setAttribute("viewBox", "0 0 10 10");
  marker.setAttribute("refX", "9");
  marker.setAttribute("refY", "5");
  marker.setAttribute("markerWidth", "7");
  marker.setAttribute("markerHeight", "7");
  marker.setAttribute("orient", "auto-start-reverse");
  const tip = document.createElementNS(SVG_NS, "path");
  tip.setAttribute("d", "M 0 0 L 10 5 L 0 10 z");
  marker.appendChild(tip);
  defs.appendChild(marker);
  svg.appendChild(defs);

  const pos = (name: string): [number, number] =>
    layout[name] ?? [0, 0];

  // state -> state influences (column j feeds row i)
  env.A.forEach((row, i) => {
    row.forEach((weight, j) => {
      if (weight === 0) return;
      if (i === j) return;
      svg.appendChild(
        edgeLine(pos(env.state_names[j]), pos(env.state_names[i]), weight, "state-edge"),
      );
    });
  });
  // action -> state influences
  env.B.forEach((row, i) => {
    row.forEach((weight, j) => {
      if (weight === 0) return;
      svg.appendChild(
        edgeLine(pos(env.action_names[j]), pos(env.state_names[i]), weight, "action-edge"),
      );
    });
  });

  env.state_names.forEach((name, i) => {
    const [x, y] = pos(name);
    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute("class", "node state-node");
    group.setAttribute("data-name", name);
    if (hasSelfLoop(env.A, i)) {
      const loop = document.createElementNS(SVG_NS, "path");
      const r = 16;
      loop.setAttribute(
        "d",
        `M ${x - 12} ${y - 26} a ${r} ${r} 0 1 1 ${24} 0`,
      );
      loop.setAttribute("class", "self-loop");
      loop.setAttribute("marker-end", "url(#arrow)");
      group.appendChild(loop);
      const label = document.createElementNS(SVG_NS, "text");
      label.setAttribute("x", String(x));
      label.setAttribute("y", String(y - 48));
      label.setAttribute("class", "edge-label");
      label.textContent = String(env.A[i][i]);
      group.appendChild(label);
    }
    const circle = document.createElementNS(SVG_NS, "circle");
    circle.setAttribute("cx", String(x));
    circle.setAttribute("cy", String(y));
    circle.setAttribute("r", "30");
    group.appendChild(circle);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(x));
    label.setAttribute("y", String(y + 4));
    label.setAttribute("class", "node-label");
    label.textContent = name;
    group.appendChild(label);
    svg.appendChild(group);
  });

  env.action_names.forEach((name) => {
    const [x, y] = pos(name);
    const group = document.createElementNS(SVG_NS, "g");
    group.setAttribute("class", "node action-node");
    group.setAttribute("data-name", name);
    const rect = document.createElementNS(SVG_NS, "rect");
    rect.setAttribute("x", String(x - 34));
    rect.setAttribute("y", String(y - 18));
    rect.setAttribute("width", "68");
    rect.setAttribute("height", "36");
    rect.setAttribute("rx", "6");
    group.appendChild(rect);
    const label = document.createElementNS(SVG_NS, "text");
    label.setAttribute("x", String(x));
    label.setAttribute("y", String(y + 4));
    label.setAttribute("class", "node-label");
    label.textContent = name;
    group.appendChild(label);
    svg.appendChild(group);
  });

  return svg;
}

function renderStateTable(view: SessionView): HTMLTableElement {
  const goal = view.active_goal;
  const table = el("table", "state-table");
  const head = table.createTHead().insertRow();
  for (const title of ["Variable", "Current value", "Target"]) {
    const th = document.createElement("th");
    th.textContent = title;
    head.appendChild(th);
  }
  const body = table.createTBody();
  view.environment.state_names.forEach((name, i) => {
    const row = body.insertRow();
    row.className = "state-row";
    row.dataset.state = name;
    row.insertCell().textContent = name;
    const value = row.insertCell();
    value.className = "state-value";
    value.textContent = formatExact(view.state[i]);
    const target = row.insertCell();
    target.className = "state-target";
    const k = goal.dims.indexOf(i);
    if (k >= 0) {
      target.textContent = `${goal.targets[k].toFixed(2)} ± ${goal.tolerances[k]}`;
    } else {
      target.textContent = "—";
    }
  });
  return table;
}

function renderActionForm(state: AppState, handlers: Handlers): HTMLElement {
  const view = state.view as SessionView;
  const form = el("form", "action-form");
  form.addEventListener("submit", (event) => {
    event.preventDefault();
    handlers.onSubmit();
  });
  view.environment.action_names.forEach((name, i) => {
    const field = el("div", "action-field");
    const label = el("label", undefined, name);
    label.htmlFor = `action-${i}`;
    field.appendChild(label);
    const input = el("input");
    input.id = `action-${i}`;
    input.type = "text";
    input.inputMode = "decimal";
    input.autocomplete = "off";
    input.value = state.inputs[i] ?? "0";
    input.disabled = state.pending || view.finished;
    input.addEventListener("input", () => handlers.onInput(i, input.value));
    input.addEventListener("keydown", (event) => {
      if (event.key === "ArrowUp" || event.key === "ArrowDown") {
        event.preventDefault();
        handlers.onNudge(i, event.key === "ArrowUp" ? 1 : -1);
      }
    });
    field.appendChild(input);
    const error = state.fieldErrors[i];
    if (error) {
      field.appendChild(el("span", "field-error", error));
    }
    form.appendChild(field);
  });
  const submit = el("button", "submit-step", "Apply actions");
  submit.type = "submit";
  submit.disabled = state.pending || view.finished;
  form.appendChild(submit);
  return form;
}

function renderTask(state: AppState, handlers: Handlers): HTMLElement {
  const view = state.view as SessionView;
  const root = el("div", "task-screen");

  const status = el("div", "status-bar");
  status.appendChild(
    el("span", "round-counter", `Round ${view.round} / ${view.horizon}`),
  );
  status.appendChild(el("span", "bonus", `Bonus: ${formatUsd(view.bonus)}`));
  status.appendChild(
    el(
      "span",
      "distance",
      `Distance to ${view.active_goal.kind === "final" ? "final goal" : "subgoal"}: ` +
        formatDistance(view.distance),
    ),
  );
  root.appendChild(status);

  if (state.subgoalAchieved) {
    root.appendChild(
      el(
        "div",
        "banner subgoal-banner",
        "Subgoal achieved! The final goal is now shown.",
      ),
    );
  }

  const goal = view.active_goal;
  const goalBox = el("div", `goal-box goal-${goal.kind}`);
  goalBox.appendChild(
    el(
      "h2",
      undefined,
      goal.kind === "final" ? "Final goal" : "Subgoal",
    ),
  );
  const targets = el("ul", "goal-targets");
  goal.names.forEach((name, k) => {
    targets.appendChild(
      el(
        "li",
        "goal-target",
        `${name}: ${goal.targets[k].toFixed(2)} ± ${goal.tolerances[k]}`,
      ),
    );
  });
  goalBox.appendChild(targets);
  root.appendChild(goalBox);

  root.appendChild(renderGraph(view.environment));
  root.appendChild(renderStateTable(view));
  root.appendChild(renderActionForm(state, handlers));
  return root;
}

function renderStart(handlers: Handlers): HTMLElement {
  const root = el("div", "start-screen");
  root.appendChild(el("h1", undefined, "Farm management task"));
  root.appendChild(
    el(
      "p",
      undefined,
      "Steer the farm round by round. Your bonus equals your goal-achievement score in USD.",
    ),
  );
  for (const condition of ["subgoal", "control"] as Condition[]) {
    const button = el(
      "button",
      `start-${condition}`,
      condition === "subgoal" ? "Start (with subgoal)" : "Start (final goal only)",
    );
    button.addEventListener("click", () => handlers.onStart(condition));
    root.appendChild(button);
  }
  return root;
}

function renderSummary(state: AppState): HTMLElement {
  const root = el("div", "summary-screen");
  root.appendChild(el("h1", undefined, "Session complete"));
  const summary = state.summary;
  if (summary) {
    const list = el("dl", "summary-scores");
    const add = (label: string, value: string, className?: string) => {
      list.appendChild(el("dt", undefined, label));
      list.appendChild(el("dd", className, value));
    };
    add("Bonus payment", formatUsd(summary.gas), "summary-bonus");
    add("Goal-achievement score", formatExact(summary.gas));
    add("Distance score", formatDistance(summary.ds));
    add("Resources spent", formatDistance(summary.resources));
    add("Rounds the final goal held", String(summary.rounds_goal_met));
    root.appendChild(list);
  } else {
    root.appendChild(
      el("p", "summary-waiting", "Computing final scores…"),
    );
  }
  return root;
}

function renderError(state: AppState, handlers: Handlers): HTMLElement {
  const root = el("div", "error-screen");
  root.appendChild(el("h1", undefined, "Connection problem"));
  root.appendChild(el("p", "error-message", state.error ?? "unknown error"));
  const retry = el("button", "retry", "Retry");
  retry.addEventListener("click", () => handlers.onRetry());
  root.appendChild(retry);
  return root;
}

export function renderApp(
  root: HTMLElement,
  state: AppState,
  handlers: Handlers,
): void {
  root.textContent = "";
  switch (state.screen) {
    case "start":
      root.appendChild(renderStart(handlers));
      break;
    case "task":
      root.appendChild(renderTask(state, handlers));
      break;
    case "summary":
      root.appendChild(renderSummary(state));
      break;
    case "error":
      root.appendChild(renderError(state, handlers));
      break;
  }
}
