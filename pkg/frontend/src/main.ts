/**
 * Application entry point: wires the socket client, the canvas view,
 * the steering controls and the phase-diagram heatmap together.
 *
 * The UI is a stateless remote control. All physics lives server-side;
 * this file only reflects frames and forwards commands, converting
 * between human units (cm, deg) and wire units (m, rad) at the widget
 * boundary and nowhere else.
 */

import { CommandRejected, SessionClient } from "./client.js";
import {
  HeatmapCell,
  HeatmapError,
  HeatmapGrid,
  LABEL_COLORS,
  LABEL_COLOR_NAMES,
  NO_LABEL_COLOR,
  PHASE_LABELS,
  cellColor,
  cellSessionParams,
  describeCell,
  parsePhaseCsv,
} from "./heatmap.js";
import {
  BehaviorTag,
  Frame,
  Hello,
  cmdAssignController,
  cmdPause,
  cmdReset,
  cmdResume,
  cmdSetParam,
  cmdSetSpeed,
  cmdSnapshot,
  cmdStep,
} from "./protocol.js";
import { ArenaInfo, SceneOptions, drawMetricsChart, drawScene } from "./render.js";
import { describeCommand } from "./replay.js";
import { cmToM, degToRad, fmt, mToCm, radToDeg } from "./units.js";
import { ViewState, pickAgent } from "./view.js";

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (node === null) throw new Error(`missing element #${id}`);
  return node as T;
}

const stage = el<HTMLCanvasElement>("stage");
const chart = el<HTMLCanvasElement>("chart");
const view = new ViewState();

// Shared parameters as currently applied server-side (SI units). Seeded
// from the hello config, updated on every accepted set_param.
const params = {
  v: 0.25,
  omega: degToRad(45),
  visionDistance: 1.1,
  visionHalfangle: degToRad(24.5),
};
let bodyRadius = 0.05;
let arena: ArenaInfo = { kind: "unbounded", width: 0, height: 0 };
let running = true;
let fitPending = true;

// -- toasts -------------------------------------------------------------------

function toast(text: string, kind: "info" | "error" | "ok" = "info"): void {
  const box = el<HTMLDivElement>("toasts");
  const node = document.createElement("div");
  node.className = `toast ${kind}`;
  node.textContent = text;
  box.appendChild(node);
  setTimeout(() => node.remove(), 5000);
  while (box.children.length > 6) box.firstElementChild?.remove();
}

// -- client -------------------------------------------------------------------

const client = new SessionClient({
  onHello: applyHello,
  onError: (message) => toast(message, "error"),
  onHistoryChange: renderHistory,
  onClose: () => {
    setBadge("conn-badge", "disconnected", "bad");
    toast("connection closed", "error");
  },
});

function wsUrl(): string {
  const proto = location.protocol === "https:" ? "wss" : "ws";
  return `${proto}://${location.host}/session`;
}

function applyHello(hello: Hello): void {
  setBadge("conn-badge", "connected", "ok");
  const cfg = hello.config as Record<string, unknown>;
  const controller = cfg.controller as Record<string, unknown> | undefined;
  if (controller !== undefined) {
    if (typeof controller.v_m_s === "number") params.v = controller.v_m_s;
    if (typeof controller.omega_rad_s === "number") params.omega = controller.omega_rad_s;
  }
  const idio = cfg.idiosyncrasy as Record<string, unknown> | undefined;
  params.visionDistance = factorMean(idio?.vision_distance_m, params.visionDistance);
  params.visionHalfangle = factorMean(idio?.vision_halfangle_rad, params.visionHalfangle);
  if (typeof cfg.body_radius_m === "number") bodyRadius = cfg.body_radius_m;
  const arenaCfg = cfg.arena as Record<string, unknown> | undefined;
  arena = {
    kind: typeof arenaCfg?.kind === "string" ? arenaCfg.kind : "unbounded",
    width: typeof arenaCfg?.width_m === "number" ? arenaCfg.width_m : 0,
    height: typeof arenaCfg?.height_m === "number" ? arenaCfg.height_m : 0,
  };
  syncSliders();
  view.chart.clear();
  view.trailStore.clear();
  fitPending = true;
}

/** Mean of a factor spec: {mean, std} or an explicit per-agent array. */
function factorMean(spec: unknown, fallback: number): number {
  if (typeof spec === "object" && spec !== null && !Array.isArray(spec)) {
    const mean = (spec as Record<string, unknown>).mean;
    if (typeof mean === "number") return mean;
  }
  if (Array.isArray(spec) && spec.length > 0 && spec.every((x) => typeof x === "number")) {
    return (spec as number[]).reduce((a, b) => a + b, 0) / spec.length;
  }
  return fallback;
}

function send(cmd: ReturnType<typeof cmdPause>): void {
  client.send(cmd).catch((err) => {
    if (!(err instanceof CommandRejected)) toast(String(err), "error");
    // CommandRejected already surfaced via onError.
  });
}

// -- status line ----------------------------------------------------------------

function setBadge(id: string, text: string, kind?: "ok" | "bad"): void {
  const badge = el<HTMLSpanElement>(id);
  badge.textContent = text;
  badge.className = `badge${kind !== undefined ? " " + kind : ""}`;
}

const fpsTimes: number[] = [];

function applyFrame(frame: Frame): void {
  running = frame.running;
  el("ro-epoch").textContent = String(frame.epoch);
  el("ro-tick").textContent = String(frame.tick);
  el("ro-time").textContent = fmt(frame.sim_time, 2);
  el("ro-collisions").textContent = String(frame.collisions_total);
  el("ro-components").textContent = String(frame.metrics.n_components);
  setBadge("run-badge", frame.running ? "running" : "paused", frame.running ? "ok" : undefined);
  el<HTMLButtonElement>("btn-pause").textContent = frame.running ? "pause" : "resume";
  el("lv-circliness").textContent =
    frame.metrics.circliness === null ? "inf" : fmt(frame.metrics.circliness, 3);
  el("lv-diffusion").textContent =
    frame.metrics.diffusion === null ? "inf" : fmt(frame.metrics.diffusion, 3);

  view.trailStore.push(frame.agents);
  view.chart.push({
    tick: frame.tick,
    circliness: frame.metrics.circliness,
    diffusion: frame.metrics.diffusion,
  });
  if (view.selectedAgent !== null &&
      !frame.agents.some((a) => a[0] === view.selectedAgent)) {
    selectAgent(null, frame);
  }
  if (fitPending && frame.agents.length > 0) {
    fitPending = false;
    fitToFrame(frame);
  }

  fpsTimes.push(performance.now());
  while (fpsTimes.length > 0 && fpsTimes[0] < performance.now() - 2000) fpsTimes.shift();
  el("ro-fps").textContent = String(Math.round(fpsTimes.length / 2));
}

function fitToFrame(frame: Frame): void {
  const pts = frame.agents.map((a) => [a[1], a[2]] as [number, number]);
  if (arena.kind !== "unbounded") {
    pts.push([-arena.width / 2, -arena.height / 2], [arena.width / 2, arena.height / 2]);
  }
  view.fitToPoints(pts, stage.width, stage.height, 60);
}

// -- render loop ----------------------------------------------------------------

function sceneOptions(): SceneOptions {
  return {
    visionDistance: params.visionDistance,
    visionHalfangle: params.visionHalfangle,
    bodyRadius,
    arena,
    v: params.v,
    omega: params.omega,
  };
}

function resizeCanvas(): void {
  const rect = stage.getBoundingClientRect();
  if (stage.width !== Math.round(rect.width)) stage.width = Math.round(rect.width);
  if (stage.height !== Math.round(rect.height)) stage.height = Math.round(rect.height);
}

function renderLoop(): void {
  resizeCanvas();
  const fresh = client.takeFrame(); // depth-1 queue: newest frame or null
  if (fresh !== null) applyFrame(fresh);
  const frame = client.lastFrame;
  const ctx = stage.getContext("2d");
  if (ctx !== null && frame !== null) drawScene(ctx, frame, view, sceneOptions());
  if (fresh !== null) {
    const chartCtx = chart.getContext("2d");
    if (chartCtx !== null) drawMetricsChart(chartCtx, view.chart);
  }
  requestAnimationFrame(renderLoop);
}

// -- playback controls ------------------------------------------------------------

el<HTMLButtonElement>("btn-pause").addEventListener("click", () => {
  send(running ? cmdPause() : cmdResume());
});
el<HTMLButtonElement>("btn-step").addEventListener("click", () => send(cmdStep(1)));
el<HTMLButtonElement>("btn-step25").addEventListener("click", () => send(cmdStep(25)));
el<HTMLButtonElement>("btn-reset").addEventListener("click", () => {
  const raw = el<HTMLInputElement>("in-seed").value.trim();
  send(raw === "" ? cmdReset() : cmdReset(Number(raw)));
});
el<HTMLSelectElement>("sel-speed").addEventListener("change", (ev) => {
  send(cmdSetSpeed(Number((ev.target as HTMLSelectElement).value)));
});
el<HTMLButtonElement>("btn-fit").addEventListener("click", () => {
  if (client.lastFrame !== null) fitToFrame(client.lastFrame);
});

document.addEventListener("keydown", (ev) => {
  const target = ev.target as HTMLElement | null;
  if (target !== null && ["INPUT", "TEXTAREA", "SELECT"].includes(target.tagName)) return;
  if (ev.key === " ") {
    ev.preventDefault();
    send(running ? cmdPause() : cmdResume());
  } else if (ev.key === "s") {
    send(cmdStep(1));
  } else if (ev.key === "S") {
    send(cmdStep(25));
  } else if (ev.key === "r") {
    send(cmdReset());
  }
});

// -- shared parameter sliders ------------------------------------------------------

interface SliderSpec {
  slider: string;
  label: string;
  /** Wire parameter name (SI value). */
  param: string;
  toHuman(si: number): number;
  toSi(human: number): number;
  digits: number;
}

const SLIDERS: SliderSpec[] = [
  { slider: "sl-v", label: "lv-v", param: "v", toHuman: mToCm, toSi: cmToM, digits: 0 },
  { slider: "sl-omega", label: "lv-omega", param: "omega", toHuman: radToDeg, toSi: degToRad, digits: 0 },
  { slider: "sl-vision", label: "lv-vision", param: "vision_distance", toHuman: mToCm, toSi: cmToM, digits: 0 },
  { slider: "sl-halfangle", label: "lv-halfangle", param: "vision_halfangle", toHuman: radToDeg, toSi: degToRad, digits: 1 },
];

function paramSi(name: string): number {
  switch (name) {
    case "v": return params.v;
    case "omega": return params.omega;
    case "vision_distance": return params.visionDistance;
    default: return params.visionHalfangle;
  }
}

function setParamSi(name: string, si: number): void {
  if (name === "v") params.v = si;
  else if (name === "omega") params.omega = si;
  else if (name === "vision_distance") params.visionDistance = si;
  else params.visionHalfangle = si;
}

function syncSliders(): void {
  for (const spec of SLIDERS) {
    const human = spec.toHuman(paramSi(spec.param));
    el<HTMLInputElement>(spec.slider).value = String(human);
    el(spec.label).textContent = fmt(human, spec.digits);
  }
}

for (const spec of SLIDERS) {
  const slider = el<HTMLInputElement>(spec.slider);
  slider.addEventListener("input", () => {
    el(spec.label).textContent = fmt(Number(slider.value), spec.digits);
  });
  // Commit on release: one set_param per adjustment, in SI units.
  slider.addEventListener("change", () => {
    const human = Number(slider.value);
    const si = spec.toSi(human);
    client
      .send(cmdSetParam(spec.param, si))
      .then(() => {
        setParamSi(spec.param, si);
        el(spec.label).textContent = fmt(human, spec.digits);
      })
      .catch(() => syncSliders()); // rejected: snap back to server state
  });
}

// -- agent selection and controller assignment ----------------------------------------

function selectAgent(id: number | null, frame: Frame | null): void {
  view.selectedAgent = id;
  const info = el<HTMLParagraphElement>("agent-info");
  const controls = el<HTMLDivElement>("agent-controls");
  if (id === null) {
    info.textContent = "click an agent on the canvas.";
    controls.hidden = true;
    return;
  }
  const row = frame?.agents.find((a) => a[0] === id);
  info.textContent = row !== undefined
    ? `agent ${id}: ${row[5]}, sensor ${row[4] === 1 ? "on" : "off"}`
    : `agent ${id}`;
  controls.hidden = false;
  if (row !== undefined) el<HTMLSelectElement>("sel-behavior").value = row[5];
  el<HTMLInputElement>("in-agent-v").value = String(Math.round(mToCm(params.v)));
  el<HTMLInputElement>("in-agent-omega").value = String(Math.round(radToDeg(params.omega)));
}

let dragState: { x: number; y: number; moved: boolean } | null = null;

stage.addEventListener("mousedown", (ev) => {
  dragState = { x: ev.offsetX, y: ev.offsetY, moved: false };
});
stage.addEventListener("mousemove", (ev) => {
  if (dragState === null) return;
  const dx = ev.offsetX - dragState.x;
  const dy = ev.offsetY - dragState.y;
  if (Math.abs(dx) + Math.abs(dy) > 2) dragState.moved = true;
  view.panByPixels(dx, dy);
  dragState.x = ev.offsetX;
  dragState.y = ev.offsetY;
});
window.addEventListener("mouseup", (ev) => {
  if (dragState === null) return;
  const wasClick = !dragState.moved;
  dragState = null;
  if (!wasClick || ev.target !== stage) return;
  const frame = client.lastFrame;
  if (frame === null) return;
  const [wx, wy] = view.screenToWorld(ev.offsetX, ev.offsetY, stage.width, stage.height);
  const reach = Math.max(12 / view.camera.scale, bodyRadius * 2);
  selectAgent(pickAgent(frame.agents, wx, wy, reach), frame);
});
stage.addEventListener("wheel", (ev) => {
  ev.preventDefault();
  const factor = Math.exp(-ev.deltaY * 0.0015);
  view.zoomAt(ev.offsetX, ev.offsetY, factor, stage.width, stage.height);
}, { passive: false });

el<HTMLButtonElement>("btn-assign").addEventListener("click", () => {
  const id = view.selectedAgent;
  if (id === null) return;
  const tag = el<HTMLSelectElement>("sel-behavior").value as BehaviorTag;
  const v = cmToM(Number(el<HTMLInputElement>("in-agent-v").value));
  const omega = degToRad(Number(el<HTMLInputElement>("in-agent-omega").value));
  client
    .send(cmdAssignController(id, { tag, v_m_s: v, omega_rad_s: omega }))
    .then(() => toast(`agent ${id} now ${tag}`, "ok"))
    .catch(() => undefined); // rejection already toasted
});

// -- overlays -------------------------------------------------------------------

for (const [box, key] of [
  ["ov-fov", "fov"],
  ["ov-trails", "trails"],
  ["ov-centroid", "centroid"],
  ["ov-pivots", "pivots"],
] as const) {
  el<HTMLInputElement>(box).addEventListener("change", (ev) => {
    view.overlays[key] = (ev.target as HTMLInputElement).checked;
  });
}

// -- action history and replay -------------------------------------------------------

function renderHistory(): void {
  const list = el<HTMLOListElement>("history");
  list.innerHTML = "";
  const entries = client.history.all();
  for (let i = entries.length - 1; i >= 0; i--) {
    const e = entries[i];
    const li = document.createElement("li");
    li.textContent = `t=${e.tick} ${describeCommand(e.command)}`;
    if (e.rejected === true) {
      li.className = "rejected";
      li.title = "rejected by the server";
    }
    list.appendChild(li);
  }
}

el<HTMLButtonElement>("btn-clear-history").addEventListener("click", () => {
  client.history.clear();
  renderHistory();
  el("replay-result").textContent = "";
});

el<HTMLButtonElement>("btn-replay").addEventListener("click", () => {
  const button = el<HTMLButtonElement>("btn-replay");
  const out = el<HTMLParagraphElement>("replay-result");
  button.disabled = true;
  out.textContent = "replaying…";
  client
    .replayHistory()
    .then((result) => {
      if (result.identical) {
        out.textContent =
          `replay identical on ${result.compared} shared ticks` +
          (result.onlyA + result.onlyB > 0
            ? ` (${result.onlyA + result.onlyB} stride-only frames skipped)`
            : "");
        toast("replay reproduced the run exactly", "ok");
      } else {
        const d = result.divergence;
        out.textContent = `replay DIVERGED at tick ${d?.tickA ?? "?"}`;
        toast("replay diverged: see history panel", "error");
      }
    })
    .catch((err) => {
      out.textContent = `replay failed: ${err}`;
      toast(`replay failed: ${err}`, "error");
    })
    .finally(() => {
      button.disabled = false;
    });
});

// -- snapshot -------------------------------------------------------------------

el<HTMLButtonElement>("btn-snapshot").addEventListener("click", () => {
  client
    .send(cmdSnapshot())
    .then((reply) => {
      if (reply.type === "snapshot") {
        el<HTMLTextAreaElement>("snapshot-out").value =
          JSON.stringify(reply.data, null, 2);
        toast("snapshot captured", "ok");
      }
    })
    .catch(() => undefined);
});

// -- phase diagram heatmap -------------------------------------------------------

let selectedCell: HeatmapCell | null = null;

function renderHeatmap(grid: HeatmapGrid): void {
  el<HTMLDivElement>("heatmap-error").hidden = true;
  const wrap = el<HTMLDivElement>("heatmap-wrap");
  wrap.hidden = false;
  const box = el<HTMLDivElement>("heatmap");
  box.innerHTML = "";
  box.style.gridTemplateColumns = `3.2rem repeat(${grid.nCols}, 1fr)`;

  const axisLabel = (name: string, value: number): string => {
    if (name === "omega_rad_s") return fmt(radToDeg(value), 0);
    if (name === "v_m_s") return fmt(mToCm(value), 0);
    return fmt(value, 2);
  };

  // Column header row: omega (or second axis) values in human units.
  box.appendChild(axisCell(grid.axisNames.length === 2
    ? `${humanAxisName(grid.axisNames[0])} \\ ${humanAxisName(grid.axisNames[1])}`
    : humanAxisName(grid.axisNames[0])));
  for (let c = 0; c < grid.nCols; c++) {
    box.appendChild(axisCell(
      grid.axisNames.length === 2 ? axisLabel(grid.axisNames[1], grid.axisValues[1][c]) : "",
    ));
  }
  for (let r = 0; r < grid.nRows; r++) {
    box.appendChild(axisCell(axisLabel(grid.axisNames[0], grid.axisValues[0][r])));
    for (let c = 0; c < grid.nCols; c++) {
      const cell = grid.cells[r][c];
      const node = document.createElement("div");
      node.className = "hm-cell";
      node.style.background = cellColor(cell);
      node.title = describeCell(grid, cell);
      node.addEventListener("click", () => {
        box.querySelectorAll(".hm-cell.selected").forEach((n) => n.classList.remove("selected"));
        node.classList.add("selected");
        selectCell(cell);
      });
      box.appendChild(node);
    }
  }

  el("heatmap-legend").innerHTML = PHASE_LABELS.map(
    (label) =>
      `<span class="swatch" style="background:${LABEL_COLORS[label]}"></span> ` +
      `${label.replace("_", " ")} (${LABEL_COLOR_NAMES[label]})`,
  ).join(" &nbsp; ") +
    ` &nbsp; <span class="swatch" style="background:${NO_LABEL_COLOR}"></span> no result`;
  el<HTMLDivElement>("launch-box").hidden = true;
  selectedCell = null;
}

function humanAxisName(name: string): string {
  if (name === "v_m_s") return "v cm/s";
  if (name === "omega_rad_s") return "ω deg/s";
  return name;
}

function axisCell(text: string): HTMLDivElement {
  const node = document.createElement("div");
  node.className = "hm-axis";
  node.textContent = text;
  return node;
}

function selectCell(cell: HeatmapCell): void {
  selectedCell = cell;
  const paramsOut: string[] = [];
  for (const [name, value] of Object.entries(cellSessionParams(cell))) {
    if (name === "v_m_s") paramsOut.push(`v = ${fmt(mToCm(value), 0)} cm/s`);
    else if (name === "omega_rad_s") paramsOut.push(`ω = ${fmt(radToDeg(value), 0)} deg/s`);
    else paramsOut.push(`${name} = ${value}`);
  }
  el("launch-desc").textContent =
    `${paramsOut.join(", ")}: ${cell.label ?? "no result"}`;
  el<HTMLDivElement>("launch-box").hidden = false;
}

el<HTMLButtonElement>("btn-launch").addEventListener("click", async () => {
  if (selectedCell === null) return;
  const coords = cellSessionParams(selectedCell);
  try {
    // Heatmap coordinates are already SI; apply the steerable ones,
    // then restart so the run begins at those parameters.
    if (typeof coords.v_m_s === "number") {
      await client.send(cmdSetParam("v", coords.v_m_s));
    }
    if (typeof coords.omega_rad_s === "number") {
      await client.send(cmdSetParam("omega", coords.omega_rad_s));
    }
    if (typeof coords.v_m_s === "number") params.v = coords.v_m_s;
    if (typeof coords.omega_rad_s === "number") params.omega = coords.omega_rad_s;
    syncSliders();
    await client.send(cmdReset());
    await client.send(cmdResume());
    toast("live session restarted at the selected cell", "ok");
  } catch {
    // rejection already toasted via onError
  }
});

function showHeatmapError(message: string): void {
  el<HTMLDivElement>("heatmap-wrap").hidden = true;
  const panel = el<HTMLDivElement>("heatmap-error");
  panel.textContent = message;
  panel.hidden = false;
}

function loadHeatmapText(text: string): void {
  try {
    renderHeatmap(parsePhaseCsv(text));
  } catch (e) {
    showHeatmapError(e instanceof HeatmapError ? e.message : String(e));
  }
}

el<HTMLButtonElement>("btn-load-diagram").addEventListener("click", async () => {
  const name = el<HTMLInputElement>("in-diagram").value.trim();
  try {
    const resp = await fetch(`/phase-diagram?file=${encodeURIComponent(name)}`);
    const text = await resp.text();
    if (!resp.ok) {
      showHeatmapError(`server: ${text}`);
      return;
    }
    loadHeatmapText(text);
  } catch (e) {
    showHeatmapError(String(e));
  }
});

el<HTMLInputElement>("in-diagram-file").addEventListener("change", (ev) => {
  const file = (ev.target as HTMLInputElement).files?.[0];
  if (file === undefined) return;
  file.text().then(loadHeatmapText, (e) => showHeatmapError(String(e)));
});

// -- boot ----------------------------------------------------------------------

client.connect(wsUrl()).catch((err) => {
  setBadge("conn-badge", "unreachable", "bad");
  toast(String(err), "error");
});
requestAnimationFrame(renderLoop);
