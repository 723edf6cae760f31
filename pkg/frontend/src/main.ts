// DOM wiring for the workbench page. All numerics live on the server; this
// file routes clicks into the store and repaints from store state.

import { listCheckpoints, setApiBase, simulate, type ShapeDocument } from "./api.js";
import { drawOverlay, drawShape } from "./render.js";
import { onCount, parseShapeDocument } from "./shapes.js";
import {
  adoptSuggestion,
  canPlace,
  currentPreview,
  DEFAULT_GRID,
  fetchSuggestions,
  getState,
  MAX_PILLARS,
  paintCell,
  placePillar,
  refreshPreview,
  resetSession,
  setCheckpoint,
  setInlet,
  subscribe,
  undo,
} from "./store.js";

const CELL = 18;
const ACTIONS = 32;

function el<T extends HTMLElement>(id: string): T {
  const node = document.getElementById(id);
  if (!node) throw new Error(`missing #${id}`);
  return node as T;
}

const canvas = el<HTMLCanvasElement>("grid");
const ctx = canvas.getContext("2d")!;
const pmrLabel = el<HTMLSpanElement>("pmr");
const seqLabel = el<HTMLSpanElement>("sequence");
const errLabel = el<HTMLDivElement>("error");
const suggestionBox = el<HTMLDivElement>("suggestions");
const checkpointSelect = el<HTMLSelectElement>("checkpoint");

canvas.width = DEFAULT_GRID.w * CELL;
canvas.height = DEFAULT_GRID.h * CELL;

function repaint() {
  const s = getState();
  drawOverlay(ctx, s.target, currentPreview(), DEFAULT_GRID.h, DEFAULT_GRID.w, CELL);
  pmrLabel.textContent = s.pmr === null ? "--" : s.pmr.toFixed(4);
  seqLabel.textContent = s.sequence.length
    ? s.sequence.join(" ")
    : "(no pillars placed)";
  errLabel.textContent = s.error ?? "";
  el<HTMLButtonElement>("undo").disabled = !s.sequence.length;
  for (let a = 0; a < ACTIONS; a++) {
    el<HTMLButtonElement>(`act-${a}`).disabled = !canPlace();
  }
  renderSuggestions();
}

function renderSuggestions() {
  const s = getState();
  suggestionBox.innerHTML = "";
  s.suggestions.forEach((sug, i) => {
    const row = document.createElement("div");
    row.className = "suggestion";
    const mini = document.createElement("canvas");
    mini.width = DEFAULT_GRID.w * 4;
    mini.height = DEFAULT_GRID.h * 4;
    const finalShape = sug.steps[sug.steps.length - 1];
    drawShape(mini.getContext("2d")!, finalShape, 4);
    const label = document.createElement("span");
    label.textContent = `[${sug.sequence.join(" ")}]  pmr ${sug.pmr.toFixed(4)}${
      sug.success ? " *" : ""
    }`;
    const adopt = document.createElement("button");
    adopt.textContent = "adopt";
    adopt.onclick = () => void adoptSuggestion(i);
    row.append(mini, label, adopt);
    suggestionBox.append(row);
  });
}

canvas.addEventListener("click", (ev) => {
  const rect = canvas.getBoundingClientRect();
  const col = Math.floor((ev.clientX - rect.left) / CELL);
  const row = Math.floor((ev.clientY - rect.top) / CELL);
  paintCell(row, col);
  void refreshPreview();
});

el<HTMLButtonElement>("undo").onclick = () => void undo();
el<HTMLButtonElement>("clear").onclick = () => {
  resetSession();
  void refreshPreview();
};
el<HTMLButtonElement>("suggest").onclick = () => void fetchSuggestions(3);

el<HTMLInputElement>("import").addEventListener("change", async (ev) => {
  const file = (ev.target as HTMLInputElement).files?.[0];
  if (!file) return;
  try {
    const doc = parseShapeDocument(await file.text());
    resetSession(doc);
    await refreshPreview();
  } catch (err) {
    errLabel.textContent = String(err);
  }
});

el<HTMLButtonElement>("export").onclick = () => {
  const target = getState().target;
  if (onCount(target) === 0) return;
  const blob = new Blob([JSON.stringify(target, null, 2) + "\n"], {
    type: "application/json",
  });
  const a = document.createElement("a");
  a.href = URL.createObjectURL(blob);
  a.download = "target.json";
  a.click();
  URL.revokeObjectURL(a.href);
};

checkpointSelect.onchange = () => {
  setCheckpoint(checkpointSelect.value || null);
};

function buildPalette() {
  const palette = el<HTMLDivElement>("palette");
  for (let a = 0; a < ACTIONS; a++) {
    const btn = document.createElement("button");
    btn.id = `act-${a}`;
    btn.textContent = String(a);
    btn.title = `pillar action ${a} (max ${MAX_PILLARS} per design)`;
    btn.onclick = () => void placePillar(a);
    palette.append(btn);
  }
}

async function boot() {
  const params = new URLSearchParams(location.search);
  if (params.has("api")) setApiBase(params.get("api")!);

  buildPalette();
  subscribe(repaint);

  // seed the inlet: an empty sequence simulated on the default grid
  const sim = await simulate([], await defaultInlet());
  setInlet(sim.final);

  try {
    const checkpoints = await listCheckpoints();
    for (const c of checkpoints) {
      if (c.grid.h !== DEFAULT_GRID.h || c.grid.w !== DEFAULT_GRID.w) continue;
      const opt = document.createElement("option");
      opt.value = c.name;
      opt.textContent = `${c.name} (${c.episodes} episodes)`;
      checkpointSelect.append(opt);
    }
    if (checkpointSelect.options.length > 1) {
      checkpointSelect.selectedIndex = 1;
      setCheckpoint(checkpointSelect.value);
    }
  } catch {
    errLabel.textContent = "checkpoint listing unavailable";
  }

  await refreshPreview();
}

async function defaultInlet(): Promise<ShapeDocument> {
  const res = await fetch(
    `${(new URLSearchParams(location.search).get("api") ?? "http://127.0.0.1:8000")}/api/simulate`,
    {
      method: "POST",
      headers: { "Content-Type": "application/json" },
      body: JSON.stringify({ sequence: [], grid: `${DEFAULT_GRID.h}x${DEFAULT_GRID.w}` }),
    },
  );
  if (!res.ok) throw new Error(`inlet fetch failed: ${res.status}`);
  const doc = (await res.json()) as { final: ShapeDocument };
  return doc.final;
}

void boot();
