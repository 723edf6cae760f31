// Workbench session state. Single source of truth for what the canvas
// shows; every preview/PMR value in here originated from a service
// response. Stale responses (a placement superseded before its simulate
// round-trip finished) are discarded by request sequence number.

import {
  computePmr,
  requestSuggestions,
  simulate,
  type ShapeDocument,
  type SuggestionDocument,
} from "./api.js";
import { cloneShape, emptyShape, onCount, toggleCell } from "./shapes.js";

export const MAX_PILLARS = 7;
export const DEFAULT_GRID = { h: 12, w: 32 };

export interface WorkbenchState {
  target: ShapeDocument;
  sequence: number[];
  /** Input shape first, then one entry per placed pillar. */
  previews: ShapeDocument[];
  pmr: number | null;
  suggestions: SuggestionDocument[];
  checkpoint: string | null;
  error: string | null;
}

type Listener = (state: WorkbenchState) => void;

let state: WorkbenchState = {
  target: emptyShape(DEFAULT_GRID.h, DEFAULT_GRID.w),
  sequence: [],
  previews: [],
  pmr: null,
  suggestions: [],
  checkpoint: null,
  error: null,
};

const listeners: Listener[] = [];
let refreshCounter = 0;

export function getState(): WorkbenchState {
  return state;
}

export function subscribe(fn: Listener) {
  listeners.push(fn);
}

function update(patch: Partial<WorkbenchState>) {
  state = { ...state, ...patch };
  for (const fn of listeners) fn(state);
}

export function resetSession(target?: ShapeDocument) {
  refreshCounter++;
  update({
    target: target ? cloneShape(target) : emptyShape(DEFAULT_GRID.h, DEFAULT_GRID.w),
    sequence: [],
    previews: [],
    pmr: null,
    suggestions: [],
    error: null,
  });
}

export function setCheckpoint(name: string | null) {
  update({ checkpoint: name, suggestions: [] });
}

export function currentPreview(): ShapeDocument | null {
  return state.previews.length ? state.previews[state.previews.length - 1] : null;
}

export function canPlace(): boolean {
  return state.sequence.length < MAX_PILLARS;
}

/** Re-simulate the whole sequence and recompute PMR through the service. */
export async function refreshPreview(): Promise<void> {
  const ticket = ++refreshCounter;
  const { sequence, target } = state;
  try {
    const sim = await simulate(sequence, emptyInlet(target));
    // PMR is undefined for an empty target; the readout goes blank
    const pmr = onCount(target) > 0 ? await computePmr(sim.final, target) : null;
    if (ticket !== refreshCounter) return; // superseded while in flight
    update({ previews: sim.steps, pmr, error: null });
  } catch (err) {
    if (ticket !== refreshCounter) return;
    update({ error: String(err) });
  }
}

// The design inlet: the service's default input shape for the session grid.
// Cached after the first simulate round-trip of a session.
let inletCache: ShapeDocument | null = null;

export function setInlet(shape: ShapeDocument) {
  inletCache = cloneShape(shape);
}

function emptyInlet(target: ShapeDocument): ShapeDocument {
  if (inletCache && inletCache.h === target.h && inletCache.w === target.w) {
    return inletCache;
  }
  throw new Error("no inlet shape loaded for this grid");
}

export function paintCell(row: number, col: number) {
  update({ target: toggleCell(state.target, row, col), suggestions: [] });
}

export async function placePillar(action: number): Promise<void> {
  if (!canPlace()) return;
  update({ sequence: [...state.sequence, action] });
  await refreshPreview();
}

/** Drop the most recent placement. Depth of the undo stack is the sequence
 * itself: state is reconstructible from (target, sequence, checkpoint). */
export async function undo(): Promise<void> {
  if (!state.sequence.length) return;
  update({ sequence: state.sequence.slice(0, -1) });
  await refreshPreview();
}

export async function fetchSuggestions(k: number, seed = 0): Promise<void> {
  if (!state.checkpoint) {
    update({ error: "select a checkpoint first" });
    return;
  }
  if (onCount(state.target) === 0) {
    update({ error: "paint a target first" });
    return;
  }
  try {
    const suggestions = await requestSuggestions(state.checkpoint, state.target, k, seed);
    update({ suggestions, error: null });
  } catch (err) {
    update({ error: String(err) });
  }
}

/** Replace the working sequence with a suggestion and re-verify it through
 * the service (the adopted preview must come from /api/simulate, not from
 * the suggestion payload). */
export async function adoptSuggestion(index: number): Promise<void> {
  const s = state.suggestions[index];
  if (!s) return;
  update({ sequence: [...s.sequence] });
  await refreshPreview();
}
