// Typed client for the flowsculpt HTTP service. The workbench never
// computes a shape or a PMR locally; everything displayed comes from here.

export interface ShapeDocument {
  h: number;
  w: number;
  rows: string[];
}

export interface SimulateResponse {
  sequence: number[];
  steps: ShapeDocument[];
  final: ShapeDocument;
}

export interface SuggestionDocument {
  sequence: number[];
  pmr: number;
  success: boolean;
  steps: ShapeDocument[];
}

export interface CheckpointInfo {
  name: string;
  grid: { h: number; w: number };
  episodes: number;
  global_step: number;
  library_provenance: string;
  lineage: string[];
}

let apiBase = "http://127.0.0.1:8000";

export function setApiBase(base: string) {
  apiBase = base.replace(/\/+$/, "");
}

async function post<T>(path: string, body: unknown): Promise<T> {
  const res = await fetch(`${apiBase}${path}`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify(body),
  });
  if (!res.ok) {
    throw new Error(`${path} failed: ${res.status} ${await res.text()}`);
  }
  return res.json() as Promise<T>;
}

export async function simulate(
  sequence: number[],
  shape: ShapeDocument,
): Promise<SimulateResponse> {
  return post("/api/simulate", { sequence, shape });
}

export async function computePmr(
  generated: ShapeDocument,
  target: ShapeDocument,
): Promise<number> {
  return post("/api/pmr", { generated, target });
}

export async function requestSuggestions(
  checkpoint: string,
  target: ShapeDocument,
  k: number,
  seed = 0,
): Promise<SuggestionDocument[]> {
  const doc = await post<{ suggestions: SuggestionDocument[] }>("/api/suggest", {
    checkpoint,
    target,
    k,
    seed,
  });
  return doc.suggestions;
}

export async function listCheckpoints(): Promise<CheckpointInfo[]> {
  const res = await fetch(`${apiBase}/api/checkpoints`);
  if (!res.ok) {
    throw new Error(`/api/checkpoints failed: ${res.status}`);
  }
  const doc = (await res.json()) as { checkpoints: CheckpointInfo[] };
  return doc.checkpoints;
}
