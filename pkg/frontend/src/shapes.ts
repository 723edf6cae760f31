// ShapeDocument helpers: pure, local, no flow math. Painting edits a target
// document cell by cell; the physics stays on the server.

import type { ShapeDocument } from "./api.js";

export function emptyShape(h: number, w: number): ShapeDocument {
  return { h, w, rows: Array.from({ length: h }, () => "0".repeat(w)) };
}

export function cloneShape(shape: ShapeDocument): ShapeDocument {
  return { h: shape.h, w: shape.w, rows: [...shape.rows] };
}

export function cellAt(shape: ShapeDocument, row: number, col: number): boolean {
  return shape.rows[row]?.[col] === "1";
}

export function setCell(
  shape: ShapeDocument,
  row: number,
  col: number,
  on: boolean,
): ShapeDocument {
  if (row < 0 || row >= shape.h || col < 0 || col >= shape.w) {
    return shape;
  }
  const rows = [...shape.rows];
  const line = rows[row];
  rows[row] = line.slice(0, col) + (on ? "1" : "0") + line.slice(col + 1);
  return { h: shape.h, w: shape.w, rows };
}

export function toggleCell(shape: ShapeDocument, row: number, col: number): ShapeDocument {
  return setCell(shape, row, col, !cellAt(shape, row, col));
}

export function onCount(shape: ShapeDocument): number {
  let n = 0;
  for (const row of shape.rows) {
    for (const ch of row) {
      if (ch === "1") n++;
    }
  }
  return n;
}

export function shapesEqual(a: ShapeDocument, b: ShapeDocument): boolean {
  return (
    a.h === b.h &&
    a.w === b.w &&
    a.rows.length === b.rows.length &&
    a.rows.every((row, i) => row === b.rows[i])
  );
}

export function parseShapeDocument(text: string): ShapeDocument {
  const doc = JSON.parse(text) as Partial<ShapeDocument>;
  if (
    typeof doc.h !== "number" ||
    typeof doc.w !== "number" ||
    !Array.isArray(doc.rows) ||
    doc.rows.length !== doc.h ||
    doc.rows.some((r) => typeof r !== "string" || r.length !== doc.w || /[^01]/.test(r))
  ) {
    throw new Error("not a valid shape document");
  }
  return { h: doc.h, w: doc.w, rows: doc.rows as string[] };
}
