// Pixel-canvas rendering. The overlay classification is a pure function so
// tests can assert on exactly what gets painted.

import type { ShapeDocument } from "./api.js";
import { cellAt } from "./shapes.js";

export type CellClass = "empty" | "target-only" | "generated-only" | "overlap";

export const CELL_COLORS: Record<CellClass, string> = {
  empty: "#101418",
  "target-only": "#2563eb",
  "generated-only": "#dc2626",
  overlap: "#16a34a",
};

export function classifyCell(
  target: ShapeDocument | null,
  generated: ShapeDocument | null,
  row: number,
  col: number,
): CellClass {
  const t = target ? cellAt(target, row, col) : false;
  const g = generated ? cellAt(generated, row, col) : false;
  if (t && g) return "overlap";
  if (t) return "target-only";
  if (g) return "generated-only";
  return "empty";
}

/** Per-cell classes for the whole grid; row-major, h*w entries. */
export function overlayClasses(
  target: ShapeDocument | null,
  generated: ShapeDocument | null,
  h: number,
  w: number,
): CellClass[] {
  const out: CellClass[] = new Array(h * w);
  for (let r = 0; r < h; r++) {
    for (let c = 0; c < w; c++) {
      out[r * w + c] = classifyCell(target, generated, r, c);
    }
  }
  return out;
}

export function drawOverlay(
  ctx: CanvasRenderingContext2D,
  target: ShapeDocument | null,
  generated: ShapeDocument | null,
  h: number,
  w: number,
  cell: number,
) {
  const classes = overlayClasses(target, generated, h, w);
  for (let r = 0; r < h; r++) {
    for (let c = 0; c < w; c++) {
      ctx.fillStyle = CELL_COLORS[classes[r * w + c]];
      ctx.fillRect(c * cell, r * cell, cell - 1, cell - 1);
    }
  }
}

export function drawShape(
  ctx: CanvasRenderingContext2D,
  shape: ShapeDocument,
  cell: number,
  color = "#e5e7eb",
) {
  ctx.fillStyle = "#101418";
  ctx.fillRect(0, 0, shape.w * cell, shape.h * cell);
  ctx.fillStyle = color;
  for (let r = 0; r < shape.h; r++) {
    for (let c = 0; c < shape.w; c++) {
      if (cellAt(shape, r, c)) {
        ctx.fillRect(c * cell, r * cell, cell - 1, cell - 1);
      }
    }
  }
}
