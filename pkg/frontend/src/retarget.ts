// Retarget previews: pair the selected source layout with each retarget
// job's result. Order numerals are the server's source_orders and
// derived_orders so preservation is visually checkable side by side.

import type { CanvasSpec, RetargetResultDoc } from "./types.js";

export interface RetargetTarget {
  canvas: CanvasSpec;
  label: string;
}

export interface RetargetPreview {
  jobId: string;
  target: CanvasSpec;
  status: "pending" | "done" | "failed";
  error: string | null;
  sourceNumerals: number[];
  targetNumerals: number[];
  /** fraction of elements whose rank survived, server-computed */
  retention: number | null;
  sourceSvgPath: string | null;
  targetSvgPath: string | null;
}

export function pendingPreview(jobId: string, target: CanvasSpec): RetargetPreview {
  return {
    jobId,
    target,
    status: "pending",
    error: null,
    sourceNumerals: [],
    targetNumerals: [],
    retention: null,
    sourceSvgPath: null,
    targetSvgPath: null,
  };
}

export function donePreview(
  jobId: string,
  target: CanvasSpec,
  doc: RetargetResultDoc,
): RetargetPreview {
  return {
    jobId,
    target,
    status: "done",
    error: null,
    sourceNumerals: [...doc.source_orders],
    targetNumerals: [...doc.derived_orders],
    retention: doc.order_retention,
    sourceSvgPath: `/api/results/${jobId}/svg/source`,
    targetSvgPath: `/api/results/${jobId}/svg/0`,
  };
}

export function failedPreview(
  jobId: string,
  target: CanvasSpec,
  error: string,
): RetargetPreview {
  return { ...pendingPreview(jobId, target), status: "failed", error };
}

export function ordersMatch(preview: RetargetPreview): boolean {
  return (
    preview.sourceNumerals.length === preview.targetNumerals.length &&
    preview.sourceNumerals.every((o, i) => o === preview.targetNumerals[i])
  );
}

export function canvasLabel(canvas: CanvasSpec): string {
  return `${canvas.width_px}×${canvas.height_px} (${canvas.aspect_class})`;
}

export const PRESET_TARGETS: RetargetTarget[] = [
  {
    canvas: { width_px: 256, height_px: 512, aspect_class: "portrait" },
    label: "portrait 1:2",
  },
  {
    canvas: { width_px: 512, height_px: 256, aspect_class: "landscape" },
    label: "landscape 2:1",
  },
  {
    canvas: { width_px: 320, height_px: 320, aspect_class: "square" },
    label: "square 1:1",
  },
];
