// Element drafts: what the designer fills in before anything touches the
// network. Validation happens here, field by field, so errors surface
// inline instead of as failed jobs.

import type { ElementPayload } from "./types.js";

export const CLASS_NAMES = [
  "logo",
  "product_image",
  "headline",
  "button",
  "offer",
  "disclaimer",
] as const;

export type ClassName = (typeof CLASS_NAMES)[number];

// classes where an aspect lock makes sense (artwork with fixed proportions)
export const IMAGE_CLASSES: ReadonlySet<string> = new Set([
  "logo",
  "product_image",
]);

export const MIN_ELEMENTS = 2;
export const MAX_ELEMENTS = 6;

// text sizing: expected area grows with text length at a fixed rate;
// tuned so a 30-character headline lands near 6% of the canvas
export const AREA_PER_CHARACTER = 0.002;
export const MIN_AREA = 0.005;
export const MAX_AREA = 0.6;

export interface ElementDraft {
  className: ClassName;
  /** expected area s, fraction of the canvas */
  area: number;
  /** aspect lock: when enabled, r = height/width must be positive */
  aspectLocked: boolean;
  aspect: number;
  /** optional reading-order rank */
  order: number | null;
}

export function newDraft(className: ClassName = "headline"): ElementDraft {
  return {
    className,
    area: 0.05,
    aspectLocked: IMAGE_CLASSES.has(className),
    aspect: IMAGE_CLASSES.has(className) ? 1.0 : 0,
    order: null,
  };
}

export function areaFromTextLength(chars: number): number {
  if (!Number.isFinite(chars) || chars <= 0) return MIN_AREA;
  return Math.min(MAX_AREA, Math.max(MIN_AREA, chars * AREA_PER_CHARACTER));
}

export interface DraftIssue {
  index: number | null; // null = form-level
  field: string | null;
  message: string;
}

export function validateDrafts(drafts: ElementDraft[]): DraftIssue[] {
  const issues: DraftIssue[] = [];
  if (drafts.length < MIN_ELEMENTS) {
    issues.push({ index: null, field: null, message: "N ≥ 2" });
  }
  if (drafts.length > MAX_ELEMENTS) {
    issues.push({ index: null, field: null, message: "N ≤ 6" });
  }
  drafts.forEach((d, i) => {
    if (!CLASS_NAMES.includes(d.className)) {
      issues.push({ index: i, field: "class", message: `unknown class "${d.className}"` });
    }
    if (!Number.isFinite(d.area) || d.area <= 0) {
      issues.push({ index: i, field: "area", message: "s > 0" });
    }
    if (d.aspectLocked && (!Number.isFinite(d.aspect) || d.aspect <= 0)) {
      issues.push({ index: i, field: "aspect", message: "r > 0 when locked" });
    }
    if (d.order !== null && (!Number.isInteger(d.order) || d.order < 0)) {
      issues.push({ index: i, field: "order", message: "order is a rank ≥ 0" });
    }
  });
  return issues;
}

export function draftsToPayload(drafts: ElementDraft[]): ElementPayload[] {
  const issues = validateDrafts(drafts);
  if (issues.length > 0) {
    throw new Error(issues.map((i) => i.message).join("; "));
  }
  return drafts.map((d) => ({
    class: d.className,
    s: d.area,
    r: d.aspectLocked ? d.aspect : 0,
    ...(d.order !== null ? { order: d.order } : {}),
  }));
}
