import { describe, expect, it } from "vitest";

import { buildGallery, costBreakdownLabel, formatCost } from "../src/gallery.js";
import type { CandidateSetDoc, CanvasSpec } from "../src/types.js";

const CANVAS: CanvasSpec = { width_px: 320, height_px: 320, aspect_class: "square" };

function doc(overrides: Partial<CandidateSetDoc> = {}): CandidateSetDoc {
  const layout = { canvas: CANVAS, elements: [] };
  return {
    canvas: CANVAS,
    k: 2,
    seed: 7,
    rank_order: "asc",
    layouts: [
      { layout, feature: [0], cost: 0.31, cluster: 0 },
      { layout, feature: [1], cost: 0.52, cluster: 1 },
      { layout, feature: [2], cost: 0.44, cluster: 0 },
    ],
    clusters: [
      { id: 0, members: [0, 2], recommended: 0 },
      { id: 1, members: [1], recommended: 1 },
    ],
    ...overrides,
  };
}

describe("buildGallery", () => {
  it("makes one column per cluster in document order", () => {
    const view = buildGallery(doc());
    expect(view.columns.map((c) => c.clusterId)).toEqual([0, 1]);
    expect(view.k).toBe(2);
    expect(view.seed).toBe(7);
    expect(view.canvas).toEqual(CANVAS);
  });

  it("keeps the server's member order and badges the recommended card", () => {
    const view = buildGallery(doc());
    const col = view.columns[0];
    expect(col.cards.map((c) => c.index)).toEqual([0, 2]);
    expect(col.cards.map((c) => c.recommended)).toEqual([true, false]);
    // rank order ascending means the badge sits on the cheapest card
    const costs = col.cards.map((c) => c.cost);
    expect(col.cards[0].cost).toBe(Math.min(...costs));
  });

  it("skips empty clusters instead of rendering hollow columns", () => {
    const d = doc({
      clusters: [
        { id: 0, members: [0, 2], recommended: 0 },
        { id: 1, members: [], recommended: -1 },
        { id: 2, members: [1], recommended: 1 },
      ],
    });
    const view = buildGallery(d);
    expect(view.columns.map((c) => c.clusterId)).toEqual([0, 2]);
  });

  it("rejects clusters pointing at records that do not exist", () => {
    const d = doc({ clusters: [{ id: 3, members: [9], recommended: 9 }] });
    expect(() => buildGallery(d)).toThrowError(
      "cluster 3 references missing record 9",
    );
  });

  it("carries per-term cost breakdowns when the server sends them", () => {
    const d = doc();
    d.layouts[0].cost_terms = { adversarial: 0.2, overlap: 0.06, alignment: 0.05 };
    const view = buildGallery(d);
    expect(view.columns[0].cards[0].costTerms).toEqual({
      adversarial: 0.2,
      overlap: 0.06,
      alignment: 0.05,
    });
    expect(view.columns[0].cards[1].costTerms).toBeNull();
  });
});

describe("cost labels", () => {
  it("formats to three decimals", () => {
    expect(formatCost(0.3)).toBe("0.300");
    expect(formatCost(1.23456)).toBe("1.235");
  });

  it("spells out the energy terms when present", () => {
    const card = {
      index: 0,
      cost: 0.31,
      costTerms: { adversarial: 0.2, overlap: 0.06, alignment: 0.05 },
      recommended: true,
      cluster: 0,
    };
    expect(costBreakdownLabel(card)).toBe(
      "E=0.310 (adv 0.200, over 0.060, align 0.050)",
    );
    expect(costBreakdownLabel({ ...card, costTerms: null })).toBe("E=0.310");
  });
});
