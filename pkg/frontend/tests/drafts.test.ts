import { describe, expect, it } from "vitest";

import {
  AREA_PER_CHARACTER,
  MAX_AREA,
  MIN_AREA,
  areaFromTextLength,
  draftsToPayload,
  newDraft,
  validateDrafts,
  type ElementDraft,
} from "../src/drafts.js";

function validTrio(): ElementDraft[] {
  return [newDraft("product_image"), newDraft("headline"), newDraft("button")];
}

describe("newDraft", () => {
  it("locks aspect for image classes only", () => {
    expect(newDraft("product_image").aspectLocked).toBe(true);
    expect(newDraft("logo").aspect).toBe(1.0);
    expect(newDraft("headline").aspectLocked).toBe(false);
    expect(newDraft("headline").aspect).toBe(0);
  });
});

describe("areaFromTextLength", () => {
  it("maps a 30-character headline near 6% of the canvas", () => {
    expect(areaFromTextLength(30)).toBeCloseTo(30 * AREA_PER_CHARACTER, 12);
  });

  it("clamps at both ends", () => {
    expect(areaFromTextLength(0)).toBe(MIN_AREA);
    expect(areaFromTextLength(1)).toBe(MIN_AREA); // 0.002 below the floor
    expect(areaFromTextLength(10_000)).toBe(MAX_AREA);
    expect(areaFromTextLength(Number.NaN)).toBe(MIN_AREA);
  });

  it("is monotone over the useful range", () => {
    let prev = 0;
    for (const chars of [3, 10, 30, 100, 250]) {
      const area = areaFromTextLength(chars);
      expect(area).toBeGreaterThanOrEqual(prev);
      prev = area;
    }
  });
});

describe("validateDrafts", () => {
  it("accepts a valid brief", () => {
    expect(validateDrafts(validTrio())).toEqual([]);
  });

  it("enforces the element count window as form-level issues", () => {
    expect(validateDrafts([newDraft()])).toEqual([
      { index: null, field: null, message: "N ≥ 2" },
    ]);
    const seven = Array.from({ length: 7 }, () => newDraft());
    expect(validateDrafts(seven)).toEqual([
      { index: null, field: null, message: "N ≤ 6" },
    ]);
  });

  it("flags nonpositive area on the right row", () => {
    const drafts = validTrio();
    drafts[1].area = 0;
    const issues = validateDrafts(drafts);
    expect(issues).toEqual([{ index: 1, field: "area", message: "s > 0" }]);
  });

  it("requires positive aspect only when locked", () => {
    const drafts = validTrio();
    drafts[0].aspect = 0; // product_image is locked
    expect(validateDrafts(drafts)).toEqual([
      { index: 0, field: "aspect", message: "r > 0 when locked" },
    ]);
    drafts[0].aspectLocked = false;
    expect(validateDrafts(drafts)).toEqual([]);
  });

  it("rejects fractional or negative order ranks", () => {
    const drafts = validTrio();
    drafts[2].order = -1;
    expect(validateDrafts(drafts)[0].field).toBe("order");
    drafts[2].order = 1.5;
    expect(validateDrafts(drafts)[0].field).toBe("order");
    drafts[2].order = 0;
    expect(validateDrafts(drafts)).toEqual([]);
  });
});

describe("draftsToPayload", () => {
  it("maps drafts to wire format with r=0 when unlocked", () => {
    const drafts = validTrio();
    drafts[1].area = 0.08;
    drafts[1].aspect = 2.5; // ignored: not locked
    const payload = draftsToPayload(drafts);
    expect(payload).toHaveLength(3);
    expect(payload[0]).toEqual({ class: "product_image", s: 0.05, r: 1.0 });
    expect(payload[1]).toEqual({ class: "headline", s: 0.08, r: 0 });
  });

  it("includes order only when set", () => {
    const drafts = validTrio();
    drafts[0].order = 0;
    const payload = draftsToPayload(drafts);
    expect(payload[0].order).toBe(0);
    expect("order" in payload[1]).toBe(false);
  });

  it("throws the joined issue messages for an invalid brief", () => {
    const drafts = [newDraft()];
    drafts[0].area = -1;
    expect(() => draftsToPayload(drafts)).toThrowError(/N ≥ 2.*s > 0/);
  });
});
