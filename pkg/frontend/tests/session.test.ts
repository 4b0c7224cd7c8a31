import { describe, expect, it } from "vitest";

import {
  canRetarget,
  initialSession,
  receiveCandidates,
  selectCandidate,
  selectedLayout,
  upsertRetarget,
} from "../src/session.js";
import { pendingPreview, failedPreview } from "../src/retarget.js";
import type { CandidateSetDoc, CanvasSpec } from "../src/types.js";

const CANVAS: CanvasSpec = { width_px: 320, height_px: 320, aspect_class: "square" };

function tinySet(): CandidateSetDoc {
  const layout = { canvas: CANVAS, elements: [] };
  return {
    canvas: CANVAS,
    k: 1,
    seed: 0,
    rank_order: "asc",
    layouts: [
      { layout, feature: [0], cost: 0.5, cluster: 0 },
      { layout, feature: [1], cost: 0.9, cluster: 0 },
    ],
    clusters: [{ id: 0, members: [0, 1], recommended: 0 }],
  };
}

describe("initialSession", () => {
  it("starts with a three-element brief on a square canvas", () => {
    const s = initialSession();
    expect(s.drafts.map((d) => d.className)).toEqual([
      "product_image",
      "headline",
      "button",
    ]);
    expect(s.canvas).toEqual(CANVAS);
    expect(s.selectedIndex).toBeNull();
    expect(canRetarget(s)).toBe(false);
  });
});

describe("receiveCandidates", () => {
  it("installs the set and resets selection and retargets", () => {
    let s = receiveCandidates(initialSession(), "job-1", tinySet());
    s = selectCandidate(s, 1);
    s = upsertRetarget(s, pendingPreview("r1", CANVAS));
    const next = receiveCandidates(s, "job-2", tinySet());
    expect(next.candidateJobId).toBe("job-2");
    expect(next.selectedIndex).toBeNull();
    expect(next.retargets).toEqual([]);
  });
});

describe("selectCandidate", () => {
  it("bounds-checks against the received set", () => {
    const s = receiveCandidates(initialSession(), "job-1", tinySet());
    expect(() => selectCandidate(s, 2)).toThrowError(
      "candidate 2 is not in the received set",
    );
    expect(() => selectCandidate(initialSession(), 0)).toThrowError(
      "no candidate set received",
    );
  });

  it("exposes the selected layout for retargeting", () => {
    let s = receiveCandidates(initialSession(), "job-1", tinySet());
    expect(selectedLayout(s)).toBeNull();
    s = selectCandidate(s, 1);
    expect(selectedLayout(s)).toBe(s.candidateSet!.layouts[1].layout);
    expect(canRetarget(s)).toBe(true);
  });
});

describe("upsertRetarget", () => {
  it("appends new previews and replaces by job id", () => {
    let s = receiveCandidates(initialSession(), "job-1", tinySet());
    s = upsertRetarget(s, pendingPreview("r1", CANVAS));
    s = upsertRetarget(s, pendingPreview("r2", CANVAS));
    expect(s.retargets.map((p) => p.jobId)).toEqual(["r1", "r2"]);
    s = upsertRetarget(s, failedPreview("r1", CANVAS, "no adjustment model"));
    expect(s.retargets).toHaveLength(2);
    expect(s.retargets[0].status).toBe("failed");
    expect(s.retargets[0].error).toBe("no adjustment model");
    expect(s.retargets[1].status).toBe("pending");
  });
});
