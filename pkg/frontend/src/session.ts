// Session state: drafts, in-flight jobs, the received candidate set, the
// designer's pick, and retarget previews. State only changes through
// these helpers, and only poll responses feed job results in.

import type { CandidateSetDoc, CanvasSpec } from "./types.js";
import type { ElementDraft } from "./drafts.js";
import { newDraft } from "./drafts.js";
import type { RetargetPreview } from "./retarget.js";

export interface SessionState {
  drafts: ElementDraft[];
  canvas: CanvasSpec;
  generateJobId: string | null;
  candidateSet: CandidateSetDoc | null;
  candidateJobId: string | null;
  selectedIndex: number | null;
  retargets: RetargetPreview[];
  lastError: string | null;
}

export function initialSession(): SessionState {
  return {
    drafts: [newDraft("product_image"), newDraft("headline"), newDraft("button")],
    canvas: { width_px: 320, height_px: 320, aspect_class: "square" },
    generateJobId: null,
    candidateSet: null,
    candidateJobId: null,
    selectedIndex: null,
    retargets: [],
    lastError: null,
  };
}

export function receiveCandidates(
  state: SessionState,
  jobId: string,
  doc: CandidateSetDoc,
): SessionState {
  return {
    ...state,
    candidateSet: doc,
    candidateJobId: jobId,
    selectedIndex: null, // previous selection belonged to the old set
    retargets: [],
    lastError: null,
  };
}

export function selectCandidate(state: SessionState, index: number): SessionState {
  if (!state.candidateSet) throw new Error("no candidate set received");
  if (index < 0 || index >= state.candidateSet.layouts.length) {
    throw new Error(`candidate ${index} is not in the received set`);
  }
  return { ...state, selectedIndex: index };
}

export function selectedLayout(state: SessionState) {
  if (state.candidateSet === null || state.selectedIndex === null) return null;
  return state.candidateSet.layouts[state.selectedIndex].layout;
}

export function canRetarget(state: SessionState): boolean {
  return selectedLayout(state) !== null;
}

export function upsertRetarget(
  state: SessionState,
  preview: RetargetPreview,
): SessionState {
  const idx = state.retargets.findIndex((p) => p.jobId === preview.jobId);
  const retargets =
    idx >= 0
      ? state.retargets.map((p, i) => (i === idx ? preview : p))
      : [...state.retargets, preview];
  return { ...state, retargets };
}
