// Shapes of the service's JSON documents. These mirror the HTTP API and
// carry no behavior; all geometry and cost values are server-computed.

export interface CanvasSpec {
  width_px: number;
  height_px: number;
  aspect_class: string;
}

export interface ElementPayload {
  class: string;
  s: number;
  r: number;
  order?: number | null;
}

export interface GenerateRequestBody {
  elements: ElementPayload[];
  canvas: CanvasSpec;
  k: number;
  grid_n: number;
  seed: number;
  rank_order: "asc" | "desc";
  idempotency_key?: string;
}

export interface RetargetRequestBody {
  layout: LayoutDoc;
  target_canvas: CanvasSpec;
  seed: number;
  idempotency_key?: string;
}

export interface JobOut {
  id: string;
  kind: string;
  status: "queued" | "running" | "done" | "failed";
  error: string | null;
  seed: number | null;
  created_at: number;
  updated_at: number;
  has_result: boolean;
}

export interface ElementDoc {
  class: string | number;
  xC: number;
  yC: number;
  w: number;
  h: number;
  attributes: { s: number; r: number; d: number };
  order?: number | null;
  frozen?: boolean;
}

export interface LayoutDoc {
  canvas: CanvasSpec;
  elements: ElementDoc[];
  extras?: Record<string, unknown>;
}

export interface CandidateRecordDoc {
  layout: LayoutDoc;
  feature: number[];
  cost: number;
  cluster: number;
  cost_terms?: { adversarial: number; overlap: number; alignment: number };
}

export interface ClusterDoc {
  id: number;
  members: number[];
  recommended: number;
}

export interface CandidateSetDoc {
  canvas: CanvasSpec;
  k: number;
  seed: number;
  rank_order: string;
  layouts: CandidateRecordDoc[];
  clusters: ClusterDoc[];
}

export interface RetargetResultDoc {
  layout: LayoutDoc;
  seed: number;
  source_orders: number[];
  derived_orders: number[];
  order_retention: number;
}

export interface HealthDoc {
  status: string;
  aspect_classes: string[];
  adjustment: boolean;
}
