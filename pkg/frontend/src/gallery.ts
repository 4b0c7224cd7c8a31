// Gallery view-model: one column per cluster, the server's recommended
// candidate first and badged, the rest in the server's rank order. No
// sorting or cost math happens here; the column order comes straight
// from the candidate set document.

import type { CandidateSetDoc } from "./types.js";

export interface GalleryCard {
  /** record index in the candidate set, also the server SVG index */
  index: number;
  cost: number;
  costTerms: { adversarial: number; overlap: number; alignment: number } | null;
  recommended: boolean;
  cluster: number;
}

export interface GalleryColumn {
  clusterId: number;
  cards: GalleryCard[];
}

export interface GalleryView {
  columns: GalleryColumn[];
  k: number;
  seed: number;
  canvas: { width_px: number; height_px: number; aspect_class: string };
}

export function buildGallery(doc: CandidateSetDoc): GalleryView {
  const columns: GalleryColumn[] = [];
  for (const cluster of doc.clusters) {
    if (cluster.members.length === 0) continue; // never display an empty cluster
    const cards = cluster.members.map((index) => {
      const rec = doc.layouts[index];
      if (!rec) throw new Error(`cluster ${cluster.id} references missing record ${index}`);
      return {
        index,
        cost: rec.cost,
        costTerms: rec.cost_terms ?? null,
        recommended: index === cluster.recommended,
        cluster: cluster.id,
      };
    });
    // server contract: members are rank-ordered and recommended is first
    columns.push({ clusterId: cluster.id, cards });
  }
  return { columns, k: doc.k, seed: doc.seed, canvas: doc.canvas };
}

export function formatCost(value: number): string {
  return value.toFixed(3);
}

export function costBreakdownLabel(card: GalleryCard): string {
  if (!card.costTerms) return `E=${formatCost(card.cost)}`;
  const t = card.costTerms;
  return (
    `E=${formatCost(card.cost)} ` +
    `(adv ${formatCost(t.adversarial)}, ` +
    `over ${formatCost(t.overlap)}, ` +
    `align ${formatCost(t.alignment)})`
  );
}
