// DOM wiring for the designer UI. All layout intelligence lives on the
// server; this file renders documents the API returns and forwards form
// input back to it.

import { ApiClient } from "./api.js";
import {
  CLASS_NAMES,
  IMAGE_CLASSES,
  MAX_ELEMENTS,
  areaFromTextLength,
  newDraft,
  validateDrafts,
  type ClassName,
} from "./drafts.js";
import { buildGallery, costBreakdownLabel, type GalleryView } from "./gallery.js";
import {
  PRESET_TARGETS,
  canvasLabel,
  donePreview,
  failedPreview,
  ordersMatch,
  pendingPreview,
} from "./retarget.js";
import {
  canRetarget,
  initialSession,
  receiveCandidates,
  selectCandidate,
  selectedLayout,
  upsertRetarget,
  type SessionState,
} from "./session.js";

const api = new ApiClient();
let state: SessionState = initialSession();

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing #${id}`);
  return el as T;
};

function el(tag: string, className?: string, text?: string): HTMLElement {
  const node = document.createElement(tag);
  if (className) node.className = className;
  if (text !== undefined) node.textContent = text;
  return node;
}

// ---------------------------------------------------------------------------
// drafts form
// ---------------------------------------------------------------------------

function renderDrafts(): void {
  const host = $("drafts");
  host.textContent = "";
  state.drafts.forEach((draft, i) => {
    const row = el("div", "draft-row");

    const cls = document.createElement("select");
    for (const name of CLASS_NAMES) {
      const opt = document.createElement("option");
      opt.value = name;
      opt.textContent = name;
      opt.selected = name === draft.className;
      cls.appendChild(opt);
    }
    cls.onchange = () => {
      draft.className = cls.value as ClassName;
      if (!IMAGE_CLASSES.has(draft.className)) draft.aspectLocked = false;
      renderDrafts();
    };
    row.appendChild(cls);

    if (draft.className === "headline" || draft.className === "disclaimer") {
      // text elements size themselves from expected text length
      const chars = document.createElement("input");
      chars.type = "number";
      chars.min = "1";
      chars.placeholder = "chars";
      chars.title = "expected text length";
      chars.onchange = () => {
        draft.area = areaFromTextLength(Number(chars.value));
        renderDrafts();
      };
      row.appendChild(chars);
    }

    const area = document.createElement("input");
    area.type = "range";
    area.min = "0.005";
    area.max = "0.4";
    area.step = "0.005";
    area.value = String(draft.area);
    area.title = `area s = ${draft.area.toFixed(3)}`;
    area.oninput = () => {
      draft.area = Number(area.value);
      area.title = `area s = ${draft.area.toFixed(3)}`;
    };
    row.appendChild(area);

    if (IMAGE_CLASSES.has(draft.className)) {
      const lock = document.createElement("input");
      lock.type = "checkbox";
      lock.checked = draft.aspectLocked;
      lock.title = "lock aspect ratio";
      lock.onchange = () => {
        draft.aspectLocked = lock.checked;
        renderDrafts();
      };
      row.appendChild(lock);
      if (draft.aspectLocked) {
        const r = document.createElement("input");
        r.type = "number";
        r.step = "0.1";
        r.min = "0.1";
        r.value = String(draft.aspect || 1);
        r.title = "aspect r = height/width";
        r.onchange = () => {
          draft.aspect = Number(r.value);
        };
        row.appendChild(r);
      }
    }

    const order = document.createElement("input");
    order.type = "number";
    order.min = "0";
    order.placeholder = "order";
    order.title = "reading-order rank (optional)";
    if (draft.order !== null) order.value = String(draft.order);
    order.onchange = () => {
      draft.order = order.value === "" ? null : Number(order.value);
    };
    row.appendChild(order);

    const remove = el("button", "remove", "×");
    remove.onclick = () => {
      state.drafts.splice(i, 1);
      renderDrafts();
    };
    row.appendChild(remove);

    host.appendChild(row);
  });

  const issues = validateDrafts(state.drafts);
  const panel = $("draft-issues");
  panel.textContent = issues.map((iss) => iss.message).join("; ");
  ($("generate") as HTMLButtonElement).disabled = issues.length > 0;
  ($("add-draft") as HTMLButtonElement).disabled =
    state.drafts.length >= MAX_ELEMENTS;
}

// ---------------------------------------------------------------------------
// gallery
// ---------------------------------------------------------------------------

function renderGallery(view: GalleryView | null): void {
  const host = $("gallery");
  host.textContent = "";
  if (!view || state.candidateJobId === null) return;
  const jobId = state.candidateJobId;
  for (const column of view.columns) {
    const col = el("div", "cluster-column");
    col.appendChild(el("h3", "", `cluster ${column.clusterId}`));
    for (const card of column.cards) {
      const cardEl = el("div", card.recommended ? "card recommended" : "card");
      if (card.recommended) cardEl.appendChild(el("span", "badge", "best"));
      const img = document.createElement("img");
      img.src = api.svgUrl(jobId, card.index);
      img.alt = `candidate ${card.index}`;
      cardEl.appendChild(img);
      cardEl.appendChild(el("div", "cost", costBreakdownLabel(card)));
      cardEl.onclick = () => {
        state = selectCandidate(state, card.index);
        document
          .querySelectorAll(".card.selected")
          .forEach((n) => n.classList.remove("selected"));
        cardEl.classList.add("selected");
        ($("retarget-panel") as HTMLElement).hidden = !canRetarget(state);
      };
      col.appendChild(cardEl);
    }
    host.appendChild(col);
  }
}

// ---------------------------------------------------------------------------
// retarget previews
// ---------------------------------------------------------------------------

function renderRetargets(): void {
  const host = $("retargets");
  host.textContent = "";
  for (const preview of state.retargets) {
    const pane = el("div", "retarget-pane");
    pane.appendChild(el("h4", "", canvasLabel(preview.target)));
    if (preview.status === "failed") {
      pane.appendChild(el("div", "error-chip", preview.error ?? "failed"));
    } else if (preview.status === "pending") {
      pane.appendChild(el("div", "pending", "working…"));
    } else {
      const pair = el("div", "pair");
      for (const path of [preview.sourceSvgPath, preview.targetSvgPath]) {
        if (!path) continue;
        const img = document.createElement("img");
        img.src = path;
        pair.appendChild(img);
      }
      pane.appendChild(pair);
      const kept = ordersMatch(preview)
        ? "reading order preserved"
        : `reading order kept for ${Math.round((preview.retention ?? 0) * 100)}%`;
      pane.appendChild(el("div", "retention", kept));
    }
    host.appendChild(pane);
  }
}

// ---------------------------------------------------------------------------
// actions
// ---------------------------------------------------------------------------

async function onGenerate(): Promise<void> {
  const status = $("status");
  try {
    status.textContent = "submitting…";
    const job = await api.submitGeneration(state.drafts, state.canvas, {
      seed: Number(($("seed") as HTMLInputElement).value) || 0,
    });
    state = { ...state, generateJobId: job.id };
    status.textContent = `job ${job.id} ${job.status}`;
    const finished = await api.pollJob(job.id);
    if (finished.status === "failed") {
      status.textContent = "";
      $("error-panel").textContent = finished.error ?? "generation failed";
      return;
    }
    $("error-panel").textContent = "";
    const doc = await api.getCandidateSet(job.id);
    state = receiveCandidates(state, job.id, doc);
    status.textContent = `${doc.layouts.length} candidates in ${doc.clusters.length} clusters`;
    renderGallery(buildGallery(doc));
    renderRetargets();
  } catch (err) {
    status.textContent = "";
    $("error-panel").textContent = err instanceof Error ? err.message : String(err);
  }
}

async function onRetarget(target: (typeof PRESET_TARGETS)[number]): Promise<void> {
  const layout = selectedLayout(state);
  if (!layout) return;
  try {
    const job = await api.submitRetarget(layout, target.canvas);
    state = upsertRetarget(state, pendingPreview(job.id, target.canvas));
    renderRetargets();
    const finished = await api.pollJob(job.id);
    if (finished.status === "failed") {
      state = upsertRetarget(
        state,
        failedPreview(job.id, target.canvas, finished.error ?? "failed"),
      );
    } else {
      const doc = await api.getRetargetResult(job.id);
      state = upsertRetarget(state, donePreview(job.id, target.canvas, doc));
    }
    renderRetargets();
  } catch (err) {
    $("error-panel").textContent = err instanceof Error ? err.message : String(err);
  }
}

function boot(): void {
  renderDrafts();
  $("add-draft").onclick = () => {
    state.drafts.push(newDraft());
    renderDrafts();
  };
  $("generate").onclick = () => void onGenerate();
  const panel = $("retarget-panel");
  panel.hidden = true;
  for (const target of PRESET_TARGETS) {
    const btn = el("button", "", target.label);
    btn.onclick = () => void onRetarget(target);
    panel.appendChild(btn);
  }
  void api
    .health()
    .then((h) => {
      $("health").textContent = `service ok, models: ${h.aspect_classes.join(", ") || "none"}`;
    })
    .catch(() => {
      $("health").textContent = "service unreachable";
    });
}

document.addEventListener("DOMContentLoaded", boot);
