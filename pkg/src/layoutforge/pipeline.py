"""Candidate generation, grouping, ranking, retargeting, and the
attribute-retrieval baseline.

The flow mirrors how a designer uses the system: sample a grid of product
image placements, generate one layout per placement, describe each layout
by the discriminator's pooled activations, cluster those features, and
rank each cluster by a weighted cost so every cluster recommends its best
member.  Everything downstream of a (specs, checkpoint, seed) triple is
deterministic, including the serialized JSON.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
import torch
from sklearn.cluster import KMeans
from sklearn.manifold import TSNE

from .core import (
    AttributeVector,
    Canvas,
    ElementSpec,
    Geometry,
    Layout,
    ValidationError,
    assign_reading_orders,
    origin_distance,
    validate_layout,
)
from .data import layout_from_dict, layout_to_dict
from .losses import (
    LossWeights,
    alignment_loss,
    generator_adversarial_loss,
    overlap_loss,
)
from .model import ModelCheckpoint, WireframeCritic, image_to_channels_first
from .render import compose_layout_image
from .training import generate_layout

PRODUCT_CLASS = "product_image"


# ---------------------------------------------------------------------------
# image location sampling
# ---------------------------------------------------------------------------


def sample_image_locations(
    canvas: Canvas, image_w: float, image_h: float, grid_n: int
) -> list[tuple[float, float]]:
    """grid_n x grid_n product-image centers spanning the feasible region.

    Coordinates are normalized, so the feasible band for the center is
    [w/2, 1 - w/2] on each axis; a full-canvas image collapses the grid
    to the single center (0.5, 0.5).
    """
    if grid_n < 1:
        raise ValidationError(f"grid_n {grid_n} must be >= 1")
    if not (0.0 < image_w <= 1.0) or not (0.0 < image_h <= 1.0):
        raise ValidationError(
            f"image {image_w:.4f} x {image_h:.4f} does not fit a unit canvas"
        )

    def axis(size: float) -> list[float]:
        lo, hi = size / 2.0, 1.0 - size / 2.0
        if grid_n == 1 or hi <= lo:
            return [0.5]
        return [lo + (hi - lo) * i / (grid_n - 1) for i in range(grid_n)]

    return [(x, y) for y in axis(image_h) for x in axis(image_w)]


# ---------------------------------------------------------------------------
# candidate generation
# ---------------------------------------------------------------------------


def product_size(spec: ElementSpec) -> tuple[float, float]:
    """(w, h) from the expected area and aspect ratio; r must be locked."""
    s, r = spec.attributes.area, spec.attributes.aspect
    if r <= 0:
        raise ValidationError("product image needs a positive aspect ratio attribute")
    w = math.sqrt(s / r)
    return w, r * w


def _class_names(checkpoint: ModelCheckpoint) -> tuple[str, ...]:
    if checkpoint.class_names:
        return tuple(checkpoint.class_names)
    from .core import DEFAULT_CLASS_NAMES

    return DEFAULT_CLASS_NAMES


def find_product_spec(
    specs: list[ElementSpec], class_names: tuple[str, ...]
) -> int:
    if PRODUCT_CLASS not in class_names:
        raise ValidationError(f"class list has no {PRODUCT_CLASS!r} entry")
    target = class_names.index(PRODUCT_CLASS)
    for i, spec in enumerate(specs):
        if spec.class_index == target:
            return i
    raise ValidationError("element specs include no product image")


def generate_candidates(
    element_specs: list[ElementSpec],
    checkpoint: ModelCheckpoint,
    canvas: Canvas,
    locations: list[tuple[float, float]],
    seed: int,
) -> list[Layout]:
    """One layout per location, product image frozen there at its (s, r) size.

    Each output records its placement and per-candidate seed under
    extras["provenance"] so downstream artifacts stay traceable.
    """
    if not locations:
        raise ValidationError("no candidate locations given")
    if canvas.aspect_class != checkpoint.aspect_class:
        raise ValidationError(
            f"canvas aspect {canvas.aspect_class!r} does not match "
            f"checkpoint aspect {checkpoint.aspect_class!r}"
        )
    names = _class_names(checkpoint)
    product_i = find_product_spec(element_specs, names)
    w, h = product_size(element_specs[product_i])

    generator = checkpoint.build_generator()
    layouts = []
    for i, (x, y) in enumerate(locations):
        if not (w / 2 - 1e-9 <= x <= 1 - w / 2 + 1e-9) or not (
            h / 2 - 1e-9 <= y <= 1 - h / 2 + 1e-9
        ):
            raise ValidationError(
                f"location ({x:.4f}, {y:.4f}) puts the product image off canvas"
            )
        specs = list(element_specs)
        specs[product_i] = replace(
            specs[product_i], frozen_geometry=Geometry(x, y, w, h)
        )
        layout = generate_layout(generator, specs, canvas, seed=seed + i)
        layout.extras["provenance"] = {
            "image_location": [x, y],
            "seed": seed + i,
        }
        layouts.append(layout)
    return layouts


# ---------------------------------------------------------------------------
# features and cost
# ---------------------------------------------------------------------------


def _layout_image(layout: Layout, resolution: int) -> torch.Tensor:
    probs = torch.tensor(
        [el.class_probs for el in layout.elements], dtype=torch.float32
    )
    geoms = torch.tensor(
        [[g.cx, g.cy, g.w, g.h] for g in layout.geometries()], dtype=torch.float32
    )
    image = compose_layout_image(probs, geoms, resolution, resolution)
    return image_to_channels_first(image)


def extract_layout_features(
    layout: Layout, checkpoint: ModelCheckpoint | WireframeCritic
) -> np.ndarray:
    """Spatial mean of the discriminator's last conv map on the full render."""
    critic = (
        checkpoint
        if isinstance(checkpoint, WireframeCritic)
        else checkpoint.build_discriminator()
    )
    image = _layout_image(layout, critic.config.resolution)
    with torch.no_grad():
        feats = critic.global_features(image)
    return feats.numpy().astype(np.float32)


def layout_cost_terms(
    layout: Layout,
    checkpoint: ModelCheckpoint | WireframeCritic,
    weights: LossWeights | None = None,
) -> dict[str, float]:
    """Weighted cost components (adversarial, overlap, alignment).

    The adversarial term feeds the full wireframe to both branches, which
    is the dropout-free view of the training objective and keeps ranking
    deterministic.
    """
    w = weights or LossWeights()
    critic = (
        checkpoint
        if isinstance(checkpoint, WireframeCritic)
        else checkpoint.build_discriminator()
    )
    image = _layout_image(layout, critic.config.resolution)[None]
    with torch.no_grad():
        p_g, p_l, _ = critic(image, image if critic.local_branch else None)
        adv = generator_adversarial_loss(p_g, p_l)[0]
    geoms = torch.tensor(
        [[g.cx, g.cy, g.w, g.h] for g in layout.geometries()], dtype=torch.float64
    )
    over = overlap_loss(geoms)
    align = alignment_loss(geoms)
    return {
        "adversarial": float(w.adv * float(adv)),
        "overlap": float(w.overlap * float(over)),
        "alignment": float(w.alignment * float(align)),
    }


def layout_cost(
    layout: Layout,
    checkpoint: ModelCheckpoint | WireframeCritic,
    weights: LossWeights | None = None,
) -> float:
    """Total of layout_cost_terms; lower is better."""
    return float(sum(layout_cost_terms(layout, checkpoint, weights).values()))


# ---------------------------------------------------------------------------
# grouping and ranking
# ---------------------------------------------------------------------------


@dataclass
class CandidateRecord:
    layout: Layout
    feature: list[float]
    cost: float
    cluster: int
    cost_terms: dict[str, float] | None = None


@dataclass
class ClusterSummary:
    id: int
    members: list[int]  # record indices, ranked by cost
    recommended: int  # first-ranked member


@dataclass
class CandidateSet:
    records: list[CandidateRecord]
    clusters: list[ClusterSummary]
    canvas: Canvas
    k: int
    seed: int
    rank_order: str = "asc"

    def recommended_indices(self) -> list[int]:
        return [c.recommended for c in self.clusters]

    def to_dict(self) -> dict:
        return {
            "canvas": {
                "width_px": self.canvas.width_px,
                "height_px": self.canvas.height_px,
                "aspect_class": self.canvas.aspect_class,
            },
            "k": self.k,
            "seed": self.seed,
            "rank_order": self.rank_order,
            "layouts": [
                {
                    "layout": layout_to_dict(rec.layout),
                    "feature": rec.feature,
                    "cost": rec.cost,
                    "cluster": rec.cluster,
                    **(
                        {"cost_terms": rec.cost_terms}
                        if rec.cost_terms is not None
                        else {}
                    ),
                }
                for rec in self.records
            ],
            "clusters": [
                {"id": c.id, "members": c.members, "recommended": c.recommended}
                for c in self.clusters
            ],
        }


def candidate_set_from_dict(doc: dict) -> CandidateSet:
    canvas = Canvas(
        doc["canvas"]["width_px"],
        doc["canvas"]["height_px"],
        doc["canvas"]["aspect_class"],
    )
    records = [
        CandidateRecord(
            layout=layout_from_dict(item["layout"]),
            feature=list(item["feature"]),
            cost=item["cost"],
            cluster=item["cluster"],
            cost_terms=item.get("cost_terms"),
        )
        for item in doc["layouts"]
    ]
    clusters = [
        ClusterSummary(id=c["id"], members=list(c["members"]), recommended=c["recommended"])
        for c in doc["clusters"]
    ]
    return CandidateSet(
        records=records,
        clusters=clusters,
        canvas=canvas,
        k=doc["k"],
        seed=doc["seed"],
        rank_order=doc["rank_order"],
    )


def dumps_candidate_set(cset: CandidateSet) -> str:
    return json.dumps(cset.to_dict(), indent=2)


def loads_candidate_set(text: str) -> CandidateSet:
    return candidate_set_from_dict(json.loads(text))


def save_candidate_set(cset: CandidateSet, path: str | Path) -> None:
    Path(path).write_text(dumps_candidate_set(cset) + "\n", encoding="utf-8")


def load_candidate_set(path: str | Path) -> CandidateSet:
    return loads_candidate_set(Path(path).read_text(encoding="utf-8"))


def group_and_rank(
    candidates: list[Layout],
    checkpoint: ModelCheckpoint | WireframeCritic,
    k: int = 5,
    weights: LossWeights | None = None,
    seed: int = 0,
    rank_order: str = "asc",
) -> CandidateSet:
    """Cluster candidate features with k-means, rank each cluster by cost.

    rank_order "asc" recommends the minimum-cost member; "desc" flips the
    ordering for comparison runs.
    """
    if rank_order not in ("asc", "desc"):
        raise ValidationError(f"rank_order must be 'asc' or 'desc', got {rank_order!r}")
    if not candidates:
        raise ValidationError("no candidates to rank")
    if k < 1 or k > len(candidates):
        raise ValidationError(
            f"k={k} must be in [1, {len(candidates)}] for {len(candidates)} candidates"
        )
    critic = (
        checkpoint
        if isinstance(checkpoint, WireframeCritic)
        else checkpoint.build_discriminator()
    )
    features = np.stack([extract_layout_features(l, critic) for l in candidates])
    terms = [layout_cost_terms(l, critic, weights) for l in candidates]
    costs = [float(sum(t.values())) for t in terms]

    km = KMeans(n_clusters=k, init="k-means++", n_init=1, max_iter=100, random_state=seed)
    labels = km.fit_predict(features.astype(np.float64))

    records = [
        CandidateRecord(
            layout=layout,
            feature=[float(v) for v in features[i]],
            cost=costs[i],
            cluster=int(labels[i]),
            cost_terms=terms[i],
        )
        for i, layout in enumerate(candidates)
    ]
    clusters = []
    for cid in sorted(set(int(l) for l in labels)):
        members = [i for i, l in enumerate(labels) if int(l) == cid]
        members.sort(key=lambda i: (costs[i], i), reverse=(rank_order == "desc"))
        clusters.append(ClusterSummary(id=cid, members=members, recommended=members[0]))
    return CandidateSet(
        records=records,
        clusters=clusters,
        canvas=candidates[0].canvas,
        k=k,
        seed=seed,
        rank_order=rank_order,
    )


def run_generation_pipeline(
    element_specs: list[ElementSpec],
    checkpoint: ModelCheckpoint,
    canvas: Canvas,
    grid_n: int = 8,
    k: int = 5,
    seed: int = 0,
    weights: LossWeights | None = None,
    rank_order: str = "asc",
) -> CandidateSet:
    """sample locations -> generate one candidate each -> group and rank."""
    names = _class_names(checkpoint)
    product_i = find_product_spec(element_specs, names)
    w, h = product_size(element_specs[product_i])
    locations = sample_image_locations(canvas, w, h, grid_n)
    candidates = generate_candidates(element_specs, checkpoint, canvas, locations, seed)
    k = min(k, len(candidates))
    return group_and_rank(
        candidates, checkpoint, k=k, weights=weights, seed=seed, rank_order=rank_order
    )


# ---------------------------------------------------------------------------
# t-SNE diagnostics
# ---------------------------------------------------------------------------


def tsne_embed(features: np.ndarray, seed: int = 0) -> np.ndarray:
    """Seeded 2-D t-SNE of the candidate feature vectors."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2:
        raise ValidationError(f"features must be 2-D, got shape {features.shape}")
    n = features.shape[0]
    if n < 2:
        raise ValidationError(f"t-SNE needs at least 2 points, got {n}")
    perplexity = min(30.0, float(n - 1))
    tsne = TSNE(
        n_components=2,
        perplexity=perplexity,
        random_state=seed,
        init="pca",
        method="exact" if n < 50 else "barnes_hut",
    )
    return tsne.fit_transform(features)


def save_cluster_plot(cset: CandidateSet, path: str | Path, seed: int = 0) -> None:
    """Scatter of the t-SNE embedding colored by cluster id."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    features = np.array([rec.feature for rec in cset.records])
    coords = tsne_embed(features, seed=seed)
    labels = [rec.cluster for rec in cset.records]
    fig, ax = plt.subplots(figsize=(6, 5))
    scatter = ax.scatter(coords[:, 0], coords[:, 1], c=labels, cmap="tab10", s=40)
    for cluster in cset.clusters:
        x, y = coords[cluster.recommended]
        ax.annotate("*", (x, y), fontsize=14, ha="center", va="center")
    ax.set_title(f"{len(cset.records)} candidates, k={cset.k}")
    fig.colorbar(scatter, ax=ax, label="cluster")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


# ---------------------------------------------------------------------------
# retargeting
# ---------------------------------------------------------------------------


def transform_aspect(r_src: float, source: Canvas, target: Canvas) -> float:
    """Aspect attribute under a canvas change, preserving physical shape.

    Normalized aspect r = h/w scales by (H_src/W_src) * (W_tgt/H_tgt) so
    that (h * H) / (w * W) in pixels stays constant.
    """
    if r_src <= 0:
        return 0.0
    # (H_src / W_src) * (W_tgt / H_tgt) with ratio() = W / H
    return r_src * target.ratio() / source.ratio()


def retarget_layout(
    source: Layout,
    target_canvas: Canvas,
    adjust_checkpoint: ModelCheckpoint,
    seed: int,
) -> Layout:
    """Regenerate a layout for a new canvas, keeping content and reading order.

    Aspect attributes are transformed so ratio-fixed elements keep their
    physical shape; distance attributes come from the source geometry so the
    order-conditioned model reproduces the source reading order.  Nothing is
    frozen: the model replaces every element, product image included.
    """
    problems = validate_layout(source)
    if problems:
        raise ValidationError(f"source layout invalid: {problems[0].message}")
    if adjust_checkpoint.kind != "adjustment":
        raise ValidationError(
            f"retargeting needs an adjustment checkpoint, got kind "
            f"{adjust_checkpoint.kind!r}"
        )
    orders = (
        [el.order for el in source.elements]
        if all(el.order is not None for el in source.elements)
        else assign_reading_orders(source)
    )
    specs = []
    for el, rank in zip(source.elements, orders):
        specs.append(
            ElementSpec(
                class_index=el.class_index(),
                attributes=AttributeVector(
                    area=el.attributes.area,
                    aspect=transform_aspect(
                        el.attributes.aspect, source.canvas, target_canvas
                    ),
                    dist=origin_distance(el.geometry),
                ),
                order=rank,
            )
        )
    generator = adjust_checkpoint.build_generator()
    return generate_layout(generator, specs, target_canvas, seed=seed)


# ---------------------------------------------------------------------------
# attribute-retrieval baseline
# ---------------------------------------------------------------------------

TEMPLATE_SLOTS = 6


def _slot_vector(
    entries: list[tuple[int, float, float]], num_classes: int
) -> np.ndarray:
    """Fixed-length encoding: per slot, class one-hot then (s, r)."""
    if len(entries) > TEMPLATE_SLOTS:
        raise ValidationError(
            f"{len(entries)} elements exceed the {TEMPLATE_SLOTS}-slot template encoding"
        )
    width = num_classes + 2
    vec = np.zeros(TEMPLATE_SLOTS * width)
    ordered = sorted(entries, key=lambda e: (e[0], -e[1]))
    for slot, (cls, s, r) in enumerate(ordered):
        base = slot * width
        vec[base + cls] = 1.0
        vec[base + num_classes] = s
        vec[base + num_classes + 1] = r
    return vec


def query_vector(specs: list[ElementSpec], num_classes: int = 6) -> np.ndarray:
    return _slot_vector(
        [(s.class_index, s.attributes.area, s.attributes.aspect) for s in specs],
        num_classes,
    )


def layout_vector(layout: Layout, num_classes: int = 6) -> np.ndarray:
    return _slot_vector(
        [
            (el.class_index(), el.attributes.area, el.attributes.aspect)
            for el in layout.elements
        ],
        num_classes,
    )


def template_retrieve(
    query_specs: list[ElementSpec], corpus: list[Layout], num_classes: int = 6
) -> Layout:
    """Nearest corpus layout by cosine similarity of attribute vectors."""
    if not corpus:
        raise ValidationError("template corpus is empty")
    q = query_vector(query_specs, num_classes)
    qn = np.linalg.norm(q)
    if qn == 0.0:
        raise ValidationError("query vector is all zeros")
    best_i, best_sim = 0, -np.inf
    for i, layout in enumerate(corpus):
        v = layout_vector(layout, num_classes)
        vn = np.linalg.norm(v)
        sim = 0.0 if vn == 0.0 else float(np.dot(q, v) / (qn * vn))
        if sim > best_sim:
            best_i, best_sim = i, sim
    return corpus[best_i]
