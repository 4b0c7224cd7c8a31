"""Evaluation suite: overlap/alignment indices, symmetry, area stats, orders.

The indices are per-layout means of the corresponding training losses
(single shared implementation).  Symmetry uses filled-box occupancy at pixel
centers so a perfectly centered box mirrors onto itself exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .core import (
    DEFAULT_CLASS_NAMES,
    Layout,
    ValidationError,
    assign_reading_orders,
    derive_corners,
)
from .losses import alignment_loss, overlap_loss


def _geom_tensor(layout: Layout) -> torch.Tensor:
    return torch.tensor(
        [[g.cx, g.cy, g.w, g.h] for g in layout.geometries()], dtype=torch.float64
    )


def overlap_index(layouts: list[Layout]) -> float:
    if not layouts:
        raise ValidationError("overlap_index needs a nonempty layout set")
    return float(np.mean([float(overlap_loss(_geom_tensor(l))) for l in layouts]))


def alignment_index(layouts: list[Layout]) -> float:
    if not layouts:
        raise ValidationError("alignment_index needs a nonempty layout set")
    return float(np.mean([float(alignment_loss(_geom_tensor(l))) for l in layouts]))


def occupancy_grid(layout: Layout, width: int, height: int) -> np.ndarray:
    """Boolean [width, height] filled-box occupancy sampled at pixel centers."""
    if width < 1 or height < 1:
        raise ValidationError("occupancy raster must be at least 1x1")
    u = (np.arange(width) + 0.5) / width
    v = (np.arange(height) + 0.5) / height
    grid = np.zeros((width, height), dtype=bool)
    for el in layout.elements:
        left, top, _, _, right, bottom = derive_corners(el.geometry)
        inside_u = (u >= left) & (u <= right)
        inside_v = (v >= top) & (v <= bottom)
        grid |= inside_u[:, None] & inside_v[None, :]
    return grid


def symmetry_score(layout: Layout, width: int = 64, height: int = 64) -> float:
    """Fraction of occupied pixels whose mirror across the vertical centerline
    (column x -> width-1-x) is also occupied; blank renders score 1.0."""
    grid = occupancy_grid(layout, width, height)
    occupied = int(grid.sum())
    if occupied == 0:
        return 1.0
    mirrored = grid[::-1, :]
    return float((grid & mirrored).sum() / occupied)


def corpus_symmetry(layouts: list[Layout], width: int = 64, height: int = 64) -> float:
    if not layouts:
        raise ValidationError("corpus_symmetry needs a nonempty layout set")
    return float(np.mean([symmetry_score(l, width, height) for l in layouts]))


def area_difference_stats(
    layouts: list[Layout],
    conditions: list[list[float]] | None = None,
    class_names: tuple[str, ...] = DEFAULT_CLASS_NAMES,
) -> dict[str, tuple[float, float]]:
    """Per-class (mean, std) of |area - expected| / expected.

    conditions supplies the expected areas per layout; when omitted, the
    expectation is each element's stored area attribute.
    """
    if not layouts:
        raise ValidationError("area_difference_stats needs a nonempty layout set")
    per_class: dict[str, list[float]] = {}
    for li, layout in enumerate(layouts):
        if conditions is not None:
            expected = conditions[li]
            if len(expected) != len(layout.elements):
                raise ValidationError(
                    f"layout {li}: {len(expected)} conditions for {len(layout.elements)} elements"
                )
        else:
            expected = [el.attributes.area for el in layout.elements]
        for el, target in zip(layout.elements, expected):
            if target is None or target <= 0:
                raise ValidationError(f"layout {li}: missing or nonpositive expected area")
            name = class_names[el.class_index()]
            rel = abs(el.geometry.area() - target) / target
            per_class.setdefault(name, []).append(rel)
    return {
        name: (float(np.mean(vals)), float(np.std(vals)))
        for name, vals in sorted(per_class.items())
    }


def order_match_fraction(layout: Layout) -> float:
    """Fraction of elements whose distance rank equals their input order."""
    annotated = [el.order for el in layout.elements]
    if any(o is None for o in annotated):
        raise ValidationError("layout lacks order annotations")
    ranks = assign_reading_orders(layout)
    matches = sum(1 for a, b in zip(annotated, ranks) if a == b)
    return matches / len(ranks)


def order_retention_curve(
    layouts: list[Layout], thresholds: list[float]
) -> list[tuple[float, float]]:
    """Proportion of layouts whose per-layout match fraction reaches each threshold."""
    if not layouts:
        raise ValidationError("order_retention_curve needs a nonempty layout set")
    fractions = [order_match_fraction(l) for l in layouts]
    return [
        (t, float(np.mean([f >= t for f in fractions])))
        for t in thresholds
    ]


@dataclass
class MetricReport:
    overlap: float
    alignment: float
    symmetry: float
    area_diff: dict[str, tuple[float, float]] = field(default_factory=dict)
    order_retention: list[tuple[float, float]] = field(default_factory=list)
    layout_count: int = 0

    def to_json(self) -> str:
        return json.dumps(
            {
                "overlap_index": self.overlap,
                "alignment_index": self.alignment,
                "symmetry_score": self.symmetry,
                "area_diff": {k: {"mean": m, "std": s} for k, (m, s) in self.area_diff.items()},
                "order_retention": [
                    {"threshold": t, "proportion": p} for t, p in self.order_retention
                ],
                "layout_count": self.layout_count,
            },
            indent=2,
        )

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        doc = json.loads(text)
        return cls(
            overlap=doc["overlap_index"],
            alignment=doc["alignment_index"],
            symmetry=doc["symmetry_score"],
            area_diff={k: (v["mean"], v["std"]) for k, v in doc.get("area_diff", {}).items()},
            order_retention=[
                (row["threshold"], row["proportion"]) for row in doc.get("order_retention", [])
            ],
            layout_count=doc.get("layout_count", 0),
        )

    def to_table(self) -> str:
        lines = [
            f"{'metric':<24}{'value':>12}",
            "-" * 36,
            f"{'layouts':<24}{self.layout_count:>12d}",
            f"{'overlap index':<24}{self.overlap:>12.4f}",
            f"{'alignment index':<24}{self.alignment:>12.4f}",
            f"{'symmetry score':<24}{self.symmetry:>12.4f}",
        ]
        for name, (mean, std) in self.area_diff.items():
            lines.append(f"{'area diff ' + name:<24}{mean:>8.3f} +/- {std:.3f}")
        for t, p in self.order_retention:
            lines.append(f"{'order kept @ %.2f' % t:<24}{p:>12.3f}")
        return "\n".join(lines)


def evaluate_layouts(
    layouts: list[Layout],
    conditions: list[list[float]] | None = None,
    thresholds: list[float] | None = None,
    raster: int = 64,
) -> MetricReport:
    """Bundle every metric over one layout set."""
    has_orders = layouts and all(
        el.order is not None for l in layouts for el in l.elements
    )
    curve = (
        order_retention_curve(layouts, thresholds or [0.5, 0.6, 0.7, 0.8, 0.9, 1.0])
        if has_orders
        else []
    )
    has_areas = True
    try:
        stats = area_difference_stats(layouts, conditions)
    except ValidationError:
        has_areas = False
        stats = {}
    return MetricReport(
        overlap=overlap_index(layouts),
        alignment=alignment_index(layouts),
        symmetry=corpus_symmetry(layouts, raster, raster),
        area_diff=stats if has_areas else {},
        order_retention=curve,
        layout_count=len(layouts),
    )


def save_report(report: MetricReport, path: str | Path) -> None:
    Path(path).write_text(report.to_json() + "\n", encoding="utf-8")
