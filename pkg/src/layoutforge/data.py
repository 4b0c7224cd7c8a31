"""Synthetic corpus generation, attribute extraction, and layout JSON I/O.

The corpus substitutes for a professional advertisement dataset: each layout
is a vertical stack of class-labeled boxes sharing one exact alignment
coordinate (left edge or x-center), with zero pairwise overlap and order
annotations matching the origin-distance ranking.  All geometry is quantized
to a dyadic grid (multiples of 1/4096) so corner arithmetic is exact in
floating point and overlap/alignment penalties are exactly zero.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import (
    ASPECT_CLASSES,
    DEFAULT_CLASS_NAMES,
    MAX_ELEMENTS,
    MIN_ELEMENTS,
    AttributeVector,
    Canvas,
    Element,
    ElementSpec,
    Geometry,
    Layout,
    ValidationError,
    assign_reading_orders,
    class_id,
    one_hot,
    origin_distance,
)

GRID = 4096  # dyadic quantization denominator
RATIO_FIXED_CLASSES = frozenset({"logo", "product_image"})

DEFAULT_AREA_RANGES = {
    "logo": (0.015, 0.05),
    "product_image": (0.08, 0.2),
    "headline": (0.04, 0.1),
    "button": (0.02, 0.05),
    "offer": (0.03, 0.08),
    "disclaimer": (0.01, 0.03),
}
DEFAULT_ASPECT_RANGES = {
    "logo": (0.35, 0.9),
    "product_image": (0.7, 1.3),
}
DEFAULT_CANVAS_PX = {
    "portrait": (256, 512),
    "square": (320, 320),
    "landscape": (512, 256),
}


class ParseError(ValueError):
    """Raised on schema violations; message carries the offending path."""


@dataclass
class CorpusConfig:
    size: int = 1000
    seed: int = 0
    aspect_mix: dict[str, float] = field(
        default_factory=lambda: {"square": 0.5, "portrait": 0.25, "landscape": 0.25}
    )
    count_weights: dict[int, float] = field(
        default_factory=lambda: {2: 0.1, 3: 0.25, 4: 0.3, 5: 0.25, 6: 0.1}
    )
    alignment_mix: dict[str, float] = field(
        default_factory=lambda: {"left": 0.5, "center": 0.5}
    )
    area_ranges: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_AREA_RANGES)
    )
    aspect_ranges: dict[str, tuple[float, float]] = field(
        default_factory=lambda: dict(DEFAULT_ASPECT_RANGES)
    )
    canvas_px: dict[str, tuple[int, int]] = field(
        default_factory=lambda: dict(DEFAULT_CANVAS_PX)
    )
    margin_units: int = 16  # minimum gap/margin on the 1/4096 grid

    def __post_init__(self):
        if self.size < 1:
            raise ValidationError(f"corpus size {self.size} must be >= 1")
        for name, mix in (("aspect_mix", self.aspect_mix), ("count_weights", self.count_weights), ("alignment_mix", self.alignment_mix)):
            total = sum(mix.values())
            if total <= 0:
                raise ValidationError(f"{name} weights must sum to a positive value")
        for cls in self.aspect_mix:
            if cls not in ASPECT_CLASSES:
                raise ValidationError(f"unknown aspect class {cls!r} in aspect_mix")
        for n in self.count_weights:
            if not 2 <= n <= 6:
                raise ValidationError(f"element count {n} outside [2, 6]")


def corpus_config_from_dict(doc: dict) -> CorpusConfig:
    """CorpusConfig from parsed JSON; string keys and lists become native."""
    doc = dict(doc)
    if "count_weights" in doc:
        doc["count_weights"] = {int(k): v for k, v in doc["count_weights"].items()}
    for key in ("area_ranges", "aspect_ranges", "canvas_px"):
        if key in doc:
            doc[key] = {k: tuple(v) for k, v in doc[key].items()}
    known = {f.name for f in dataclasses.fields(CorpusConfig)}
    unknown = set(doc) - known
    if unknown:
        raise ValidationError(f"unknown corpus config keys: {sorted(unknown)}")
    return CorpusConfig(**doc)


def _weighted_choice(rng: np.random.Generator, mix: dict) -> object:
    keys = list(mix.keys())
    weights = np.array([mix[k] for k in keys], dtype=float)
    return keys[rng.choice(len(keys), p=weights / weights.sum())]


def _stack_units(rng: np.random.Generator, heights: list[int], margin: int) -> list[int] | None:
    """Top coordinates (grid units) for a non-overlapping vertical stack."""
    n = len(heights)
    slack = GRID - sum(heights) - (n + 1) * margin
    if slack < 0:
        return None
    cuts = rng.uniform(0, 1, n + 1)
    gaps = np.floor(cuts / cuts.sum() * slack).astype(int) + margin
    tops, y = [], 0
    for h, gap in zip(heights, gaps):
        y += int(gap)
        tops.append(y)
        y += h
    return tops


def _sample_layout(
    rng: np.random.Generator, config: CorpusConfig, index: int
) -> Layout:
    n = int(_weighted_choice(rng, config.count_weights))
    aspect_class = str(_weighted_choice(rng, config.aspect_mix))
    align_style = str(_weighted_choice(rng, config.alignment_mix))
    w_px, h_px = config.canvas_px[aspect_class]

    # canonical subset: product image always present, stacked in class order
    others = [c for c in DEFAULT_CLASS_NAMES if c != "product_image"]
    picked = sorted(
        ["product_image"] + list(rng.choice(others, size=n - 1, replace=False)),
        key=lambda name: class_id(name),
    )

    for _ in range(200):
        widths, heights = [], []
        for name in picked:
            lo, hi = config.area_ranges[name]
            area = math.exp(rng.uniform(math.log(lo), math.log(hi)))
            if name in config.aspect_ranges:
                r_lo, r_hi = config.aspect_ranges[name]
                ratio = rng.uniform(r_lo, r_hi)
                w = math.sqrt(area / ratio)
            else:
                w = rng.uniform(max(0.25, area), 0.7)
            h = area / w
            # even width units keep centers on the grid; floors keep > 1 px
            w_u = max(32, 2 * round(w * GRID / 2))
            h_u = max(32, round(h * GRID))
            if w_u > GRID - 2 * config.margin_units:
                w_u = GRID - 2 * config.margin_units
            widths.append(w_u)
            heights.append(h_u)

        tops = _stack_units(rng, heights, config.margin_units)
        if tops is None:
            continue

        max_w = max(widths)
        if align_style == "left":
            left_u = int(rng.integers(config.margin_units, GRID - max_w - config.margin_units + 1))
            centers_u = [left_u + w_u // 2 for w_u in widths]
        else:
            c_lo = max_w // 2 + config.margin_units
            center_u = int(rng.integers(c_lo, GRID - c_lo + 1))
            centers_u = [center_u] * len(widths)

        elements = []
        for name, w_u, h_u, top_u, cx_u in zip(picked, widths, heights, tops, centers_u):
            geom = Geometry(
                cx=cx_u / GRID,
                cy=(top_u + h_u / 2) / GRID,
                w=w_u / GRID,
                h=h_u / GRID,
            )
            ci = class_id(name)
            ratio = geom.h / geom.w if name in RATIO_FIXED_CLASSES else 0.0
            attrs = AttributeVector(
                area=geom.area(), aspect=ratio, dist=origin_distance(geom)
            )
            elements.append(
                Element(class_probs=one_hot(ci, len(DEFAULT_CLASS_NAMES)), geometry=geom, attributes=attrs)
            )

        layout = Layout(
            elements=elements,
            canvas=Canvas(width_px=w_px, height_px=h_px, aspect_class=aspect_class),
        )
        for el, order in zip(layout.elements, assign_reading_orders(layout)):
            el.order = order
        return layout

    raise ValidationError(f"could not fit layout {index}: areas too large for a vertical stack")


def generate_synthetic_corpus(config: CorpusConfig) -> list[Layout]:
    rng = np.random.default_rng(config.seed)
    return [_sample_layout(rng, config, i) for i in range(config.size)]


def extract_attributes(
    layout: Layout, ratio_fixed_classes: frozenset[str] | set[str] = RATIO_FIXED_CLASSES
) -> list[AttributeVector]:
    """Design conditions read off an existing layout.

    s is the box area, r the height/width ratio for ratio-fixed classes
    (0 otherwise), d the origin distance.
    """
    out = []
    for i, el in enumerate(layout.elements):
        g = el.geometry
        name = DEFAULT_CLASS_NAMES[el.class_index()] if el.class_index() < len(DEFAULT_CLASS_NAMES) else ""
        if name in ratio_fixed_classes:
            if g.w <= 0:
                raise ValidationError(f"element {i}: zero width on ratio-fixed class {name}")
            ratio = g.h / g.w
        else:
            ratio = 0.0
        out.append(AttributeVector(area=g.area(), aspect=ratio, dist=origin_distance(g)))
    return out


# ---------------------------------------------------------------------------
# JSON serialization
# ---------------------------------------------------------------------------

_ELEMENT_KEYS = {"class", "xC", "yC", "w", "h", "attributes", "order", "frozen"}
_ATTR_KEYS = {"s", "r", "d"}


def layout_to_dict(layout: Layout, class_names: tuple[str, ...] = DEFAULT_CLASS_NAMES) -> dict:
    elements = []
    for el in layout.elements:
        ci = el.class_index()
        entry: dict = {
            "class": class_names[ci] if ci < len(class_names) else ci,
            "xC": el.geometry.cx,
            "yC": el.geometry.cy,
            "w": el.geometry.w,
            "h": el.geometry.h,
            "attributes": {
                "s": el.attributes.area,
                "r": el.attributes.aspect,
                "d": el.attributes.dist,
            },
        }
        if el.order is not None:
            entry["order"] = el.order
        if el.frozen:
            entry["frozen"] = True
        entry.update(el.extras)
        elements.append(entry)
    doc = {
        "canvas": {
            "width_px": layout.canvas.width_px,
            "height_px": layout.canvas.height_px,
            "aspect_class": layout.canvas.aspect_class,
        },
        "elements": elements,
    }
    doc.update(layout.extras)
    return doc


def _require(mapping: dict, key: str, path: str):
    if key not in mapping:
        raise ParseError(f"missing required field {path}.{key}")
    return mapping[key]


def layout_from_dict(doc: dict, class_names: tuple[str, ...] = DEFAULT_CLASS_NAMES) -> Layout:
    if not isinstance(doc, dict):
        raise ParseError("layout document must be a JSON object")
    canvas_doc = _require(doc, "canvas", "$")
    canvas = Canvas(
        width_px=int(_require(canvas_doc, "width_px", "$.canvas")),
        height_px=int(_require(canvas_doc, "height_px", "$.canvas")),
        aspect_class=str(_require(canvas_doc, "aspect_class", "$.canvas")),
    )
    elements_doc = _require(doc, "elements", "$")
    if not isinstance(elements_doc, list):
        raise ParseError("$.elements must be a list")

    elements = []
    for i, entry in enumerate(elements_doc):
        path = f"$.elements[{i}]"
        cls = _require(entry, "class", path)
        if isinstance(cls, str):
            ci = class_id(cls, class_names)
        else:
            ci = int(cls)
            if not 0 <= ci < len(class_names):
                raise ParseError(f"{path}.class index {ci} outside [0, {len(class_names)})")
        attrs_doc = _require(entry, "attributes", path)
        attrs = AttributeVector(
            area=float(_require(attrs_doc, "s", f"{path}.attributes")),
            aspect=float(attrs_doc.get("r", 0.0)),
            dist=float(attrs_doc.get("d", 0.0)),
        )
        geom = Geometry(
            cx=float(_require(entry, "xC", path)),
            cy=float(_require(entry, "yC", path)),
            w=float(_require(entry, "w", path)),
            h=float(_require(entry, "h", path)),
        )
        extras = {k: v for k, v in entry.items() if k not in _ELEMENT_KEYS}
        elements.append(
            Element(
                class_probs=one_hot(ci, len(class_names)),
                geometry=geom,
                attributes=attrs,
                frozen=bool(entry.get("frozen", False)),
                order=int(entry["order"]) if "order" in entry else None,
                extras=extras,
            )
        )
    layout_extras = {k: v for k, v in doc.items() if k not in {"canvas", "elements"}}
    return Layout(elements=elements, canvas=canvas, extras=layout_extras)


def element_specs_from_dicts(
    entries: list[dict], class_names: tuple[str, ...] = DEFAULT_CLASS_NAMES
) -> list[ElementSpec]:
    """Generation conditions from request/CLI JSON entries.

    Each entry needs "class" (name or id) and "s"; "r" and "order" are
    optional.  Count bounds match the layout validator.
    """
    n = len(entries)
    if not MIN_ELEMENTS <= n <= MAX_ELEMENTS:
        raise ValidationError(
            f"need between {MIN_ELEMENTS} and {MAX_ELEMENTS} elements, got {n}"
        )
    specs = []
    for i, entry in enumerate(entries):
        path = f"$.elements[{i}]"
        raw = _require(entry, "class", path)
        ci = int(raw) if isinstance(raw, int) else class_id(str(raw), class_names)
        if not 0 <= ci < len(class_names):
            raise ValidationError(f"class id {ci} outside [0, {len(class_names)})")
        area = float(_require(entry, "s", path))
        specs.append(
            ElementSpec(
                class_index=ci,
                attributes=AttributeVector(
                    area=area, aspect=float(entry.get("r", 0.0))
                ),
                order=int(entry["order"]) if entry.get("order") is not None else None,
            )
        )
    return specs


def dumps_layout(layout: Layout, **kwargs) -> str:
    # json round-trips Python floats exactly (shortest-repr serialization)
    return json.dumps(layout_to_dict(layout), **kwargs)


def loads_layout(text: str) -> Layout:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"invalid JSON: {exc}") from exc
    return layout_from_dict(doc)


def save_layout(layout: Layout, path: str | Path) -> None:
    Path(path).write_text(dumps_layout(layout, indent=2) + "\n", encoding="utf-8")


def load_layout(path: str | Path) -> Layout:
    return loads_layout(Path(path).read_text(encoding="utf-8"))


def save_corpus(layouts: list[Layout], path: str | Path) -> None:
    """One layout JSON document per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for layout in layouts:
            fh.write(dumps_layout(layout) + "\n")


def load_corpus(path: str | Path) -> list[Layout]:
    layouts = []
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                layouts.append(loads_layout(line))
            except ParseError as exc:
                raise ParseError(f"line {lineno}: {exc}") from exc
    return layouts
