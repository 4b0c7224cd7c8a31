"""Domain types and geometric primitives shared by every other module.

A layout is an ordered list of class-labeled axis-aligned boxes on a canvas.
Geometry lives in normalized canvas units: centers and sizes in [0, 1], with
corners allowed outside [0, 1] only while boxes are being optimized.  Each
element additionally carries a conditioning triple (expected area, target
aspect ratio, distance-to-origin encoding its reading-order).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

DEFAULT_CLASS_NAMES = (
    "logo",
    "product_image",
    "headline",
    "button",
    "offer",
    "disclaimer",
)

ASPECT_CLASSES = ("portrait", "square", "landscape")

MIN_ELEMENTS = 2
MAX_ELEMENTS = 6

# tolerance for "class probabilities sum to one"
PROB_SUM_TOL = 1e-6
# canvases must be at least this many pixels on a side
MIN_CANVAS_PX = 8
# square means width/height within 5% of 1
SQUARE_TOL = 0.05


class ValidationError(ValueError):
    """Raised when an operation receives structurally invalid input."""


@dataclass(frozen=True)
class ElementClass:
    """One entry of the element-class vocabulary (dense ids starting at 0)."""

    id: int
    name: str


def default_classes() -> tuple[ElementClass, ...]:
    return tuple(ElementClass(i, n) for i, n in enumerate(DEFAULT_CLASS_NAMES))


def class_id(name: str, class_names: tuple[str, ...] = DEFAULT_CLASS_NAMES) -> int:
    try:
        return class_names.index(name)
    except ValueError:
        raise ValidationError(f"unknown element class {name!r}") from None


@dataclass
class Geometry:
    """Axis-aligned box: normalized center coordinates plus width/height."""

    cx: float
    cy: float
    w: float
    h: float

    def area(self) -> float:
        return self.w * self.h


@dataclass
class AttributeVector:
    """Per-element conditioning triple.

    area: expected box area as a fraction of canvas area (> 0).
    aspect: target height/width ratio, 0 meaning unconstrained.
    dist: expected distance to the canvas origin encoding reading-order,
        0 when the element is order-unconditioned.
    """

    area: float
    aspect: float = 0.0
    dist: float = 0.0


@dataclass
class Element:
    class_probs: list[float]
    geometry: Geometry
    attributes: AttributeVector
    frozen: bool = False
    order: int | None = None
    extras: dict = field(default_factory=dict)

    def class_index(self) -> int:
        return max(range(len(self.class_probs)), key=self.class_probs.__getitem__)


def one_hot(index: int, num_classes: int) -> list[float]:
    if not 0 <= index < num_classes:
        raise ValidationError(f"class index {index} outside [0, {num_classes})")
    probs = [0.0] * num_classes
    probs[index] = 1.0
    return probs


@dataclass
class ElementSpec:
    """Generation-time condition for one element: class plus attribute triple,
    optionally a frozen geometry and a reading-order rank."""

    class_index: int
    attributes: AttributeVector
    frozen_geometry: Geometry | None = None
    order: int | None = None


@dataclass
class Canvas:
    width_px: int
    height_px: int
    aspect_class: str

    def ratio(self) -> float:
        return self.width_px / self.height_px


def aspect_class_of(width_px: int, height_px: int) -> str:
    """Classify a pixel canvas as portrait, square or landscape."""
    ratio = width_px / height_px
    if abs(ratio - 1.0) <= SQUARE_TOL:
        return "square"
    return "portrait" if ratio < 1.0 else "landscape"


@dataclass
class Layout:
    elements: list[Element]
    canvas: Canvas
    extras: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.elements)

    def geometries(self) -> list[Geometry]:
        return [e.geometry for e in self.elements]


# ---------------------------------------------------------------------------
# geometric operations
# ---------------------------------------------------------------------------


def derive_corners(g: Geometry) -> tuple[float, float, float, float, float, float]:
    """Return (left, top, cx, cy, right, bottom) for a box."""
    for name in ("cx", "cy", "w", "h"):
        if not math.isfinite(getattr(g, name)):
            raise ValidationError(f"geometry field {name} is not finite")
    left = g.cx - g.w / 2.0
    right = g.cx + g.w / 2.0
    top = g.cy - g.h / 2.0
    bottom = g.cy + g.h / 2.0
    return (left, top, g.cx, g.cy, right, bottom)


def origin_distance(g: Geometry) -> float:
    """Distance from the box's top-left corner to the canvas origin."""
    left, top, *_ = derive_corners(g)
    return math.hypot(left, top)


def assign_reading_orders(layout: Layout) -> list[int]:
    """Rank elements by ascending origin distance; ties keep list order.

    Returns one rank per element, forming a permutation of 0..N-1.
    """
    if len(layout) < 1:
        raise ValidationError("cannot order an empty layout")
    dists = [origin_distance(e.geometry) for e in layout.elements]
    by_dist = sorted(range(len(dists)), key=lambda i: (dists[i], i))
    orders = [0] * len(dists)
    for rank, idx in enumerate(by_dist):
        orders[idx] = rank
    return orders


def apply_aspect_constraint(w_pred: float, h_pred: float, r: float) -> float:
    """Final box height under a target aspect ratio.

    r == 0 leaves the predicted height untouched; r > 0 overrides the
    height with r * w_pred so height/width is exactly r.
    """
    if r < 0:
        raise ValidationError(f"aspect ratio must be >= 0, got {r}")
    if r == 0:
        return h_pred
    return r * w_pred


def intersection_area(g1: Geometry, g2: Geometry) -> float:
    """Area of the rectangle intersection (product of clamped 1-D overlaps)."""
    l1, t1, _, _, r1, b1 = derive_corners(g1)
    l2, t2, _, _, r2, b2 = derive_corners(g2)
    dx = max(0.0, min(r1, r2) - max(l1, l2))
    dy = max(0.0, min(b1, b2) - max(t1, t2))
    return dx * dy


# ---------------------------------------------------------------------------
# validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Violation:
    code: str
    message: str
    element: int | None = None

    def __str__(self) -> str:
        where = "layout" if self.element is None else f"element {self.element}"
        return f"{where}: {self.code}: {self.message}"


def validate_layout(layout: Layout, num_classes: int | None = None) -> list[Violation]:
    """Check every type invariant; returns [] iff the layout is well formed.

    Never raises: each failed invariant becomes one Violation naming the
    offending element (or the layout itself).
    """
    issues: list[Violation] = []
    n = len(layout.elements)
    if not MIN_ELEMENTS <= n <= MAX_ELEMENTS:
        issues.append(
            Violation("element_count", f"{n} elements outside [{MIN_ELEMENTS}, {MAX_ELEMENTS}]")
        )

    canvas = layout.canvas
    if canvas.width_px < MIN_CANVAS_PX or canvas.height_px < MIN_CANVAS_PX:
        issues.append(
            Violation("canvas_size", f"{canvas.width_px}x{canvas.height_px} below {MIN_CANVAS_PX}px")
        )
    if canvas.aspect_class not in ASPECT_CLASSES:
        issues.append(Violation("aspect_class", f"unknown aspect class {canvas.aspect_class!r}"))
    elif canvas.height_px > 0 and canvas.aspect_class != aspect_class_of(
        canvas.width_px, canvas.height_px
    ):
        ratio = canvas.ratio()
        consistent = (
            (canvas.aspect_class == "portrait" and ratio < 1.0)
            or (canvas.aspect_class == "landscape" and ratio > 1.0)
            or (canvas.aspect_class == "square" and abs(ratio - 1.0) <= SQUARE_TOL)
        )
        if not consistent:
            issues.append(
                Violation(
                    "aspect_mismatch",
                    f"class {canvas.aspect_class!r} inconsistent with ratio {ratio:.3f}",
                )
            )

    min_size = 1.0 / max(canvas.width_px, canvas.height_px, 1)
    expected_m = num_classes
    for i, el in enumerate(layout.elements):
        probs = el.class_probs
        if expected_m is None:
            expected_m = len(probs)
        if len(probs) != expected_m:
            issues.append(
                Violation("class_probs_length", f"expected {expected_m} classes, got {len(probs)}", i)
            )
        if any(p < 0 for p in probs):
            issues.append(Violation("class_probs_negative", "negative class probability", i))
        total = sum(probs)
        if abs(total - 1.0) > PROB_SUM_TOL:
            issues.append(
                Violation("class_probs_sum", f"probabilities sum to {total:.6f}, not 1", i)
            )

        g = el.geometry
        if not all(math.isfinite(v) for v in (g.cx, g.cy, g.w, g.h)):
            issues.append(Violation("geometry_nonfinite", "non-finite geometry field", i))
            continue
        if g.w < 0 or g.h < 0:
            issues.append(Violation("geometry_negative_size", f"w={g.w}, h={g.h}", i))
        left, top, _, _, right, bottom = derive_corners(g)
        eps = 1e-9
        if left < -eps or top < -eps or right > 1 + eps or bottom > 1 + eps:
            issues.append(
                Violation(
                    "out_of_canvas",
                    f"corners ({left:.4f},{top:.4f})-({right:.4f},{bottom:.4f}) leave [0,1]",
                    i,
                )
            )
        if g.w < min_size or g.h < min_size:
            issues.append(
                Violation("below_one_pixel", f"w={g.w:.5f}, h={g.h:.5f} under {min_size:.5f}", i)
            )
        if el.frozen and not (
            0 <= g.cx <= 1 and 0 <= g.cy <= 1 and 0 <= g.w <= 1 and 0 <= g.h <= 1
        ):
            issues.append(Violation("frozen_out_of_range", "frozen geometry outside [0,1]", i))

        a = el.attributes
        if a.area <= 0:
            issues.append(Violation("attr_area", f"expected area {a.area} not > 0", i))
        if a.aspect < 0:
            issues.append(Violation("attr_aspect", f"aspect ratio {a.aspect} negative", i))
        if a.dist < 0:
            issues.append(Violation("attr_dist", f"origin distance {a.dist} negative", i))

    orders = [el.order for el in layout.elements]
    if any(o is not None for o in orders):
        if any(o is None for o in orders):
            issues.append(Violation("orders_partial", "some elements lack an order rank"))
        elif sorted(orders) != list(range(n)):
            issues.append(Violation("orders_not_permutation", f"orders {orders} not a permutation"))

    return issues
