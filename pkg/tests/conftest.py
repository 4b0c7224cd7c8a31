"""Shared builders for the test suite."""

from __future__ import annotations

import pytest

from layoutforge.core import (
    AttributeVector,
    Canvas,
    Element,
    Geometry,
    Layout,
    one_hot,
)

NUM_CLASSES = 6


def box(cx: float, cy: float, w: float, h: float) -> Geometry:
    return Geometry(cx=cx, cy=cy, w=w, h=h)


def make_element(
    class_index: int,
    geometry: Geometry,
    area: float | None = None,
    aspect: float = 0.0,
    dist: float = 0.0,
    frozen: bool = False,
    order: int | None = None,
) -> Element:
    attrs = AttributeVector(
        area=geometry.area() if area is None else area, aspect=aspect, dist=dist
    )
    return Element(
        class_probs=one_hot(class_index, NUM_CLASSES),
        geometry=geometry,
        attributes=attrs,
        frozen=frozen,
        order=order,
    )


def make_layout(
    geoms: list[Geometry],
    canvas: Canvas | None = None,
    class_indices: list[int] | None = None,
    **kwargs,
) -> Layout:
    canvas = canvas or Canvas(width_px=200, height_px=200, aspect_class="square")
    classes = class_indices or [i % NUM_CLASSES for i in range(len(geoms))]
    elements = [make_element(ci, g, **kwargs) for ci, g in zip(classes, geoms)]
    return Layout(elements=elements, canvas=canvas)


@pytest.fixture
def square_canvas() -> Canvas:
    return Canvas(width_px=200, height_px=200, aspect_class="square")
