"""Differentiable wireframe rasterization and human-facing SVG/PNG export.

Boxes are drawn as 1-px-soft outlines: each of the four edges contributes the
product of an along-edge coverage ramp and a cross-edge hat kernel, and a
pixel takes the max over edges.  Multi-element images take, per class channel,
the pixel-wise max over elements weighted by class probability, so the whole
raster is differentiable (almost everywhere) with respect to box parameters.

Convention: pixel (u, v) is sampled at integer coordinates and the canvas
spans [0, W] x [0, H]; image tensors are indexed [..., u, v, channel].
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
import torch
from PIL import Image, ImageDraw

from .core import Geometry, Layout, ValidationError, validate_layout

Tensor = torch.Tensor

DEFAULT_PALETTE = {
    "logo": "#1f77b4",
    "product_image": "#2ca02c",
    "headline": "#d62728",
    "button": "#ff7f0e",
    "offer": "#9467bd",
    "disclaimer": "#8c564b",
}
FALLBACK_COLORS = ("#17becf", "#bcbd22", "#e377c2", "#7f7f7f")


@dataclass
class RenderedImage:
    """Wireframe raster: data[u, v, c] in [0, 1], one channel per class."""

    data: Tensor
    width: int
    height: int
    num_classes: int

    def __post_init__(self):
        if tuple(self.data.shape[-3:]) != (self.width, self.height, self.num_classes):
            raise ValidationError(
                f"image shape {tuple(self.data.shape)} does not match "
                f"{self.width}x{self.height}x{self.num_classes}"
            )


@dataclass
class DropoutMask:
    bits: list[int]
    b: float

    def __post_init__(self):
        if not 0.0 <= self.b <= 1.0:
            raise ValidationError(f"keep probability {self.b} outside [0, 1]")
        if any(bit not in (0, 1) for bit in self.bits):
            raise ValidationError("mask bits must be 0 or 1")


def as_geometry_tensor(geoms) -> Tensor:
    """Accept a Geometry, list of Geometry, or [..., 4] tensor/array."""
    if isinstance(geoms, Geometry):
        return torch.tensor([geoms.cx, geoms.cy, geoms.w, geoms.h], dtype=torch.float64)
    if isinstance(geoms, (list, tuple)) and geoms and isinstance(geoms[0], Geometry):
        return torch.tensor(
            [[g.cx, g.cy, g.w, g.h] for g in geoms], dtype=torch.float64
        )
    t = torch.as_tensor(geoms)
    if t.shape[-1] != 4:
        raise ValidationError(f"geometry tensor must have last dim 4, got {tuple(t.shape)}")
    return t


def render_element_wireframe(geom, width: int, height: int) -> Tensor:
    """Rasterize box outlines into [..., W, H] grayscale images.

    For the top edge, a pixel (u, v) gets coverage
    clamp(min(u - xL*W, xR*W - u) + 1, 0, 1) along the edge span times a hat
    max(0, 1 - |v - yT*H|) across it; the other three edges are analogous and
    the pixel value is the max over edges.
    """
    if width < 1 or height < 1:
        raise ValidationError(f"raster size {width}x{height} must be at least 1x1")
    g = as_geometry_tensor(geom)
    left = (g[..., 0] - g[..., 2] / 2) * width
    right = (g[..., 0] + g[..., 2] / 2) * width
    top = (g[..., 1] - g[..., 3] / 2) * height
    bottom = (g[..., 1] + g[..., 3] / 2) * height

    u = torch.arange(width, dtype=g.dtype, device=g.device)
    v = torch.arange(height, dtype=g.dtype, device=g.device)

    lu, ru = left[..., None], right[..., None]  # [..., 1] vs u [W]
    tv, bv = top[..., None], bottom[..., None]  # [..., 1] vs v [H]

    cov_u = torch.clamp(torch.minimum(u - lu, ru - u) + 1.0, 0.0, 1.0)  # [..., W]
    cov_v = torch.clamp(torch.minimum(v - tv, bv - v) + 1.0, 0.0, 1.0)  # [..., H]
    hat_top = torch.clamp(1.0 - torch.abs(v - tv), min=0.0)  # [..., H]
    hat_bottom = torch.clamp(1.0 - torch.abs(v - bv), min=0.0)
    hat_left = torch.clamp(1.0 - torch.abs(u - lu), min=0.0)  # [..., W]
    hat_right = torch.clamp(1.0 - torch.abs(u - ru), min=0.0)

    horiz = cov_u[..., :, None] * torch.maximum(hat_top, hat_bottom)[..., None, :]
    vert = torch.maximum(hat_left, hat_right)[..., :, None] * cov_v[..., None, :]
    return torch.maximum(horiz, vert)


def compose_layout_image(class_probs, geoms, width: int, height: int) -> Tensor:
    """Blend per-element wireframes into a [..., W, H, M] class-channel image.

    Channel c at pixel (u, v) is max over elements of p[i, c] * F_i(u, v).
    """
    probs = torch.as_tensor(class_probs)
    g = as_geometry_tensor(geoms)
    if probs.shape[:-1] != g.shape[:-1]:
        raise ValidationError(
            f"class_probs shape {tuple(probs.shape)} does not match geometries "
            f"{tuple(g.shape)}"
        )
    frames = render_element_wireframe(g, width, height)  # [..., N, W, H]
    weighted = probs[..., :, None, None, :] * frames.unsqueeze(-1)  # [..., N, W, H, M]
    return weighted.amax(dim=-4)


def sample_dropout_mask(n: int, b: float, seed: int) -> DropoutMask:
    """Independent keep/drop bits, each 1 with probability b."""
    if not 0.0 <= b <= 1.0:
        raise ValidationError(f"keep probability {b} outside [0, 1]")
    rng = np.random.default_rng(seed)
    bits = (rng.random(n) < b).astype(int).tolist()
    return DropoutMask(bits=bits, b=b)


def compose_dropout_image(class_probs, geoms, mask, width: int, height: int) -> Tensor:
    """compose_layout_image with element i's contribution gated by mask bit i."""
    probs = torch.as_tensor(class_probs)
    bits = torch.as_tensor(mask.bits if isinstance(mask, DropoutMask) else mask)
    if bits.shape[-1] != probs.shape[-2]:
        raise ValidationError(
            f"mask length {bits.shape[-1]} does not match {probs.shape[-2]} elements"
        )
    gated = probs * bits.to(probs.dtype)[..., None]
    return compose_layout_image(gated, geoms, width, height)


def render_layout(layout: Layout, width: int, height: int) -> RenderedImage:
    probs = torch.tensor([e.class_probs for e in layout.elements], dtype=torch.float64)
    geoms = as_geometry_tensor(layout.geometries())
    data = compose_layout_image(probs, geoms, width, height)
    return RenderedImage(data=data, width=width, height=height, num_classes=probs.shape[-1])


# ---------------------------------------------------------------------------
# SVG / PNG export
# ---------------------------------------------------------------------------


@dataclass
class StyleConfig:
    palette: dict[str, str] = field(default_factory=dict)
    stroke_width: float = 2.0
    fill_opacity: float = 0.25
    background: str = "#ffffff"
    show_labels: bool = True
    show_order_numerals: bool = False
    font_family: str = "sans-serif"

    def color_for(self, class_name: str, class_index: int) -> str:
        if class_name in self.palette:
            return self.palette[class_name]
        if class_name in DEFAULT_PALETTE:
            return DEFAULT_PALETTE[class_name]
        return FALLBACK_COLORS[class_index % len(FALLBACK_COLORS)]


def export_svg(
    layout: Layout,
    style: StyleConfig | None = None,
    class_names: tuple[str, ...] | None = None,
) -> str:
    """Schematic SVG: one rect per element, class-keyed colors, deterministic."""
    style = style or StyleConfig()
    issues = validate_layout(layout)
    if issues:
        raise ValidationError("cannot export invalid layout: " + "; ".join(map(str, issues)))
    w_px, h_px = layout.canvas.width_px, layout.canvas.height_px
    if class_names is None:
        from .core import DEFAULT_CLASS_NAMES

        class_names = DEFAULT_CLASS_NAMES

    parts = [
        '<svg xmlns="http://www.w3.org/2000/svg" '
        f'width="{w_px}" height="{h_px}" viewBox="0 0 {w_px} {h_px}">',
        f'<rect x="0" y="0" width="{w_px}" height="{h_px}" fill="{style.background}" '
        'stroke="#d0d0d0" stroke-width="1"/>',
    ]
    for i, el in enumerate(layout.elements):
        g = el.geometry
        ci = el.class_index()
        name = class_names[ci] if ci < len(class_names) else f"class_{ci}"
        color = style.color_for(name, ci)
        x = (g.cx - g.w / 2) * w_px
        y = (g.cy - g.h / 2) * h_px
        parts.append(
            f'<rect x="{x:.2f}" y="{y:.2f}" width="{g.w * w_px:.2f}" '
            f'height="{g.h * h_px:.2f}" fill="{color}" fill-opacity="{style.fill_opacity}" '
            f'stroke="{color}" stroke-width="{style.stroke_width}"/>'
        )
        if style.show_labels:
            fs = max(9.0, min(14.0, g.h * h_px * 0.4))
            parts.append(
                f'<text x="{x + 4:.2f}" y="{y + fs + 2:.2f}" font-size="{fs:.1f}" '
                f'font-family="{style.font_family}" fill="{color}">{name}</text>'
            )
        if style.show_order_numerals and el.order is not None:
            parts.append(
                f'<circle cx="{x + g.w * w_px - 12:.2f}" cy="{y + 12:.2f}" r="10" '
                f'fill="{color}"/>'
                f'<text x="{x + g.w * w_px - 12:.2f}" y="{y + 16:.2f}" font-size="12" '
                f'font-family="{style.font_family}" fill="#ffffff" '
                f'text-anchor="middle">{el.order}</text>'
            )
    parts.append("</svg>")
    return "\n".join(parts)


def export_png(
    layout: Layout,
    style: StyleConfig | None = None,
    dpi: int = 96,
    class_names: tuple[str, ...] | None = None,
) -> bytes:
    """Rasterize the schematic boxes to PNG at the requested DPI (96 = 1:1)."""
    style = style or StyleConfig()
    issues = validate_layout(layout)
    if issues:
        raise ValidationError("cannot export invalid layout: " + "; ".join(map(str, issues)))
    scale = dpi / 96.0
    w_px = max(1, round(layout.canvas.width_px * scale))
    h_px = max(1, round(layout.canvas.height_px * scale))
    if class_names is None:
        from .core import DEFAULT_CLASS_NAMES

        class_names = DEFAULT_CLASS_NAMES

    img = Image.new("RGB", (w_px, h_px), style.background)
    draw = ImageDraw.Draw(img, "RGBA")
    for el in layout.elements:
        g = el.geometry
        ci = el.class_index()
        name = class_names[ci] if ci < len(class_names) else f"class_{ci}"
        color = style.color_for(name, ci)
        rgb = tuple(int(color[j : j + 2], 16) for j in (1, 3, 5))
        box = (
            (g.cx - g.w / 2) * w_px,
            (g.cy - g.h / 2) * h_px,
            (g.cx + g.w / 2) * w_px,
            (g.cy + g.h / 2) * h_px,
        )
        draw.rectangle(box, fill=rgb + (int(255 * style.fill_opacity),), outline=rgb, width=2)
    buf = io.BytesIO()
    img.save(buf, format="PNG")
    return buf.getvalue()
