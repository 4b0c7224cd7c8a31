"""Training objectives: adversarial terms and the hand-crafted geometry terms.

All functions are torch-native and differentiable so the generator can be
trained end to end.  Per-layout terms accept either a single layout ([N, ...]
tensors) or a batch ([B, N, ...]) and reduce over elements, keeping any
leading batch dims.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch

from .core import ValidationError

Tensor = torch.Tensor

PROB_EPS = 1e-7  # clamp for log() of discriminator probabilities
AREA_FLOOR = 1e-6  # denominator floor for the overlap ratio
ALIGN_GAP_MAX = 1.0 - 1e-6  # keeps -log(1 - gap) finite


@dataclass
class LossWeights:
    """Generator objective weights; defaults follow the tuned run."""

    adv: float = 0.6
    area: float = 4.0
    overlap: float = 8.0
    alignment: float = 20.0
    order: float = 20.0


def corner_tensors(geoms: Tensor) -> tuple[Tensor, ...]:
    """(left, top, right, bottom) from [..., 4] center-size boxes."""
    cx, cy, w, h = geoms[..., 0], geoms[..., 1], geoms[..., 2], geoms[..., 3]
    return cx - w / 2, cy - h / 2, cx + w / 2, cy + h / 2


def pairwise_intersection(geoms: Tensor) -> Tensor:
    """[..., N, N] intersection areas between all box pairs."""
    left, top, right, bottom = corner_tensors(geoms)
    ix = torch.clamp(
        torch.minimum(right[..., :, None], right[..., None, :])
        - torch.maximum(left[..., :, None], left[..., None, :]),
        min=0.0,
    )
    iy = torch.clamp(
        torch.minimum(bottom[..., :, None], bottom[..., None, :])
        - torch.maximum(top[..., :, None], top[..., None, :]),
        min=0.0,
    )
    return ix * iy


def overlap_loss(geoms: Tensor) -> Tensor:
    """Sum over ordered pairs (i, j != i) of intersection(i, j) / area(i).

    The denominator is element i's own predicted area, floored at 1e-6, so a
    small element fully covered by a large one is penalized at full strength.
    """
    geoms = torch.as_tensor(geoms)
    n = geoms.shape[-2]
    if n < 2:
        return torch.zeros(geoms.shape[:-2], dtype=geoms.dtype, device=geoms.device)
    inter = pairwise_intersection(geoms)
    own = torch.clamp(geoms[..., 2] * geoms[..., 3], min=AREA_FLOOR)
    ratio = inter / own[..., :, None]
    off_diag = ~torch.eye(n, dtype=torch.bool, device=geoms.device)
    return (ratio * off_diag).sum(dim=(-1, -2))


def alignment_loss(geoms: Tensor) -> Tensor:
    """Nearest-neighbor misalignment over six coordinate channels.

    For each element, take the min over {left, center-x, right} x-gaps and
    {top, center-y, bottom} y-gaps to its closest neighbor in each channel,
    sharpen each gap with -log(1 - gap), take the min across the six
    channels, and sum over elements.  Zero for fewer than two elements.
    """
    geoms = torch.as_tensor(geoms)
    n = geoms.shape[-2]
    if n < 2:
        return torch.zeros(geoms.shape[:-2], dtype=geoms.dtype, device=geoms.device)
    left, top, right, bottom = corner_tensors(geoms)
    channels = torch.stack(
        [left, geoms[..., 0], right, top, geoms[..., 1], bottom], dim=-1
    )  # [..., N, 6]
    diff = torch.abs(channels[..., :, None, :] - channels[..., None, :, :])  # [..., N, N, 6]
    eye = torch.eye(n, dtype=torch.bool, device=geoms.device)
    diff = diff.masked_fill(eye[..., None], float("inf"))
    gaps = diff.amin(dim=-2)  # [..., N, 6] nearest neighbor per channel
    gaps = torch.clamp(gaps, max=ALIGN_GAP_MAX)
    sharp = -torch.log1p(-gaps)
    return sharp.amin(dim=-1).sum(dim=-1)


def margin_area_loss(pred_areas: Tensor, target_areas: Tensor, alpha: float = 0.3) -> Tensor:
    """Relative area error with a tolerance band: sum relu(|s' - s| / s - alpha)."""
    pred = torch.as_tensor(pred_areas)
    target = torch.as_tensor(target_areas)
    if pred.shape != target.shape:
        raise ValidationError(
            f"area shapes differ: {tuple(pred.shape)} vs {tuple(target.shape)}"
        )
    if torch.any(target <= 0):
        raise ValidationError("target areas must be positive")
    rel = torch.abs(pred - target) / target
    return torch.clamp(rel - alpha, min=0.0).sum(dim=-1)


def order_loss(orders: Tensor, distances: Tensor) -> Tensor:
    """Hinge on inverted pairs: sum over o_i < o_j of relu(d_i - d_j)."""
    o = torch.as_tensor(orders)
    d = torch.as_tensor(distances)
    if o.shape != d.shape:
        raise ValidationError(
            f"order/distance shapes differ: {tuple(o.shape)} vs {tuple(d.shape)}"
        )
    n = o.shape[-1]
    expected = torch.arange(n, device=o.device)
    sorted_o = torch.sort(o.long(), dim=-1).values
    if not torch.all(sorted_o == expected):
        raise ValidationError("orders must be a permutation of 0..N-1 per layout")
    before = o[..., :, None] < o[..., None, :]
    hinge = torch.clamp(d[..., :, None] - d[..., None, :], min=0.0)
    return (before.to(d.dtype) * hinge).sum(dim=(-1, -2))


def origin_distances(geoms: Tensor) -> Tensor:
    """sqrt(xL^2 + yT^2) per element, differentiable."""
    left, top, _, _ = corner_tensors(geoms)
    return torch.sqrt(left * left + top * top + 1e-12)


def class_area_totals(class_probs: Tensor, areas: Tensor) -> Tensor:
    """Soft per-class area mass: S_c = sum_i p_{i,c} * area_i, shape [..., M]."""
    probs = torch.as_tensor(class_probs)
    a = torch.as_tensor(areas)
    return (probs * a[..., None]).sum(dim=-2)


def area_reconstruction_loss(pred_totals: Tensor, real_totals: Tensor) -> Tensor:
    """L1 between decoded and actual per-class area totals."""
    pred = torch.as_tensor(pred_totals)
    real = torch.as_tensor(real_totals)
    if pred.shape != real.shape:
        raise ValidationError(
            f"class-total shapes differ: {tuple(pred.shape)} vs {tuple(real.shape)}"
        )
    return torch.abs(pred - real).sum(dim=-1)


def generator_adversarial_loss(p_global: Tensor, p_local: Tensor | None) -> Tensor:
    """-log D_g(fake) - log D_l(fake); local term dropped when branch absent."""
    pg = torch.clamp(torch.as_tensor(p_global), PROB_EPS, 1.0 - PROB_EPS)
    loss = -torch.log(pg)
    if p_local is not None:
        pl = torch.clamp(torch.as_tensor(p_local), PROB_EPS, 1.0 - PROB_EPS)
        loss = loss - torch.log(pl)
    return loss


def discriminator_loss(
    d_real_global: Tensor,
    d_fake_global: Tensor,
    d_real_local: Tensor | None,
    d_fake_local: Tensor | None,
    area_pred: Tensor | None = None,
    area_real: Tensor | None = None,
    w_r: float = 0.5,
) -> Tensor:
    """Four-term real/fake BCE plus weighted area reconstruction.

    -log D(real) - log(1 - D(fake)) for the global and (if present) local
    branches, plus w_r * L1(area_pred, area_real) decoded from the real
    global branch.
    """
    def _clamp(p):
        return torch.clamp(torch.as_tensor(p), PROB_EPS, 1.0 - PROB_EPS)

    loss = -torch.log(_clamp(d_real_global)) - torch.log(1.0 - _clamp(d_fake_global))
    if (d_real_local is None) != (d_fake_local is None):
        raise ValidationError("local branch outputs must be both present or both absent")
    if d_real_local is not None:
        loss = loss - torch.log(_clamp(d_real_local)) - torch.log(1.0 - _clamp(d_fake_local))
    if (area_pred is None) != (area_real is None):
        raise ValidationError("area_pred and area_real must be both present or both absent")
    if area_pred is not None:
        loss = loss + w_r * area_reconstruction_loss(area_pred, area_real)
    return loss


@dataclass
class GeneratorLossReport:
    adversarial: float
    area: float
    overlap: float
    alignment: float
    order: float
    total: float

    def as_dict(self) -> dict[str, float]:
        return {
            "adversarial": self.adversarial,
            "area": self.area,
            "overlap": self.overlap,
            "alignment": self.alignment,
            "order": self.order,
            "total": self.total,
        }


def generator_total_loss(
    adversarial: Tensor,
    area: Tensor,
    overlap: Tensor,
    alignment: Tensor,
    order: Tensor | None = None,
    weights: LossWeights | None = None,
) -> Tensor:
    w = weights or LossWeights()
    total = (
        w.adv * adversarial + w.area * area + w.overlap * overlap + w.alignment * alignment
    )
    if order is not None:
        total = total + w.order * order
    return total
