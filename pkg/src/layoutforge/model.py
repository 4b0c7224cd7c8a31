"""Conditional generator and two-branch wireframe discriminator.

The generator embeds each element's (class probs, initial geometry,
attribute triple), mixes elements with stacked residual self-attention
blocks, decodes refined boxes clamped into [0, 1], then applies the hard
aspect-ratio override and replaces frozen elements' geometry with their
supplied conditions.  The discriminator runs two independent CNN branches
over the full and the dropout-rendered wireframe image, plus an
area-reconstruction head on the global branch.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import torch
from torch import nn

from .core import ValidationError

Tensor = torch.Tensor

CHECKPOINT_VERSION = 1

# added to the decoder output before clamping; with zero-init biases the
# first boxes start centered at a quarter of the canvas side instead of
# half, which is the size regime real area conditions live in
DECODER_OFFSET = (0.5, 0.5, 0.25, 0.25)

# sizes are clamped to [SIZE_FLOOR, 1] rather than [0, 1]: the area-term
# gradient for w is proportional to h (and vice versa), so exact-zero boxes
# are a dead point no loss can pull out of
SIZE_FLOOR = 0.01


class _GatedUnitClamp(torch.autograd.Function):
    """clamp(z, lo, 1) whose backward lets pinned channels recover.

    Inside the bounds the gradient passes through unchanged.  Outside, only
    the component pulling the value back inside passes; the outward
    component is dropped.  A plain straight-through pass lets adversarial
    pressure push z hundreds of units past the bound, and the way back at
    one learning-rate per step is longer than the whole training run.
    """

    @staticmethod
    def forward(ctx, z: Tensor, lo: Tensor) -> Tensor:
        ctx.save_for_backward(z, lo)
        return torch.maximum(z.clamp(max=1.0), lo)

    @staticmethod
    def backward(ctx, grad: Tensor):
        z, lo = ctx.saved_tensors
        # descent moves z against the gradient sign, so below the floor
        # only negative gradients help, above the ceiling only positive
        block = ((z < lo) & (grad > 0)) | ((z > 1.0) & (grad < 0))
        return grad.masked_fill(block, 0.0), None


@dataclass
class GeneratorConfig:
    num_classes: int = 6
    embed_dim: int = 128
    relation_blocks: int = 2
    decoder_hidden: tuple[int, ...] = (128,)

    def __post_init__(self):
        if self.embed_dim < 8:
            raise ValidationError(f"embed_dim {self.embed_dim} below 8")
        if self.relation_blocks < 1:
            raise ValidationError(f"relation_blocks {self.relation_blocks} below 1")
        if self.num_classes < 1:
            raise ValidationError("num_classes must be >= 1")
        self.decoder_hidden = tuple(self.decoder_hidden)


@dataclass
class DiscriminatorConfig:
    num_classes: int = 6
    resolution: int = 64
    conv_channels: tuple[int, ...] = (32, 64, 128, 256)
    dropout_b: float = 0.5
    local_branch: bool = True

    def __post_init__(self):
        if not 0.0 <= self.dropout_b <= 1.0:
            raise ValidationError(f"dropout_b {self.dropout_b} outside [0, 1]")
        if self.resolution < 2 ** len(self.conv_channels):
            raise ValidationError(
                f"resolution {self.resolution} too small for "
                f"{len(self.conv_channels)} stride-2 layers"
            )
        self.conv_channels = tuple(self.conv_channels)

    @property
    def feature_dim(self) -> int:
        """Flattened size after the stride-2 stack."""
        side = self.resolution // (2 ** len(self.conv_channels))
        return self.conv_channels[-1] * side * side


class RelationBlock(nn.Module):
    """Single-head residual self-attention over the element set.

    Pre-norm: without it the residual stack amplifies activations
    multiplicatively as weights grow during adversarial training.
    """

    def __init__(self, dim: int):
        super().__init__()
        self.norm = nn.LayerNorm(dim)
        self.query = nn.Linear(dim, dim)
        self.key = nn.Linear(dim, dim)
        self.value = nn.Linear(dim, dim)
        self.out = nn.Linear(dim, dim)
        self.scale = 1.0 / math.sqrt(dim)

    def forward(self, x: Tensor) -> Tensor:
        y = self.norm(x)
        q, k, v = self.query(y), self.key(y), self.value(y)
        attn = torch.softmax(q @ k.transpose(-1, -2) * self.scale, dim=-1)
        return x + self.out(attn @ v)


class LayoutGenerator(nn.Module):
    def __init__(self, config: GeneratorConfig):
        super().__init__()
        self.config = config
        in_dim = config.num_classes + 4 + 3
        d = config.embed_dim
        self.encoder = nn.Sequential(nn.Linear(in_dim, d), nn.ReLU(), nn.Linear(d, d))
        self.blocks = nn.ModuleList(RelationBlock(d) for _ in range(config.relation_blocks))
        self.final_norm = nn.LayerNorm(d)
        widths = [d, *config.decoder_hidden]
        layers: list[nn.Module] = []
        for a, b in zip(widths, widths[1:]):
            layers += [nn.Linear(a, b), nn.ReLU()]
        layers.append(nn.Linear(widths[-1], 4))
        self.decoder = nn.Sequential(*layers)

    def forward(
        self,
        class_probs: Tensor,
        init_geoms: Tensor,
        attributes: Tensor,
        frozen_mask: Tensor | None = None,
        frozen_geoms: Tensor | None = None,
    ) -> Tensor:
        """Refine [..., N, 4] geometries; class probabilities pass through."""
        if class_probs.shape[-1] != self.config.num_classes:
            raise ValidationError(
                f"expected {self.config.num_classes} classes, got {class_probs.shape[-1]}"
            )
        if init_geoms.shape[-1] != 4 or attributes.shape[-1] != 3:
            raise ValidationError("init_geoms must be [...,4] and attributes [...,3]")
        if class_probs.shape[:-1] != init_geoms.shape[:-1]:
            raise ValidationError("class_probs and init_geoms disagree on element count")
        aspects = attributes[..., 1]
        if bool((aspects < 0).any()):
            raise ValidationError("aspect-ratio attribute must be >= 0")

        x = torch.cat([class_probs, init_geoms, attributes], dim=-1)
        h = self.encoder(x)
        for block in self.blocks:
            h = block(h)
        h = self.final_norm(h)
        z = self.decoder(h) + torch.tensor(DECODER_OFFSET, dtype=h.dtype, device=h.device)
        # clamp to the unit box but keep the restoring gradient alive at the
        # bounds; a plain sigmoid saturates there and boxes collapse
        # irrecoverably
        lo = torch.tensor(
            [0.0, 0.0, SIZE_FLOOR, SIZE_FLOOR], dtype=h.dtype, device=h.device
        )
        raw = _GatedUnitClamp.apply(z, lo)

        width = raw[..., 2]
        height = torch.where(aspects > 0, aspects * width, raw[..., 3])
        geoms = torch.stack([raw[..., 0], raw[..., 1], width, height], dim=-1)

        if frozen_mask is not None:
            if frozen_geoms is None:
                raise ValidationError("frozen_mask given without frozen_geoms")
            geoms = torch.where(frozen_mask[..., None], frozen_geoms, geoms)
        return geoms


class BranchCNN(nn.Module):
    """Stride-2 conv stack ending in a realness logit."""

    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        layers: list[nn.Module] = []
        prev = config.num_classes
        for ch in config.conv_channels:
            layers += [nn.Conv2d(prev, ch, kernel_size=4, stride=2, padding=1), nn.LeakyReLU(0.2)]
            prev = ch
        self.convs = nn.Sequential(*layers)
        self.realness = nn.Linear(config.feature_dim, 1)

    def feature_map(self, image: Tensor) -> Tensor:
        return self.convs(image)

    def forward(self, image: Tensor) -> tuple[Tensor, Tensor]:
        fmap = self.feature_map(image)
        logit = self.realness(fmap.flatten(start_dim=1))
        return torch.sigmoid(logit).squeeze(-1), fmap


class WireframeCritic(nn.Module):
    """Global branch + optional dropout-view local branch, independent weights."""

    def __init__(self, config: DiscriminatorConfig):
        super().__init__()
        self.config = config
        self.global_branch = BranchCNN(config)
        self.local_branch = BranchCNN(config) if config.local_branch else None
        self.area_head = nn.Linear(config.conv_channels[-1], config.num_classes)

    def forward(
        self, image_global: Tensor, image_local: Tensor | None = None
    ) -> tuple[Tensor, Tensor | None, Tensor]:
        """(p_global, p_local, per-class area prediction) for [B, M, H, W] input."""
        self._check_image(image_global)
        p_global, fmap = self.global_branch(image_global)
        area_pred = nn.functional.softplus(self.area_head(fmap.mean(dim=(-1, -2))))
        p_local = None
        if image_local is not None:
            if self.local_branch is None:
                raise ValidationError("discriminator built without a local branch")
            self._check_image(image_local)
            p_local, _ = self.local_branch(image_local)
        return p_global, p_local, area_pred

    def global_features(self, image: Tensor) -> Tensor:
        """Spatial mean of the last conv map: the layout feature vector."""
        self._check_image(image)
        return self.global_branch.feature_map(image).mean(dim=(-1, -2))

    def _check_image(self, image: Tensor) -> None:
        res = self.config.resolution
        if tuple(image.shape[-3:]) != (self.config.num_classes, res, res):
            raise ValidationError(
                f"expected image [..., {self.config.num_classes}, {res}, {res}], "
                f"got {tuple(image.shape)}"
            )


def init_parameters(module: nn.Module, seed: int, std: float = 0.02) -> nn.Module:
    """In-place N(0, std^2) weights and zero biases, seed-reproducible.

    Normalization gains stay at 1; sampling them from the Gaussian would
    scale every activation to nearly zero.
    """
    gen = torch.Generator().manual_seed(seed)
    for name, param in module.named_parameters():
        with torch.no_grad():
            if "norm" in name:
                param.fill_(1.0) if name.endswith("weight") else param.zero_()
            elif name.endswith("bias"):
                param.zero_()
            else:
                param.normal_(0.0, std, generator=gen)
    return module


def image_to_channels_first(image: Tensor) -> Tensor:
    """[..., W, H, M] render output -> [..., M, H, W] conv input."""
    return image.transpose(-1, -3)


# ---------------------------------------------------------------------------
# geometry finalization
# ---------------------------------------------------------------------------


def finalize_geometries(geoms: Tensor, aspects: Tensor, min_size: float) -> Tensor:
    """Fit generated boxes into the canvas without breaking aspect overrides.

    Oversized boxes are scaled down jointly in w and h (ratio preserved),
    sizes are floored at the one-pixel minimum (recomputing h = r*w for
    ratio-locked elements), and centers are shifted so corners stay in
    [0, 1].
    """
    cx, cy, w, h = geoms[..., 0], geoms[..., 1], geoms[..., 2], geoms[..., 3]
    locked = aspects > 0

    # joint downscale when either side exceeds the canvas
    scale = torch.clamp(torch.maximum(w, h), min=1.0)
    w, h = w / scale, h / scale

    # one-pixel floor; for locked elements grow w so that h = r*w >= min
    w_floor = torch.where(
        locked,
        torch.maximum(
            torch.full_like(w, min_size),
            min_size / torch.clamp(aspects, min=1e-9),
        ),
        torch.full_like(w, min_size),
    )
    w = torch.maximum(w, torch.clamp(w_floor, max=1.0))
    h = torch.where(locked, aspects * w, torch.clamp(h, min_size, 1.0))
    # a locked tall box may still exceed 1 after the floor; final joint clamp
    over = torch.clamp(torch.maximum(w, h), min=1.0)
    w, h = w / over, h / over

    cx = torch.clamp(cx, w / 2, 1 - w / 2)
    cy = torch.clamp(cy, h / 2, 1 - h / 2)
    return torch.stack([cx, cy, w, h], dim=-1)


# ---------------------------------------------------------------------------
# checkpoints
# ---------------------------------------------------------------------------


@dataclass
class ModelCheckpoint:
    generator_state: dict
    discriminator_state: dict
    generator_config: GeneratorConfig
    discriminator_config: DiscriminatorConfig
    seed: int
    step: int
    kind: str = "generation"  # generation | adjustment
    aspect_class: str = "square"
    class_names: tuple[str, ...] = ()
    optimizer_states: dict = field(default_factory=dict)
    training_config: dict = field(default_factory=dict)
    version: int = CHECKPOINT_VERSION

    def build_generator(self) -> LayoutGenerator:
        gen = LayoutGenerator(self.generator_config)
        gen.load_state_dict(self.generator_state)
        gen.eval()
        return gen

    def build_discriminator(self) -> WireframeCritic:
        disc = WireframeCritic(self.discriminator_config)
        disc.load_state_dict(self.discriminator_state)
        disc.eval()
        return disc


def save_checkpoint(ckpt: ModelCheckpoint, path: str | Path) -> None:
    payload = {
        "version": ckpt.version,
        "kind": ckpt.kind,
        "aspect_class": ckpt.aspect_class,
        "class_names": list(ckpt.class_names),
        "seed": ckpt.seed,
        "step": ckpt.step,
        "generator_config": asdict(ckpt.generator_config),
        "discriminator_config": asdict(ckpt.discriminator_config),
        "generator_state": ckpt.generator_state,
        "discriminator_state": ckpt.discriminator_state,
        "optimizer_states": ckpt.optimizer_states,
        "training_config": ckpt.training_config,
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(payload, path)


def load_checkpoint(path: str | Path) -> ModelCheckpoint:
    path = Path(path)
    if not path.exists():
        raise ValidationError(f"checkpoint {path} does not exist")
    payload = torch.load(path, map_location="cpu", weights_only=True)
    if "version" not in payload:
        raise ValidationError(f"checkpoint {path} lacks a version field")
    gcfg = GeneratorConfig(**payload["generator_config"])
    dcfg_raw = dict(payload["discriminator_config"])
    dcfg_raw["conv_channels"] = tuple(dcfg_raw["conv_channels"])
    dcfg = DiscriminatorConfig(**dcfg_raw)
    return ModelCheckpoint(
        generator_state=payload["generator_state"],
        discriminator_state=payload["discriminator_state"],
        generator_config=gcfg,
        discriminator_config=dcfg,
        seed=payload["seed"],
        step=payload["step"],
        kind=payload["kind"],
        aspect_class=payload["aspect_class"],
        class_names=tuple(payload["class_names"]),
        optimizer_states=payload.get("optimizer_states", {}),
        training_config=payload.get("training_config", {}),
        version=payload["version"],
    )
