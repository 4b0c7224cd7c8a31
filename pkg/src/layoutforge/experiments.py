"""Ablation presets, cached training, and evaluation harnesses.

The study trains four generation variants on the same corpus:

  adv_global    adversarial (global branch) + area conformance only
  adv_dropout   + the element-dropout local branch
  with_overlap  + overlap penalty
  full          + alignment penalty (the shipping configuration)

plus an order-conditioned adjustment model (`adjust_ordered`); `full`
doubles as the order-free adjustment baseline since disabling order
conditioning zeroes both the distance inputs and the order loss.

Training runs are cached on disk keyed by a hash of the exact config and
corpus content, so repeated evaluations pay the cost once.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
from pathlib import Path

from .core import Layout
from .data import CorpusConfig, dumps_layout, generate_synthetic_corpus
from .losses import LossWeights
from .model import (
    DiscriminatorConfig,
    GeneratorConfig,
    ModelCheckpoint,
    load_checkpoint,
    save_checkpoint,
)
from .training import (
    TrainingConfig,
    generate_layout,
    specs_from_layout,
    train,
)

# a 2000-layout single-aspect corpus keeps every variant comparable
ABLATION_CORPUS = CorpusConfig(size=2000, seed=77, aspect_mix={"square": 1.0})

DESK_STEPS = 5000
DESK_LR = 3e-4
DESK_SEED = 101
# adversarial training cycles through its best region instead of settling;
# score a snapshot every 100 steps and keep the winner
DESK_SELECT_EVERY = 100
EVAL_COUNT = 300
EVAL_SEED = 9000

VARIANT_NAMES = ("adv_global", "adv_dropout", "with_overlap", "full")
ADJUST_ORDERED = "adjust_ordered"


def desk_model_configs() -> tuple[GeneratorConfig, DiscriminatorConfig]:
    gen = GeneratorConfig(embed_dim=64, relation_blocks=2, decoder_hidden=(64,))
    disc = DiscriminatorConfig(resolution=32, conv_channels=(16, 32, 64))
    return gen, disc


def variant_config(
    name: str,
    steps: int = DESK_STEPS,
    learning_rate: float = DESK_LR,
    seed: int = DESK_SEED,
) -> TrainingConfig:
    """Training config for one ablation variant (see module docstring)."""
    if name not in (*VARIANT_NAMES, ADJUST_ORDERED):
        raise ValueError(f"unknown variant {name!r}")
    with_overlap = name in ("with_overlap", "full", ADJUST_ORDERED)
    with_alignment = name in ("full", ADJUST_ORDERED)
    gen, disc = desk_model_configs()
    return TrainingConfig(
        learning_rate=learning_rate,
        batch_size=32,
        steps=steps,
        seed=seed,
        resolution=disc.resolution,
        use_local_branch=name != "adv_global",
        order_conditioning=name == ADJUST_ORDERED,
        weights=LossWeights(
            adv=0.6,
            area=4.0,
            overlap=8.0 if with_overlap else 0.0,
            alignment=20.0 if with_alignment else 0.0,
            order=20.0,
        ),
        aspect_class="square",
        holdout_fraction=0.0,
        select_every=DESK_SELECT_EVERY,
        generator=gen,
        discriminator=disc,
    )


# ---------------------------------------------------------------------------
# cached training
# ---------------------------------------------------------------------------


def corpus_fingerprint(corpus: list[Layout]) -> str:
    digest = hashlib.sha256()
    for layout in corpus:
        digest.update(dumps_layout(layout).encode())
        digest.update(b"\n")
    return digest.hexdigest()[:16]


def config_fingerprint(config: TrainingConfig) -> str:
    doc = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(doc.encode()).hexdigest()[:16]


def train_cached(
    config: TrainingConfig,
    corpus: list[Layout],
    cache_dir: str | Path,
    tag: str = "model",
) -> ModelCheckpoint:
    """Train once per (config, corpus) pair; later calls load from disk."""
    cache_dir = Path(cache_dir)
    cache_dir.mkdir(parents=True, exist_ok=True)
    key = f"{tag}-{config_fingerprint(config)}-{corpus_fingerprint(corpus)}"
    path = cache_dir / f"{key}.pt"
    if path.exists():
        return load_checkpoint(path)
    checkpoint = train(config, corpus)
    save_checkpoint(checkpoint, path)
    return checkpoint


def ablation_corpus(config: CorpusConfig | None = None) -> list[Layout]:
    return generate_synthetic_corpus(config or ABLATION_CORPUS)


# ---------------------------------------------------------------------------
# evaluation harness
# ---------------------------------------------------------------------------


def generate_eval_layouts(
    checkpoint: ModelCheckpoint,
    corpus: list[Layout],
    count: int = EVAL_COUNT,
    seed: int = EVAL_SEED,
    with_orders: bool = False,
    zero_dist: bool = False,
) -> list[Layout]:
    """One generated layout per corpus condition (first `count` layouts).

    with_orders carries reading-order conditioning (rank + distance);
    zero_dist keeps the ranks for scoring but hides the distance inputs,
    which is how the order-free adjustment baseline must be driven.
    """
    generator = checkpoint.build_generator()
    outputs = []
    for i, source in enumerate(corpus[:count]):
        specs = specs_from_layout(source, with_orders=with_orders)
        if zero_dist:
            specs = [
                dataclasses.replace(
                    s,
                    attributes=dataclasses.replace(s.attributes, dist=0.0),
                )
                for s in specs
            ]
        outputs.append(
            generate_layout(generator, specs, source.canvas, seed=seed + i)
        )
    return outputs
