"""End-to-end demo: train (or reuse) a small model, then generate,
cluster, rank, and render candidates for a three-element brief.

Writes candidate_set.json, per-candidate SVGs, and a cluster scatter
into --out (default demo_out/).
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from layoutforge.core import AttributeVector, Canvas, ElementSpec, class_id
from layoutforge.experiments import ablation_corpus, train_cached, variant_config
from layoutforge.pipeline import (
    run_generation_pipeline,
    save_candidate_set,
    save_cluster_plot,
)
from layoutforge.render import StyleConfig, export_svg


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo_out")
    parser.add_argument("--cache", default=".cache/training")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--grid-n", type=int, default=4)
    parser.add_argument("--k", type=int, default=4)
    args = parser.parse_args(argv)

    corpus = ablation_corpus()
    checkpoint = train_cached(variant_config("full"), corpus, args.cache, tag="full")

    specs = [
        ElementSpec(class_id("product_image"), AttributeVector(area=0.16, aspect=1.0)),
        ElementSpec(class_id("headline"), AttributeVector(area=0.08, aspect=0.0)),
        ElementSpec(class_id("button"), AttributeVector(area=0.03, aspect=0.0)),
    ]
    canvas = Canvas(320, 320, "square")
    candidates = run_generation_pipeline(
        specs, checkpoint, canvas, grid_n=args.grid_n, k=args.k, seed=args.seed
    )

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_candidate_set(candidates, out / "candidate_set.json")
    style = StyleConfig(show_order_numerals=True)
    for i, record in enumerate(candidates.records):
        export_svg(record.layout, out / f"layout_{i}.svg", style=style)
    save_cluster_plot(candidates, out / "clusters.png")

    print(f"{len(candidates.records)} candidates in {candidates.k} clusters -> {out}")
    for cluster in candidates.clusters:
        best = candidates.records[cluster.recommended]
        print(f"  cluster {cluster.id}: best cost {best.cost:.4f} "
              f"(layout_{cluster.recommended}.svg)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
