"""Train the ablation variants and report the comparison table.

Each variant trains once and is cached under --cache, so re-running the
script only pays for evaluation. Pass --steps/--lr to explore other
budgets (cached separately per setting).
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from layoutforge.experiments import (
    ABLATION_CORPUS,
    ADJUST_ORDERED,
    DESK_LR,
    DESK_STEPS,
    VARIANT_NAMES,
    ablation_corpus,
    generate_eval_layouts,
    train_cached,
    variant_config,
)
from layoutforge.metrics import (
    alignment_index,
    area_difference_stats,
    corpus_symmetry,
    order_retention_curve,
    overlap_index,
)


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cache", default=".cache/training")
    parser.add_argument("--steps", type=int, default=DESK_STEPS)
    parser.add_argument("--lr", type=float, default=DESK_LR)
    parser.add_argument("--eval-count", type=int, default=300)
    parser.add_argument("--out", help="write raw numbers as JSON")
    args = parser.parse_args(argv)

    corpus = ablation_corpus()
    print(f"corpus: {len(corpus)} layouts (seed {ABLATION_CORPUS.seed})")
    sym_corpus = corpus_symmetry(corpus)
    print(f"corpus symmetry: {sym_corpus:.4f}")

    checkpoints = {}
    for name in (*VARIANT_NAMES, ADJUST_ORDERED):
        config = variant_config(name, steps=args.steps, learning_rate=args.lr)
        t0 = time.perf_counter()
        checkpoints[name] = train_cached(config, corpus, args.cache, tag=name)
        print(f"{name}: ready in {time.perf_counter() - t0:.1f}s")

    results: dict[str, dict] = {}
    for name in VARIANT_NAMES:
        layouts = generate_eval_layouts(
            checkpoints[name], corpus, count=args.eval_count
        )
        results[name] = {
            "overlap_index": overlap_index(layouts),
            "alignment_index": alignment_index(layouts),
            "symmetry": corpus_symmetry(layouts),
        }
        if name == "full":
            stats = area_difference_stats(layouts)
            results[name]["area_rel_diff"] = {k: v[0] for k, v in stats.items()}

    # order retention: conditioned model vs the order-free baseline
    ordered = generate_eval_layouts(
        checkpoints[ADJUST_ORDERED], corpus, count=args.eval_count, with_orders=True
    )
    baseline = generate_eval_layouts(
        checkpoints["full"], corpus, count=args.eval_count,
        with_orders=True, zero_dist=True,
    )
    retention = {
        "with_order_loss": order_retention_curve(ordered, [0.8])[0][1],
        "without_order_loss": order_retention_curve(baseline, [0.8])[0][1],
    }

    print(f"\n{'variant':<14}{'overlap':>10}{'alignment':>12}{'symmetry':>10}")
    for name in VARIANT_NAMES:
        r = results[name]
        print(
            f"{name:<14}{r['overlap_index']:>10.4f}"
            f"{r['alignment_index']:>12.4f}{r['symmetry']:>10.4f}"
        )

    ov = {n: results[n]["overlap_index"] for n in VARIANT_NAMES}
    al = {n: results[n]["alignment_index"] for n in VARIANT_NAMES}
    sym_err_plain = abs(results["adv_dropout"]["symmetry"] - sym_corpus)
    sym_err_full = abs(results["full"]["symmetry"] - sym_corpus)
    checks = {
        "dropout reduces overlap": ov["adv_dropout"] < ov["adv_global"],
        "overlap loss halves overlap": ov["with_overlap"] <= 0.5 * ov["adv_dropout"],
        "alignment loss reduces alignment": al["full"] < al["with_overlap"],
        "area diff within margin": all(
            v <= 0.3 for v in results["full"]["area_rel_diff"].values()
        ),
        "order loss lifts retention": retention["with_order_loss"]
        > retention["without_order_loss"],
        "losses pull symmetry toward corpus": sym_err_full < sym_err_plain,
    }
    print()
    for label, ok in checks.items():
        print(f"{'PASS' if ok else 'FAIL'}  {label}")
    print(
        f"\nretention@0.8: with={retention['with_order_loss']:.3f} "
        f"without={retention['without_order_loss']:.3f}"
    )
    print(f"symmetry error: full={sym_err_full:.4f} plain={sym_err_plain:.4f}")
    area = results["full"]["area_rel_diff"]
    print("area rel diff:", {k: round(v, 3) for k, v in area.items()})

    if args.out:
        doc = {
            "corpus_symmetry": sym_corpus,
            "variants": results,
            "retention_at_080": retention,
            "checks": checks,
        }
        Path(args.out).write_text(json.dumps(doc, indent=2))
    return 0 if all(checks.values()) else 1


if __name__ == "__main__":
    raise SystemExit(main())
