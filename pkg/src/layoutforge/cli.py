"""Command line front door: training, data synthesis, generation,
retargeting, evaluation, and cluster diagnostics.

Every artifact a subcommand writes embeds the seeds that produced it, so
any result is re-derivable from the command line alone.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

from .core import Canvas, ValidationError, aspect_class_of
from .data import (
    ParseError,
    corpus_config_from_dict,
    element_specs_from_dicts,
    load_corpus,
    save_corpus,
)
from .render import StyleConfig, export_svg


def _read_json(path: str) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc


def _parse_size(text: str) -> tuple[int, int]:
    try:
        w, h = text.lower().split("x")
        return int(w), int(h)
    except ValueError:
        raise ValidationError(f"size {text!r} is not WIDTHxHEIGHT") from None


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_train(args: argparse.Namespace) -> int:
    from .training import train, training_config_from_dict

    doc = _read_json(args.config)
    corpus_path = doc.pop("corpus", None)
    if corpus_path is None:
        raise ValidationError("training config needs a 'corpus' path")
    corpus = load_corpus(corpus_path)
    config = training_config_from_dict(doc)
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    out_dir = Path(args.out)
    checkpoint = train(config, corpus, out_dir=out_dir)
    print(
        f"trained {checkpoint.kind} model for {checkpoint.step} steps "
        f"(seed {checkpoint.seed}) -> {out_dir / 'checkpoint.pt'}"
    )
    return 0


def cmd_synth_data(args: argparse.Namespace) -> int:
    from .data import CorpusConfig, generate_synthetic_corpus

    config = (
        corpus_config_from_dict(_read_json(args.config))
        if args.config
        else CorpusConfig()
    )
    if args.seed is not None:
        config = dataclasses.replace(config, seed=args.seed)
    layouts = generate_synthetic_corpus(config)
    save_corpus(layouts, args.out)
    print(f"wrote {len(layouts)} layouts (seed {config.seed}) -> {args.out}")
    return 0


def cmd_generate(args: argparse.Namespace) -> int:
    from .model import load_checkpoint
    from .pipeline import run_generation_pipeline, save_candidate_set

    doc = _read_json(args.specs)
    if "canvas" not in doc or "elements" not in doc:
        raise ParseError("specs file needs 'canvas' and 'elements' sections")
    canvas = Canvas(**doc["canvas"])
    specs = element_specs_from_dicts(doc["elements"])
    checkpoint = load_checkpoint(args.checkpoint)
    cset = run_generation_pipeline(
        specs,
        checkpoint,
        canvas,
        grid_n=args.grid_n,
        k=args.k,
        seed=args.seed or 0,
        rank_order=args.rank_order,
    )
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    save_candidate_set(cset, out_dir / "candidate_set.json")
    for i, rec in enumerate(cset.records):
        (out_dir / f"layout_{i}.svg").write_text(
            export_svg(rec.layout), encoding="utf-8"
        )
    recs = cset.recommended_indices()
    print(
        f"wrote {len(cset.records)} candidates in {len(cset.clusters)} clusters "
        f"-> {out_dir}; recommended: {recs}"
    )
    return 0


def cmd_retarget(args: argparse.Namespace) -> int:
    from .core import assign_reading_orders
    from .data import dumps_layout, load_layout
    from .model import load_checkpoint
    from .pipeline import retarget_layout

    source = load_layout(args.layout)
    w, h = _parse_size(args.target)
    target = Canvas(w, h, aspect_class_of(w, h))
    checkpoint = load_checkpoint(args.checkpoint)
    result = retarget_layout(source, target, checkpoint, seed=args.seed or 0)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "retargeted.json").write_text(
        dumps_layout(result, indent=2) + "\n", encoding="utf-8"
    )
    style = StyleConfig(show_order_numerals=True)
    (out_dir / "retargeted.svg").write_text(
        export_svg(result, style), encoding="utf-8"
    )
    src_orders = (
        [el.order for el in source.elements]
        if all(el.order is not None for el in source.elements)
        else assign_reading_orders(source)
    )
    derived = assign_reading_orders(result)
    kept = sum(1 for a, b in zip(src_orders, derived) if a == b)
    print(
        f"retargeted to {target.width_px}x{target.height_px} "
        f"({target.aspect_class}) -> {out_dir}; "
        f"reading order kept for {kept}/{len(derived)} elements"
    )
    return 0


def cmd_evaluate(args: argparse.Namespace) -> int:
    from .metrics import evaluate_layouts, save_report

    corpus = load_corpus(args.corpus)
    if args.checkpoint:
        from .model import load_checkpoint
        from .training import generate_layout, specs_from_layout

        checkpoint = load_checkpoint(args.checkpoint)
        if checkpoint.aspect_class != "any":
            kept = [
                l for l in corpus if l.canvas.aspect_class == checkpoint.aspect_class
            ]
            skipped = len(corpus) - len(kept)
            if skipped:
                print(
                    f"skipping {skipped} layouts not matching checkpoint aspect "
                    f"{checkpoint.aspect_class!r}",
                    file=sys.stderr,
                )
            corpus = kept
        if not corpus:
            raise ValidationError("no corpus layouts match the checkpoint")
        generator = checkpoint.build_generator()
        with_orders = checkpoint.kind == "adjustment"
        seed = args.seed or 0
        layouts = [
            generate_layout(
                generator,
                specs_from_layout(layout, with_orders=with_orders),
                layout.canvas,
                seed=seed + i,
            )
            for i, layout in enumerate(corpus)
        ]
        subject = "generated"
    else:
        layouts = corpus
        subject = "corpus"
    report = evaluate_layouts(layouts)
    print(f"metrics over {report.layout_count} {subject} layouts:")
    print(report.to_table())
    if args.out:
        save_report(report, args.out)
        print(f"report -> {args.out}")
    return 0


def cmd_cluster_plot(args: argparse.Namespace) -> int:
    from .pipeline import load_candidate_set, save_cluster_plot

    cset = load_candidate_set(args.candidates)
    save_cluster_plot(cset, args.out, seed=args.seed or 0)
    print(f"plotted {len(cset.records)} candidates -> {args.out}")
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    import uvicorn

    from .service import ServiceSettings, create_app, layoutforge_home

    doc = _read_json(args.config) if args.config else {}
    settings = ServiceSettings(
        home=doc.get("home", layoutforge_home()),
        checkpoints=doc.get("checkpoints", {}),
        adjust_checkpoint=doc.get("adjust_checkpoint"),
        static_dir=doc.get("static_dir"),
    )
    uvicorn.run(create_app(settings), host=args.host, port=args.port)
    return 0


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="layoutforge",
        description="attribute-conditioned layout generation and retargeting",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model from a config file")
    p.add_argument("--config", required=True, help="training config JSON")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("synth-data", help="generate a synthetic layout corpus")
    p.add_argument("--config", default=None, help="corpus config JSON")
    p.add_argument("--out", required=True, help="output JSONL path")
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=cmd_synth_data)

    p = sub.add_parser("generate", help="generate, cluster and rank candidates")
    p.add_argument("--specs", required=True, help="element specs JSON")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--grid-n", type=int, default=8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--rank-order", choices=("asc", "desc"), default="asc")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("retarget", help="refit a layout to a new canvas")
    p.add_argument("--layout", required=True, help="source layout JSON")
    p.add_argument("--checkpoint", required=True, help="adjustment checkpoint")
    p.add_argument("--target", required=True, help="target size WIDTHxHEIGHT")
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_retarget)

    p = sub.add_parser("evaluate", help="layout quality metrics")
    p.add_argument("--corpus", required=True, help="corpus JSONL")
    p.add_argument("--checkpoint", default=None, help="evaluate a model's outputs")
    p.add_argument("--out", default=None, help="write the report JSON here")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("cluster-plot", help="t-SNE scatter of a candidate set")
    p.add_argument("--candidates", required=True, help="candidate set JSON")
    p.add_argument("--out", required=True, help="output image path")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_cluster_plot)

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--config", default=None, help="service settings JSON")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=8000)
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ValidationError, ParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
