"""Record real service responses as fixtures for the frontend tests.

Runs the HTTP app in-process against small cached checkpoints, performs a
generate and a retarget round trip, and snapshots the JSON documents the
UI consumes. The retarget source is scanned so the fixture shows a case
where the reading order survives the move to a portrait canvas.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parent.parent / "src"))

from fastapi.testclient import TestClient

from layoutforge.data import CorpusConfig, generate_synthetic_corpus, layout_to_dict
from layoutforge.experiments import train_cached, variant_config
from layoutforge.model import save_checkpoint
from layoutforge.service import ServiceSettings, create_app

FIXTURES = Path(__file__).resolve().parent.parent / "frontend" / "tests" / "fixtures"


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--cache", default=".cache/training")
    parser.add_argument("--home", default=".cache/fixture_home")
    parser.add_argument("--steps", type=int, default=200)
    args = parser.parse_args(argv)

    corpus = generate_synthetic_corpus(
        CorpusConfig(size=60, seed=19, aspect_mix={"square": 1.0})
    )
    gen_cfg = variant_config("full", steps=args.steps)
    adj_cfg = variant_config("adjust_ordered", steps=args.steps)
    cache = Path(args.cache)
    gen_ckpt_path = cache / "fixture_gen.pt"
    adj_ckpt_path = cache / "fixture_adj.pt"
    save_checkpoint(train_cached(gen_cfg, corpus, cache, tag="fixture_gen"), gen_ckpt_path)
    save_checkpoint(train_cached(adj_cfg, corpus, cache, tag="fixture_adj"), adj_ckpt_path)

    settings = ServiceSettings(
        home=Path(args.home),
        checkpoints={"square": gen_ckpt_path},
        adjust_checkpoint=adj_ckpt_path,
    )
    FIXTURES.mkdir(parents=True, exist_ok=True)

    with TestClient(create_app(settings)) as client:
        resp = client.post(
            "/api/generate",
            json={
                "elements": [
                    {"class": "product_image", "s": 0.12, "r": 1.0},
                    {"class": "headline", "s": 0.06},
                    {"class": "button", "s": 0.03},
                ],
                "canvas": {"width_px": 320, "height_px": 320, "aspect_class": "square"},
                "k": 3,
                "grid_n": 3,
                "seed": 11,
            },
        )
        job = resp.json()
        assert client.get(f"/api/jobs/{job['id']}").json()["status"] == "done"
        cset = client.get(f"/api/results/{job['id']}/layouts")
        (FIXTURES / "candidate_set.json").write_text(cset.text)
        print(f"candidate_set.json: {len(cset.json()['layouts'])} layouts")

        # find a retarget whose reading order survives end to end; few
        # elements keep the scan short
        found = None
        by_size = sorted(enumerate(corpus), key=lambda p: len(p[1].elements))
        for li, layout in by_size:
            for seed in range(8):
                r = client.post(
                    "/api/retarget",
                    json={
                        "layout": layout_to_dict(layout),
                        "target_canvas": {
                            "width_px": 256,
                            "height_px": 512,
                            "aspect_class": "portrait",
                        },
                        "seed": seed,
                    },
                )
                rj = r.json()
                status = client.get(f"/api/jobs/{rj['id']}").json()
                if status["status"] != "done":
                    continue
                doc = client.get(f"/api/results/{rj['id']}/layouts").json()
                if doc["source_orders"] == doc["derived_orders"]:
                    found = (li, seed, rj["id"], doc)
                    break
            if found:
                break
        if not found:
            print("no order-preserving retarget found; fixtures incomplete", file=sys.stderr)
            return 1
        li, seed, job_id, doc = found
        (FIXTURES / "retarget_result.json").write_text(json.dumps(doc, indent=2) + "\n")
        print(f"retarget_result.json: corpus layout {li}, seed {seed}, "
              f"retention {doc['order_retention']}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
