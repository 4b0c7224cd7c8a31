"""Pipeline stage contracts: location grids, candidate sets, ranking,
retargeting, and the attribute-retrieval baseline."""

import math

import numpy as np
import pytest
import torch

from conftest import box, make_layout

from layoutforge.core import (
    AttributeVector,
    Canvas,
    ElementSpec,
    ValidationError,
    assign_reading_orders,
    class_id,
    validate_layout,
)
from layoutforge.data import CorpusConfig, generate_synthetic_corpus
from layoutforge.losses import LossWeights, overlap_loss
from layoutforge.model import DiscriminatorConfig, GeneratorConfig
from layoutforge.pipeline import (
    dumps_candidate_set,
    extract_layout_features,
    generate_candidates,
    group_and_rank,
    layout_cost,
    layout_cost_terms,
    layout_vector,
    loads_candidate_set,
    product_size,
    query_vector,
    retarget_layout,
    run_generation_pipeline,
    sample_image_locations,
    template_retrieve,
    transform_aspect,
    tsne_embed,
)
from layoutforge.training import TrainingConfig, train

SQUARE = Canvas(320, 320, "square")
PORTRAIT = Canvas(256, 512, "portrait")


def tiny_config(**overrides) -> TrainingConfig:
    defaults = dict(
        learning_rate=1e-4,
        batch_size=4,
        steps=1,
        seed=11,
        resolution=16,
        holdout_fraction=0.0,
        generator=GeneratorConfig(embed_dim=16, relation_blocks=1, decoder_hidden=(16,)),
        discriminator=DiscriminatorConfig(
            resolution=16, conv_channels=(8, 16), local_branch=True
        ),
    )
    defaults.update(overrides)
    return TrainingConfig(**defaults)


@pytest.fixture(scope="module")
def square_corpus():
    cfg = CorpusConfig(size=30, seed=5, aspect_mix={"square": 1.0})
    return generate_synthetic_corpus(cfg)


@pytest.fixture(scope="module")
def gen_checkpoint(square_corpus):
    return train(tiny_config(), square_corpus)


@pytest.fixture(scope="module")
def adjust_checkpoint(square_corpus):
    return train(tiny_config(order_conditioning=True, seed=13), square_corpus)


def demo_specs():
    """Product image plus headline and button, the usual ad skeleton."""
    return [
        ElementSpec(class_id("product_image"), AttributeVector(area=0.09, aspect=1.0)),
        ElementSpec(class_id("headline"), AttributeVector(area=0.06)),
        ElementSpec(class_id("button"), AttributeVector(area=0.03)),
    ]


# ---------------------------------------------------------------------------
# location sampling
# ---------------------------------------------------------------------------


def test_grid_three_by_three_enumerated():
    locs = sample_image_locations(SQUARE, 0.2, 0.2, 3)
    xs = [0.1, 0.5, 0.9]
    expected = [(x, y) for y in xs for x in xs]
    assert len(locs) == 9
    for got, want in zip(locs, expected):
        assert got == pytest.approx(want)


def test_full_canvas_image_single_center():
    assert sample_image_locations(SQUARE, 1.0, 1.0, 4) == [(0.5, 0.5)]


def test_oversized_image_rejected():
    with pytest.raises(ValidationError):
        sample_image_locations(SQUARE, 1.2, 0.5, 3)


def test_grid_one_is_center():
    assert sample_image_locations(SQUARE, 0.3, 0.3, 1) == [(0.5, 0.5)]


def test_locations_keep_image_inside():
    for w, h, n in [(0.3, 0.6, 5), (0.9, 0.1, 4), (0.5, 0.5, 2)]:
        for x, y in sample_image_locations(SQUARE, w, h, n):
            assert w / 2 <= x <= 1 - w / 2 + 1e-12
            assert h / 2 <= y <= 1 - h / 2 + 1e-12


def test_product_size_from_attributes():
    w, h = product_size(ElementSpec(1, AttributeVector(area=0.08, aspect=0.5)))
    assert w == pytest.approx(0.4)
    assert h == pytest.approx(0.2)
    with pytest.raises(ValidationError):
        product_size(ElementSpec(1, AttributeVector(area=0.08, aspect=0.0)))


# ---------------------------------------------------------------------------
# candidate generation
# ---------------------------------------------------------------------------


def test_one_layout_per_location(gen_checkpoint):
    locs = sample_image_locations(SQUARE, 0.3, 0.3, 2)
    outs = generate_candidates(demo_specs(), gen_checkpoint, SQUARE, locs, seed=3)
    assert len(outs) == 4
    for layout in outs:
        assert validate_layout(layout) == []


def test_product_frozen_at_location(gen_checkpoint):
    locs = [(0.3, 0.4), (0.6, 0.5)]
    outs = generate_candidates(demo_specs(), gen_checkpoint, SQUARE, locs, seed=3)
    w, h = product_size(demo_specs()[0])
    for layout, (x, y) in zip(outs, locs):
        product = layout.elements[0]
        assert product.frozen is True
        assert product.geometry.cx == pytest.approx(x)
        assert product.geometry.cy == pytest.approx(y)
        assert product.geometry.w == pytest.approx(w)
        assert product.geometry.h == pytest.approx(h)


def test_candidates_deterministic(gen_checkpoint):
    locs = [(0.4, 0.4), (0.6, 0.6)]
    a = generate_candidates(demo_specs(), gen_checkpoint, SQUARE, locs, seed=9)
    b = generate_candidates(demo_specs(), gen_checkpoint, SQUARE, locs, seed=9)
    for la, lb in zip(a, b):
        assert la.geometries() == lb.geometries()


def test_candidates_record_provenance(gen_checkpoint):
    outs = generate_candidates(
        demo_specs(), gen_checkpoint, SQUARE, [(0.5, 0.5)], seed=21
    )
    assert outs[0].extras["provenance"] == {
        "image_location": [0.5, 0.5],
        "seed": 21,
    }


def test_canvas_checkpoint_mismatch_rejected(gen_checkpoint):
    with pytest.raises(ValidationError, match="aspect"):
        generate_candidates(
            demo_specs(), gen_checkpoint, PORTRAIT, [(0.5, 0.5)], seed=0
        )


def test_missing_product_rejected(gen_checkpoint):
    specs = [ElementSpec(class_id("headline"), AttributeVector(area=0.05))]
    with pytest.raises(ValidationError, match="product"):
        generate_candidates(specs, gen_checkpoint, SQUARE, [(0.5, 0.5)], seed=0)


# ---------------------------------------------------------------------------
# features and cost
# ---------------------------------------------------------------------------


def test_feature_length_is_last_conv_width(gen_checkpoint):
    layout = make_layout([box(0.3, 0.3, 0.2, 0.2), box(0.7, 0.7, 0.2, 0.2)])
    feats = extract_layout_features(layout, gen_checkpoint)
    assert feats.shape == (16,)


def test_identical_layouts_identical_features(gen_checkpoint):
    layout = make_layout([box(0.3, 0.3, 0.2, 0.2), box(0.7, 0.7, 0.2, 0.2)])
    a = extract_layout_features(layout, gen_checkpoint)
    b = extract_layout_features(layout, gen_checkpoint)
    assert np.array_equal(a, b)


def test_cost_overlap_component_exact(gen_checkpoint):
    # zero out the other weights so the cost reduces to a hand-checkable term
    layout = make_layout([box(0.4, 0.5, 0.2, 0.2), box(0.5, 0.5, 0.2, 0.2)])
    weights = LossWeights(adv=0.0, overlap=8.0, alignment=0.0)
    cost = layout_cost(layout, gen_checkpoint, weights)
    geoms = torch.tensor(
        [[0.4, 0.5, 0.2, 0.2], [0.5, 0.5, 0.2, 0.2]], dtype=torch.float64
    )
    assert cost == pytest.approx(8.0 * float(overlap_loss(geoms)), rel=1e-12)


def test_cost_finite_and_positive(gen_checkpoint):
    layout = make_layout([box(0.3, 0.3, 0.2, 0.2), box(0.7, 0.7, 0.2, 0.2)])
    cost = layout_cost(layout, gen_checkpoint)
    assert math.isfinite(cost)
    assert cost > 0.0  # -log p terms are strictly positive


def test_cost_is_sum_of_terms(gen_checkpoint):
    layout = make_layout([box(0.4, 0.5, 0.2, 0.2), box(0.5, 0.5, 0.2, 0.2)])
    terms = layout_cost_terms(layout, gen_checkpoint)
    assert set(terms) == {"adversarial", "overlap", "alignment"}
    assert layout_cost(layout, gen_checkpoint) == pytest.approx(
        sum(terms.values()), rel=1e-12
    )
    assert terms["overlap"] > 0.0  # these boxes intersect


# ---------------------------------------------------------------------------
# grouping and ranking
# ---------------------------------------------------------------------------


def spread_layouts(count):
    """Visually distinct layouts so features separate."""
    outs = []
    for i in range(count):
        cx = 0.15 + 0.7 * i / max(count - 1, 1)
        outs.append(
            make_layout([box(cx, 0.3, 0.2, 0.2), box(0.5, 0.75, 0.35, 0.2)])
        )
    return outs


def test_duplicate_layouts_share_cluster(gen_checkpoint):
    a = make_layout([box(0.2, 0.2, 0.2, 0.2), box(0.7, 0.7, 0.2, 0.2)])
    b = make_layout([box(0.2, 0.2, 0.2, 0.2), box(0.7, 0.7, 0.2, 0.2)])
    c = make_layout([box(0.5, 0.5, 0.8, 0.8), box(0.5, 0.2, 0.6, 0.3)])
    cset = group_and_rank([a, b, c], gen_checkpoint, k=2, seed=0)
    assert cset.records[0].cluster == cset.records[1].cluster


def test_k_equals_count_singleton_clusters(gen_checkpoint):
    layouts = spread_layouts(4)
    cset = group_and_rank(layouts, gen_checkpoint, k=4, seed=0)
    assert sorted(len(c.members) for c in cset.clusters) == [1, 1, 1, 1]
    assert sorted(cset.recommended_indices()) == [0, 1, 2, 3]


def test_recommended_is_min_cost(gen_checkpoint):
    cset = group_and_rank(spread_layouts(6), gen_checkpoint, k=2, seed=0)
    costs = [rec.cost for rec in cset.records]
    for cluster in cset.clusters:
        best = min(cluster.members, key=lambda i: (costs[i], i))
        assert cluster.recommended == best
        assert cluster.members[0] == best
        ranked = [costs[i] for i in cluster.members]
        assert ranked == sorted(ranked)


def test_rank_order_desc_flips(gen_checkpoint):
    layouts = spread_layouts(5)
    asc = group_and_rank(layouts, gen_checkpoint, k=1, seed=0)
    desc = group_and_rank(layouts, gen_checkpoint, k=1, seed=0, rank_order="desc")
    assert desc.clusters[0].members == list(reversed(asc.clusters[0].members))
    assert desc.clusters[0].recommended == asc.clusters[0].members[-1]


def test_k_exceeding_count_rejected(gen_checkpoint):
    with pytest.raises(ValidationError, match="k="):
        group_and_rank(spread_layouts(3), gen_checkpoint, k=4)


def test_bad_rank_order_rejected(gen_checkpoint):
    with pytest.raises(ValidationError, match="rank_order"):
        group_and_rank(spread_layouts(3), gen_checkpoint, k=2, rank_order="up")


def test_cluster_ids_in_range(gen_checkpoint):
    cset = group_and_rank(spread_layouts(7), gen_checkpoint, k=3, seed=1)
    for rec in cset.records:
        assert 0 <= rec.cluster < 3
    assert len(cset.clusters) == len({rec.cluster for rec in cset.records})


def test_candidate_set_json_roundtrip(gen_checkpoint):
    cset = group_and_rank(spread_layouts(4), gen_checkpoint, k=2, seed=3)
    text = dumps_candidate_set(cset)
    back = loads_candidate_set(text)
    assert dumps_candidate_set(back) == text
    assert back.k == 2 and back.seed == 3 and back.rank_order == "asc"
    assert [r.cluster for r in back.records] == [r.cluster for r in cset.records]


def test_records_carry_cost_breakdown(gen_checkpoint):
    cset = group_and_rank(spread_layouts(4), gen_checkpoint, k=2, seed=3)
    for rec in cset.records:
        assert rec.cost_terms is not None
        assert rec.cost == pytest.approx(sum(rec.cost_terms.values()), rel=1e-12)
    back = loads_candidate_set(dumps_candidate_set(cset))
    assert [r.cost_terms for r in back.records] == [r.cost_terms for r in cset.records]


def test_full_pipeline_byte_identical(gen_checkpoint):
    a = run_generation_pipeline(
        demo_specs(), gen_checkpoint, SQUARE, grid_n=2, k=2, seed=17
    )
    b = run_generation_pipeline(
        demo_specs(), gen_checkpoint, SQUARE, grid_n=2, k=2, seed=17
    )
    assert dumps_candidate_set(a) == dumps_candidate_set(b)
    assert len(a.records) == 4


# ---------------------------------------------------------------------------
# t-SNE
# ---------------------------------------------------------------------------


def test_tsne_shape_and_determinism():
    rng = np.random.default_rng(0)
    feats = rng.normal(size=(9, 16))
    a = tsne_embed(feats, seed=1)
    b = tsne_embed(feats, seed=1)
    assert a.shape == (9, 2)
    assert np.array_equal(a, b)


def test_tsne_single_point_rejected():
    with pytest.raises(ValidationError):
        tsne_embed(np.zeros((1, 8)), seed=0)


def test_tsne_two_points():
    coords = tsne_embed(np.array([[0.0, 1.0], [1.0, 0.0]]), seed=0)
    assert coords.shape == (2, 2)


# ---------------------------------------------------------------------------
# retargeting
# ---------------------------------------------------------------------------


def test_transform_aspect_identity():
    assert transform_aspect(0.7, SQUARE, SQUARE) == pytest.approx(0.7)


def test_transform_aspect_square_to_portrait():
    assert transform_aspect(0.8, SQUARE, PORTRAIT) == pytest.approx(0.4)


def test_transform_aspect_zero_passthrough():
    assert transform_aspect(0.0, SQUARE, PORTRAIT) == 0.0


def test_transform_aspect_round_trip():
    r = transform_aspect(0.6, SQUARE, PORTRAIT)
    assert transform_aspect(r, PORTRAIT, SQUARE) == pytest.approx(0.6)


@pytest.fixture(scope="module")
def source_layout(square_corpus):
    return square_corpus[0]


def test_retarget_output_canvas(source_layout, adjust_checkpoint):
    out = retarget_layout(source_layout, PORTRAIT, adjust_checkpoint, seed=2)
    assert out.canvas == PORTRAIT
    assert validate_layout(out) == []
    assert len(out) == len(source_layout)


def test_retarget_preserves_physical_aspect(source_layout, adjust_checkpoint):
    out = retarget_layout(source_layout, PORTRAIT, adjust_checkpoint, seed=2)
    src_canvas = source_layout.canvas
    for src, dst in zip(source_layout.elements, out.elements):
        if src.attributes.aspect <= 0:
            continue
        phys_src = (src.geometry.h * src_canvas.height_px) / (
            src.geometry.w * src_canvas.width_px
        )
        phys_dst = (dst.geometry.h * PORTRAIT.height_px) / (
            dst.geometry.w * PORTRAIT.width_px
        )
        assert abs(phys_dst - phys_src) < 1e-6


def test_retarget_keeps_reading_orders(source_layout, adjust_checkpoint):
    out = retarget_layout(source_layout, PORTRAIT, adjust_checkpoint, seed=2)
    src_orders = [el.order for el in source_layout.elements]
    assert [el.order for el in out.elements] == src_orders


def test_retarget_requires_adjustment_checkpoint(source_layout, gen_checkpoint):
    with pytest.raises(ValidationError, match="adjustment"):
        retarget_layout(source_layout, PORTRAIT, gen_checkpoint, seed=0)


def test_retarget_rejects_invalid_source(adjust_checkpoint):
    bad = make_layout([box(0.5, 0.5, 1.4, 0.2), box(0.2, 0.2, 0.1, 0.1)])
    with pytest.raises(ValidationError, match="invalid"):
        retarget_layout(bad, PORTRAIT, adjust_checkpoint, seed=0)


def test_retarget_same_canvas_keeps_aspect_attrs(source_layout, adjust_checkpoint):
    target = Canvas(400, 400, "square")
    out = retarget_layout(source_layout, target, adjust_checkpoint, seed=2)
    for src, dst in zip(source_layout.elements, out.elements):
        assert dst.attributes.aspect == pytest.approx(src.attributes.aspect)


# ---------------------------------------------------------------------------
# template retrieval
# ---------------------------------------------------------------------------


def test_query_vector_slot_layout():
    specs = [
        ElementSpec(2, AttributeVector(area=0.05, aspect=0.0)),
        ElementSpec(0, AttributeVector(area=0.02, aspect=0.5)),
    ]
    vec = query_vector(specs, num_classes=6)
    assert vec.shape == (48,)
    # class 0 sorts first: one-hot at 0, then s, r
    assert vec[0] == 1.0 and vec[6] == pytest.approx(0.02) and vec[7] == pytest.approx(0.5)
    # class 2 in the second slot
    assert vec[8 + 2] == 1.0 and vec[8 + 6] == pytest.approx(0.05)
    assert np.all(vec[16:] == 0.0)


def test_query_vector_sorts_same_class_by_area_desc():
    specs = [
        ElementSpec(1, AttributeVector(area=0.02)),
        ElementSpec(1, AttributeVector(area=0.09)),
    ]
    vec = query_vector(specs, num_classes=6)
    assert vec[6] == pytest.approx(0.09)
    assert vec[8 + 6] == pytest.approx(0.02)


def test_retrieve_exact_match(square_corpus):
    target = square_corpus[3]
    specs = [
        ElementSpec(el.class_index(), el.attributes) for el in target.elements
    ]
    assert template_retrieve(specs, square_corpus) is target


def test_retrieve_tie_breaks_to_lowest_index(square_corpus):
    target = square_corpus[3]
    specs = [
        ElementSpec(el.class_index(), el.attributes) for el in target.elements
    ]
    doubled = [square_corpus[3], square_corpus[3]]
    assert template_retrieve(specs, doubled) is doubled[0]


def test_retrieve_prefers_matching_classes(square_corpus):
    geoms = [box(0.3, 0.3, 0.2, 0.2), box(0.7, 0.7, 0.2, 0.2)]
    match = make_layout(geoms, class_indices=[1, 2])
    other = make_layout(geoms, class_indices=[4, 5])
    specs = [
        ElementSpec(1, AttributeVector(area=0.04)),
        ElementSpec(2, AttributeVector(area=0.04)),
    ]
    assert template_retrieve(specs, [other, match]) is match


def test_retrieve_rejects_empty_corpus():
    with pytest.raises(ValidationError, match="empty"):
        template_retrieve([ElementSpec(0, AttributeVector(area=0.1))], [])


def test_retrieve_rejects_zero_query(square_corpus):
    with pytest.raises(ValidationError, match="zero"):
        template_retrieve([], square_corpus)


def test_retrieve_rejects_overlong_query(square_corpus):
    specs = [ElementSpec(0, AttributeVector(area=0.01))] * 7
    with pytest.raises(ValidationError, match="slot"):
        template_retrieve(specs, square_corpus)
