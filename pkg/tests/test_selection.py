import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from scenetext.captions import ObjectCaption
from scenetext.errors import DimensionMismatch, EmptyCaption, InvalidK
from scenetext.selection import (
    EmbeddingBundle,
    EmbeddingMatrix,
    Round,
    relevance_scores,
    select_all,
    select_top_k,
    select_two_round,
)
from scenetext.sceneinfo import Mode, build_scene_information
from scenetext.spatial import build_scene_graph
from scenetext.synthetic import default_priors, generate_synthetic_scene

E_OVER_E_PLUS_1 = 0.7310585786300049  # frozen: e / (e + 1)


def unit(rng, n, d):
    m = rng.normal(size=(n, d))
    return m / np.linalg.norm(m, axis=1, keepdims=True)


def info_for(scene):
    caps = [ObjectCaption(o.id, f"a {o.label.replace('_', ' ')}") for o in scene.objects]
    return build_scene_information(scene, build_scene_graph(scene, default_priors()), caps, Mode.COMPLEX)


def brute_weights(q, caps):
    raw = []
    for c in caps:
        per_token = []
        for row in c:
            per_token.append(max(float(np.dot(row, qrow)) for qrow in q))
        raw.append(sum(per_token) / len(per_token))
    z = [math.exp(r - max(raw)) for r in raw]
    return [v / sum(z) for v in z]


def test_singleton_softmax():
    assert relevance_scores([[1.0, 0.0]], [[[1.0, 0.0]]]).tolist() == [1.0]


def test_two_caption_softmax():
    w = relevance_scores([[1.0, 0.0]], [[[1.0, 0.0]], [[0.0, 1.0]]])
    assert w == pytest.approx([E_OVER_E_PLUS_1, 1 - E_OVER_E_PLUS_1], abs=1e-6)


def test_argmax_matches_brute_force():
    rng = np.random.default_rng(0)
    q = unit(rng, 5, 16)
    caps = [unit(rng, int(rng.integers(1, 8)), 16) for _ in range(30)]
    w = relevance_scores(q, caps)
    oracle = brute_weights(q, caps)
    assert int(np.argmax(w)) == int(np.argmax(oracle))
    assert w == pytest.approx(oracle, abs=1e-9)


def test_errors():
    with pytest.raises(DimensionMismatch):
        relevance_scores([[1.0, 0.0]], [[[1.0, 0.0, 0.0]]])
    with pytest.raises(EmptyCaption):
        relevance_scores([[1.0, 0.0]], [])
    with pytest.raises(EmptyCaption):
        EmbeddingMatrix(np.zeros((0, 4)), "caption")


def test_rows_normalized_and_frozen():
    m = EmbeddingMatrix(np.array([[3.0, 4.0]]), "q")
    assert np.linalg.norm(m.rows[0]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        m.rows[0, 0] = 1.0


def test_k_at_least_count_keeps_everything(embedder):
    scene = generate_synthetic_scene(1, 6)
    info = info_for(scene)
    result = select_top_k(info, embedder.embed_tokens("a chair"), k=50, embedder=embedder)
    assert sorted(result.kept_ids) == [o.id for o in scene.objects]
    assert result.prompt_prefix.count("\n[") == 6
    assert len(result.kept_relations) == len(info.relation_sentences)


def test_k1_keeps_no_relations(embedder):
    info = info_for(generate_synthetic_scene(1, 6))
    result = select_top_k(info, embedder.embed_tokens("a chair"), k=1, embedder=embedder)
    assert len(result.kept) == 1 and result.kept_relations == ()


def test_prefix_structure(embedder):
    info = info_for(generate_synthetic_scene(1, 6))
    result = select_top_k(info, embedder.embed_tokens("where is the lamp"), 3, embedder=embedder, question="where is the lamp")
    assert result.prompt_prefix.startswith(info.system_message)
    assert result.prompt_prefix.rstrip().endswith("Question: where is the lamp")
    kept = set(result.kept_ids)
    for s, o in result.kept_relations:
        assert s in kept and o in kept


def test_top20_matches_oracle_on_60_objects(embedder):
    scene = generate_synthetic_scene(8, 60)
    info = info_for(scene)
    q = embedder.embed_tokens("the red sofa beside the window")
    result = select_top_k(info, q, 20, embedder=embedder)
    mats = [embedder.embed_tokens(c.text) for c in info.object_captions]
    w = brute_weights(q, mats)
    ids = [c.object_id for c in info.object_captions]
    oracle = sorted(range(len(ids)), key=lambda i: (-w[i], ids[i]))[:20]
    assert result.kept_ids == [ids[i] for i in oracle]
    assert sum(result.all_weights.values()) == pytest.approx(1.0, abs=1e-6)


def test_two_round_identical_embeddings(embedder):
    info = info_for(generate_synthetic_scene(3, 15))
    q = embedder.embed_tokens("a blue chair near the door")
    one = select_top_k(info, q, 8, embedder=embedder)
    two = select_two_round(info, q, q, 8, 8, embedder=embedder)
    assert two.kept_ids == one.kept_ids
    assert two.round is Round.TWO


def test_two_round_all_kept():
    rng = np.random.default_rng(2)
    info = info_for(generate_synthetic_scene(3, 10))
    embs = {c.object_id: unit(rng, 3, 8) for c in info.object_captions}
    result = select_two_round(info, unit(rng, 2, 8), unit(rng, 2, 8), 10, 10, embs)
    assert len(result.kept) == 10


def test_two_round_subset(embedder):
    info = info_for(generate_synthetic_scene(9, 30))
    q, img = embedder.embed_tokens("what is on the desk"), embedder.embed_tokens("desk lamp chair sofa")
    one = select_top_k(info, q, 20, embedder=embedder)
    two = select_two_round(info, q, img, 20, 8, embedder=embedder)
    assert set(two.kept_ids) <= set(one.kept_ids)
    assert sum(two.all_weights.values()) == pytest.approx(1.0, abs=1e-6)


def test_invalid_k(embedder):
    info = info_for(generate_synthetic_scene(3, 5))
    q = embedder.embed_tokens("x")
    with pytest.raises(InvalidK):
        select_two_round(info, q, q, 5, 6, embedder=embedder)
    with pytest.raises(InvalidK):
        select_top_k(info, q, 0, embedder=embedder)


def test_round_zero_is_unfiltered():
    info = info_for(generate_synthetic_scene(3, 8))
    result = select_all(info, "what?")
    assert result.round is Round.ZERO
    assert len(result.kept) == 8 and len(result.kept_relations) == len(info.relation_sentences)


def test_bundle_round_trip():
    bundle = EmbeddingBundle(2, question=np.eye(2), captions={3: np.eye(2)}, image=np.eye(2), question_text="q")
    again = EmbeddingBundle.from_dict(bundle.to_dict())
    assert again.to_dict() == bundle.to_dict()


# properties ------------------------------------------------------------------


def _random_case(seed, n=12, d=8):
    rng = np.random.default_rng(seed)
    scene = generate_synthetic_scene(seed, n)
    info = info_for(scene)
    embs = {c.object_id: unit(rng, int(rng.integers(1, 5)), d) for c in info.object_captions}
    return info, embs, unit(rng, 3, d), rng


@given(st.integers(0, 10_000))
def test_permutation_invariance(seed):
    _, embs, q, rng = _random_case(seed)
    ids = sorted(embs)
    perm = rng.permutation(len(ids))
    w = dict(zip(ids, relevance_scores(q, [embs[i] for i in ids])))
    shuffled = [ids[i] for i in perm]
    w2 = dict(zip(shuffled, relevance_scores(q, [embs[i] for i in shuffled])))
    assert all(w[i] == pytest.approx(w2[i], abs=1e-12) for i in ids)


@given(st.integers(0, 10_000), st.floats(0.1, 10))
def test_argmax_scale_invariance(seed, c):
    from scenetext.selection import raw_scores, softmax

    _, embs, q, _ = _random_case(seed)
    ids = sorted(embs)
    raw = raw_scores(EmbeddingMatrix(q, "q"), [EmbeddingMatrix(embs[i], "c") for i in ids])
    top = lambda w: sorted(range(len(ids)), key=lambda i: (-w[i], ids[i]))[:5]
    assert top(softmax(raw)) == top(softmax(c * raw))


@given(st.integers(0, 10_000), st.integers(1, 11))
def test_monotone_k(seed, k):
    info, embs, q, _ = _random_case(seed)
    small = select_top_k(info, q, k, embs)
    large = select_top_k(info, q, k + 1, embs)
    assert set(small.kept_ids) <= set(large.kept_ids)
    weights = [w for _, w in small.kept]
    assert weights == sorted(weights, reverse=True)
