import numpy as np
import pytest

from otalign.diag import (
    EmbeddedToken,
    center_distance,
    compactness,
    embed_step,
    load_embedding,
    save_embedding,
    toy_embedding,
    weighted_center,
)
from otalign.dist import KIND_PROBABILITIES, StepDistribution


def _token(points, weights):
    return EmbeddedToken(points=np.asarray(points, float), weights=np.asarray(weights, float))


def test_center_single_point():
    np.testing.assert_array_equal(weighted_center(_token([[2.0, -1.0]], [3.0])), [2.0, -1.0])


def test_center_equal_weights_midpoint():
    token = _token([[0.0, 0.0], [2.0, 4.0]], [1.0, 1.0])
    np.testing.assert_allclose(weighted_center(token), [1.0, 2.0], atol=1e-15)


def test_center_weighted_example():
    token = _token([[0.0, 0.0], [4.0, 0.0]], [1.0, 3.0])
    np.testing.assert_allclose(weighted_center(token), [3.0, 0.0], atol=1e-15)


def test_compactness_single_point_zero():
    assert compactness(_token([[5.0, 5.0]], [2.0])) == 0.0


def test_compactness_translation_invariant():
    rng = np.random.default_rng(0)
    points = rng.standard_normal((6, 2))
    weights = rng.random(6) + 0.1
    base = compactness(_token(points, weights))
    shifted = compactness(_token(points + np.array([13.0, -7.0]), weights))
    assert shifted == pytest.approx(base, rel=1e-12)


def test_compactness_weighted_example():
    # center (3, 0); distances 3 and 1 with weights 1 and 3
    token = _token([[0.0, 0.0], [4.0, 0.0]], [1.0, 3.0])
    assert compactness(token) == pytest.approx(1.5, abs=1e-15)


def test_compactness_weight_scaling_invariant():
    token = _token([[0.0, 1.0], [2.0, 3.0], [4.0, 0.0]], [0.2, 0.5, 0.3])
    scaled = _token([[0.0, 1.0], [2.0, 3.0], [4.0, 0.0]], [2.0, 5.0, 3.0])
    assert compactness(scaled) == pytest.approx(compactness(token), rel=1e-12)
    np.testing.assert_allclose(weighted_center(scaled), weighted_center(token), atol=1e-15)


def test_compactness_zero_iff_coincident():
    token = _token([[1.0, 1.0], [1.0, 1.0], [9.0, 9.0]], [0.5, 0.5, 0.0])
    assert compactness(token) == 0.0


def test_center_distance_identity_and_pythagoras():
    a = _token([[0.0, 0.0]], [1.0])
    b = _token([[3.0, 4.0]], [1.0])
    assert center_distance(a, a) == 0.0
    assert center_distance(a, b) == pytest.approx(5.0, abs=1e-15)


def test_center_distance_symmetry_and_triangle():
    rng = np.random.default_rng(1)
    tokens = [
        _token(rng.standard_normal((4, 2)), rng.random(4) + 0.05) for _ in range(3)
    ]
    a, b, c = tokens
    assert center_distance(a, b) == pytest.approx(center_distance(b, a), rel=1e-15)
    assert center_distance(a, c) <= center_distance(a, b) + center_distance(b, c) + 1e-12


def test_zero_weight_rejected():
    with pytest.raises(ValueError, match="weight"):
        _token([[0.0, 0.0]], [0.0])


def test_embed_step_and_bounds():
    embedding = toy_embedding(10, seed=3)
    step = StepDistribution(indices=[1, 7], values=[0.25, 0.75], kind=KIND_PROBABILITIES)
    token = embed_step(step, embedding)
    np.testing.assert_array_equal(token.points, embedding[[1, 7]])
    bad = StepDistribution(indices=[11], values=[1.0], kind=KIND_PROBABILITIES)
    with pytest.raises(ValueError, match="embedding"):
        embed_step(bad, embedding)


def test_toy_embedding_deterministic():
    np.testing.assert_array_equal(toy_embedding(8, seed=5), toy_embedding(8, seed=5))


def test_embedding_file_round_trip(tmp_path):
    table = toy_embedding(12, seed=9)
    path = tmp_path / "emb.json"
    save_embedding(table, path)
    np.testing.assert_array_equal(load_embedding(path), table)


def test_embedding_file_rejects_sparse_ids(tmp_path):
    path = tmp_path / "emb.json"
    path.write_text('{"0": [0.0, 0.0], "2": [1.0, 1.0]}', encoding="utf-8")
    with pytest.raises(ValueError, match="dense"):
        load_embedding(path)
