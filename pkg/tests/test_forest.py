import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tsgeeg.forest import (Forest, ForestError, ForestParams, Tree, accuracy, apply, balanced_accuracy, fine_tune,
                           params_from_mapping, predict, predict_posterior, train)

import oracles


def xor_data(rng, n=200):
    centers = np.array([[0, 0], [0, 1], [1, 0], [1, 1]], dtype=float) * 4
    labels = np.array([0, 1, 1, 0])
    k = np.arange(n) % 4
    return centers[k] + rng.normal(0, 0.3, (n, 2)), labels[k]


@pytest.fixture(scope="module")
def xor():
    x, y = xor_data(np.random.default_rng(0))
    return x, y, train(x, y, ForestParams(n_trees=25), seed=3)


def stump(threshold=0.0, counts=((3, 1), (1, 3), (2, 2))):
    return Tree(left=np.array([1, -1, -1]), right=np.array([2, -1, -1]), feature=np.array([0, -1, -1]),
                threshold=np.array([threshold, 0.0, 0.0]), counts=np.array(counts, dtype=float))


def test_xor_training_accuracy(xor):
    x, y, f = xor
    assert accuracy(y, predict(f, x)) == 1.0
    post = predict_posterior(f, x)
    own = np.where(y == 1, post, 1 - post)
    assert own.mean() > 0.9 and own.min() > 0.5


def test_train_deterministic_and_duplicate_invariant(xor):
    x, y, f = xor
    again = train(x, y, ForestParams(n_trees=25), seed=3)
    assert f.structure_hash() == again.structure_hash()
    grid = np.stack(np.meshgrid(np.linspace(-1, 5, 15), np.linspace(-1, 5, 15)), -1).reshape(-1, 2)
    np.testing.assert_array_equal(predict_posterior(f, grid), predict_posterior(again, grid))
    dup = train(np.vstack([x, x]), np.concatenate([y, y]), ForestParams(n_trees=25), seed=3)
    np.testing.assert_array_equal(predict(dup, grid), predict(train(np.vstack([x, x]), np.concatenate([y, y]),
                                                                    ForestParams(n_trees=25), seed=3), grid))


def test_separable_gaussians_heldout():
    accs = []
    for seed in range(45):
        r = np.random.default_rng(seed)
        y = np.repeat([0, 1], 60)
        x = r.standard_normal((120, 3)) + 6.0 * y[:, None] * np.array([1.0, 0, 0])
        tr, te = np.arange(0, 120, 2), np.arange(1, 120, 2)
        f = train(x[tr], y[tr], ForestParams(n_trees=20), seed=seed)
        accs.append(accuracy(y[te], predict(f, x[te])))
    assert np.mean(accs) > 0.98


def test_train_errors():
    with pytest.raises(ForestError):
        train(np.zeros((4, 2)), [1, 1, 1, 1])
    with pytest.raises(ForestError):
        train(np.zeros((1, 2)), [1])
    with pytest.raises(ForestError):
        train(np.zeros((3, 2)), [0, 1])


def test_posterior_tie_predicts_positive():
    t = stump(counts=((0, 0), (0, 0), (0, 0)))
    f = Forest((t,), 1, (0, 1), 0)
    assert predict_posterior(f, [[-1.0], [1.0]]).tolist() == [0.5, 0.5]
    assert predict(f, [[-1.0], [1.0]]).tolist() == [1, 1]


def test_posterior_tree_order_invariant(xor):
    x, _, f = xor
    rev = Forest(f.trees[::-1], f.n_features, f.classes, f.seed, f.params)
    np.testing.assert_allclose(predict_posterior(rev, x), predict_posterior(f, x), atol=1e-15)


def test_shape_mismatch(xor):
    _, _, f = xor
    with pytest.raises(ForestError):
        predict(f, np.zeros((3, 5)))
    with pytest.raises(ForestError):
        fine_tune(f, np.zeros((3, 5)), [0, 1, 0])


def test_leaf_invariants(xor):
    _, _, f = xor
    for t in f.trees:
        internal = t.left >= 0
        assert np.all(t.right[internal] >= 0)
        assert np.all((t.left[~internal] == -1) & (t.right[~internal] == -1))
        p = t.posterior()
        assert np.all((p >= 0) & (p <= 1))


# --------------------------------------------------------------------------- metrics


def test_balanced_accuracy_examples():
    assert balanced_accuracy([0, 1, 1, 0], [0, 1, 1, 0]) == 1.0
    assert balanced_accuracy([0, 1, 1, 0, 1], [1, 1, 1, 1, 1]) == 0.5
    assert balanced_accuracy([0, 0, 0, 1], [0, 0, 1, 1]) == pytest.approx((2 / 3 + 1) / 2)
    with pytest.raises(ValueError):
        balanced_accuracy([1, 1], [1, 0])


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 1)), min_size=2, max_size=40)
       .filter(lambda p: len({a for a, _ in p}) == 2))
def test_balanced_accuracy_relabel_and_oracle(pairs):
    t = np.array([a for a, _ in pairs])
    p = np.array([b for _, b in pairs])
    assert balanced_accuracy(t, p) == pytest.approx(balanced_accuracy(1 - t, 1 - p), abs=1e-15)
    assert balanced_accuracy(t, p) == pytest.approx(oracles.balanced_accuracy(t.tolist(), p.tolist()), abs=1e-15)


# --------------------------------------------------------------------------- fine-tuning


def test_fine_tune_empty_sets_every_posterior_to_half(xor):
    x, _, f = xor
    g = fine_tune(f, np.zeros((0, 2)), [])
    for t in g.trees:
        assert np.all(t.posterior() == 0.5)
    assert np.all(predict_posterior(g, x) == 0.5)
    assert np.all(predict(g, x) == 1)


def test_fine_tune_single_sample_path_oracle():
    # two hand-built trees; path tracing by hand
    t1 = stump(0.0)
    t2 = Tree(left=np.array([1, 3, -1, -1, -1]), right=np.array([2, 4, -1, -1, -1]),
              feature=np.array([1, 0, -1, -1, -1]), threshold=np.array([0.5, 2.0, 0, 0, 0]),
              counts=np.ones((5, 2)))
    f = Forest((t1, t2), 2, (0, 1), 0)
    g = fine_tune(f, [[1.0, 0.0]], [1])
    # tree 1: x0 = 1 > 0 -> leaf 2; tree 2: x1 = 0 <= 0.5 -> node 1, x0 = 1 <= 2 -> leaf 3
    reached = {0: {2}, 1: {3}}
    for ti, t in enumerate(g.trees):
        p = t.posterior()
        for leaf in np.flatnonzero(t.is_leaf):
            assert p[leaf] == (1.0 if leaf in reached[ti] else 0.5)


def test_fine_tune_structure_and_idempotence(xor):
    x, y, f = xor
    r = np.random.default_rng(1)
    xn, yn = x[r.choice(len(x), 30)], y[r.choice(len(x), 30)]
    g = fine_tune(f, xn, yn)
    h = fine_tune(g, xn, yn)
    assert f.structure_hash() == g.structure_hash() == h.structure_hash()
    for a, b in zip(g.trees, h.trees):
        assert np.array_equal(a.counts, b.counts)


def test_fine_tune_pure_leaf_posterior_is_one(xor):
    x, y, f = xor
    g = fine_tune(f, x[y == 1], y[y == 1])
    for t in g.trees:
        p = t.posterior()
        hit = t.is_leaf & (t.counts.sum(axis=1) > 0)
        assert np.all(p[hit] == 1.0)


def test_fine_tune_leaf_counts_match_apply(xor):
    x, y, f = xor
    g = fine_tune(f, x[:40], y[:40])
    leaves = apply(g, x[:40])
    for ti, t in enumerate(g.trees):
        for leaf in np.flatnonzero(t.is_leaf):
            mask = leaves[ti] == leaf
            assert t.counts[leaf, 1] == np.sum(y[:40][mask] == 1)
            assert t.counts[leaf, 0] == np.sum(y[:40][mask] == 0)


@settings(max_examples=15)
@given(st.integers(0, 2**31 - 1))
def test_forest_determinism_property(seed):
    r = np.random.default_rng(seed)
    x = r.standard_normal((30, 4))
    y = (x[:, 0] + 0.3 * r.standard_normal(30) > 0).astype(int)
    if len(set(y)) < 2:
        y[0] = 1 - y[0]
    a = train(x, y, ForestParams(n_trees=5), seed=seed)
    b = train(x, y, ForestParams(n_trees=5), seed=seed)
    assert a.structure_hash() == b.structure_hash()
    for s, t in zip(a.trees, b.trees):
        assert np.array_equal(s.counts, t.counts)


def test_params_from_mapping():
    assert params_from_mapping({"n_trees": 7}).n_trees == 7
    with pytest.raises(KeyError):
        params_from_mapping({"trees": 7})
    assert ForestParams().n_candidates(152) == 12
    assert ForestParams(max_features=None).n_candidates(9) == 9
