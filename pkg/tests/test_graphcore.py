import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tsgeeg.graphcore import (DegenerateInputError, GraphSeries, TsgModel, correlation_graph, correlation_graphs,
                              cross_distances, embed_similarities, fit_tsg, fit_tsg_graphs, left_pseudo_inverse,
                              oos_embed, oos_embed_graphs, pairwise_distances, similarity_matrix, spectral_embed)
from tsgeeg.signal import WindowSet

import oracles


def mixed_windows(rng, n_w, n_c=5, w=60):
    """Windows with varied correlation structure so the graphs differ substantially."""
    out = []
    for _ in range(n_w):
        m = rng.standard_normal((n_c, n_c))
        out.append(m @ rng.standard_normal((n_c, w)))
    return np.array(out)


# --------------------------------------------------------------------------- correlation graphs


@pytest.mark.parametrize("a, b, expected", [
    ([1, 2, 3], [2, 4, 6], 1.0),
    ([1, 2, 3], [3, 2, 1], -1.0),
    # deviations (-4/3, -1/3, 5/3) and (-2, 0, 2): r = 6 / sqrt(42/9 * 8) = 18 / sqrt(336)
    ([1, 2, 4], [1, 3, 5], 18 / np.sqrt(336)),
])
def test_correlation_examples(a, b, expected):
    g = correlation_graph(np.array([a, b], dtype=float))
    assert g[0, 1] == pytest.approx(expected, abs=1e-12)
    assert g[0, 1] == pytest.approx(oracles.pearson(a, b), abs=1e-12)


def test_flat_channel_has_zero_correlation():
    g = correlation_graph(np.array([[1.0, 2, 3, 4], [5.0, 5, 5, 5], [4.0, 3, 1, 2]]))
    assert g[1, 1] == 1.0
    assert np.all(g[1, [0, 2]] == 0) and np.all(g[[0, 2], 1] == 0)


@given(st.integers(0, 2**31 - 1), st.integers(2, 7), st.integers(2, 50))
def test_correlation_graph_invariants(seed, n_c, w):
    x = np.random.default_rng(seed).standard_normal((3, n_c, w))
    g = correlation_graphs(x)
    assert np.all(np.abs(g - g.transpose(0, 2, 1)) <= 1e-12)
    assert np.all(np.diagonal(g, axis1=1, axis2=2) == 1.0)
    assert np.all(g <= 1.0) and np.all(g >= -1.0)
    np.testing.assert_allclose(g[0], oracles.correlation_graph(x[0]), atol=1e-12)


# --------------------------------------------------------------------------- distances and similarities


def test_distance_examples():
    eye = np.eye(2)
    ones = np.ones((2, 2))
    d = pairwise_distances([eye, eye, ones])
    assert d[0, 1] == 0.0
    assert d[0, 2] == pytest.approx(np.sqrt(2))
    with pytest.raises(ValueError):
        cross_distances(np.eye(3), np.stack([eye, eye]))


@given(st.integers(0, 2**31 - 1), st.integers(3, 8))
def test_distance_triangle_inequality(seed, n):
    g = correlation_graphs(np.random.default_rng(seed).standard_normal((n, 4, 10)))
    d = pairwise_distances(g)
    assert np.allclose(d, d.T) and np.all(np.diag(d) == 0)
    lhs = d[:, None, :]
    rhs = d[:, :, None] + d[None, :, :]
    assert np.all(lhs <= rhs + 1e-12)


def test_similarity_examples():
    d = np.array([[0, 2, 4], [2, 0, 2], [4, 2, 0]], dtype=float)
    b = similarity_matrix(d)
    np.testing.assert_allclose(b, [[1, 0.5, 0], [0.5, 1, 0.5], [0, 0.5, 1]])
    assert np.array_equal(similarity_matrix(np.array([[0, 3.7], [3.7, 0]])), np.eye(2))
    with pytest.raises(DegenerateInputError):
        similarity_matrix(np.zeros((3, 3)))


@given(st.integers(0, 2**31 - 1), st.integers(2, 9))
def test_similarity_invariants(seed, n):
    g = correlation_graphs(np.random.default_rng(seed).standard_normal((n, 3, 12)))
    b = similarity_matrix(pairwise_distances(g))
    assert np.all((b >= 0) & (b <= 1))
    assert np.array_equal(b, b.T)
    assert np.all(np.diag(b) == 1.0)
    off = b[~np.eye(n, dtype=bool)]
    assert np.any(off == 0.0)


# --------------------------------------------------------------------------- spectral embedding


def test_embed_two_by_two():
    z, s = spectral_embed(np.array([[1.0, 0.5], [0.5, 1.0]]), 1)
    assert s[0] == pytest.approx(1.5)
    np.testing.assert_allclose(z[:, 0], [0.8660, 0.8660], atol=1e-4)
    np.testing.assert_allclose(z[:, 0], np.sqrt(1.5 / 2), atol=1e-12)


def test_embed_identity():
    z, s = spectral_embed(np.eye(5), 5)
    np.testing.assert_allclose(s, 1.0)
    np.testing.assert_allclose(z.T @ z, np.eye(5), atol=1e-12)


def test_embed_rank_warning():
    with pytest.warns(RuntimeWarning):
        spectral_embed(np.ones((4, 4)), 3)


@given(st.integers(0, 2**31 - 1), st.integers(3, 12), st.data())
def test_embed_gram_equals_singular_values(seed, n, data):
    d = data.draw(st.integers(1, n - 1))
    g = correlation_graphs(np.random.default_rng(seed).standard_normal((n, 4, 16)))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        z, s = spectral_embed(similarity_matrix(pairwise_distances(g)), d)
    np.testing.assert_allclose(z.T @ z, np.diag(s), atol=1e-8 * max(1.0, s[0]))
    # sign convention
    cols = np.argmax(np.abs(z), axis=0)
    assert np.all(z[cols, np.arange(d)] >= 0)


def test_reconstruction_error_nonincreasing_for_psd(rng):
    x = rng.standard_normal((10, 10))
    b = x @ x.T
    b /= b.max()
    errs = [np.linalg.norm(z @ z.T - b) for z, _ in (spectral_embed(b, d) for d in range(1, 11))]
    assert all(e2 <= e1 + 1e-12 for e1, e2 in zip(errs, errs[1:]))


# --------------------------------------------------------------------------- fit


def test_fit_tsg_three_windows_matches_dense_svd(rng):
    w = mixed_windows(rng, 3)
    model = fit_tsg_graphs(correlation_graphs(w), d=2)
    graphs = [oracles.correlation_graph(x) for x in w]
    b = oracles.similarity(oracles.distance_matrix(graphs))
    z, s = oracles.embedding_svd(b, 2)
    np.testing.assert_allclose(model.embedding, z, rtol=1e-9, atol=1e-12)
    np.testing.assert_allclose(model.singular_values, s, rtol=1e-9)
    assert model.dist_min == 0.0


def test_fit_tsg_separates_correlation_regimes(rng):
    from tsgeeg.experiments.synth import block_correlation, uniform_correlation, _mixing_matrix

    n_c, w = 8, 256
    mixes = [_mixing_matrix(uniform_correlation(n_c, 0.2)), _mixing_matrix(block_correlation(n_c, 0.8))]
    windows = np.array([mixes[k % 2] @ rng.standard_normal((n_c, w)) for k in range(30)])
    model = fit_tsg(WindowSet(windows, w, 0))
    z1 = model.embedding[:, 0]
    a, b = z1[0::2], z1[1::2]
    assert a.max() < b.min() or b.max() < a.min()


def test_fit_tsg_permutation(rng):
    g = correlation_graphs(mixed_windows(rng, 8))
    perm = rng.permutation(8)
    m1 = fit_tsg_graphs(g, d=3)
    m2 = fit_tsg_graphs(g[perm], d=3)
    z1, z2 = m1.embedding[perm], m2.embedding
    signs = np.sign(np.sum(z1 * z2, axis=0))
    np.testing.assert_allclose(z1 * signs, z2, atol=1e-9)


def test_channel_relabeling_invariance(rng):
    w = mixed_windows(rng, 7)
    p = rng.permutation(w.shape[1])
    a = fit_tsg_graphs(correlation_graphs(w), d=2)
    b = fit_tsg_graphs(correlation_graphs(w[:, p]), d=2)
    np.testing.assert_allclose(pairwise_distances(a.training_graphs), pairwise_distances(b.training_graphs),
                               atol=1e-12)
    np.testing.assert_allclose(a.embedding, b.embedding, atol=1e-9)


def test_fit_deterministic(rng):
    g = correlation_graphs(mixed_windows(rng, 10))
    a, b = fit_tsg_graphs(g), fit_tsg_graphs(g.copy())
    for field in ("embedding", "singular_values", "projector", "training_graphs"):
        assert np.array_equal(getattr(a, field), getattr(b, field))
    assert (a.dist_min, a.dist_max) == (b.dist_min, b.dist_max)


def test_fit_requires_three_windows(rng):
    with pytest.raises(ValueError):
        fit_tsg_graphs(correlation_graphs(mixed_windows(rng, 2)))


# --------------------------------------------------------------------------- out of sample


def _model(z, graphs=None, dmin=0.0, dmax=1.0):
    z = np.asarray(z, dtype=np.float64)
    graphs = np.zeros((z.shape[0], 2, 2)) if graphs is None else graphs
    return TsgModel(graphs, dmin, dmax, z, np.diag(z.T @ z), left_pseudo_inverse(z))


def test_oos_hand_example():
    m = _model([[1.0], [1.0]])
    out = embed_similarities(m, np.array([[1.0, 1.0]]))
    assert out[0, 0] == pytest.approx(1.0)
    assert oracles.out_of_sample([[1.0], [1.0]], [1.0, 1.0])[0] == pytest.approx(1.0)


@given(st.integers(0, 2**31 - 1), st.integers(3, 12), st.data())
def test_oos_identity_on_rank_d_psd(seed, n, data):
    d = data.draw(st.integers(1, min(4, n - 1)))
    z0 = np.random.default_rng(seed).uniform(0.1, 1.0, (n, d))
    b = z0 @ z0.T
    z, _ = spectral_embed(b, d)
    m = _model(z)
    np.testing.assert_allclose(embed_similarities(m, b), z, atol=1e-8)


def test_oos_matches_weighted_sum_oracle(rng):
    w = mixed_windows(rng, 9)
    m = fit_tsg_graphs(correlation_graphs(w), d=3)
    new = mixed_windows(rng, 2)
    got = oos_embed_graphs(m, correlation_graphs(new))
    for x, row in zip(new, got):
        g = oracles.correlation_graph(x)
        dist = [oracles.frobenius(g, t) for t in m.training_graphs]
        sims = [1 - (min(max(v, m.dist_min), m.dist_max) - m.dist_min) / (m.dist_max - m.dist_min) for v in dist]
        np.testing.assert_allclose(row, oracles.out_of_sample(m.embedding, sims), rtol=1e-9, atol=1e-12)
        np.testing.assert_allclose(oos_embed(m, x), row, rtol=1e-12, atol=1e-14)


def test_oos_far_window_maps_to_zero():
    eye = np.eye(2)
    neg = np.array([[1.0, -1.0], [-1.0, 1.0]])
    g = np.stack([eye, eye * 0 + np.array([[1, 0.1], [0.1, 1]]), np.array([[1, 0.2], [0.2, 1]])])
    m = fit_tsg_graphs(g, d=1)
    assert np.linalg.norm(neg - g[0]) > m.dist_max
    np.testing.assert_array_equal(oos_embed_graphs(m, neg), np.zeros((1, 1)))


def test_oos_channel_mismatch(rng):
    m = fit_tsg_graphs(correlation_graphs(mixed_windows(rng, 5)), d=2)
    with pytest.raises(ValueError):
        oos_embed(m, rng.standard_normal((3, 50)))


@given(st.integers(0, 2**31 - 1), st.floats(-3, 3), st.floats(-3, 3))
def test_oos_superposition(seed, a, b):
    rng = np.random.default_rng(seed)
    m = _model(rng.uniform(0.1, 1, (6, 2)))
    s1, s2 = rng.random((2, 1, 6))
    lhs = embed_similarities(m, a * s1 + b * s2)
    rhs = a * embed_similarities(m, s1) + b * embed_similarities(m, s2)
    np.testing.assert_allclose(lhs, rhs, atol=1e-9)


def test_graph_series_validates():
    with pytest.raises(ValueError):
        GraphSeries(np.zeros((2, 3, 4)))
    assert len(GraphSeries(np.zeros((2, 3, 3)))) == 2
