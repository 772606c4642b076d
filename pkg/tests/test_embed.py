import numpy as np
import pytest

from imgaudit.embed import (EmbedConfig, P_FLOOR, embedding_to_csv,
                            joint_affinities, kl_divergence,
                            kl_history_to_csv, pairwise_sq_distances,
                            perplexity_calibrate, tsne_fit, tsne_grad,
                            _row_perplexity)
from imgaudit.errors import (DegenerateGeometryError, DimensionError,
                             NumericError)


def test_pairwise_sq_distances_example():
    X = np.array([[0.0, 0.0], [3.0, 4.0], [0.0, 0.0]])
    d2 = pairwise_sq_distances(X)
    assert d2[0, 1] == pytest.approx(25.0)
    assert d2[0, 2] == pytest.approx(0.0)
    assert np.allclose(np.diag(d2), 0.0)
    assert np.allclose(d2, d2.T)


def test_conditional_affinities_n2():
    # with a single neighbor the conditional probability is exactly 1
    D2 = np.array([[0.0, 4.0], [4.0, 0.0]])
    P = perplexity_calibrate(D2, perplexity=1.0)
    assert P[0, 1] == pytest.approx(1.0)
    assert P[1, 0] == pytest.approx(1.0)
    assert P[0, 0] == 0.0


def test_three_equidistant_points_uniform_affinities():
    # equilateral triangle: each row must split mass evenly
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.5, np.sqrt(3) / 2]])
    P = perplexity_calibrate(pairwise_sq_distances(X), perplexity=2.0)
    off = P[~np.eye(3, dtype=bool)]
    assert np.allclose(off, 0.5, atol=1e-6)


def test_calibration_achieves_target_perplexity():
    g = np.random.default_rng(0)
    D2 = pairwise_sq_distances(g.uniform(0, 1, (40, 5)))
    P = perplexity_calibrate(D2, perplexity=12.0)
    for i in range(40):
        row = P[i][P[i] > 0]
        assert _row_perplexity(row) == pytest.approx(12.0, abs=1e-4)
    assert np.allclose(P.sum(axis=1), 1.0)


def test_perplexity_too_large_rejected():
    D2 = pairwise_sq_distances(np.random.default_rng(1).uniform(0, 1, (5, 2)))
    with pytest.raises(NumericError):
        perplexity_calibrate(D2, perplexity=5.0)


def test_joint_affinities_properties():
    g = np.random.default_rng(2)
    P = joint_affinities(pairwise_sq_distances(g.uniform(0, 1, (20, 4))), 5.0)
    assert np.allclose(P, P.T)
    assert np.allclose(np.diag(P), 0.0)
    assert P.sum() == pytest.approx(1.0, abs=1e-9)
    off = P[~np.eye(20, dtype=bool)]
    assert off.min() >= P_FLOOR


def test_tsne_grad_matches_finite_differences():
    g = np.random.default_rng(3)
    X = g.uniform(0, 1, (8, 3))
    P = joint_affinities(pairwise_sq_distances(X), 3.0)
    Y = g.normal(0, 1, (8, 2))
    grad = tsne_grad(P, Y)
    eps = 1e-6
    for i in range(8):
        for j in range(2):
            Yp, Ym = Y.copy(), Y.copy()
            Yp[i, j] += eps
            Ym[i, j] -= eps
            fd = (kl_divergence(P, Yp) - kl_divergence(P, Ym)) / (2 * eps)
            assert grad[i, j] == pytest.approx(fd, abs=1e-6)


def test_tsne_n2_symmetric():
    # two points: P = [[0, .5], [.5, 0]]; fit must not blow up and the two
    # points end up mirror-symmetric about their centroid
    X = np.array([[0.0, 0.0], [1.0, 1.0]])
    cfg = EmbedConfig(perplexity=30.0, iterations=50, seed=0)
    res = tsne_fit(X, ["a", "b"], cfg)
    assert res.coords.shape == (2, 2)
    assert np.all(np.isfinite(res.coords))
    P = joint_affinities(pairwise_sq_distances(X), 1.0)
    assert P[0, 1] == pytest.approx(0.5)


def test_tsne_identical_points_rejected():
    X = np.zeros((4, 3))
    with pytest.raises(DegenerateGeometryError):
        tsne_fit(X, None, EmbedConfig(iterations=5))


def test_tsne_single_point_rejected():
    with pytest.raises(DimensionError):
        tsne_fit(np.zeros((1, 3)), None, EmbedConfig(iterations=5))


def _clusters(seed, n_per=20, spread=0.05):
    g = np.random.default_rng(seed)
    centers = np.array([[0.0, 0.0, 0.0], [5.0, 0.0, 0.0], [0.0, 5.0, 0.0]])
    X, tags = [], []
    for k, c in enumerate(centers):
        X.append(c + g.normal(0, spread, (n_per, 3)))
        tags += [k] * n_per
    return np.vstack(X), np.array(tags)


def _purity(coords, tags):
    # nearest-centroid assignment in the embedding
    cents = np.stack([coords[tags == k].mean(axis=0) for k in range(3)])
    d = ((coords[:, None, :] - cents[None, :, :]) ** 2).sum(axis=2)
    return float(np.mean(d.argmin(axis=1) == tags))


def test_tsne_separates_clusters():
    X, tags = _clusters(4)
    cfg = EmbedConfig(perplexity=10.0, iterations=400, learning_rate=50.0,
                      seed=0)
    res = tsne_fit(X, tags, cfg)
    assert _purity(res.coords, tags) >= 0.95


def test_tsne_kl_descends():
    X, tags = _clusters(5)
    cfg = EmbedConfig(perplexity=10.0, iterations=300, seed=1)
    res = tsne_fit(X, tags, cfg)
    kl = res.kl_history
    assert kl[-1] < kl[0]
    # monotone on average over the last half (allow momentum wiggle)
    assert kl[-1] <= np.median(kl[len(kl) // 2:]) + 1e-9


def test_tsne_deterministic():
    X, tags = _clusters(6, n_per=8)
    cfg = EmbedConfig(perplexity=5.0, iterations=50, seed=3)
    r1 = tsne_fit(X, tags, cfg)
    r2 = tsne_fit(X, tags, cfg)
    assert np.array_equal(r1.coords, r2.coords)
    assert np.array_equal(r1.kl_history, r2.kl_history)


def test_tsne_permutation_equivariant_with_explicit_init():
    X, tags = _clusters(7, n_per=6)
    n = len(tags)
    g = np.random.default_rng(8)
    init = g.normal(0, 1e-4, (n, 2))
    perm = g.permutation(n)
    # a handful of iterations: equivariance is exact only up to float
    # summation order, and gradient descent amplifies ulp noise over time
    cfg = EmbedConfig(perplexity=5.0, iterations=5, seed=0)
    base = tsne_fit(X, tags, cfg, init=init)
    permuted = tsne_fit(X[perm], tags[perm], cfg, init=init[perm])
    assert np.allclose(permuted.coords, base.coords[perm], atol=1e-6)
    assert np.allclose(permuted.kl_history, base.kl_history, atol=1e-8)


def test_tsne_init_shape_checked():
    X, tags = _clusters(9, n_per=4)
    with pytest.raises(DimensionError):
        tsne_fit(X, tags, EmbedConfig(iterations=5), init=np.zeros((3, 2)))


def test_embedding_csv_format():
    X = np.array([[0.0, 0.0], [1.0, 1.0]])
    res = tsne_fit(X, ["real", "fake"], EmbedConfig(iterations=5, seed=0))
    text = embedding_to_csv(res, point_labels=[0, 1])
    lines = text.strip().splitlines()
    assert lines[0] == "index,dataset,label,x,y"
    assert lines[1].startswith("0,real,0,")
    assert lines[2].startswith("1,fake,1,")


def test_kl_history_csv_format():
    X = np.array([[0.0, 0.0], [1.0, 1.0]])
    res = tsne_fit(X, None, EmbedConfig(iterations=3, seed=0))
    lines = kl_history_to_csv(res).strip().splitlines()
    assert lines[0] == "iteration,kl"
    assert len(lines) == 4
