# VSDesign 🚀, GPL-3.0 license
import numpy as np
import pytest

from models.common import DesignMatrix, factorize, whiten
from models.scores import (SamplingDistribution, compute_scores, cross_leverage, make_distribution,
                           mixture_distribution, pure_distribution)
from utils.general import AlphaOutOfRange, DesignError, ZeroProbabilityEntry


def test_scores_identity(eye2):
    S = compute_scores(eye2, factorize(eye2))
    np.testing.assert_allclose(S.leverage, [1, 1])
    np.testing.assert_allclose(S.inverse, [1, 1])
    assert S.phi == pytest.approx(2)


def test_scores_toy(toy, toy_factor):
    S = compute_scores(toy, toy_factor)
    np.testing.assert_allclose(S.leverage, [2 / 3] * 3, atol=1e-12)
    np.testing.assert_allclose(S.inverse, [5 / 9, 5 / 9, 2 / 9], atol=1e-12)
    assert S.phi == pytest.approx(4 / 3, rel=1e-12)


def test_scores_orthonormal(gaussian):
    X = gaussian(40, 4, seed=2)
    U = whiten(X, factorize(X))
    S = compute_scores(U, factorize(U))
    np.testing.assert_allclose(S.inverse, S.leverage, atol=1e-10)
    assert S.phi == pytest.approx(4, rel=1e-10)


def _random_matrix(gaussian, seed):
    rng = np.random.default_rng(seed)
    d = int(rng.integers(1, 11))
    return gaussian(int(rng.integers(d, 101)), d, seed=seed)


@pytest.mark.parametrize('seed', range(20))
def test_score_sums(gaussian, seed):
    X = _random_matrix(gaussian, seed)
    S = compute_scores(X, factorize(X))
    assert S.leverage.sum() == pytest.approx(X.d, rel=1e-8)
    assert S.inverse.sum() == pytest.approx(S.phi, rel=1e-8)


@pytest.mark.parametrize('seed', range(10))
@pytest.mark.parametrize('c', [1e-3, 0.5, 7.5])
def test_scores_scale(gaussian, seed, c):
    # cX keeps leverage, inverse scores and phi scale by 1/c^2
    X = _random_matrix(gaussian, seed)
    cX = DesignMatrix(c * X.entries)
    S, Sc = compute_scores(X, factorize(X)), compute_scores(cX, factorize(cX))
    np.testing.assert_allclose(Sc.leverage, S.leverage, rtol=1e-8, atol=1e-12)
    np.testing.assert_allclose(Sc.inverse, S.inverse / c ** 2, rtol=1e-8)
    assert Sc.phi == pytest.approx(S.phi / c ** 2, rel=1e-8)


@pytest.mark.parametrize('seed', range(20))
def test_phi_bounds(gaussian, seed):
    # phi <= lambda_max((X'X)^-1) d <= phi d
    X = _random_matrix(gaussian, seed)
    F = factorize(X)
    lam = np.linalg.eigvalsh(F.gram_inverse).max()
    d = X.d
    assert F.phi <= lam * d * (1 + 1e-10)
    assert lam * d <= F.phi * d * (1 + 1e-10)


@pytest.mark.parametrize('seed', range(10))
@pytest.mark.parametrize('alpha', [0.5, 0.75])
def test_mixture_dominance(gaussian, seed, alpha):
    # q >= p / 4 for the uniform, inverse and leverage distributions
    X = _random_matrix(gaussian, seed)
    S = compute_scores(X, factorize(X))
    q = mixture_distribution(S, X.n, X.d, alpha).q
    for kind in 'uniform', 'inverse', 'leverage':
        p = pure_distribution(S, X.n, X.d, kind).q
        assert (q >= 0.25 * p * (1 - 1e-12)).all(), kind


def test_cross_leverage(toy, toy_factor):
    L = cross_leverage(toy, toy_factor)
    np.testing.assert_allclose(np.diag(L), compute_scores(toy, toy_factor).leverage, atol=1e-12)
    np.testing.assert_allclose(L @ L, L, atol=1e-12)  # projection
    np.testing.assert_allclose(L, L.T, atol=1e-15)


def test_mixture(eye2, toy, toy_factor):
    S = compute_scores(eye2, factorize(eye2))
    for alpha in 0.5, 0.6, 0.75:
        np.testing.assert_allclose(mixture_distribution(S, 2, 2, alpha).q, [0.5, 0.5])
    q = mixture_distribution(compute_scores(toy, toy_factor), 3, 2, 0.5)
    np.testing.assert_allclose(q.q, np.array([17, 17, 14]) / 48, atol=1e-12)
    assert q.alpha == 0.5 and q.kind == 'mixture'
    assert q.cdf[-1] == 1.0
    with pytest.raises(AlphaOutOfRange):
        mixture_distribution(S, 2, 2, 0.9)
    with pytest.raises(AlphaOutOfRange):
        mixture_distribution(S, 2, 2, 0.49)


def test_pure_distributions(toy, toy_factor, gaussian):
    X = gaussian(4, 2)
    S = compute_scores(X, factorize(X))
    np.testing.assert_allclose(pure_distribution(S, 4, 2, 'uniform').q, [0.25] * 4)
    S = compute_scores(toy, toy_factor)
    np.testing.assert_allclose(pure_distribution(S, 3, 2, 'inverse').q, [5 / 12, 5 / 12, 1 / 6], atol=1e-12)
    np.testing.assert_allclose(make_distribution(S, 3, 2, 'leverage').q, [1 / 3] * 3, atol=1e-12)
    with pytest.raises(DesignError):
        make_distribution(S, 3, 2, 'cubic')


def test_zero_row():
    X = DesignMatrix([[1, 0], [0, 1], [0, 0]])
    S = compute_scores(X, factorize(X))
    with pytest.raises(ZeroProbabilityEntry):
        pure_distribution(S, 3, 2, 'leverage')
    assert (mixture_distribution(S, 3, 2).q > 0).all()  # uniform component keeps every row


def test_sampling_distribution_validation():
    with pytest.raises(ZeroProbabilityEntry):
        SamplingDistribution([0.5, 0.5, 0.0])
    with pytest.raises(DesignError):
        SamplingDistribution([0.5, 0.4])
    q = SamplingDistribution([0.25, 0.75], kind='custom')
    assert len(q) == 2 and not q.q.flags.writeable
