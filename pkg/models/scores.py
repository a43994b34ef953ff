# VSDesign 🚀, GPL-3.0 license
"""
Leverage scores, inverse scores and the sampling distributions built from them

Usage:
    from models.common import factorize
    from models.scores import compute_scores, mixture_distribution
    F = factorize(X)
    S = compute_scores(X, F)
    q = mixture_distribution(S, X.n, X.d, alpha=0.5)
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from models.common import _frozen
from utils.general import LOGGER, AlphaOutOfRange, DesignError, DimensionMismatch, ZeroProbabilityEntry, colorstr

PREFIX = colorstr('scores: ')
ALPHA_RANGE = (0.5, 0.75)  # mixture weights for which every component keeps >= 0.25 of its mass
KINDS = ('uniform', 'leverage', 'inverse', 'mixture')
SUM_TOL = 1e-8  # relative, sum of leverage = d and sum of inverse scores = phi


@dataclass(frozen=True)
class ScoreProfile:
    leverage: np.ndarray  # l_i = x_i'(X'X)^-1 x_i
    inverse: np.ndarray  # v_i = x_i'(X'X)^-2 x_i
    phi: float  # tr((X'X)^-1)

    @property
    def n(self):
        return len(self.leverage)


@dataclass(frozen=True)
class SamplingDistribution:
    q: np.ndarray
    alpha: Optional[float] = None  # mixture parameter, None for pure distributions
    kind: str = 'mixture'

    def __post_init__(self):
        q = np.array(self.q, dtype=np.float64).reshape(-1)
        if not (q > 0).all():
            i = int(np.argmin(q))
            raise ZeroProbabilityEntry(f'{self.kind} distribution has non-positive mass q[{i}]={q[i]:.3g}')
        if abs(q.sum() - 1) > 1e-12:
            raise DesignError(f'{self.kind} distribution sums to {q.sum():.17g}, expected 1')
        q /= q.sum()
        c = np.cumsum(q)
        c[-1] = 1.0  # inverse-CDF table
        object.__setattr__(self, 'q', _frozen(q))
        object.__setattr__(self, 'cdf', _frozen(c))

    def __len__(self):
        return len(self.q)


def compute_scores(X, F):
    # Leverage scores from X R^-1, inverse scores as ||(X'X)^-1 x_i||^2 (never forms (X'X)^-2)
    if (F.n, F.d) != X.shape:
        raise DimensionMismatch(f'factor built for {(F.n, F.d)}, got matrix {X.shape}')
    b = X.entries @ F.r_inv  # rows R^-T x_i
    c = X.entries @ F.gram_inverse  # rows (X'X)^-1 x_i
    leverage = np.clip((b ** 2).sum(1), 0.0, 1.0)
    inverse = (c ** 2).sum(1)
    phi = F.phi
    d = X.d
    for name, total, target in ('leverage', leverage.sum(), d), ('inverse', inverse.sum(), phi):
        if abs(total - target) > SUM_TOL * target:
            LOGGER.warning(f'{PREFIX}WARNING: {name} scores sum to {total:.12g}, expected {target:.12g}')
    return ScoreProfile(_frozen(leverage), _frozen(inverse), float(phi))


def cross_leverage(X, F):
    # [l_ij] = X (X'X)^-1 X', the projection onto the column span of X
    b = X.entries @ F.r_inv
    return b @ b.T


def _components(S, n, d):
    if S.n != n:
        raise DimensionMismatch(f'score profile has {S.n} rows, expected {n}')
    return np.full(n, 1.0 / n), S.leverage / d, S.inverse / S.phi  # p_uni, p_lev, p_inv


def mixture_distribution(S, n, d, alpha=0.5):
    # q(alpha) = alpha * (0.5 p_uni + 0.5 p_inv) + (1 - alpha) * p_lev
    if not ALPHA_RANGE[0] <= alpha <= ALPHA_RANGE[1]:
        raise AlphaOutOfRange(f'alpha={alpha} outside {list(ALPHA_RANGE)}')
    uni, lev, inv = _components(S, n, d)
    q = alpha * (0.5 * uni + 0.5 * inv) + (1 - alpha) * lev
    return SamplingDistribution(q / q.sum(), alpha=float(alpha), kind='mixture')


def pure_distribution(S, n, d, kind='leverage'):
    # p_uni, p_lev or p_inv on their own, every entry must be positive
    uni, lev, inv = _components(S, n, d)
    p = {'uniform': uni, 'leverage': lev, 'inverse': inv}.get(kind)
    if p is None:
        raise DesignError(f"unknown distribution kind '{kind}', valid kinds are {KINDS[:3]}")
    zero = np.flatnonzero(p <= 0)
    if zero.size:
        raise ZeroProbabilityEntry(f'{kind} distribution has zero mass at rows {zero.tolist()[:10]}, '
                                   f'use the mixture distribution instead')
    return SamplingDistribution(p / p.sum(), kind=kind)


def make_distribution(S, n, d, kind='mixture', alpha=0.5):
    # Dispatch over uniform, leverage, inverse and mixture
    if kind == 'mixture':
        return mixture_distribution(S, n, d, alpha)
    return pure_distribution(S, n, d, kind)
