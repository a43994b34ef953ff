# VSDesign 🚀, GPL-3.0 license
"""
Common modules: dense linear algebra kernel shared by scores, samplers and estimators
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import linalg

from utils.general import LOGGER, DimensionMismatch, RankDeficient, colorstr

PREFIX = colorstr('linalg: ')
RANK_TOL = 1e-10  # relative singular value tolerance
GRAM_TOL = 1e-8  # (X'X) @ gram_inverse multiply-back tolerance


def _frozen(a):
    # Read-only float64 copy
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class DesignMatrix:
    # n x d matrix of experiment vectors, one experiment per row
    entries: np.ndarray

    def __post_init__(self):
        x = self.entries
        if not isinstance(x, np.ndarray) or x.dtype != np.float64 or x.flags.writeable:
            x = _frozen(x)
            object.__setattr__(self, 'entries', x)
        if x.ndim != 2:
            raise DimensionMismatch(f'design matrix must be 2-D, got shape {x.shape}')
        n, d = x.shape
        if not n >= d >= 1:
            raise DimensionMismatch(f'design matrix needs n >= d >= 1, got n={n}, d={d}')
        if not np.isfinite(x).all():
            raise DimensionMismatch('design matrix has non-finite entries')

    @property
    def n(self):
        return self.entries.shape[0]

    @property
    def d(self):
        return self.entries.shape[1]

    @property
    def shape(self):
        return self.entries.shape

    def rows(self, index):
        # Sub-matrix of the selected rows (repeats allowed)
        return self.entries[np.asarray(index, dtype=np.intp)]


@dataclass(frozen=True)
class Weights:
    # d-vector of linear model weights (w*, w_LS or an estimate)
    w: np.ndarray

    def __post_init__(self):
        w = _frozen(self.w).reshape(-1)
        if not np.isfinite(w).all():
            raise DimensionMismatch('weights have non-finite entries')
        object.__setattr__(self, 'w', w)

    def __len__(self):
        return len(self.w)


@dataclass(frozen=True)
class GramFactor:
    """Thin QR factorization X = QR with everything derived from X'X cached.

    gram_inverse = R^-1 R^-T is never formed from X'X itself, so leverage and inverse scores only see the
    condition number of X, not its square.
    """
    n: int
    d: int
    q: np.ndarray  # n x d, orthonormal columns
    r: np.ndarray  # d x d, upper triangular
    r_inv: np.ndarray  # d x d, upper triangular
    gram_inverse: np.ndarray  # d x d, (X'X)^-1
    log_det_gram: float  # log det(X'X)
    singular_values: np.ndarray = field(repr=False)  # of X, descending

    @property
    def phi(self):
        # tr((X'X)^-1)
        return float(np.trace(self.gram_inverse))

    @property
    def condition(self):
        return float(self.singular_values[0] / self.singular_values[-1])

    def pinv_apply(self, y):
        # X^+ y = R^-1 Q'y
        return linalg.solve_triangular(self.r, self.q.T @ y, lower=False)

    def gram_residual(self, X):
        # max-abs residual of (X'X) @ gram_inverse - I
        x = X.entries if isinstance(X, DesignMatrix) else X
        return float(np.abs(x.T @ x @ self.gram_inverse - np.eye(self.d)).max())


def factorize(X, rank_tol=RANK_TOL):
    # Factorize X with Householder QR, verify numerical rank against rank_tol relative to the largest singular value
    X = X if isinstance(X, DesignMatrix) else DesignMatrix(X)
    n, d = X.shape
    q, r = linalg.qr(X.entries, mode='economic')
    s = linalg.svdvals(r)  # same singular values as X
    if s[0] == 0 or s[-1] <= rank_tol * s[0]:
        raise RankDeficient(f'design matrix is rank deficient: smallest/largest singular value '
                            f'{s[-1]:.3g}/{s[0]:.3g} <= rank_tol {rank_tol:g}')
    r_inv = linalg.solve_triangular(r, np.eye(d), lower=False)
    g = r_inv @ r_inv.T
    g = (g + g.T) / 2  # exact symmetry
    log_det = 2 * float(np.log(np.abs(np.diag(r))).sum())
    F = GramFactor(n, d, _frozen(q), _frozen(r), _frozen(r_inv), _frozen(g), log_det, _frozen(s))
    res = F.gram_residual(X)
    if res > GRAM_TOL:
        LOGGER.warning(f'{PREFIX}WARNING: (X\'X) gram_inverse residual {res:.3g} > {GRAM_TOL:g}, '
                       f'condition number {F.condition:.3g}')
    return F


def _check_vector(v, n, name='y'):
    v = np.asarray(v, dtype=np.float64)
    if v.ndim != 1 or len(v) != n:
        raise DimensionMismatch(f'{name} has length {v.size}, expected {n}')
    return v


def least_squares(F, X, y):
    # w_LS = X^+ y = argmin ||Xw - y||^2
    y = _check_vector(y, X.n)
    if (F.n, F.d) != X.shape:
        raise DimensionMismatch(f'factor built for {(F.n, F.d)}, got matrix {X.shape}')
    return Weights(F.pinv_apply(y))


def residual(X, w, y):
    # Xw - y (the noise vector xi_{y|X} when w = w*)
    w = w.w if isinstance(w, Weights) else np.asarray(w, dtype=np.float64)
    y = _check_vector(y, X.n)
    if w.shape != (X.d,):
        raise DimensionMismatch(f'weights have shape {w.shape}, expected ({X.d},)')
    return X.entries @ w - y


def gram_sqrt(F, power=0.5):
    # Symmetric (X'X)^power from the SVD of R, X'X = V S^2 V'
    _, s, vt = linalg.svd(F.r)
    return (vt.T * s ** (2 * power)) @ vt


def whiten(X, F):
    # U = X (X'X)^-1/2 with the symmetric root, U'U = I
    if (F.n, F.d) != X.shape:
        raise DimensionMismatch(f'factor built for {(F.n, F.d)}, got matrix {X.shape}')
    if F.singular_values[-1] <= RANK_TOL * F.singular_values[0]:
        raise RankDeficient('cannot whiten a rank deficient design matrix')
    U = X.entries @ gram_sqrt(F, -0.5)
    err = float(np.abs(U.T @ U - np.eye(X.d)).max())
    if err > GRAM_TOL:
        LOGGER.warning(f"{PREFIX}WARNING: whitened U'U residual {err:.3g} > {GRAM_TOL:g}")
    return DesignMatrix(U)
