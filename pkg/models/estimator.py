# VSDesign 🚀, GPL-3.0 license
"""
Rescaled selection operator and unbiased subsampled least squares
"""

from dataclasses import dataclass

import numpy as np
from scipy import linalg

from models.common import RANK_TOL, Weights
from models.sampler import DesignSequence
from utils.general import DimensionMismatch, EmptyList, SketchRankDeficient


@dataclass(frozen=True)
class Sketch:
    # S_pi kept implicitly as (indices, rescale), row t is e_{pi_t}' / sqrt(k q_{pi_t})
    pi: DesignSequence

    def apply(self, M):
        return apply_sketch(self.pi, M)

    def dense(self):
        S = np.zeros((self.pi.k, self.pi.n))
        S[np.arange(self.pi.k), self.pi.indices] = self.pi.rescale
        return S


@dataclass(frozen=True)
class SubsampledEstimate:
    w_hat: Weights
    pi: DesignSequence
    condition_report: float  # smallest singular value of S_pi X


def apply_sketch(pi, M):
    # Row t of the output is M[pi_t] / sqrt(k q_{pi_t})
    M = np.asarray(M, dtype=np.float64)
    if M.ndim not in (1, 2) or M.shape[0] != pi.n:
        raise DimensionMismatch(f'operand has {M.shape[0] if M.ndim else 0} rows, sketch expects {pi.n}')
    r = pi.rescale if M.ndim == 1 else pi.rescale[:, None]
    return M[pi.indices] * r


def _sketched_qr(X, pi, rank_tol):
    q, r = linalg.qr(apply_sketch(pi, X.entries), mode='economic')
    s = linalg.svdvals(r)
    if s[-1] <= rank_tol * s[0]:
        raise SketchRankDeficient(f'S_pi X is rank deficient (smallest singular value {s[-1]:.3g}), '
                                  f'the sequence was not drawn by volume sampling')
    return q, r, float(s[-1])


def _responses(pi, y_S):
    # Expand y_S to one response per sequence position, duplicates reuse the same response
    if isinstance(y_S, dict):
        missing = sorted(set(int(i) for i in pi.support) - set(y_S))
        if missing:
            raise DimensionMismatch(f'no response supplied for selected rows {missing[:10]}')
        return np.array([y_S[int(i)] for i in pi.indices], dtype=np.float64)
    y = np.asarray(y_S, dtype=np.float64)
    if y.shape != (pi.n,):
        raise DimensionMismatch(f'response vector has shape {y.shape}, expected ({pi.n},)')
    return y[pi.indices]


def subsampled_ls(X, pi, y_S, rank_tol=RANK_TOL):
    # w_hat = (S_pi X)^+ S_pi y from the QR of the k x d sketched system
    if pi.n != X.n:
        raise DimensionMismatch(f'sequence over {pi.n} rows, matrix has {X.n}')
    q, r, smin = _sketched_qr(X, pi, rank_tol)
    sy = _responses(pi, y_S) * pi.rescale
    w = linalg.solve_triangular(r, q.T @ sy, lower=False)
    return SubsampledEstimate(Weights(w), pi, smin)


def sketch_pinv(X, pi, rank_tol=RANK_TOL):
    # (S_pi X)^+ S_pi as a dense d x n matrix, columns of repeated indices accumulate
    q, r, _ = _sketched_qr(X, pi, rank_tol)
    P = linalg.solve_triangular(r, q.T, lower=False) * pi.rescale  # d x k
    M = np.zeros((X.d, X.n))
    np.add.at(M.T, pi.indices, P.T)
    return M


def sketch_gram_inverse(X, pi, rank_tol=RANK_TOL):
    # (X'S'SX)^-1 = R^-1 R^-T
    _, r, _ = _sketched_qr(X, pi, rank_tol)
    r_inv = linalg.solve_triangular(r, np.eye(X.d), lower=False)
    return r_inv @ r_inv.T


def averaged_estimate(estimates):
    # Coordinate-wise mean of independent designs
    if not estimates:
        raise EmptyList('cannot average an empty list of estimates')
    W = [e.w_hat.w if isinstance(e, SubsampledEstimate) else np.asarray(e) for e in estimates]
    if len({len(w) for w in W}) > 1:
        raise DimensionMismatch(f'estimates have different dimensions {sorted({len(w) for w in W})}')
    return Weights(np.mean(W, 0))
