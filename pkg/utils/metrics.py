# VSDesign 🚀, GPL-3.0 license
"""
Monte Carlo metrics: compensated moments, laws over sequences, A-optimality
"""

import math
from dataclasses import dataclass

import numpy as np

from models.common import DesignMatrix, factorize
from utils.general import RankDeficient

Z_SLACK = 3.0  # standard errors allowed on every Monte Carlo check
ATOL = 1e-12  # absolute slack for checks whose standard error is exactly 0


def moments(x):
    # Per-coordinate mean and standard error of trials stacked along axis 0, summed with math.fsum
    x = np.asarray(x, dtype=np.float64)
    t = len(x)
    assert t > 0, 'need at least one trial'
    flat = x.reshape(t, -1)
    mean = np.array([math.fsum(c) for c in flat.T]) / t
    var = np.array([math.fsum(c) for c in ((flat - mean) ** 2).T]) / max(t - 1, 1)
    return mean.reshape(x.shape[1:]), np.sqrt(var / t).reshape(x.shape[1:])


@dataclass(frozen=True)
class Estimate:
    mean: float
    se: float
    n: int  # trials

    @classmethod
    def of(cls, x):
        m, se = moments(np.asarray(x, dtype=np.float64).reshape(-1))
        return cls(float(m), float(se), len(x))

    def scaled(self, c):
        return Estimate(self.mean * c, self.se * abs(c), self.n)

    def __str__(self):
        return f'{self.mean:.6g} ± {self.se:.2g}'


def within_se(diff, se, z=Z_SLACK, atol=ATOL):
    # |diff| <= z SE, element-wise
    return np.abs(diff) <= z * np.asarray(se) + atol


def tv_distance(p, q):
    # Total variation between two laws given as {outcome: probability}
    return 0.5 * math.fsum(abs(p.get(x, 0.0) - q.get(x, 0.0)) for x in set(p) | set(q))


def multiset_law(law):
    # Sequence law -> law of the sorted sequence (the multiset of selected rows)
    out = {}
    for seq, p in law.items():
        key = tuple(sorted(seq))
        out[key] = out.get(key, 0.0) + p
    return out


def empirical_law(seqs, multiset=True):
    # Frequencies of the rows of an (m, k) array of sampled sequences
    seqs = np.asarray(seqs, dtype=np.intp)
    if multiset:
        seqs = np.sort(seqs, axis=1)
    keys, counts = np.unique(seqs, axis=0, return_counts=True)
    return {tuple(int(i) for i in key): c / len(seqs) for key, c in zip(keys, counts)}


def aopt_trace(X, subset):
    # tr((X_S'X_S)^-1) from the subset's own factorization
    idx = np.unique(np.asarray(subset, dtype=np.intp))
    if len(idx) < X.d:
        raise RankDeficient(f'subset of {len(idx)} rows cannot span d={X.d} dimensions')
    return factorize(DesignMatrix(X.rows(idx))).phi
