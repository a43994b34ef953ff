# VSDesign 🚀, GPL-3.0 license
"""
Volume sampling, i.i.d. sampling and their rescaled composition

Usage:
    from models.sampler import RngStream, VolumeSampler
    sampler = VolumeSampler(X, F, q)
    pi, stats = sampler.sample_k(k=10, rng=RngStream(0))
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln, logsumexp

from models.common import RANK_TOL, _frozen, factorize
from models.scores import SamplingDistribution
from utils.general import (LOGGER, DimensionMismatch, EnumerationTooLarge, KTooSmall, PreconditionViolated,
                           TrialBudgetExhausted, colorstr)

PREFIX = colorstr('sampler: ')
MAX_ENUMERATION = 10 ** 6  # n^k guard for the brute-force oracle
ACCEPT_TOL = 1e-9  # slack on the Bernoulli argument upper bound
TRACE_TOL = 1e-6  # stagewise trace identity, relative to d
DOMINANCE_TOL = 1e-12


class RngStream:
    # Reproducible random stream keyed by (master_seed, stream_id), children extend the numpy spawn key
    def __init__(self, master_seed=0, stream_id=0, parent=()):
        assert int(master_seed) >= 0, f'master_seed must be non-negative, got {master_seed}'
        self.master_seed = int(master_seed)
        self.stream_id = int(stream_id)
        self.parent = tuple(parent)
        seq = np.random.SeedSequence(self.master_seed, spawn_key=self.spawn_key)
        self.gen = np.random.Generator(np.random.PCG64(seq))

    @property
    def spawn_key(self):
        return self.parent + (self.stream_id,)

    def child(self, stream_id):
        return RngStream(self.master_seed, stream_id, self.spawn_key)

    def random(self, size=None):
        return self.gen.random(size)

    def normal(self, loc=0.0, scale=1.0, size=None):
        return self.gen.normal(loc, scale, size)

    def integers(self, low, high=None, size=None):
        return self.gen.integers(low, high, size)

    def __repr__(self):
        return f'RngStream(master_seed={self.master_seed}, spawn_key={self.spawn_key})'


@dataclass
class SamplerStats:
    bernoulli_trials: int = 0  # rejection sampling trials examined
    iid_draws_consumed: int = 0  # proposal draws taken from the stream
    max_trace_error: float = 0.0  # stagewise trace identity, debug mode only

    def __iadd__(self, other):
        self.bernoulli_trials += other.bernoulli_trials
        self.iid_draws_consumed += other.iid_draws_consumed
        self.max_trace_error = max(self.max_trace_error, other.max_trace_error)
        return self


@dataclass(frozen=True)
class DesignSequence:
    """Index sequence pi in [n]^k with rescaling weights 1/sqrt(k q_pi_t), i.e. the sketch operator S_pi."""
    indices: np.ndarray
    rescale: np.ndarray
    source_q: SamplingDistribution

    @classmethod
    def from_indices(cls, indices, q):
        idx = np.array(indices, dtype=np.intp).reshape(-1)
        if idx.size and (idx.min() < 0 or idx.max() >= len(q)):
            raise DimensionMismatch(f'indices must lie in [0, {len(q)}), got range [{idx.min()}, {idx.max()}]')
        idx.flags.writeable = False
        return cls(idx, _frozen(1 / np.sqrt(len(idx) * q.q[idx])), q)

    @property
    def k(self):
        return len(self.indices)

    @property
    def n(self):
        return len(self.source_q)

    @property
    def support(self):
        return np.unique(self.indices)

    def multiplicities(self):
        return multiplicity_counts(self, self.n)


def default_max_trials(d):
    # ~32x the expected 2d(ln d + 1) trials of the bottom-up sampler
    return int(math.ceil(64 * d * (math.log(d) + 2)))


def volume_proposal(q, S):
    # q when it dominates half the leverage distribution, else 0.5 (q + p_lev), which always does
    p_lev = S.leverage / S.leverage.sum()
    if (q.q >= 0.5 * p_lev * (1 - DOMINANCE_TOL)).all():
        return q
    LOGGER.info(f'{PREFIX}{q.kind} distribution does not dominate p_lev / 2, volume stage uses 0.5 (q + p_lev)')
    p = 0.5 * (q.q + p_lev)
    return SamplingDistribution(p / p.sum(), kind='proposal')


def sample_iid(q, m, rng):
    # m independent draws from q by inverse CDF on the cumulative table
    if isinstance(q, SamplingDistribution):
        cdf = q.cdf
    else:  # raw probability vector, degenerate masses allowed
        cdf = np.cumsum(np.asarray(q, dtype=np.float64))
        cdf /= cdf[-1]
    assert m >= 0, f'draw count must be non-negative, got {m}'
    if m == 0:
        return np.empty(0, dtype=np.intp)
    return np.minimum(np.searchsorted(cdf, rng.random(m), side='right'), len(cdf) - 1).astype(np.intp)


class VolumeSampler:
    """Bottom-up volume sampling: draws of size d come out of i.i.d. proposals by rejection, size k adds an
    i.i.d. tail from q and a uniform shuffle.

    The proposal must satisfy proposal_i >= p_lev_i / 2 so that every Bernoulli argument is at most 1; this
    is checked once, here, for all rows.
    """

    def __init__(self, X, F, q, proposal=None, max_trials=None, debug=False):
        if (F.n, F.d) != X.shape or len(q) != X.n:
            raise DimensionMismatch(f'matrix {X.shape}, factor {(F.n, F.d)} and distribution ({len(q)},) disagree')
        self.x, self.F, self.q = X.entries, F, q
        self.proposal = q if proposal is None else proposal
        self.n, self.d = X.shape
        self.max_trials = default_max_trials(self.d) if max_trials is None else max_trials
        self.debug = debug
        if self.max_trials < self.d:
            raise PreconditionViolated(f'max_trials={self.max_trials} < d={self.d}')
        p_lev = ((self.x @ F.r_inv) ** 2).sum(1) / self.d
        bad = np.flatnonzero(self.proposal.q < 0.5 * p_lev * (1 - DOMINANCE_TOL))
        if bad.size:
            i = bad[0]
            raise PreconditionViolated(f'proposal q[{i}]={self.proposal.q[i]:.4g} < p_lev[{i}]/2={p_lev[i] / 2:.4g} '
                                       f'({bad.size} rows violate the dominance condition)')
        self.gram = self.x.T @ self.x  # trace identity, debug mode

    def sample_d(self, rng):
        # Indices pi_1..pi_d by size-d volume sampling; trials are drawn in blocks, the first accepted trial wins
        x, d = self.x, self.d
        pq = self.proposal.q
        A = self.F.gram_inverse.copy()
        picks = np.empty(d, dtype=np.intp)
        stats = SamplerStats()
        for i in range(d):
            while True:
                if stats.bernoulli_trials >= self.max_trials:
                    raise TrialBudgetExhausted(f'{self.max_trials} trials exhausted at stage {i + 1}/{d}')
                b = min(int(math.ceil(2 * d / (d - i))) + 1, self.max_trials - stats.bernoulli_trials)
                cand = sample_iid(self.proposal, b, rng)
                u = rng.random(b)
                xc = x[cand]
                p = np.einsum('ij,jk,ik->i', xc, A, xc) / (2 * d * pq[cand])
                assert p.max() <= 1 + ACCEPT_TOL and p.min() >= -ACCEPT_TOL, \
                    f'Bernoulli argument outside [0, 1]: [{p.min():.6g}, {p.max():.6g}]'
                stats.iid_draws_consumed += b
                hit = np.flatnonzero(u < p)
                if hit.size:
                    stats.bernoulli_trials += int(hit[0]) + 1
                    picks[i] = cand[hit[0]]
                    break
                stats.bernoulli_trials += b

            # Rank-one downdate A <- A - A x x' A / x'A x
            xi = x[picks[i]]
            ax = A @ xi
            A -= np.outer(ax, ax) / (xi @ ax)
            A = (A + A.T) / 2
            if self.debug:
                err = abs(float((A * self.gram).sum()) - (d - i - 1))  # sum_j x_j' A x_j = tr(A X'X)
                stats.max_trace_error = max(stats.max_trace_error, err)
                assert err <= TRACE_TOL * d, f'trace identity broken at stage {i + 1}: error {err:.3g}'
        return picks, stats

    def sample_k(self, k, rng):
        # rescaled volume sampling: volume stage of size d, i.i.d. tail of size k - d from q, uniform shuffle
        if k < self.d:
            raise KTooSmall(f'k={k} < d={self.d}')
        picks, stats = self.sample_d(rng)
        seq = np.concatenate([picks, sample_iid(self.q, k - self.d, rng)])
        stats.iid_draws_consumed += k - self.d
        if k > 1:  # Fisher-Yates, exactly k - 1 draws
            swaps = rng.integers(0, np.arange(k, 1, -1))
            for t, j in zip(range(k - 1, 0, -1), swaps):
                seq[t], seq[j] = seq[j], seq[t]
        return DesignSequence.from_indices(seq, self.q), stats


def sample_vs_d(X, F, q, rng, max_trials=None, debug=False):
    sampler = VolumeSampler(X, F, q, max_trials=max_trials, debug=debug)
    picks, stats = sampler.sample_d(rng)
    return DesignSequence.from_indices(picks, q), stats


def sample_vs_k(X, F, q, k, rng, proposal=None, max_trials=None, debug=False):
    if k < X.d:
        raise KTooSmall(f'k={k} < d={X.d}')
    return VolumeSampler(X, F, q, proposal=proposal, max_trials=max_trials, debug=debug).sample_k(k, rng)


def brute_force_vs_probs(X, q, k, rank_tol=RANK_TOL, chunk=1 << 16):
    """Exact rescaled volume sampling law by enumerating all n^k sequences.

    Mass det(X'S'SX) * prod(q) is accumulated in log space; selections with rank(S X) < d get -inf.
    Returns {sequence tuple: probability} for sequences with positive probability.
    """
    n, d = X.shape
    if k < d:
        raise KTooSmall(f'k={k} < d={d}')
    if n ** k > MAX_ENUMERATION:
        raise EnumerationTooLarge(f'n^k = {n}^{k} > {MAX_ENUMERATION} sequences')
    qv = q.q
    seqs = np.stack(np.unravel_index(np.arange(n ** k), (n,) * k), axis=1).astype(np.intp)  # lexicographic
    logp = np.empty(len(seqs))
    for c in range(0, len(seqs), chunk):
        idx = seqs[c:c + chunk]
        sx = X.entries[idx] / np.sqrt(k * qv[idx])[..., None]  # S_pi X, (m, k, d)
        s = np.linalg.svd(sx, compute_uv=False)
        full = s[:, -1] > rank_tol * s[:, 0]
        with np.errstate(divide='ignore'):
            logdet = np.where(full, 2 * np.log(s).sum(1), -np.inf)
        logp[c:c + chunk] = logdet + np.log(qv[idx]).sum(1)
    log_z = logsumexp(logp)

    # Closed-form normalizer (d!/k^d) C(k, d) det(X'X)
    log_c = gammaln(d + 1) - d * math.log(k) + gammaln(k + 1) - gammaln(d + 1) - gammaln(k - d + 1)
    closed = log_c + factorize(X).log_det_gram
    if abs(log_z - closed) > 1e-8:
        LOGGER.warning(f'{PREFIX}WARNING: enumerated log-normalizer {log_z:.12g} != closed form {closed:.12g}')

    p = np.exp(logp - log_z)
    keep = np.flatnonzero(p > 0)
    return {tuple(int(i) for i in seqs[j]): float(p[j]) for j in keep}


def multiplicity_counts(pi, n):
    # s_i = |{t : pi_t = i}|
    idx = pi.indices if isinstance(pi, DesignSequence) else np.asarray(pi, dtype=np.intp).reshape(-1)
    return np.bincount(idx, minlength=n)
