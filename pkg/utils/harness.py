# VSDesign 🚀, GPL-3.0 license
"""
Monte Carlo harness: excess risk estimators and identity/bound checks for volume-rescaled designs

Usage:
    from models.sampler import RngStream
    from utils.harness import estimate_mse_excess
    fragment = estimate_mse_excess(X, model, k=10, alpha=0.5, trials=1000, rng=RngStream(0))
    print(fragment['mse_excess'].value)
"""

import math
from dataclasses import dataclass, field, replace
from multiprocessing.pool import ThreadPool
from typing import Optional

import numpy as np
from scipy import linalg
from tqdm import tqdm

from models.common import DesignMatrix, _check_vector, factorize, gram_sqrt, whiten
from models.estimator import averaged_estimate, sketch_gram_inverse, sketch_pinv, subsampled_ls
from models.responses import ResponseModel, generate_response
from models.sampler import (TRACE_TOL, RngStream, VolumeSampler, brute_force_vs_probs, multiplicity_counts,
                            volume_proposal)
from models.scores import SUM_TOL, compute_scores, cross_leverage, make_distribution, pure_distribution
from utils.callbacks import Callbacks
from utils.general import LOGGER, NCOLS, KTooSmall, ResponseInColumnSpan, colorstr
from utils.metrics import ATOL, Z_SLACK, Estimate, aopt_trace, empirical_law, moments, multiset_law, tv_distance, \
    within_se

PREFIX = colorstr('harness: ')
BLOCK = 256  # trials per random stream block
MAX_COV_ROWS = 10  # covariance check needs trials x n^2 memory
LOSS_SPAN_TOL = 1e-12  # L(w*) <= tol ||y||^2 means y lies in the column span
WHITEN_TOL = 1e-8  # relative, ||X(w_hat - w)||^2 vs ||U(v_hat - v)||^2
METRICS = 'mse_excess', 'mspe_excess', 'expected_loss_ratio', 'minimax_ratio', 'aopt_trace'


def _plain(x):
    # numpy scalars and arrays to JSON-native values, non-finite floats to None
    if isinstance(x, np.ndarray):
        return [_plain(v) for v in x.tolist()] if x.ndim else _plain(x.item())
    if isinstance(x, (np.floating, np.integer, np.bool_)):
        return _plain(x.item())
    if isinstance(x, float) and not math.isfinite(x):
        return None
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    return x


@dataclass
class Check:
    # One reported metric: value with standard error and a pass | fail | info | skipped status
    name: str
    value: Optional[float] = None
    se: Optional[float] = None
    status: str = 'info'
    reason: str = ''
    trials: int = 0
    detail: dict = field(default_factory=dict)

    @classmethod
    def skipped(cls, name, reason):
        return cls(name, status='skipped', reason=reason)

    @property
    def estimate(self):
        return Estimate(self.value, self.se or 0.0, self.trials)

    def to_dict(self):
        d = {'status': self.status, 'value': _plain(self.value), 'se': _plain(self.se), 'trials': self.trials}
        if self.reason:
            d['reason'] = self.reason
        d.update(_plain(self.detail))
        return d


def _verdict(ok):
    return 'pass' if ok else 'fail'


@dataclass
class EvalReport:
    config: dict = field(default_factory=dict)
    checks: dict = field(default_factory=dict)

    def __post_init__(self):
        for k in METRICS:  # stable schema, every metric key present
            self.checks.setdefault(k, Check.skipped(k, 'not run'))

    def add(self, fragment, suffix=''):
        # Merge a harness fragment {name: Check}, optionally renaming keys to name/suffix
        for name, c in fragment.items():
            key = f'{name}/{suffix}' if suffix else name
            c.name = key
            self.checks[key] = c
        return self

    def alias(self, name, key):
        # Report check key under a canonical metric name without counting its trials twice
        c = self.checks[key]
        self.checks[name] = replace(c, name=name, trials=0, detail={**c.detail, 'same_as': key})
        return self

    @property
    def trial_count(self):
        return sum(c.trials for c in self.checks.values())

    @property
    def failures(self):
        return [k for k, c in self.checks.items() if c.status == 'fail']

    @property
    def passed(self):
        return not self.failures

    def to_dict(self):
        return {'config': _plain(self.config),
                'trial_count': self.trial_count,
                'passed': self.passed,
                'failures': self.failures,
                'metrics': {k: c.to_dict() for k, c in self.checks.items()}}


def run_blocks(fn, trials, rng, workers=1, desc=None, callbacks=None):
    """Run fn(rng_b, start, m) -> {key: (m, ...) array} over blocks of BLOCK trials and stack the results in order.

    Block b draws only from rng.child(b), so the stacked results do not depend on the number of workers.
    """
    assert trials >= 1, f'trials must be >= 1, got {trials}'
    callbacks = callbacks or Callbacks()
    jobs = [(rng.child(b), s, min(BLOCK, trials - s)) for b, s in enumerate(range(0, trials, BLOCK))]
    out = []
    with ThreadPool(max(1, min(workers, len(jobs)))) as pool:
        pbar = tqdm(pool.imap(lambda job: fn(*job), jobs), total=len(jobs), desc=desc, disable=desc is None,
                    ncols=NCOLS, bar_format='{l_bar}{bar:10}{r_bar}{bar:-10b}')  # progress bar
        for r in pbar:  # imap keeps block order
            out.append(r)
            callbacks.run('on_block_end', len(out), len(jobs))
    return {key: np.concatenate([r[key] for r in out]) for key in out[0]}


def _sq(v):
    return float(v @ v)


def _sampler(X, q, F=None):
    # Volume sampler with a dominating proposal for the volume stage, q for the tail and rescaling
    F = F or factorize(X)
    return F, VolumeSampler(X, F, q, proposal=volume_proposal(q, compute_scores(X, F)))


def _distribution(X, F, dist, alpha):
    return make_distribution(compute_scores(X, F), X.n, X.d, dist, alpha)


def _check_k(k, d):
    if k < d:
        raise KTooSmall(f'k={k} < d={d}')


def _excess_fragment(prefix, ratio_key, res, noise, trials):
    # Excess, ratio to E||xi||^2, Pythagoras residual and bias checks shared by the MSE and MSPE estimators
    excess = Estimate.of(res['diff'])
    frag = {f'{prefix}_excess': Check(f'{prefix}_excess', excess.mean, excess.se, trials=trials,
                                      detail={'hat': Estimate.of(res['err_hat']).mean,
                                              'ls': Estimate.of(res['err_ls']).mean,
                                              'gap': Estimate.of(res['gap']).mean})}
    if noise > 0:
        frag[ratio_key] = Check(ratio_key, excess.mean / noise, excess.se / noise, trials=trials,
                                detail={'noise_trace': noise})
    else:
        frag[ratio_key] = Check.skipped(ratio_key, 'E||xi||^2 = 0, ratio undefined')

    # E[||w_hat - w||^2 - ||w_LS - w||^2 - ||w_hat - w_LS||^2] = 0 for an unbiased w_hat
    resid = Estimate.of(res['diff'] - res['gap'])
    scale = 1 + abs(Estimate.of(res['gap']).mean)
    name = f'{prefix}_decomposition_residual'
    frag[name] = Check(name, resid.mean, resid.se, _verdict(within_se(resid.mean, resid.se, atol=ATOL * scale)),
                       trials=trials)

    mean, se = moments(res['bias'])
    ok = within_se(mean, se, atol=ATOL * scale)
    name = f'{prefix}_bias'
    frag[name] = Check(name, float(np.abs(mean).max()), float(se[np.argmax(np.abs(mean))]), _verdict(ok.all()),
                       trials=trials, detail={'mean': mean, 'se_per_coordinate': se})
    return frag


def estimate_mse_excess(X, model, k, alpha=0.5, trials=1000, rng=None, dist='mixture', designs=1, workers=1,
                        desc=None, callbacks=None):
    """MSE[w_hat(y_S)] - MSE[w_LS(y|X)] over fresh (design, response) pairs.

    Per trial, with w the ground truth of the drawn response: err_hat = ||w_hat - w||^2, err_ls = ||w_LS - w||^2
    and gap = ||w_hat - w_LS||^2. designs > 1 averages that many independent designs per trial. Also reports the
    ratio of the excess to E||xi||^2, the decomposition residual, the bias of w_hat against w_LS and the
    A-optimality trace of the sampled supports.
    """
    rng = rng or RngStream(0)
    model.check(X)
    _check_k(k, X.d)
    F = factorize(X)
    _, sampler = _sampler(X, _distribution(X, F, dist, alpha), F)

    def block(r, start, m):
        out = {key: [] for key in ('err_hat', 'err_ls', 'gap', 'diff', 'bias', 'aopt')}
        for _ in range(m):
            y, w = generate_response(model, X, r, F)
            w_ls = F.pinv_apply(y)
            ests = [subsampled_ls(X, sampler.sample_k(k, r)[0], y) for _ in range(designs)]
            w_hat = averaged_estimate(ests).w
            e_hat, e_ls = _sq(w_hat - w.w), _sq(w_ls - w.w)
            out['err_hat'].append(e_hat)
            out['err_ls'].append(e_ls)
            out['gap'].append(_sq(w_hat - w_ls))
            out['diff'].append(e_hat - e_ls)
            out['bias'].append(w_hat - w_ls)
            out['aopt'].append(aopt_trace(X, ests[0].pi.support))
        return {key: np.array(v) for key, v in out.items()}

    res = run_blocks(block, trials, rng, workers, desc, callbacks)
    frag = _excess_fragment('mse', 'minimax_ratio', res, model.noise_trace(X, F), trials)
    a = Estimate.of(res['aopt'])
    frag['aopt_trace'] = Check('aopt_trace', a.mean, a.se, trials=trials, detail={'phi': F.phi})
    return frag


def estimate_mspe_excess(X, model, k, alpha=0.5, trials=1000, rng=None, dist='mixture', designs=1, workers=1,
                         desc=None, cross_checks=100, callbacks=None):
    """MSPE[w_hat(y_S)] - MSPE[w_LS(y|X)] through the whitened matrix U = X (X'X)^-1/2.

    MSE estimation runs on U with ground truth v = (X'X)^1/2 w and q built from U's scores. The first
    cross_checks trials also solve on X with the same sequences and compare ||X(w_hat - w)||^2 with ||U(v_hat - v)||^2.
    """
    rng = rng or RngStream(0)
    model.check(X)
    _check_k(k, X.d)
    F = factorize(X)
    U = whiten(X, F)
    FU = factorize(U)
    root = gram_sqrt(F, 0.5)
    _, sampler = _sampler(U, _distribution(U, FU, dist, alpha), FU)

    def block(r, start, m):
        out = {key: [] for key in ('err_hat', 'err_ls', 'gap', 'diff', 'bias', 'whiten')}
        for j in range(m):
            y, w = generate_response(model, X, r, F)
            v = root @ w.w
            v_ls = FU.pinv_apply(y)
            pis = [sampler.sample_k(k, r)[0] for _ in range(designs)]
            v_hat = averaged_estimate([subsampled_ls(U, pi, y) for pi in pis]).w
            e_hat, e_ls = _sq(v_hat - v), _sq(v_ls - v)
            out['err_hat'].append(e_hat)
            out['err_ls'].append(e_ls)
            out['gap'].append(_sq(v_hat - v_ls))
            out['diff'].append(e_hat - e_ls)
            out['bias'].append(v_hat - v_ls)
            rel = np.nan
            if start + j < cross_checks:
                w_hat = averaged_estimate([subsampled_ls(X, pi, y) for pi in pis]).w
                a, b = _sq(X.entries @ (w_hat - w.w)), _sq(U.entries @ (v_hat - v))
                rel = abs(a - b) / max(a, b, ATOL * (1 + _sq(y)))
            out['whiten'].append(rel)
        return {key: np.array(v) for key, v in out.items()}

    res = run_blocks(block, trials, rng, workers, desc, callbacks)
    frag = _excess_fragment('mspe', 'mspe_ratio', res, model.noise_trace(X, F), trials)
    rel = res['whiten'][~np.isnan(res['whiten'])]
    if rel.size:
        frag['whitening_identity'] = Check('whitening_identity', float(rel.max()), None,
                                           _verdict(rel.max() <= WHITEN_TOL), trials=rel.size,
                                           detail={'tolerance': WHITEN_TOL})
    else:
        frag['whitening_identity'] = Check.skipped('whitening_identity', 'cross_checks = 0')
    return frag


def estimate_loss_ratio(X, fixed_y, k, alpha=0.5, trials=1000, rng=None, dist='mixture', workers=1, desc=None,
                        callbacks=None):
    """E[L(w_hat)] / L(w*) for a fixed response, L(w) = ||Xw - y||^2.

    Also checks E[L(w_hat)] - L(w*) = MSPE[w_hat] draw by draw (the residual of w* is orthogonal to the span of X).
    """
    rng = rng or RngStream(0)
    _check_k(k, X.d)
    y = _check_vector(fixed_y, X.n)
    F = factorize(X)
    w_ls = F.pinv_apply(y)
    l_star = _sq(X.entries @ w_ls - y)
    if l_star <= LOSS_SPAN_TOL * _sq(y):
        raise ResponseInColumnSpan(f'L(w*) = {l_star:.3g} vanishes, y lies in the column span of X')
    _, sampler = _sampler(X, _distribution(X, F, dist, alpha), F)

    def block(r, start, m):
        loss, mspe = [], []
        for _ in range(m):
            w_hat = subsampled_ls(X, sampler.sample_k(k, r)[0], y).w_hat.w
            loss.append(_sq(X.entries @ w_hat - y))
            mspe.append(_sq(X.entries @ (w_hat - w_ls)))
        return {'loss': np.array(loss), 'mspe': np.array(mspe)}

    res = run_blocks(block, trials, rng, workers, desc, callbacks)
    ratio = Estimate.of(res['loss']).scaled(1 / l_star)
    ident = Estimate.of(res['loss'] - l_star - res['mspe'])
    mspe = Estimate.of(res['mspe'])
    return {'expected_loss_ratio': Check('expected_loss_ratio', ratio.mean, ratio.se,
                                         _verdict(ratio.mean >= 1 - Z_SLACK * ratio.se - ATOL), trials=trials,
                                         detail={'loss_star': l_star}),
            'loss_identity': Check('loss_identity', ident.mean, ident.se,
                                   _verdict(within_se(ident.mean, ident.se, atol=1e-10 * (l_star + mspe.mean))),
                                   trials=trials,
                                   detail={'loss_excess': ratio.mean * l_star - l_star, 'mspe': mspe.mean})}


def check_marginals(X, q, k, trials, rng, workers=1, desc=None, callbacks=None):
    """Multiplicities s_i of sampled designs against E[s_i] = (k - d) q_i + l_i, and, for small n,
    cov(s_i, s_j) = 1{i=j} E[s_i] - (k - d) q_i q_j - l_ij^2."""
    n, d = X.shape
    _check_k(k, d)
    F, sampler = _sampler(X, q)
    lev = compute_scores(X, F).leverage
    expected = (k - d) * q.q + lev

    def block(r, start, m):
        return {'s': np.array([multiplicity_counts(sampler.sample_k(k, r)[0], n) for _ in range(m)], dtype=float)}

    s = run_blocks(block, trials, rng, workers, desc, callbacks)['s']
    mean, se = moments(s)
    ok = within_se(mean - expected, se)
    i = int(np.argmax(np.abs(mean - expected)))
    frag = {'marginal_means': Check('marginal_means', float(abs(mean[i] - expected[i])), float(se[i]),
                                    _verdict(ok.all()), trials=trials,
                                    detail={'expected': expected, 'empirical': mean, 'se_per_index': se,
                                            'flagged': np.flatnonzero(~ok)}),
            'marginal_sum': Check('marginal_sum', math.fsum(expected), None,
                                  _verdict(abs(math.fsum(expected) - k) <= SUM_TOL * k), detail={'k': k})}
    if n > MAX_COV_ROWS:
        LOGGER.info(f'{PREFIX}marginal covariance skipped for n={n} > {MAX_COV_ROWS} rows')
        frag['marginal_covariance'] = Check.skipped('marginal_covariance', f'n={n} > {MAX_COV_ROWS} rows')
        return frag
    cov_expected = np.diag(expected) - (k - d) * np.outer(q.q, q.q) - cross_leverage(X, F) ** 2
    c = s - mean
    cov, cov_se = moments(c[:, :, None] * c[:, None, :])
    flagged = ~within_se(cov - cov_expected, cov_se)
    z = np.abs(cov - cov_expected) / np.maximum(cov_se, ATOL)
    frag['marginal_covariance'] = Check('marginal_covariance', float(np.abs(cov - cov_expected).max()), None,
                                        trials=trials,
                                        detail={'max_z': float(z.max()), 'flagged_entries': int(flagged.sum()),
                                                'expected': cov_expected, 'empirical': cov})
    return frag


def check_unbiasedness(X, q, k, trials, rng, workers=1, desc=None, y=None, callbacks=None):
    # E[(S_pi X)^+ S_pi] = X^+ entry-wise, and E[w_hat] = w_LS when a response y is given
    _check_k(k, X.d)
    F, sampler = _sampler(X, q)
    x_pinv = F.r_inv @ F.q.T

    def block(r, start, m):
        return {'P': np.array([sketch_pinv(X, sampler.sample_k(k, r)[0]) for _ in range(m)])}

    P = run_blocks(block, trials, rng, workers, desc, callbacks)['P']
    mean, se = moments(P)
    diff = mean - x_pinv
    ok = within_se(diff, se, atol=ATOL * (1 + np.abs(x_pinv).max()))
    frag = {'unbiasedness': Check('unbiasedness', float(np.linalg.norm(diff)), float(np.linalg.norm(se)),
                                  _verdict(ok.all()), trials=trials,
                                  detail={'max_z': float((np.abs(diff) / np.maximum(se, ATOL)).max()),
                                          'entries_outside': int((~ok).sum())})}
    if y is not None:
        y = _check_vector(y, X.n)
        w_ls = F.pinv_apply(y)
        w_mean, w_se = moments(P @ y)
        ok = within_se(w_mean - w_ls, w_se, atol=ATOL * (1 + np.abs(w_ls).max()))
        frag['unbiased_estimate'] = Check('unbiased_estimate', float(np.abs(w_mean - w_ls).max()),
                                          float(w_se.max()), _verdict(ok.all()), trials=trials,
                                          detail={'w_hat_mean': w_mean, 'w_ls': w_ls})
    return frag


def check_inverse_moment(X, q, k, trials, rng, workers=1, desc=None, callbacks=None):
    # E[(X'S'SX)^-1] <= k/(k-d+1) (X'X)^-1 in the Loewner order, with 3 SE slack on the identity
    n, d = X.shape
    _check_k(k, d)
    F, sampler = _sampler(X, q)

    def block(r, start, m):
        return {'G': np.array([sketch_gram_inverse(X, sampler.sample_k(k, r)[0]) for _ in range(m)])}

    mean, se = moments(run_blocks(block, trials, rng, workers, desc, callbacks)['G'])
    factor = k / (k - d + 1)
    bound = factor * F.gram_inverse
    slack = bound + Z_SLACK * np.linalg.norm(se) * np.eye(d) - mean
    lam = float(linalg.eigvalsh((slack + slack.T) / 2).min())
    return {'inverse_moment': Check('inverse_moment', lam, float(np.linalg.norm(se)),
                                    _verdict(lam >= -ATOL * (1 + np.linalg.norm(bound))), trials=trials,
                                    detail={'k': k, 'factor': factor, 'empirical': mean, 'bound': bound})}


def check_trial_count(X, runs, rng, debug=True, workers=1, desc=None, callbacks=None):
    # Mean Bernoulli trials of the size-d sampler with q = p_lev against 2d(ln d + 1)
    n, d = X.shape
    F = factorize(X)
    q = pure_distribution(compute_scores(X, F), n, d, 'leverage')
    sampler = VolumeSampler(X, F, q, debug=debug)

    def block(r, start, m):
        stats = [sampler.sample_d(r)[1] for _ in range(m)]
        return {'trials': np.array([s.bernoulli_trials for s in stats], dtype=float),
                'trace': np.array([s.max_trace_error for s in stats])}

    res = run_blocks(block, runs, rng, workers, desc, callbacks)
    est = Estimate.of(res['trials'])
    expected = 2 * d * (math.log(d) + 1)
    frag = {'trial_count': Check('trial_count', est.mean, est.se, _verdict(est.mean <= 1.2 * expected), trials=runs,
                                 detail={'d': d, 'expected': expected, 'limit': 1.2 * expected,
                                         'max': float(res['trials'].max())})}
    if debug:
        err = float(res['trace'].max())
        frag['trace_identity'] = Check('trace_identity', err, None, _verdict(err <= TRACE_TOL * d), trials=runs,
                                       detail={'d': d, 'tolerance': TRACE_TOL * d})
    else:
        frag['trace_identity'] = Check.skipped('trace_identity', 'debug mode off')
    return frag


def check_oracle(X, q, k, draws, rng, tol=0.01, workers=1, desc=None, callbacks=None):
    """Total variation between the empirical law of sampled designs and the enumerated law.

    Laws are compared on the multiset of selected rows; the order of a sequence is an independent uniform
    permutation and would need far more draws to resolve.
    """
    _check_k(k, X.d)
    exact = multiset_law(brute_force_vs_probs(X, q, k))
    _, sampler = _sampler(X, q)

    def block(r, start, m):
        return {'seq': np.array([sampler.sample_k(k, r)[0].indices for _ in range(m)])}

    tv = tv_distance(empirical_law(run_blocks(block, draws, rng, workers, desc, callbacks)['seq']), exact)
    return {'oracle_tv': Check('oracle_tv', tv, None, _verdict(tv <= tol), trials=draws,
                               detail={'k': k, 'q': q.kind, 'outcomes': len(exact), 'tolerance': tol})}


def check_base_case(X, q, draws, rng, tol=0.01, workers=1, desc=None, callbacks=None):
    # Unordered supports of size-d volume samples against their enumerated probabilities
    d = X.d
    exact = multiset_law(brute_force_vs_probs(X, q, d))
    _, sampler = _sampler(X, q)

    def block(r, start, m):
        return {'seq': np.array([sampler.sample_d(r)[0] for _ in range(m)])}

    emp = empirical_law(run_blocks(block, draws, rng, workers, desc, callbacks)['seq'])
    dev = max(abs(emp.get(s, 0.0) - exact.get(s, 0.0)) for s in set(emp) | set(exact))
    return {'vs_d_support': Check('vs_d_support', dev, None, _verdict(dev <= tol), trials=draws,
                                  detail={'exact': exact, 'empirical': emp, 'tolerance': tol})}


def check_score_identities(count, rng, max_n=100, max_d=10):
    # sum(l) = d and sum(v) = phi on random Gaussian matrices
    errs = []
    for _ in range(count):
        d = int(rng.integers(1, max_d + 1))
        n = int(rng.integers(d, max_n + 1))
        X = DesignMatrix(rng.normal(size=(n, d)))
        F = factorize(X)
        S = compute_scores(X, F)
        errs.append(max(abs(S.leverage.sum() - d) / d, abs(S.inverse.sum() - S.phi) / S.phi))
    err = max(errs)
    return {'score_identities': Check('score_identities', err, None, _verdict(err <= SUM_TOL), trials=count,
                                      detail={'tolerance': SUM_TOL})}


def check_trend(ks, estimates, name, scale_by_k=True):
    """Monte Carlo values over a growing k grid: non-increasing within 3 SE (after scaling by k when asked) and
    strictly smaller at the last k than at the first."""
    vals = [e.scaled(k) if scale_by_k else e for k, e in zip(ks, estimates)]
    mono = all(b.mean <= a.mean + Z_SLACK * math.hypot(a.se, b.se) + ATOL for a, b in zip(vals, vals[1:]))
    strict = estimates[-1].mean < estimates[0].mean
    return {name: Check(name, vals[-1].mean - vals[0].mean, math.hypot(vals[-1].se, vals[0].se),
                        _verdict(mono and strict), trials=sum(e.n for e in estimates),
                        detail={'k': list(ks), 'values': [v.mean for v in vals], 'se_per_k': [v.se for v in vals],
                                'scaled_by_k': scale_by_k, 'monotone': mono, 'strict_decrease': strict})}


def estimate_averaging(X, model, k, alpha=0.5, ms=(1, 16), trials=1000, rng=None, tol=0.15, workers=1, desc=None,
                       dist='mixture', callbacks=None):
    # Excess MSE of m averaged designs against (1/m) times the single-design excess
    rng = rng or RngStream(0)
    ex = [estimate_mse_excess(X, model, k, alpha, trials, rng.child(i), dist=dist, designs=m, workers=workers,
                              desc=desc and f'{desc} m={m}', callbacks=callbacks)['mse_excess']
          for i, m in enumerate(ms)]
    base = ex[0].value * ms[0]
    if base <= 0:
        LOGGER.warning(f'{PREFIX}WARNING: single-design excess {base:.3g} <= 0, averaging check skipped')
        return {'averaging': Check.skipped('averaging', 'single-design excess is 0')}
    ratios = [e.value * m / base for e, m in zip(ex, ms)]
    dev = max(abs(r - 1) for r in ratios)
    return {'averaging': Check('averaging', dev, None, _verdict(dev <= tol), trials=trials * len(ms),
                               detail={'m': list(ms), 'excess': [e.value for e in ex], 'se_per_m': [e.se for e in ex],
                                       'scaled_ratio': ratios, 'tolerance': tol})}


def check_hetero_symmetry(X, w_star, sigma_a, sigma_b, k, alpha=0.5, trials=1000, rng=None, workers=1, desc=None,
                          dist='mixture', callbacks=None):
    # Excess under two noise profiles that a symmetry of X maps onto each other must agree within 3 SE
    rng = rng or RngStream(0)
    ex = [estimate_mse_excess(X, ResponseModel('heteroscedastic', w_star=w_star, sigma=s), k, alpha, trials,
                              rng.child(i), dist=dist, workers=workers, desc=desc, callbacks=callbacks)['mse_excess']
          for i, s in enumerate((sigma_a, sigma_b))]
    a, b = ex
    se = math.hypot(a.se, b.se)
    return {'hetero_symmetry': Check('hetero_symmetry', a.value - b.value, se,
                                     _verdict(within_se(a.value - b.value, se)), trials=2 * trials,
                                     detail={'excess': [a.value, b.value], 'noise_trace': float(np.sum(
                                         np.square(sigma_a)))})}
