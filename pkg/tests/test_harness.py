# VSDesign 🚀, GPL-3.0 license
import json

import numpy as np
import pytest

from models.common import DesignMatrix, factorize
from models.responses import ResponseModel
from models.sampler import RngStream
from models.scores import compute_scores, make_distribution
from utils.callbacks import Callbacks
from utils.general import RankDeficient, ResponseInColumnSpan
from utils.harness import (METRICS, Check, EvalReport, check_base_case, check_hetero_symmetry, check_inverse_moment,
                           check_marginals, check_oracle, check_score_identities, check_trend, check_trial_count,
                           check_unbiasedness, estimate_averaging, estimate_loss_ratio, estimate_mse_excess,
                           estimate_mspe_excess, run_blocks)
from utils.metrics import Estimate, aopt_trace, moments, tv_distance


def _mixture(X):
    return make_distribution(compute_scores(X, factorize(X)), X.n, X.d)


def _within(c, z=4):
    return abs(c.value) <= z * c.se + 1e-12


def test_aopt_trace(toy):
    assert aopt_trace(toy, [0, 1]) == pytest.approx(2)
    assert aopt_trace(toy, [2, 0, 0]) == pytest.approx(3)
    with pytest.raises(RankDeficient):
        aopt_trace(toy, [1, 1])


def test_moments_order_independent():
    x = np.random.default_rng(0).normal(size=(1000, 3)) * 1e8
    m1, s1 = moments(x)
    m2, s2 = moments(x[::-1])
    np.testing.assert_array_equal(m1, m2)
    np.testing.assert_array_equal(s1, s2)
    assert Estimate.of([1.0, 1.0, 1.0]).se == 0


def test_tv_distance():
    assert tv_distance({(0,): 0.5, (1,): 0.5}, {(0,): 1.0}) == pytest.approx(0.5)
    assert tv_distance({(0, 1): 1.0}, {(0, 1): 1.0}) == 0


def test_run_blocks_order():
    def fn(r, start, m):
        return {'i': np.arange(start, start + m), 'u': r.random(m)}

    a = run_blocks(fn, 1000, RngStream(1), workers=4)
    b = run_blocks(fn, 1000, RngStream(1), workers=1)
    np.testing.assert_array_equal(a['i'], np.arange(1000))
    np.testing.assert_array_equal(a['u'], b['u'])


def test_block_callbacks(toy):
    blocks = []
    callbacks = Callbacks()
    callbacks.register_action('on_block_end', name='record', callback=lambda b, total: blocks.append((b, total)))
    run_blocks(lambda r, start, m: {'u': r.random(m)}, 600, RngStream(1), workers=2, callbacks=callbacks)
    assert blocks == [(1, 3), (2, 3), (3, 3)]  # blocks of 256 trials, in order

    blocks.clear()
    estimate_mse_excess(toy, ResponseModel('homo', w_star=[1.0, 1.0], sigma=1.0), k=3, trials=300,
                        rng=RngStream(2), callbacks=callbacks)
    assert blocks == [(1, 2), (2, 2)]
    blocks.clear()
    check_marginals(toy, _mixture(toy), 4, 10, RngStream(3), callbacks=callbacks)
    assert blocks == [(1, 1)]


def test_mse_excess_noiseless(toy):
    # y = Xw* is recovered exactly by every full-rank sketch
    frag = estimate_mse_excess(toy, ResponseModel('homo', w_star=[1.0, -2.0], sigma=0.0), k=3, trials=300)
    assert frag['mse_excess'].value == pytest.approx(0, abs=1e-20)
    assert frag['minimax_ratio'].status == 'skipped'
    assert frag['mse_bias'].status == 'pass'
    assert frag['aopt_trace'].detail['phi'] == pytest.approx(4 / 3)
    assert frag['aopt_trace'].value >= 4 / 3  # subset traces dominate the full one


def test_mse_excess_homoscedastic(gaussian):
    X = gaussian(20, 3, seed=1)
    frag = estimate_mse_excess(X, ResponseModel('homo', w_star=[1.0, 0.5, -1.0], sigma=1.0), k=6, trials=3000,
                               rng=RngStream(2))
    assert frag['mse_excess'].value > 0
    assert _within(frag['mse_decomposition_residual'])
    assert frag['minimax_ratio'].detail['noise_trace'] == pytest.approx(20)
    assert frag['mse_excess'].trials == 3000


def test_mse_excess_workers_deterministic(gaussian):
    X = gaussian(12, 2, seed=5)
    model = ResponseModel('homo', w_star=[1.0, 1.0], sigma=0.3)
    a = estimate_mse_excess(X, model, k=4, trials=600, rng=RngStream(9), workers=1)
    b = estimate_mse_excess(X, model, k=4, trials=600, rng=RngStream(9), workers=3)
    assert {k: c.to_dict() for k, c in a.items()} == {k: c.to_dict() for k, c in b.items()}


def test_mspe_orthonormal(gaussian):
    # Orthonormal columns make prediction error and parameter error coincide
    q, _ = np.linalg.qr(gaussian(10, 2, seed=7).entries)
    X = DesignMatrix(q)
    model = ResponseModel('homo', w_star=[1.0, 2.0], sigma=0.5)
    mse = estimate_mse_excess(X, model, k=4, trials=500, rng=RngStream(3))
    mspe = estimate_mspe_excess(X, model, k=4, trials=500, rng=RngStream(3))
    assert mspe['mspe_excess'].value == pytest.approx(mse['mse_excess'].value, rel=1e-6)
    assert mspe['whitening_identity'].status == 'pass'


def test_whitening_identity(gaussian):
    X = DesignMatrix(gaussian(30, 3, seed=2).entries * [1.0, 10.0, 0.1])
    frag = estimate_mspe_excess(X, ResponseModel('homo', w_star=[1.0, 1.0, 1.0], sigma=1.0), k=8, trials=300,
                                cross_checks=50)
    assert frag['whitening_identity'].status == 'pass'
    assert frag['whitening_identity'].trials == 50


def test_loss_ratio(toy, toy_y):
    frag = estimate_loss_ratio(toy, toy_y, k=4, trials=3000, rng=RngStream(4))
    c = frag['expected_loss_ratio']
    assert c.status == 'pass' and c.value >= 1
    assert c.detail['loss_star'] == pytest.approx(1 / 3)
    assert frag['loss_identity'].status == 'pass'
    with pytest.raises(ResponseInColumnSpan):
        estimate_loss_ratio(toy, toy.entries @ [1.0, 1.0], k=4, trials=10)


def test_marginals_toy(toy):
    q = _mixture(toy)
    frag = check_marginals(toy, q, 4, 20000, RngStream(5))
    d = frag['marginal_means'].detail
    np.testing.assert_allclose(d['expected'], 2 * np.array([17, 17, 14]) / 48 + 2 / 3, atol=1e-12)
    assert (np.abs(d['empirical'] - d['expected']) <= 4 * d['se_per_index']).all()
    assert frag['marginal_sum'].status == 'pass' and frag['marginal_sum'].value == pytest.approx(4)
    assert frag['marginal_covariance'].detail['max_z'] < 5


def test_marginals_k_equals_d(toy):
    frag = check_marginals(toy, _mixture(toy), 2, 5000, RngStream(6))
    np.testing.assert_allclose(frag['marginal_means'].detail['expected'], [2 / 3] * 3, atol=1e-12)
    # each row at most once, so the diagonal covariance is l_i (1 - l_i)
    np.testing.assert_allclose(np.diag(frag['marginal_covariance'].detail['expected']), [2 / 9] * 3, atol=1e-12)


def test_marginal_covariance_skipped(gaussian):
    X = gaussian(11, 2)
    frag = check_marginals(X, _mixture(X), 3, 50, RngStream(0))
    assert frag['marginal_covariance'].status == 'skipped'


def test_unbiasedness(toy, toy_y):
    frag = check_unbiasedness(toy, _mixture(toy), 4, 20000, RngStream(7), y=toy_y)
    assert frag['unbiasedness'].detail['max_z'] < 4.5
    d = frag['unbiased_estimate'].detail
    np.testing.assert_allclose(d['w_ls'], [4 / 3, 7 / 3], atol=1e-12)


def test_inverse_moment(gaussian):
    X = gaussian(15, 3, seed=8)
    for k in 3, 5:
        c = check_inverse_moment(X, _mixture(X), k, 4000, RngStream(k))['inverse_moment']
        assert c.status == 'pass'
        assert c.detail['factor'] == pytest.approx(k / (k - 2))


def test_trial_count(gaussian):
    frag = check_trial_count(gaussian(40, 4, seed=3), 2000, RngStream(8))
    assert frag['trial_count'].status == 'pass'
    assert frag['trace_identity'].status == 'pass'
    assert check_trial_count(gaussian(10, 2), 10, RngStream(8), debug=False)['trace_identity'].status == 'skipped'


def test_oracle_and_base_case(toy):
    q = _mixture(toy)
    c = check_oracle(toy, q, 3, 20000, RngStream(9), tol=0.03)['oracle_tv']
    assert c.status == 'pass' and c.detail['outcomes'] == 7
    c = check_base_case(toy, q, 6000, RngStream(10), tol=0.03)['vs_d_support']
    assert c.status == 'pass'
    assert c.detail['exact'] == pytest.approx({(0, 1): 1 / 3, (0, 2): 1 / 3, (1, 2): 1 / 3})


def test_score_identities():
    c = check_score_identities(20, RngStream(11))['score_identities']
    assert c.status == 'pass' and c.trials == 20


def test_check_trend():
    ks = [5, 10, 20]
    down = [Estimate(1 / k, 0.001, 100) for k in ks]
    assert check_trend(ks, down, 'trend')['trend'].status == 'pass'
    up = [Estimate(0.1 * k, 0.001, 100) for k in ks]
    assert check_trend(ks, up, 'trend')['trend'].status == 'fail'
    flat = [Estimate(1.0, 0.001, 100) for _ in ks]
    assert check_trend(ks, flat, 'trend', scale_by_k=False)['trend'].status == 'fail'  # no strict decrease


def test_averaging(toy):
    model = ResponseModel('homo', w_star=[1.0, 1.0], sigma=1.0)
    c = estimate_averaging(toy, model, 4, ms=(1, 4), trials=4000, rng=RngStream(12), tol=0.25)['averaging']
    assert c.status == 'pass'
    assert c.detail['scaled_ratio'][0] == 1


def test_hetero_symmetry(toy):
    # Swapping rows 0, 1 and both columns maps the toy matrix onto itself
    c = check_hetero_symmetry(toy, [1.0, 1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], 4, trials=4000,
                              rng=RngStream(13))['hetero_symmetry']
    assert _within(c)


def test_eval_report():
    report = EvalReport({'seed': 0})
    assert set(METRICS) <= set(report.checks) and report.passed
    report.add({'oracle_tv': Check('oracle_tv', 0.004, None, 'pass', trials=100)}, suffix='toy3x2')
    report.add({'mse_excess/toy': Check('mse_excess/toy', 0.5, 0.01, trials=50)})
    report.alias('mse_excess', 'mse_excess/toy')
    assert report.trial_count == 150
    assert report.checks['mse_excess'].detail['same_as'] == 'mse_excess/toy'
    report.add({'bad': Check('bad', float('nan'), None, 'fail', trials=1)})
    assert report.failures == ['bad'] and not report.passed
    doc = json.loads(json.dumps(report.to_dict()))
    assert doc['metrics']['bad']['value'] is None
    assert doc['metrics']['oracle_tv/toy3x2']['status'] == 'pass'
    assert doc['metrics']['mspe_excess']['status'] == 'skipped'
