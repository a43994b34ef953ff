# VSDesign 🚀, GPL-3.0 license
"""
Verify identities and bounds of volume-rescaled designs by Monte Carlo on built-in or user-supplied instances

Usage:
    $ python path/to/verify.py --cfg verify.yaml --seed 0
    $ python path/to/verify.py --input data/examples/toy3x2_y.csv --trials 20000 --workers 4
"""

import os
import sys
from pathlib import Path

import numpy as np
import yaml

FILE = Path(__file__).resolve()
ROOT = FILE.parents[0]  # root directory
if str(ROOT) not in sys.path:
    sys.path.append(str(ROOT))  # add ROOT to PATH
ROOT = Path(os.path.relpath(ROOT, Path.cwd()))  # relative

from models.common import DesignMatrix, factorize
from models.responses import ResponseModel
from models.sampler import RngStream
from models.scores import ALPHA_RANGE, KINDS, compute_scores, make_distribution
from utils.callbacks import Callbacks
from utils.datasets import load_matrix
from utils.general import (LOGGER, NUM_THREADS, AlphaOutOfRange, ArgumentParser, ConfigError, DesignError,
                           EnumerationTooLarge, KTooSmall, Profile, ResponseInColumnSpan, ZeroProbabilityEntry,
                           check_yaml, colorstr, increment_path, print_args)
from utils.harness import (Check, EvalReport, check_base_case, check_hetero_symmetry, check_inverse_moment,
                           check_marginals, check_oracle, check_score_identities, check_trend, check_trial_count,
                           check_unbiasedness, estimate_averaging, estimate_loss_ratio, estimate_mse_excess,
                           estimate_mspe_excess)
from utils.loggers import Loggers
from utils.metrics import Estimate

COUNT_KEYS = ('count', 'draws', 'trials', 'runs')  # replaced by --trials
SKIP_ERRORS = EnumerationTooLarge, KTooSmall, ResponseInColumnSpan, ZeroProbabilityEntry  # instance unsuited to a check


def load_instances(cfg, seed, input=None):
    # {name: (DesignMatrix, y or None)}, random instances from their own stream so checks stay independent
    if input:
        X, y = load_matrix(input)
        return {'input': (X, y)}
    rng = RngStream(seed, stream_id=1)
    out = {}
    for i, (name, entry) in enumerate(cfg['instances'].items()):
        if 'rows' in entry:
            y = entry.get('y')
            out[name] = DesignMatrix(entry['rows']), None if y is None else np.array(y, dtype=np.float64)
        else:
            r = rng.child(i)
            out[name] = DesignMatrix(r.normal(size=(entry['n'], entry['d']))), r.normal(size=entry['n'])
    return out


def _response(y):
    # Fixed response model, or None when the instance has no response
    return None if y is None else ResponseModel('fixed', fixed_y=y)


def _w_star(X, y):
    return factorize(X).pinv_apply(y) if y is not None else np.ones(X.d)


def run(cfg=ROOT / 'data/verify.yaml',  # verify.yaml path
        input=None,  # CSV instance replacing the built-in ones
        seed=0,  # master seed
        trials=None,  # replaces every trial count in cfg
        workers=1,  # threads per Monte Carlo check
        alpha=0.5,  # mixture weight of the design distribution
        k=None,  # replaces the single design size of each check, k grids stay
        dist='mixture',  # design distribution of every check except the oracle grid
        designs=1,  # designs averaged per trial in the model check
        model=None,  # response model override for the model check
        sigma=None,
        sigma_list=None,
        prior_scale=None,
        project=ROOT / 'runs/verify',  # save to project/name
        name='exp',  # save to project/name
        exist_ok=False,  # existing project/name ok, do not increment
        out=None,  # explicit output directory
        opt=None,
        callbacks=None,
        ):
    if not ALPHA_RANGE[0] <= alpha <= ALPHA_RANGE[1]:
        raise AlphaOutOfRange(f'alpha={alpha} outside [{ALPHA_RANGE[0]}, {ALPHA_RANGE[1]}]')
    if designs < 1:
        raise ConfigError(f'--designs must be >= 1, got {designs}')

    # Directories
    save_dir = Path(out) if out else increment_path(Path(project) / name, exist_ok=exist_ok)  # increment run
    save_dir.mkdir(parents=True, exist_ok=True)  # make dir

    # Config
    with open(check_yaml(cfg), errors='ignore') as f:
        cfg = yaml.safe_load(f)  # check dict
    if trials is not None:
        if trials < 1:
            raise ConfigError(f'--trials must be >= 1, got {trials}')
        cfg = {key: {**v, **{c: trials for c in COUNT_KEYS if c in v}} if isinstance(v, dict) and key != 'instances'
               else v for key, v in cfg.items()}
    instances = load_instances(cfg, seed, input)

    def pick(s, key='instance'):
        return 'input' if input else s[key]

    def picks(s):
        return ['input'] if input else s['instances']

    def size(s):
        return s['k'] if k is None else k

    def distribution(X):
        return make_distribution(compute_scores(X, factorize(X)), X.n, X.d, dist, alpha)

    # Loggers
    callbacks = callbacks or Callbacks()
    loggers = Loggers(save_dir, opt)
    for hook in 'on_run_start', 'on_check_start', 'on_block_end', 'on_check_end', 'on_report_end':
        callbacks.register_action(hook, name='loggers', callback=getattr(loggers, hook))
    report = EvalReport(config={'seed': seed, 'input': None if input is None else str(input), 'trials': trials,
                                'alpha': alpha, 'k': k, 'dist': dist, 'designs': designs,
                                'suite': {key: v for key, v in cfg.items() if key != 'instances'},
                                'instances': {key: list(X.shape) for key, (X, _) in instances.items()}})
    root_rng = RngStream(seed, stream_id=0)
    dt = []  # (check, seconds)
    mc = {'workers': workers, 'callbacks': callbacks}  # Monte Carlo keyword arguments

    def step(name, fn, suffix=''):
        # One check on its own stream child, instance-level preconditions mark it skipped
        callbacks.run('on_check_start', name)
        with Profile() as p:
            try:
                frag = fn(root_rng.child(len(dt)))  # one stream per step, in suite order
            except SKIP_ERRORS as e:
                frag = {name: Check.skipped(name, f'{type(e).__name__}: {e}')}
        dt.append((f'{name}/{suffix}' if suffix else name, p.dt))
        report.add(frag, suffix)
        callbacks.run('on_check_end', frag)
        return frag

    callbacks.run('on_run_start')

    # Score identities
    s = cfg['score_identities']
    step('score_identities', lambda r: check_score_identities(s['count'], r, s['max_n'], s['max_d']))

    # Sampler against the enumerated law, over the configured distributions
    s = cfg['oracle']
    for inst in picks(s):
        X, _ = instances[inst]
        S = compute_scores(X, factorize(X))
        for kk in s['k']:
            for kind in s['dist']:
                step('oracle_tv', lambda r: check_oracle(X, make_distribution(S, X.n, X.d, kind, alpha), kk,
                                                         s['draws'], r, s['tol'], **mc), f'{inst}/k={kk}/{kind}')

    # Size-d volume sampling supports
    s = cfg['base_case']
    X, _ = instances[pick(s)]
    step('vs_d_support', lambda r: check_base_case(X, distribution(X), s['draws'], r, s['tol'], **mc))

    # Rejection sampler trial counts and trace identity, Gaussian matrices of growing d
    s = cfg['trial_count']
    for d in s['d']:
        Xd = DesignMatrix(RngStream(seed, stream_id=2).child(d).normal(size=(s['rows_per_d'] * d, d)))
        step('trial_count', lambda r: check_trial_count(Xd, s['runs'], r, **mc), f'd={d}')

    # Unbiasedness and the inverse moment bound
    s = cfg['unbiasedness']
    X, y = instances[pick(s)]
    step('unbiasedness', lambda r: check_unbiasedness(X, distribution(X), size(s), s['trials'], r, y=y, **mc))
    s = cfg['inverse_moment']
    X, _ = instances[pick(s)]
    q = distribution(X)
    for kk in s['k']:
        step('inverse_moment', lambda r: check_inverse_moment(X, q, kk, s['trials'], r, **mc), f'k={kk}')

    # Multiplicity means and covariances
    s = cfg['marginals']
    for inst in picks(s):
        X, _ = instances[inst]
        step('marginals', lambda r: check_marginals(X, distribution(X), size(s), s['trials'], r, **mc), inst)

    # Excess risk trends over k for the fixed response
    s = cfg['mse_trend']
    X, y = instances[pick(s)]
    fixed = _response(y)
    if fixed is None:
        report.add({'mse_trend': Check.skipped('mse_trend', 'instance has no response column')})
    else:
        ex = [step('mse_excess', lambda r: estimate_mse_excess(X, fixed, kk, alpha, s['trials'], r, dist, **mc),
                   f'k={kk}').get('mse_excess') for kk in s['k']]
        if all(e is not None and e.status != 'skipped' for e in ex):
            step('mse_trend', lambda r: check_trend(s['k'], [e.estimate for e in ex], 'mse_trend'))
        else:
            report.add({'mse_trend': Check.skipped('mse_trend', 'excess not available at every k')})
    s = cfg['loss_trend']
    X, y = instances[pick(s)]
    if y is None:
        report.add({'loss_trend': Check.skipped('loss_trend', 'instance has no response column')})
    else:
        lr = [step('expected_loss_ratio', lambda r: estimate_loss_ratio(X, y, kk, alpha, s['trials'], r, dist, **mc),
                   f'k={kk}').get('expected_loss_ratio') for kk in s['k']]
        if all(e is not None and e.status != 'skipped' for e in lr):
            excess = [Estimate(e.value - 1, e.se, e.trials) for e in lr]  # ratio - 1
            step('loss_trend', lambda r: check_trend(s['k'], excess, 'loss_trend', scale_by_k=False))
            report.alias('expected_loss_ratio', f"expected_loss_ratio/k={s['k'][-1]}")
        else:
            report.add({'loss_trend': Check.skipped('loss_trend', 'loss ratio not available at every k')})

    # Whitening reduction and MSPE
    s = cfg['whitening']
    X, y = instances[pick(s)]
    m = _response(y) or ResponseModel('homoscedastic', w_star=_w_star(X, y), sigma=1.0)
    step('mspe_excess', lambda r: estimate_mspe_excess(X, m, size(s), alpha, s['trials'], r, dist,
                                                       cross_checks=s['cross_checks'], **mc))

    # Averaged designs
    s = cfg['averaging']
    X, y = instances[pick(s)]
    m = _response(y) or ResponseModel('homoscedastic', w_star=_w_star(X, y), sigma=1.0)
    step('averaging', lambda r: estimate_averaging(X, m, size(s), alpha, tuple(s['m']), s['trials'], r, s['tol'],
                                                   dist=dist, **mc))

    # Heteroscedastic noise on rows swapped by a symmetry of the toy matrix
    s = cfg['hetero_symmetry']
    if input:
        report.add({'hetero_symmetry': Check.skipped('hetero_symmetry', 'needs the built-in symmetric instance')})
    else:
        X, _ = instances[s['instance']]
        a, b = np.zeros(X.n), np.zeros(X.n)
        a[0] = b[1] = s['sigma']
        step('hetero_symmetry', lambda r: check_hetero_symmetry(X, np.ones(X.d), a, b, size(s), alpha, s['trials'],
                                                                r, dist=dist, **mc))

    # Response model excess, the canonical mse_excess / minimax_ratio / aopt_trace
    s = cfg['model']
    X, y = instances[pick(s)]
    kind = model or s['kind']
    sig = sigma_list if sigma_list is not None else (sigma if sigma is not None else s['sigma'])
    if kind == 'fixed':
        m = _response(y)
        if m is None:
            raise ConfigError('--model fixed needs a response column in --input')
    else:
        m = ResponseModel(kind, w_star=_w_star(X, y), sigma=sig,
                          prior_scale=s['prior_scale'] if prior_scale is None else prior_scale)
    step('mse_excess', lambda r: estimate_mse_excess(X, m, size(s), alpha, s['trials'], r, dist, designs, **mc))

    # Report
    callbacks.run('on_report_end', report)
    slow = max(dt, key=lambda x: x[1])
    LOGGER.info(f'Speed: {sum(t for _, t in dt):.1f}s total, slowest {slow[0]} {slow[1]:.1f}s')
    return report


def parse_opt():
    parser = ArgumentParser()
    parser.add_argument('--cfg', type=str, default=ROOT / 'data/verify.yaml', help='verify.yaml path')
    parser.add_argument('--input', type=str, default=None, help='CSV instance replacing the built-in ones')
    parser.add_argument('--seed', type=int, default=0, help='master seed')
    parser.add_argument('--trials', type=int, default=None, help='replace every trial count in --cfg')
    parser.add_argument('--workers', type=int, default=1, help=f'threads per check, max {NUM_THREADS} recommended')
    parser.add_argument('--alpha', type=float, default=0.5, help=f'mixture weight in {list(ALPHA_RANGE)}')
    parser.add_argument('--k', type=int, default=None, help='design size replacing the single k of each check')
    parser.add_argument('--dist', choices=KINDS, default='mixture', help='i.i.d. sampling distribution q')
    parser.add_argument('--designs', type=int, default=1, help='designs averaged per trial in the model check')
    parser.add_argument('--model', choices=('homo', 'hetero', 'bayes', 'fixed'), default=None, help='response model')
    parser.add_argument('--sigma', type=float, default=None, help='noise standard deviation')
    parser.add_argument('--sigma-list', type=lambda s: [float(x) for x in s.split(',')], default=None,
                        help='per-row noise standard deviations, comma-separated')
    parser.add_argument('--prior-scale', type=float, default=None, help='Bayesian prior standard deviation')
    parser.add_argument('--project', default=ROOT / 'runs/verify', help='save to project/name')
    parser.add_argument('--name', default='exp', help='save to project/name')
    parser.add_argument('--exist-ok', action='store_true', help='existing project/name ok, do not increment')
    parser.add_argument('--out', type=str, default=None, help='output directory, overrides --project/--name')
    opt = parser.parse_args()
    opt.cfg = check_yaml(opt.cfg)  # check YAML
    print_args(FILE.stem, opt)
    return opt


def main(opt):
    return run(**vars(opt), opt=opt)


if __name__ == "__main__":
    opt = parse_opt()
    try:
        report = main(opt)
    except DesignError as e:
        LOGGER.error(f"{colorstr('red', 'bold', type(e).__name__)}: {e}")
        sys.exit(e.exit_code)
    sys.exit(0 if report.passed else 3)
