# VSDesign 🚀, GPL-3.0 license
"""
Randomized experimental design for linear regression: scores, sampled designs, estimates, verification and oracle

Usage:
    $ python path/to/design.py scores --input data/examples/toy3x2.csv
    $ python path/to/design.py sample --input data.csv --k 20 --designs 4 --seed 0
    $ python path/to/design.py estimate --input data_y.csv --plan runs/sample/exp/plan.json
    $ python path/to/design.py verify --seed 0 --workers 4
    $ python path/to/design.py oracle --input data/examples/toy3x2.csv --k 3 --dist leverage

Exit codes: 0 ok, 1 usage or parse error, 2 numerical precondition, 3 verification failure
"""

import json
import os
import sys
from pathlib import Path

import pandas as pd

FILE = Path(__file__).resolve()
ROOT = FILE.parents[0]  # root directory
if str(ROOT) not in sys.path:
    sys.path.append(str(ROOT))  # add ROOT to PATH
ROOT = Path(os.path.relpath(ROOT, Path.cwd()))  # relative

import verify
from models.common import factorize
from models.estimator import averaged_estimate, subsampled_ls
from models.sampler import RngStream, brute_force_vs_probs, sample_vs_k, volume_proposal
from models.scores import ALPHA_RANGE, KINDS, compute_scores, make_distribution, pure_distribution
from utils.datasets import load_matrix, load_plan, save_plan
from utils.general import (LOGGER, NUM_THREADS, AlphaOutOfRange, ArgumentParser, ConfigError, DesignError,
                           ZeroProbabilityEntry, check_file, colorstr, emojis, fmt_float, increment_path, print_args)
from utils.harness import LOSS_SPAN_TOL
from utils.metrics import multiset_law

SUBCOMMANDS = ('scores', 'sample', 'estimate', 'verify', 'oracle')


def _save(save_dir, name, doc):
    f = save_dir / name
    f.write_text(json.dumps(doc, indent=2) + '\n')
    return f


def _csv(save_dir, name, df):
    f = save_dir / name
    df.to_csv(f, index=False, float_format='%.17g')
    return f


def _config(opt):
    # Config echo for reports, output locations excluded so reports compare across runs
    return {k: v for k, v in vars(opt).items() if k not in ('out', 'project', 'name', 'exist_ok', 'workers')}


def _designs(X, F, q, S, k, designs, seed):
    # Design j draws from stream (seed, j), sample and estimate share this so plans reproduce in process
    proposal = volume_proposal(q, S)
    out = []
    for j in range(designs):
        pi, stats = sample_vs_k(X, F, q, k, RngStream(seed, stream_id=j), proposal=proposal)
        LOGGER.debug(f'design {j}: {stats}')
        out.append(pi)
    return out


def scores(opt, save_dir):
    # Leverage and inverse scores with the three pure distributions and the mixture
    X, _ = load_matrix(opt.input)
    F = factorize(X)
    S = compute_scores(X, F)
    dists, table = {}, {'row': range(X.n), 'leverage': S.leverage, 'inverse': S.inverse}
    for kind in KINDS[:3]:
        try:
            dists[kind] = pure_distribution(S, X.n, X.d, kind).q
            table[kind] = dists[kind]
        except ZeroProbabilityEntry as e:
            dists[kind] = {'skipped': str(e)}
    dists['mixture'] = table['mixture'] = make_distribution(S, X.n, X.d, 'mixture', opt.alpha).q
    doc = {'config': _config(opt), 'n': X.n, 'd': X.d, 'phi': S.phi, 'log_det_gram': F.log_det_gram,
           'condition': F.condition, 'leverage': S.leverage.tolist(), 'inverse': S.inverse.tolist(),
           'distributions': {k: v.tolist() if hasattr(v, 'tolist') else v for k, v in dists.items()}}
    df = pd.DataFrame(table)
    LOGGER.info(f'n={X.n}, d={X.d}, phi={fmt_float(S.phi)}, log det(X\'X)={fmt_float(F.log_det_gram)}')
    LOGGER.info(df.to_string(index=False, float_format=fmt_float))
    return doc, [_save(save_dir, 'scores.json', doc), _csv(save_dir, 'scores.csv', df)]


def sample(opt, save_dir):
    # One or more designs by rescaled volume sampling with multiplicities and rescale weights
    X, _ = load_matrix(opt.input)
    F = factorize(X)
    S = compute_scores(X, F)
    q = make_distribution(S, X.n, X.d, opt.dist, opt.alpha)
    designs = _designs(X, F, q, S, opt.k, opt.designs, opt.seed)
    for j, pi in enumerate(designs):
        m = pi.multiplicities()
        LOGGER.info(f'design {j}: pi={pi.indices.tolist()} support={len(pi.support)} '
                    f'multiplicities={ {int(i): int(m[i]) for i in pi.support} }')
    f = save_plan(save_dir / 'plan.json', designs, _config(opt))
    return {'config': _config(opt), 'plan': str(f)}, [f]


def estimate(opt, save_dir):
    # Subsampled least squares on each design, its average and the full least-squares solution
    X, y = load_matrix(opt.input)
    if y is None:
        raise ConfigError(f"estimate needs a response column, add a header ending in 'y' to {opt.input}")
    F = factorize(X)
    if opt.plan:
        designs = load_plan(opt.plan)
    else:
        S = compute_scores(X, F)
        designs = _designs(X, F, make_distribution(S, X.n, X.d, opt.dist, opt.alpha), S, opt.k, opt.designs, opt.seed)
    ests = [subsampled_ls(X, pi, {int(i): y[i] for i in pi.support}) for pi in designs]  # only queried responses
    w_ls = F.pinv_apply(y)
    loss = float(((X.entries @ w_ls - y) ** 2).sum())
    consistent = loss <= LOSS_SPAN_TOL * float(y @ y)
    doc = {'config': _config(opt),
           'estimates': [{'w_hat': e.w_hat.w.tolist(), 'indices': e.pi.indices.tolist(),
                          'condition_report': e.condition_report} for e in ests],
           'average': averaged_estimate(ests).w.tolist(),
           'w_ls': w_ls.tolist(),
           'loss_ls': loss,
           'flags': ['consistent-system'] if consistent else []}
    for j, e in enumerate(ests):
        LOGGER.info(f"design {j}: w_hat=[{', '.join(fmt_float(v) for v in e.w_hat.w)}] "
                    f'smin(S X)={e.condition_report:.6g}')
    LOGGER.info(f"average: [{', '.join(fmt_float(v) for v in doc['average'])}]")
    LOGGER.info(f"w_LS:    [{', '.join(fmt_float(v) for v in w_ls)}]{'  consistent-system' if consistent else ''}")
    return doc, [_save(save_dir, 'estimate.json', doc)]


def oracle(opt, save_dir):
    # Exact rescaled volume sampling law by enumeration, sequences and multisets
    X, _ = load_matrix(opt.input)
    F = factorize(X)
    q = make_distribution(compute_scores(X, F), X.n, X.d, opt.dist, opt.alpha)
    law = brute_force_vs_probs(X, q, opt.k)
    doc = {'config': _config(opt), 'sequences': [{'pi': list(s), 'p': p} for s, p in law.items()],
           'multisets': [{'support': list(s), 'p': p} for s, p in multiset_law(law).items()]}
    df = pd.DataFrame({'pi': [' '.join(map(str, s)) for s in law], 'p': list(law.values())})
    LOGGER.info(f'{len(law)} sequences with positive probability, top 10:')
    LOGGER.info(df.sort_values('p', ascending=False, kind='stable').head(10).to_string(index=False,
                                                                                    float_format=fmt_float))
    return doc, [_save(save_dir, 'oracle.json', doc), _csv(save_dir, 'oracle.csv', df)]


def run(opt):
    # Dispatch a subcommand, returns the process exit status
    if opt.command == 'verify':
        report = verify.run(input=opt.input, seed=opt.seed, trials=opt.trials, workers=opt.workers, alpha=opt.alpha,
                            k=opt.k, dist=opt.dist, designs=opt.designs, model=opt.model, sigma=opt.sigma,
                            sigma_list=opt.sigma_list, prior_scale=opt.prior_scale,
                            project=Path(opt.project) / 'verify', name=opt.name, exist_ok=opt.exist_ok, out=opt.out,
                            opt=opt)
        return 0 if report.passed else 3
    save_dir = Path(opt.out) if opt.out else increment_path(Path(opt.project) / opt.command / opt.name,
                                                            exist_ok=opt.exist_ok)
    save_dir.mkdir(parents=True, exist_ok=True)
    _, files = {'scores': scores, 'sample': sample, 'estimate': estimate, 'oracle': oracle}[opt.command](opt, save_dir)
    LOGGER.info(f"Results saved to {colorstr('bold', save_dir)}: {', '.join(f.name for f in files)}")
    return 0


def check_opt(opt):
    # Validate options that argparse cannot, actionable messages, exit code 1 (2 for alpha)
    if opt.command not in ('verify', 'scores') and opt.k is None and not (opt.command == 'estimate' and opt.plan):
        raise ConfigError(f'{opt.command} needs --k')
    if opt.command != 'verify' and not opt.input:
        raise ConfigError(f'{opt.command} needs --input')
    if opt.input:
        opt.input = check_file(opt.input, suffix=('.csv', '.txt'))
    for name in 'trials', 'designs', 'workers':
        v = getattr(opt, name)
        if v is not None and v < 1:
            raise ConfigError(f'--{name} must be >= 1, got {v}')
    if not ALPHA_RANGE[0] <= opt.alpha <= ALPHA_RANGE[1]:
        raise AlphaOutOfRange(f'--alpha={opt.alpha} outside [{ALPHA_RANGE[0]}, {ALPHA_RANGE[1]}]')
    if opt.seed < 0:
        raise ConfigError(f'--seed must be non-negative, got {opt.seed}')
    return opt


def parse_opt(argv=None):
    parser = ArgumentParser(description='Volume-rescaled experimental designs for linear regression')
    parser.add_argument('command', choices=SUBCOMMANDS, help='subcommand')
    parser.add_argument('--input', type=str, default=None, help='CSV experiment matrix, optional y column')
    parser.add_argument('--k', type=int, default=None, help='design size (responses queried, with repeats)')
    parser.add_argument('--alpha', type=float, default=0.5, help=f'mixture weight in {list(ALPHA_RANGE)}')
    parser.add_argument('--dist', choices=KINDS, default='mixture', help='i.i.d. sampling distribution q')
    parser.add_argument('--seed', type=int, default=0, help='master seed')
    parser.add_argument('--trials', type=int, default=None, help='verify: replace every trial count')
    parser.add_argument('--model', choices=('homo', 'hetero', 'bayes', 'fixed'), default=None,
                        help='verify: response model')
    parser.add_argument('--sigma', type=float, default=None, help='noise standard deviation')
    parser.add_argument('--sigma-list', type=lambda s: [float(x) for x in s.split(',')], default=None,
                        help='per-row noise standard deviations, comma-separated')
    parser.add_argument('--prior-scale', type=float, default=None, help='Bayesian prior standard deviation')
    parser.add_argument('--designs', type=int, default=1, help='independent designs, estimates are averaged')
    parser.add_argument('--plan', type=str, default=None, help='estimate: plan.json written by sample')
    parser.add_argument('--workers', type=int, default=1, help=f'harness threads, max {NUM_THREADS} recommended')
    parser.add_argument('--project', default=ROOT / 'runs', help='save to project/command/name')
    parser.add_argument('--name', default='exp', help='save to project/command/name')
    parser.add_argument('--exist-ok', action='store_true', help='existing project/name ok, do not increment')
    parser.add_argument('--out', type=str, default=None, help='output directory, overrides --project/--name')
    opt = parser.parse_args(argv)
    print_args(FILE.stem, opt)
    return opt


def main(argv=None):
    try:
        return run(check_opt(parse_opt(argv)))
    except DesignError as e:
        LOGGER.error(emojis(f"{colorstr('red', 'bold', type(e).__name__)}: {e} ❌"))
        return e.exit_code


if __name__ == "__main__":
    sys.exit(main())
