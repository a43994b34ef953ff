# VSDesign 🚀, GPL-3.0 license
"""
Response models: homoscedastic, heteroscedastic, Bayesian and fixed (worst-case) responses

Usage:
    from models.responses import ResponseModel, generate_response
    model = ResponseModel('homoscedastic', w_star=[1, 2], sigma=0.5)
    y, w = generate_response(model, X, RngStream(0))
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from models.common import Weights, factorize, least_squares
from utils.general import ConfigError, ModelDimensionMismatch

KINDS = ('homoscedastic', 'heteroscedastic', 'bayesian', 'fixed')
ALIASES = {'homo': 'homoscedastic', 'hetero': 'heteroscedastic', 'bayes': 'bayesian'}


@dataclass(frozen=True)
class ResponseModel:
    kind: str = 'homoscedastic'
    w_star: Optional[np.ndarray] = None  # w* (prior mean for the Bayesian model)
    sigma: object = 0.0  # scalar, or n-vector for heteroscedastic noise
    prior_scale: float = 1.0  # w ~ Normal(w*, prior_scale^2 I)
    fixed_y: Optional[np.ndarray] = None

    def __post_init__(self):
        kind = ALIASES.get(self.kind, self.kind)
        if kind not in KINDS:
            raise ConfigError(f"unknown response model '{self.kind}', valid models are {KINDS}")
        object.__setattr__(self, 'kind', kind)
        sigma = np.array(self.sigma, dtype=np.float64)
        if sigma.ndim > 1 or not np.isfinite(sigma).all() or (sigma < 0).any():
            raise ConfigError(f'sigma must be a non-negative scalar or vector, got {self.sigma}')
        if kind == 'heteroscedastic' and sigma.ndim == 0:
            raise ConfigError('heteroscedastic model needs a per-row sigma vector (--sigma-list)')
        object.__setattr__(self, 'sigma', sigma)
        if self.prior_scale < 0:
            raise ConfigError(f'prior_scale must be non-negative, got {self.prior_scale}')
        if kind == 'fixed':
            if self.fixed_y is None:
                raise ConfigError('fixed model needs a response vector (y column in --input)')
            object.__setattr__(self, 'fixed_y', np.array(self.fixed_y, dtype=np.float64).reshape(-1))
        elif self.w_star is None:
            raise ConfigError(f'{kind} model needs w*')
        if self.w_star is not None:
            w = self.w_star.w if isinstance(self.w_star, Weights) else self.w_star
            object.__setattr__(self, 'w_star', np.array(w, dtype=np.float64).reshape(-1))

    def check(self, X):
        # Model dimensions against an n x d design matrix
        n, d = X.shape
        if self.w_star is not None and len(self.w_star) != d:
            raise ModelDimensionMismatch(f'w* has {len(self.w_star)} entries, design matrix has d={d}')
        if self.sigma.ndim == 1 and len(self.sigma) != n:
            raise ModelDimensionMismatch(f'sigma list has {len(self.sigma)} entries, design matrix has n={n}')
        if self.fixed_y is not None and len(self.fixed_y) != n:
            raise ModelDimensionMismatch(f'fixed y has {len(self.fixed_y)} entries, design matrix has n={n}')

    def noise_trace(self, X, F=None):
        # E||xi_{y|X}||^2, tr(Var[z]) for the Bayesian model
        self.check(X)
        if self.kind == 'fixed':
            F = F or factorize(X)
            w = least_squares(F, X, self.fixed_y).w
            return float(((X.entries @ w - self.fixed_y) ** 2).sum())
        s2 = self.sigma ** 2
        return float(s2.sum()) if s2.ndim else X.n * float(s2)

    @property
    def noiseless(self):
        return self.kind == 'fixed' or not self.sigma.any()


def generate_response(model, X, rng, F=None):
    """Draw one response vector and its ground truth weights.

    homoscedastic/heteroscedastic: y = Xw* + xi, ground truth w*
    bayesian: w ~ Normal(w*, prior_scale^2 I), y = Xw + xi, ground truth the realized w
    fixed: y = fixed_y, ground truth X^+ y
    """
    model.check(X)
    n, d = X.shape
    if model.kind == 'fixed':
        F = F or factorize(X)
        return model.fixed_y.copy(), least_squares(F, X, model.fixed_y)
    w = model.w_star
    if model.kind == 'bayesian':
        w = w + model.prior_scale * rng.normal(size=d)
    y = X.entries @ w + model.sigma * rng.normal(size=n)
    return y, Weights(w)
