"""scikit-learn style estimators.

As with ``sklearn.linear_model.Lasso``, ``fit(X, y)`` takes the measurement
matrix as ``X`` (rows are measurements, columns are signal components) and
stores the recovered signal in ``coef_``; ``predict(X)`` returns ``X @ coef_``.
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .baselines import CosampConfig, cosamp
from .channels import AWGNChannel, PoissonChannel
from .estimators import estimate
from .gamp import GampConfig, run_gamp_arrays
from .metrics import ErrorMetric, parse_metric
from .priors import GaussianSlab, SignalPrior, WeibullSlab


def _metric(m):
    return m if isinstance(m, ErrorMetric) else parse_metric(m)


class _PriorParams:
    def _prior(self):
        if self.slab == "gaussian":
            return SignalPrior(self.p, GaussianSlab(self.slab_variance))
        if self.slab == "weibull":
            return SignalPrior(self.p, WeibullSlab(self.slab_scale, self.slab_shape))
        raise ValueError(f"slab must be 'gaussian' or 'weibull', got {self.slab!r}")


class MetricOptimalRegressor(_PriorParams, RegressorMixin, BaseEstimator):
    """GAMP followed by the Bayes estimate for ``metric``.

    Fitted attributes: ``coef_`` (the estimate), ``q_`` and ``mu_`` (the
    equivalent scalar channel), ``posterior_mean_`` and ``result_`` (the
    full :class:`~csmetric.gamp.ScalarChannelResult`).
    """

    def __init__(self, metric="absolute", p=0.03, slab="gaussian", slab_variance=1.0, slab_scale=1.0,
                 slab_shape=0.5, channel="awgn", noise_var=3e-4, poisson_scale=100.0,
                 max_iterations=20, damping=1.0, mean_removal=True):
        self.metric = metric
        self.p = p
        self.slab = slab
        self.slab_variance = slab_variance
        self.slab_scale = slab_scale
        self.slab_shape = slab_shape
        self.channel = channel
        self.noise_var = noise_var
        self.poisson_scale = poisson_scale
        self.max_iterations = max_iterations
        self.damping = damping
        self.mean_removal = mean_removal

    def _channel(self):
        if self.channel == "awgn":
            return AWGNChannel(self.noise_var)
        if self.channel == "poisson":
            return PoissonChannel(self.poisson_scale)
        raise ValueError(f"channel must be 'awgn' or 'poisson', got {self.channel!r}")

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        prior, channel = self._prior(), self._channel()
        cfg = GampConfig(max_iterations=self.max_iterations, damping=self.damping, mean_removal=self.mean_removal)
        res = run_gamp_arrays(X, y.astype(float), channel, prior, cfg)
        self.result_ = res
        self.q_ = res.q
        self.mu_ = res.mu
        self.posterior_mean_ = res.x_mmse
        self.coef_ = estimate(_metric(self.metric), prior, res.q, res.mu)
        self.n_iter_ = res.iterations_run
        self.n_features_in_ = X.shape[1]
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return X @ self.coef_


class ScalarChannelDenoiser(_PriorParams, TransformerMixin, BaseEstimator):
    """Elementwise metric-optimal denoiser for ``q = x + Normal(0, mu)``.

    ``fit`` only validates; ``transform`` maps every entry of ``q``.
    """

    def __init__(self, metric="absolute", mu=1e-2, p=0.03, slab="gaussian", slab_variance=1.0,
                 slab_scale=1.0, slab_shape=0.5):
        self.metric = metric
        self.mu = mu
        self.p = p
        self.slab = slab
        self.slab_variance = slab_variance
        self.slab_scale = slab_scale
        self.slab_shape = slab_shape

    def fit(self, X, y=None):
        X = check_array(X)
        if not (self.mu > 0):
            raise ValueError("mu must be > 0")
        self._prior()
        _metric(self.metric)
        self.n_features_in_ = X.shape[1]
        return self

    def transform(self, X):
        check_is_fitted(self, "n_features_in_")
        X = check_array(X)
        flat = estimate(_metric(self.metric), self._prior(), X.ravel(), self.mu)
        return flat.reshape(X.shape)


class CoSaMPRegressor(RegressorMixin, BaseEstimator):
    """CoSaMP with ``sparsity_k`` nonzeros (``None``: ``ceil(p * n_features)``)."""

    def __init__(self, sparsity_k=None, p=0.03, max_iterations=50, halting_tolerance=1e-6):
        self.sparsity_k = sparsity_k
        self.p = p
        self.max_iterations = max_iterations
        self.halting_tolerance = halting_tolerance

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        n = X.shape[1]
        if self.sparsity_k is None:
            cfg = CosampConfig.for_prior(self.p, n, max_iterations=self.max_iterations,
                                         halting_tolerance=self.halting_tolerance)
        else:
            cfg = CosampConfig(self.sparsity_k, self.max_iterations, self.halting_tolerance)
        res = cosamp(y.astype(float), X, cfg)
        self.coef_ = res.x
        self.n_iter_ = res.iterations
        self.residual_norms_ = np.asarray(res.residual_norms)
        self.rank_deficient_ = res.rank_deficient
        self.n_features_in_ = n
        return self

    def predict(self, X):
        check_is_fitted(self, "coef_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} columns, expected {self.n_features_in_}")
        return X @ self.coef_
