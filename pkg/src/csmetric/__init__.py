"""Metric-optimal estimation for noisy linear mixing systems."""

from .baselines import ChannelUnsupported, CosampConfig, CosampResult, cosamp, cosamp_instance, posterior_mean
from .channels import AWGNChannel, PoissonChannel
from .estimators import (estimate, estimate_generic, estimate_mmae, estimate_mmse, estimate_support,
                         estimate_wsupport)
from .gamp import (GampConfig, GampDivergenceError, QuadratureConvergenceError, ScalarChannelResult,
                   input_denoiser, output_denoiser, run_gamp, run_gamp_arrays)
from .harness import ExperimentSpec, SpecError, run_experiment, run_scalar_channel_direct
from .limits import mmae_limit, mmsue_limit, mmue_scalar, mmwse_limit, roc_point, tau, tau_prime
from .metrics import (Absolute, Custom, ErrorMetric, Power, Squared, Support, WeightedSupport,
                      evaluate_error, parse_metric)
from .model import ProblemInstance, generate_matrix, make_instance, sample_signal
from .posterior import posterior
from .priors import GaussianSlab, SignalPrior, WeibullSlab, sparse_gaussian, sparse_weibull
from .wrappers import CoSaMPRegressor, MetricOptimalRegressor, ScalarChannelDenoiser

__version__ = "0.1.0"
