import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from csmetric.channels import AWGNChannel, PoissonChannel
from csmetric.gamp import run_gamp
from csmetric.model import make_instance
from csmetric.priors import sparse_gaussian, sparse_weibull
from csmetric.wrappers import CoSaMPRegressor, MetricOptimalRegressor, ScalarChannelDenoiser


@pytest.fixture(scope="module")
def inst():
    return make_instance(sparse_gaussian(), AWGNChannel(3e-4), 400, 160, 2)


def test_regressor_matches_functional_api(inst):
    reg = MetricOptimalRegressor(metric="squared").fit(inst.phi, inst.y)
    res = run_gamp(inst)
    assert np.array_equal(reg.coef_, res.x_mmse) and reg.mu_ == res.mu
    assert reg.n_features_in_ == 400
    assert np.allclose(reg.predict(inst.phi), inst.phi @ reg.coef_)


def test_regressor_params_and_clone(inst):
    reg = MetricOptimalRegressor(metric="power(0.5)", damping=0.8)
    params = reg.get_params()
    assert params["metric"] == "power(0.5)" and params["damping"] == 0.8
    twin = clone(reg)
    assert twin.get_params() == params and not hasattr(twin, "coef_")
    with pytest.raises(NotFittedError):
        twin.predict(inst.phi)


def test_regressor_poisson():
    pinst = make_instance(sparse_weibull(), PoissonChannel(100), 300, 120, 1)
    reg = MetricOptimalRegressor(metric="absolute", slab="weibull", channel="poisson").fit(pinst.phi, pinst.y)
    assert reg.coef_.min() >= 0


def test_regressor_bad_config(inst):
    with pytest.raises(ValueError):
        MetricOptimalRegressor(slab="cauchy").fit(inst.phi, inst.y)
    with pytest.raises(ValueError):
        MetricOptimalRegressor(channel="laplace").fit(inst.phi, inst.y)
    reg = MetricOptimalRegressor().fit(inst.phi, inst.y)
    with pytest.raises(ValueError):
        reg.predict(inst.phi[:, :10])


def test_denoiser_transform():
    q = np.array([[0.0, 0.5], [1.0, -0.2]])
    den = ScalarChannelDenoiser(metric="absolute", mu=0.01).fit(q)
    out = den.transform(q)
    assert out.shape == q.shape and out[0, 0] == 0.0
    with pytest.raises(ValueError):
        ScalarChannelDenoiser(mu=-1.0).fit(q)


def test_cosamp_regressor(inst):
    reg = CoSaMPRegressor().fit(inst.phi, inst.y)
    assert np.count_nonzero(reg.coef_) <= 12
    assert clone(reg).get_params()["sparsity_k"] is None
    assert np.count_nonzero(CoSaMPRegressor(sparsity_k=5).fit(inst.phi, inst.y).coef_) <= 5
