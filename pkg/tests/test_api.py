import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from qcgoal import AdaptiveQuasicontinuum, ModelingErrorEstimator, Partition, QuantityOfInterest
from qcgoal._validation import check_partition, parse_range
from qcgoal.estimator import estimate, exact_error, solve_primal
from qcgoal.model import ModelParams

Q16 = QuantityOfInterest.indicator(16, 2, 6).q


def test_get_params_and_clone():
    est = ModelingErrorEstimator(M=16, k2=1.0, region="-2..3")
    params = est.get_params()
    assert params == {"M": 16, "a0": 1.0, "k0": 1.0, "k1": 2.0, "k2": 1.0, "region": "-2..3"}
    cloned = clone(est)
    assert cloned.get_params() == params
    assert not hasattr(cloned, "report_")
    est.set_params(region=None)
    assert est.region is None


def test_fit_matches_functional_api():
    est = ModelingErrorEstimator(M=16, region=(-2, 3)).fit(Q16)
    p = ModelParams(M=16)
    part = Partition.from_region(16, -2, 3)
    assert est.partition_ == part
    assert est.eta1_ == estimate(p, part, Q16).eta1
    assert est.exact_error() == exact_error(p, part, Q16)
    at, el, tot = est.local_indicators()
    assert tot.shape == (32,)
    np.testing.assert_array_equal(est.y_ac_, solve_primal(p, part))


def test_predict_evaluates_functionals():
    est = ModelingErrorEstimator(M=16).fit(QuantityOfInterest(Q16))
    assert est.predict(Q16) == pytest.approx(Q16 @ est.y_ac_)
    X = np.vstack([Q16, np.ones(32)])
    np.testing.assert_allclose(est.predict(X), X @ est.y_ac_)
    with pytest.raises(ValueError):
        est.predict(np.ones(31))


def test_not_fitted():
    with pytest.raises(NotFittedError):
        ModelingErrorEstimator(M=16).predict(Q16)
    with pytest.raises(NotFittedError):
        ModelingErrorEstimator(M=16).local_indicators()


@pytest.mark.parametrize("bad", [np.zeros(32), np.ones(31), np.full(32, np.nan), np.ones((2, 32))])
def test_fit_rejects_bad_goal(bad):
    with pytest.raises(ValueError):
        ModelingErrorEstimator(M=16).fit(bad)


def test_fit_rejects_bad_params_and_region():
    with pytest.raises(ValueError):
        ModelingErrorEstimator(M=16, k0=-1).fit(Q16)
    with pytest.raises(ValueError):
        ModelingErrorEstimator(M=16, region=(-40, 3)).fit(Q16)
    with pytest.raises(ValueError):
        ModelingErrorEstimator(M=16, region="3..1").fit(Q16)
    with pytest.raises(ValueError):
        ModelingErrorEstimator(M=16, region=Partition.continuum(8)).fit(Q16)


def test_region_forms():
    flags = np.zeros(32, dtype=bool)
    flags[10:14] = True
    assert check_partition(flags, 16) == Partition(flags)
    assert check_partition("none", 16) == Partition.continuum(16)
    assert check_partition(" -2 .. 3 ", 16) == Partition.from_region(16, -2, 3)
    with pytest.raises(ValueError):
        check_partition(np.zeros(32, dtype=int), 16)
    assert parse_range("NONE") is None
    with pytest.raises(ValueError):
        parse_range("1-3")


def test_adaptive_estimator():
    est = AdaptiveQuasicontinuum(M=32, k1=1.5, k2=0.8, tau_gl=1e-8)
    q = QuantityOfInterest.indicator(32, 3, 9)
    est.fit(q)
    assert est.converged_
    assert est.n_iter_ == len(est.trace_)
    assert est.eta1_ <= 1e-8
    assert est.partition_ == est.trace_[-1].partition
    assert est.predict(q.q) == pytest.approx(q(est.y_ac_))
    assert clone(est).get_params()["tau_gl"] == 1e-8


def test_adaptive_estimator_rejects_bad_config():
    with pytest.raises(ValueError):
        AdaptiveQuasicontinuum(M=16, tau_div=0.5).fit(Q16)
