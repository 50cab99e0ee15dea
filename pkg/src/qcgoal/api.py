"""scikit-learn style front end.

``fit`` takes the quantity-of-interest weights ``q`` (length ``2M``) in
place of a design matrix; hyperparameters are the model constants and, for
the adaptive selector, the tolerances. ``predict`` evaluates further linear
functionals on the fitted mixed-model configuration.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from . import estimator as _est
from ._validation import check_chain_vector, check_functionals, check_partition
from .adaptive import AdaptiveConfig, run_adaptive
from .model import ModelParams

__all__ = ["ModelingErrorEstimator", "AdaptiveQuasicontinuum"]


class _ChainMixin:
    def _params(self) -> ModelParams:
        return ModelParams(M=self.M, a0=self.a0, k0=self.k0, k1=self.k1, k2=self.k2)

    def _check_q(self, q, params):
        q = check_chain_vector(getattr(q, "q", q), params.n_atoms, "q")
        if not np.any(q):
            raise ValueError("q must have at least one nonzero entry")
        return q

    def predict(self, X):
        """Evaluate functional(s) ``X`` on the fitted mixed solution ``y_ac_``."""
        check_is_fitted(self, "y_ac_")
        X, single = check_functionals(X, 2 * self.M)
        values = X @ self.y_ac_
        return values[0] if single else values


class ModelingErrorEstimator(_ChainMixin, BaseEstimator):
    """Error estimates for a fixed atomistic/continuum partition.

    Parameters
    ----------
    M, a0, k0, k1, k2 : model constants, see :class:`qcgoal.model.ModelParams`.
    region : None, (lo, hi), "lo..hi", boolean array or Partition
        Atomistic atoms; ``None`` means fully continuum.

    Attributes
    ----------
    partition_ : Partition
    y_ac_, g_ac_ : ndarray
        Mixed primal solution and influence function.
    report_ : EstimatorReport
    eta1_, eta2_ : float
    """

    def __init__(self, M=500, a0=1.0, k0=1.0, k1=2.0, k2=2.0, region=None):
        self.M = M
        self.a0 = a0
        self.k0 = k0
        self.k1 = k1
        self.k2 = k2
        self.region = region

    def fit(self, q, y=None):
        params = self._params()
        q = self._check_q(q, params)
        self.params_ = params
        self.partition_ = check_partition(self.region, params.M)
        self.q_ = q
        self.y_ac_ = _est.solve_primal(params, self.partition_)
        self.g_ac_ = _est.solve_dual(params, self.partition_, q)
        self.report_ = _est.estimate(params, self.partition_, q)
        self.eta1_ = self.report_.eta1
        self.eta2_ = self.report_.eta2
        return self

    def local_indicators(self):
        """``(eta2_at, eta2_el, eta2_tot)`` of the fitted partition."""
        check_is_fitted(self, "report_")
        r = self.report_
        return r.eta2_at, r.eta2_el, r.eta2_tot

    def exact_error(self) -> float:
        """True error in the quantity of interest (needs a full atomistic solve)."""
        check_is_fitted(self, "report_")
        return _est.exact_error(self.params_, self.partition_, self.q_)


class AdaptiveQuasicontinuum(_ChainMixin, BaseEstimator):
    """Adaptive choice of the atomistic region for a quantity of interest.

    Attributes
    ----------
    trace_ : list of IterationRecord
    partition_ : Partition
        Final atomistic/continuum split.
    converged_ : bool
    n_iter_ : int
    eta1_ : float
        Estimate of the last iteration.
    y_ac_ : ndarray
    """

    def __init__(self, M=500, a0=1.0, k0=1.0, k1=2.0, k2=2.0,
                 tau_gl=1e-10, tau_div=10.0, max_iter=50):
        self.M = M
        self.a0 = a0
        self.k0 = k0
        self.k1 = k1
        self.k2 = k2
        self.tau_gl = tau_gl
        self.tau_div = tau_div
        self.max_iter = max_iter

    def fit(self, q, y=None):
        params = self._params()
        q = self._check_q(q, params)
        config = AdaptiveConfig(self.tau_gl, self.tau_div, self.max_iter)
        result = run_adaptive(params, q, config)
        self.params_ = params
        self.q_ = q
        self.trace_ = result.trace
        self.partition_ = result.final
        self.converged_ = result.converged
        self.n_iter_ = len(result.trace)
        self.eta1_ = result.trace[-1].eta1
        self.y_ac_ = _est.solve_primal(params, result.final)
        return self
