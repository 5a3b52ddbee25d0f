"""Estimator-style wrappers around the posterior computations.

The classes follow the scikit-learn conventions (constructor stores
hyperparameters, ``fit`` returns ``self``, fitted attributes end in ``_``),
so ``get_params``/``set_params``/``clone`` work as usual.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .arrival_inference import GammaPosterior, bayes_lambda, sample_lambda, update_gamma
from .exceptions import UnsupportedDataError
from .queue_core import SampleData, ServiceDist
from .service_inference import BetaStacyState, posterior_update, truncate_prior
from .transforms import build_transforms, stability_probability


def as_sample(X, censored=None) -> SampleData:
    """Coerce ``X`` into :class:`SampleData`.

    Accepts a :class:`SampleData`, or an array with columns ``(a, s)`` or
    ``(a, s, censored)``.
    """
    if isinstance(X, SampleData):
        return X
    X = check_array(X, ensure_min_samples=0, dtype=float)
    if X.shape[1] not in (2, 3):
        raise UnsupportedDataError("expected columns (a, s) or (a, s, censored)")
    flags = X[:, 2].astype(bool) if X.shape[1] == 3 else censored
    return SampleData(X[:, 0], X[:, 1], flags)


def _times(x) -> np.ndarray:
    return check_array(np.asarray(x, dtype=float).reshape(-1, 1), ensure_min_samples=0).ravel()


class ArrivalRateEstimator(BaseEstimator):
    """Gamma(a, b) posterior for the arrival rate.

    Parameters
    ----------
    a, b : float
        Prior shape and rate.

    Attributes
    ----------
    posterior_ : GammaPosterior
    lambda_ : float
        Posterior mean.
    """

    def __init__(self, a: float = 1.0, b: float = 1.0):
        self.a = a
        self.b = b

    def fit(self, X, y=None):
        arrivals = X.inter_arrivals if isinstance(X, SampleData) else _times(X)
        self.posterior_ = update_gamma(GammaPosterior(self.a, self.b), arrivals)
        self.lambda_ = bayes_lambda(self.posterior_)
        return self

    def sample(self, k: int, seed=0) -> np.ndarray:
        check_is_fitted(self, "posterior_")
        return sample_lambda(self.posterior_, k, seed)


class ServiceDistributionEstimator(BaseEstimator):
    """Beta-Stacy posterior for the service cdf.

    Parameters
    ----------
    c : float or callable
        Precision function.
    H : ServiceDist
        Prior guess; defaults to Exp(1).
    bound : float, optional
        Truncation bound.
    n_cells : int
        Grid resolution.

    Attributes
    ----------
    posterior_ : BetaStacyState
    cdf_ : GridCdf
        Bayes estimate of the service cdf.
    mean_ : float
        Posterior mean of the service mean.
    """

    def __init__(self, c=1.0, H: ServiceDist | None = None, bound: float | None = None,
                 n_cells: int = 2000):
        self.c = c
        self.H = H
        self.bound = bound
        self.n_cells = n_cells

    def _prior(self) -> BetaStacyState:
        H = self.H if self.H is not None else ServiceDist.exponential(1.0)
        state = BetaStacyState(self.c, H, n_cells=self.n_cells)
        return truncate_prior(state, self.bound) if self.bound is not None else state

    def fit(self, X, y=None, censored=None):
        if isinstance(X, SampleData):
            data = X
        else:
            s = _times(X)
            data = SampleData(np.ones(0), s, censored)
        self.posterior_ = posterior_update(self._prior(), data)
        self.cdf_ = self.posterior_.bayes_cdf()
        self.mean_ = self.posterior_.mean_of_mean()
        return self

    def predict(self, t) -> np.ndarray:
        """Bayes estimate of the cdf at ``t``."""
        check_is_fitted(self, "cdf_")
        return np.asarray(self.cdf_.cdf(np.asarray(t, dtype=float)))

    def transform(self, z) -> np.ndarray:
        """LST of the Bayes estimate at ``z``."""
        check_is_fitted(self, "cdf_")
        return np.asarray(self.cdf_.lst(np.asarray(z, dtype=float)))


class MG1Estimator(BaseEstimator):
    """Joint plug-in estimator for an M/G/1 queue.

    ``fit`` takes a :class:`SampleData` or an ``(n, 2|3)`` array with columns
    ``a, s[, censored]``.  ``predict(z)`` returns the waiting-time LST
    estimate and ``transform(z)`` the full ``z, g, w, q, n`` table.
    """

    def __init__(self, a: float = 1.0, b: float = 1.0, c=1.0, H: ServiceDist | None = None,
                 bound: float | None = None, n_cells: int = 2000):
        self.a = a
        self.b = b
        self.c = c
        self.H = H
        self.bound = bound
        self.n_cells = n_cells

    def fit(self, X, y=None):
        data = as_sample(X)
        self.arrival_ = ArrivalRateEstimator(self.a, self.b).fit(data)
        self.service_ = ServiceDistributionEstimator(self.c, self.H, self.bound, self.n_cells).fit(data)
        self.transforms_ = build_transforms(self.arrival_.posterior_, self.service_.posterior_,
                                            trunc_M=self.bound)
        self.lambda_ = self.transforms_.lam
        self.mu_ = self.transforms_.mu_hat
        self.rho_ = self.transforms_.rho
        return self

    def predict(self, z) -> np.ndarray:
        check_is_fitted(self, "transforms_")
        return np.asarray(self.transforms_.w(np.asarray(z, dtype=float)))

    def transform(self, z) -> dict:
        check_is_fitted(self, "transforms_")
        return self.transforms_.table(np.asarray(z, dtype=float))

    def stability(self, k: int = 2000, seed=0):
        check_is_fitted(self, "transforms_")
        return stability_probability(self.arrival_.posterior_, self.service_.posterior_, k, seed)
