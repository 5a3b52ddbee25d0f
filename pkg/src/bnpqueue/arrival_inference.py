"""Conjugate Gamma inference for the Poisson arrival rate.

The Gamma law is parameterised by shape ``a`` and rate ``b`` (mean ``a / b``).
Observing inter-arrival times ``A_1, ..., A_n`` maps ``(a, b)`` to
``(a + n, b + sum A_i)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .exceptions import ConfigurationError, UndefinedMomentError
from .queue_core import SampleData
from .rng import make_rng


@dataclass(frozen=True)
class GammaPosterior:
    """Gamma(a, b) law of the arrival rate, shape-rate parameterisation."""

    a: float
    b: float

    def __post_init__(self):
        if not (self.a > 0 and self.b > 0 and math.isfinite(self.a) and math.isfinite(self.b)):
            raise ConfigurationError(f"Gamma parameters must be positive, got ({self.a}, {self.b})")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))

    @property
    def mean(self) -> float:
        return self.a / self.b

    @property
    def var(self) -> float:
        return self.a / self.b**2

    def to_dict(self) -> dict:
        return {"a": self.a, "b": self.b}


def _arrivals(data) -> np.ndarray:
    if isinstance(data, SampleData):
        return data.inter_arrivals
    a = np.asarray(data, dtype=float).ravel()
    if np.any(~(a > 0)):
        raise ConfigurationError("inter-arrival times must be positive")
    return a


def update_gamma(prior: GammaPosterior, data) -> GammaPosterior:
    """Posterior ``(a + n, b + sum A)`` given inter-arrival times.

    ``data`` may be a :class:`SampleData` or an array of inter-arrival times.
    """
    a = _arrivals(data)
    return GammaPosterior(prior.a + a.size, prior.b + float(np.sum(a)))


def bayes_lambda(post: GammaPosterior) -> float:
    """Posterior mean ``a / b`` (Bayes estimate under squared error)."""
    return post.a / post.b


def predictive(prior: GammaPosterior, data, a_next):
    """Predictive density of the next inter-arrival time.

    ``f(x) = (a+n) (b+S)^(a+n) / (b+S+x)^(a+n+1)`` with ``S = sum A``,
    evaluated in log space.
    """
    post = update_gamma(prior, data)
    x = np.asarray(a_next, dtype=float)
    with np.errstate(invalid="ignore"):
        logf = math.log(post.a) + post.a * math.log(post.b) - (post.a + 1) * np.log(post.b + x)
    out = np.where(x < 0, 0.0, np.exp(logf))
    return out if out.ndim else float(out)


def predictive_mean(prior: GammaPosterior, data) -> float:
    """``E[A_{n+1} | A_1..A_n] = (b + sum A) / (a + n - 1)``; needs ``a + n > 1``."""
    post = update_gamma(prior, data)
    if post.a <= 1:
        raise UndefinedMomentError(f"predictive mean needs a + n > 1, got {post.a}")
    return post.b / (post.a - 1.0)


def sample_lambda(post: GammaPosterior, k: int, seed, label: str = "lambda") -> np.ndarray:
    """``k`` draws from Gamma(a, b) with NumPy's Marsaglia-Tsang sampler."""
    if k < 0:
        raise ConfigurationError("k must be nonnegative")
    rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, label)
    return rng.gamma(post.a, 1.0 / post.b, size=int(k))


def normal_ks(x, sd: float) -> float:
    """Kolmogorov-Smirnov distance between the sample ``x`` and N(0, sd^2)."""
    x = np.sort(np.asarray(x, dtype=float))
    k = x.size
    cdf = 0.5 * (1.0 + special.erf(x / (sd * math.sqrt(2.0))))
    hi = np.arange(1, k + 1) / k - cdf
    lo = cdf - np.arange(0, k) / k
    return float(max(hi.max(), lo.max()))


@dataclass(frozen=True)
class LambdaBvmReport:
    n: int
    k: int
    ks: float
    target_sd: float

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "k": self.k, "ks": self.ks, "target_sd": self.target_sd})


def bvm_lambda(
    lambda0: float,
    n: int,
    k: int,
    seed,
    prior: GammaPosterior = GammaPosterior(1.0, 1.0),
) -> LambdaBvmReport:
    """Compare ``sqrt(n) (lambda - lambda_hat)`` under the posterior with N(0, lambda0^2).

    Data are ``n`` Exp(lambda0) inter-arrival times; ``k`` posterior draws are
    taken and their KS distance to the normal limit is reported.
    """
    if n < 1 or k < 1:
        raise ConfigurationError("need n >= 1 and k >= 1")
    rng_data = make_rng(seed, "bvm-lambda-data")
    data = rng_data.exponential(1.0 / lambda0, n)
    post = update_gamma(prior, data)
    draws = sample_lambda(post, k, make_rng(seed, "bvm-lambda-draws"))
    stat = math.sqrt(n) * (draws - bayes_lambda(post))
    return LambdaBvmReport(int(n), int(k), normal_ks(stat, lambda0), float(lambda0))
