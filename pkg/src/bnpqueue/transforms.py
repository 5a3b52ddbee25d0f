"""Plug-in transform estimators and the posterior stability probability."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .arrival_inference import GammaPosterior, bayes_lambda, sample_lambda
from .exceptions import ConfigurationError, InstabilityError
from .queue_core import TransformSet
from .rng import make_rng
from .service_inference import BetaStacyState


def z_grid(n: int = 200, lo: float = 1e-3, hi: float = 20.0) -> np.ndarray:
    """``{0}`` plus ``n`` log-spaced points on ``[lo, hi]``, used for sup-norms."""
    return np.concatenate([[0.0], np.geomspace(lo, hi, n)])


def build_transforms(
    lam_post: GammaPosterior,
    bs_post: BetaStacyState,
    trunc_M: float | None = None,
    require_stable: bool = False,
) -> TransformSet:
    """Plug-in estimators ``g*, w*, q*, n*`` from the two posteriors.

    ``g*`` is the LST of the Bayes estimate of the service cdf and
    ``rho_hat = lambda_hat * mu_hat``.  With ``trunc_M`` the service cdf is
    cut at ``M`` (residual mass placed at ``M``) and ``mu_hat`` becomes
    ``int_0^M (1 - G_hat)``.

    The returned set always evaluates ``g``; ``w``, ``q`` and ``n`` raise
    :class:`InstabilityError` when ``rho_hat >= 1``.  Pass
    ``require_stable=True`` to raise at construction instead.
    """
    lam = bayes_lambda(lam_post)
    G = bs_post.bayes_cdf()
    if trunc_M is not None:
        if not trunc_M > 0:
            raise ConfigurationError("truncation bound must be positive")
        G = G.restrict(trunc_M)
        mu = G.mean()
    else:
        mu = bs_post.mean_of_mean()
    rho = lam * mu
    if require_stable and rho >= 1:
        raise InstabilityError(f"estimated traffic intensity {rho:.6g} >= 1")
    return TransformSet(lam, G.lst, rho, mu, bound=trunc_M, mu_hat=mu)


@dataclass(frozen=True)
class StabilityReport:
    p_stable: float
    se: float
    k: int

    def to_json(self) -> str:
        return json.dumps({"p_stable": self.p_stable, "se": self.se, "k": self.k})


def stability_probability(
    lam_post: GammaPosterior,
    bs_post: BetaStacyState,
    k: int,
    seed,
    lam_draws=None,
    mu_draws=None,
) -> StabilityReport:
    """Monte Carlo estimate of the posterior probability that ``lambda * mu < 1``.

    ``lambda`` is drawn from the Gamma posterior and ``mu`` is the mean of an
    independent posterior path of the service cdf.  ``lam_draws`` and
    ``mu_draws`` override the samplers (used to stub degenerate draws).
    """
    if k < 1:
        raise ConfigurationError("k must be at least 1")
    if lam_draws is None:
        lam_draws = sample_lambda(lam_post, k, make_rng(seed, "stability-lambda"))
    if mu_draws is None:
        mu_draws = bs_post.sample_survival(k, make_rng(seed, "stability-paths")).means()
    lam_draws = np.broadcast_to(np.asarray(lam_draws, dtype=float), (k,))
    mu_draws = np.broadcast_to(np.asarray(mu_draws, dtype=float), (k,))
    p = float(np.mean(lam_draws * mu_draws < 1.0))
    return StabilityReport(p, math.sqrt(p * (1.0 - p) / k), int(k))
