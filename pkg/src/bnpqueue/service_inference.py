"""Beta-Stacy prior and posterior for the service-time distribution.

A :class:`BetaStacyState` holds the precision function ``c``, the prior guess
``H`` and the (possibly right-censored) service observations.  Every derived
quantity is computed on one evaluation grid: ``n_cells`` uniform cells on
``[0, T_max]``, every observation time, and a short stretch of tail cells when
``H`` has unbounded support.

On a cell ``(t_{j-1}, t_j]`` the survival function is multiplied by an
independent factor ``W ~ Beta(b_j, da_j)`` with ``da_j = c dH`` over the cell
and ``b_j = c(t_j)(1 - H(t_j)) + M(t_j)``, where ``M`` counts the observations
still at risk.  An exact observation time carrying ``d`` deaths contributes a
fixed atom, ``W ~ Beta(beta + M - d, d)``.  This is the discrete beta-Stacy
construction; for constant ``c`` the product of expected factors telescopes
to the Dirichlet posterior ``(c H + N) / (c + n)`` at every grid point.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, replace
from functools import cached_property
from types import SimpleNamespace
from typing import Callable

import numpy as np

from .exceptions import (
    ConfigurationError,
    DegeneratePriorError,
    InconsistentTruncationError,
    TruncationError,
)
from .gridcdf import GridCdf, integrated_survival, stieltjes_lst
from .queue_core import SampleData, ServiceDist
from .rng import make_rng

N_CELLS = 2000
TAIL_CELLS = 200
GRID_QUANTILE_TAIL = 1e-4  # T_max is the 0.9999 quantile of H
FAR_TAIL = 1e-12  # tail cells run out to this quantile
CHUNK = 500


def _as_dist(H) -> ServiceDist:
    if isinstance(H, ServiceDist):
        return H
    if isinstance(H, GridCdf):
        return ServiceDist.from_grid(H)
    raise ConfigurationError("prior guess must be a ServiceDist or GridCdf")


def _tally(times) -> tuple[np.ndarray, np.ndarray]:
    t = np.asarray(times, dtype=float).ravel()
    if t.size == 0:
        return np.zeros(0), np.zeros(0, dtype=int)
    u, counts = np.unique(t, return_counts=True)
    return u, counts


@dataclass(frozen=True)
class CountingProcesses:
    """At-risk count ``M(t) = #{S_i >= t}`` and death count ``N(t) = #{exact S_i <= t}``."""

    exact: np.ndarray
    censored: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "exact", np.sort(np.asarray(self.exact, dtype=float)))
        object.__setattr__(self, "censored", np.sort(np.asarray(self.censored, dtype=float)))

    @property
    def n(self) -> int:
        return self.exact.size + self.censored.size

    def M(self, t):
        t = np.asarray(t, dtype=float)
        return (
            self.exact.size - np.searchsorted(self.exact, t, side="left")
            + self.censored.size - np.searchsorted(self.censored, t, side="left")
        )

    def N(self, t):
        return np.searchsorted(self.exact, np.asarray(t, dtype=float), side="right")


@dataclass(frozen=True, eq=False)
class BetaStacyState:
    """Parameters ``(c, H)`` of a beta-Stacy law plus the data conditioned on.

    Parameters
    ----------
    c : float or callable
        Precision function; a constant gives the Dirichlet process with total
        mass ``c`` and base ``H``.
    H : ServiceDist or GridCdf
        Prior guess of the service cdf.
    exact, censored : array_like
        Exact and right-censored service observations.
    bound : float, optional
        Truncation bound ``M``: ``G(t) = 1`` for ``t >= M``.
    n_cells : int
        Number of uniform grid cells on ``[0, T_max]``.
    """

    c: float | Callable
    H: ServiceDist
    exact: np.ndarray = field(default_factory=lambda: np.zeros(0))
    censored: np.ndarray = field(default_factory=lambda: np.zeros(0))
    bound: float | None = None
    n_cells: int = N_CELLS

    def __post_init__(self):
        object.__setattr__(self, "H", _as_dist(self.H))
        if not callable(self.c):
            c = float(self.c)
            if not (c > 0 and math.isfinite(c)):
                raise ConfigurationError(f"precision c must be positive, got {self.c}")
            object.__setattr__(self, "c", c)
        for name in ("exact", "censored"):
            arr = np.sort(np.asarray(getattr(self, name), dtype=float).ravel())
            if np.any(~(arr > 0)) or np.any(~np.isfinite(arr)):
                raise ConfigurationError("service observations must be positive and finite")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        if self.n_cells < 10:
            raise ConfigurationError("n_cells must be at least 10")
        if self.bound is not None:
            if self.H.cdf(self.bound) < 1.0 - 1e-12:
                raise InconsistentTruncationError("prior guess puts mass beyond the truncation bound")
            if self.exact.size and self.exact[-1] > self.bound or \
                    self.censored.size and self.censored[-1] > self.bound:
                raise InconsistentTruncationError("observations exceed the truncation bound")

    # -- basic views -----------------------------------------------------
    @property
    def n(self) -> int:
        return self.exact.size + self.censored.size

    @property
    def is_dirichlet(self) -> bool:
        return not callable(self.c)

    @property
    def counts(self) -> CountingProcesses:
        return CountingProcesses(self.exact, self.censored)

    def c_at(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        if callable(self.c):
            val = np.broadcast_to(np.asarray(self.c(t), dtype=float), t.shape).copy()
            if np.any(~(val > 0)):
                raise ConfigurationError("precision function must be positive on the grid")
            return val
        return np.full(t.shape, self.c)

    def beta_at(self, t) -> np.ndarray:
        """``beta(t) = c(t) (1 - H(t))``."""
        return self.c_at(t) * (1.0 - np.asarray(self.H.cdf(t), dtype=float))

    def alpha_at(self, t) -> np.ndarray:
        """``alpha(t) = int_0^t c dH`` by trapezoid on the state's grid."""
        tab = self._tables
        cum = np.concatenate([[0.0], np.cumsum(tab.dalpha)])
        return np.interp(np.asarray(t, dtype=float), tab.t, cum)

    # -- grid --------------------------------------------------------------
    @cached_property
    def grid(self) -> np.ndarray:
        obs = np.concatenate([self.exact, self.censored])
        if self.bound is not None:
            t_max = float(self.bound)
        else:
            t_max = self.H.upper(GRID_QUANTILE_TAIL)
            if obs.size:
                t_max = max(t_max, 2.0 * float(obs.max()))
        parts = [np.linspace(0.0, t_max, self.n_cells + 1), obs]
        if self.bound is None and self.H.family != "grid":
            far = self.H.upper(FAR_TAIL)
            if far > t_max * (1 + 1e-9):
                parts.append(np.linspace(t_max, far, TAIL_CELLS + 1)[1:])
        return np.unique(np.concatenate(parts))

    @cached_property
    def _tables(self) -> SimpleNamespace:
        t = self.grid
        Hv = np.asarray(self.H.cdf(t), dtype=float)
        Hv[0] = 0.0 if t[0] == 0 else Hv[0]
        cv = self.c_at(t)
        beta = cv * (1.0 - Hv)
        dalpha = 0.5 * (cv[1:] + cv[:-1]) * np.maximum(np.diff(Hv), 0.0)

        cp = self.counts
        risk_cell = cp.M(t[1:]).astype(float)  # at risk inside (t_{j-1}, t_j]
        risk_node = risk_cell  # M(t_j) = #{S >= t_j}
        ex_u, ex_c = _tally(self.exact)
        d = np.zeros(t.size - 1)
        if ex_u.size:
            d[np.searchsorted(t[1:], ex_u)] = ex_c

        b = beta[1:] + risk_cell
        den = b + dalpha
        if np.any(~(den >= 0)) or np.any(~(b >= 0)):
            raise DegeneratePriorError("beta-Stacy denominator is negative or undefined")
        with np.errstate(invalid="ignore", divide="ignore"):
            f = np.where(dalpha == 0, 1.0, b / den)
            f2 = np.where(dalpha == 0, 1.0, b * (b + 1.0) / (den * (den + 1.0)))
        # fixed atoms at exact observations: W ~ Beta(B, d) with B = beta + M - d
        B = beta[1:] + risk_node - d
        atom_den = B + d
        if np.any((d > 0) & ~(atom_den > 0)):
            raise DegeneratePriorError("beta-Stacy denominator vanishes at an observation")
        with np.errstate(invalid="ignore", divide="ignore"):
            fa = np.where(d > 0, B / atom_den, 1.0)
            fa2 = np.where(d > 0, B * (B + 1.0) / (atom_den * (atom_den + 1.0)), 1.0)
        fa = np.maximum(fa, 0.0)
        fa2 = np.maximum(fa2, 0.0)

        # survival at the right of each grid point and just left of it
        s_right = np.empty(t.size)
        s_left = np.empty(t.size)
        s_right[0] = s_left[0] = 1.0
        step = f * fa
        s_right[1:] = np.cumprod(step)
        s_left[1:] = np.concatenate([[1.0], s_right[1:-1]]) * f
        return SimpleNamespace(
            t=t, H=Hv, c=cv, beta=beta, dalpha=dalpha, b=b, d=d, B=B,
            f=f, f2=f2, fa=fa, fa2=fa2, s_right=s_right, s_left=s_left,
        )

    @cached_property
    def tail_factor(self) -> float:
        """``int_T^inf (1 - G) dt / (1 - G(T))`` beyond the last grid point ``T``.

        Past the data the posterior survival decays like ``1 - H``, so the
        ratio is ``int_T^inf (1 - H) / (1 - H(T))``.
        """
        T = float(self.grid[-1])
        if self.bound is not None or self.H.family == "grid":
            return 0.0
        sf = float(self.H.sf(T))
        if sf <= 0.0:
            return 0.0
        tail = self.H.tail_integral(T)
        if not math.isfinite(tail):
            raise TruncationError("prior guess has no finite mean", tail_bound=float("inf"))
        return tail / sf

    # -- derived posterior quantities -----------------------------------
    def bayes_cdf(self) -> GridCdf:
        tab = self._tables
        return GridCdf(tab.t, 1.0 - tab.s_right, tab.s_left - tab.s_right)

    def c_star(self) -> np.ndarray:
        """Updated precision ``c_n*(t) = (beta + M - dN) / (1 - H_n*(t))`` on the grid."""
        tab = self._tables
        num = tab.beta[1:] + self.counts.M(tab.t[1:]) - tab.d
        with np.errstate(invalid="ignore", divide="ignore"):
            out = np.where(tab.s_right[1:] > 0, num / tab.s_right[1:], np.nan)
        return np.concatenate([[tab.beta[0] + self.counts.M(tab.t[0])], out])

    def _mean_weights(self):
        """Node weights so that the mean is ``sum w_k S_k`` over the node chain.

        Nodes alternate ``S(t_j-)`` and ``S(t_j)``; the trapezoid rule on each
        linear cell puts ``dt / 2`` on ``S(t_{j-1})`` and on ``S(t_j-)``.
        """
        tab = self._tables
        dt = np.diff(tab.t)
        m = tab.t.size
        # node order: R0, L1, R1, L2, R2, ...
        w = np.zeros(2 * m - 1)
        w[0:-1:2] += 0.5 * dt  # right values at t_{j-1}
        w[1::2] += 0.5 * dt  # left values at t_j
        w[-1] += self.tail_factor
        fac = np.ones(2 * m - 1)
        fac2 = np.ones(2 * m - 1)
        fac[1::2], fac[2::2] = tab.f, tab.fa
        fac2[1::2], fac2[2::2] = tab.f2, tab.fa2
        return w, fac, fac2

    def mean_of_mean(self) -> float:
        tab = self._tables
        mu = integrated_survival(tab.t, 1.0 - tab.s_right, 1.0 - tab.s_left)
        return float(mu + tab.s_right[-1] * self.tail_factor)

    def second_moment_of_mean(self) -> float:
        """Exact ``E[mu^2]`` for the node chain (independent factors)."""
        w, fac, fac2 = self._mean_weights()
        es2 = np.cumprod(fac2)
        # J_k = sum_{l > k} w_l prod_{k < i <= l} f_i, by backward recursion
        J = np.zeros_like(w)
        acc = 0.0
        for k in range(w.size - 2, -1, -1):
            acc = fac[k + 1] * (w[k + 1] + acc)
            J[k] = acc
        return float(np.sum(es2 * (w * w + 2.0 * w * J)))

    def var_of_mean(self) -> float:
        v = self.second_moment_of_mean() - self.mean_of_mean() ** 2
        if v < 0:
            if v < -1e-6:
                raise ArithmeticError(f"negative posterior variance {v:.3g}")
            warnings.warn(f"posterior variance {v:.3g} clamped at zero", RuntimeWarning, stacklevel=2)
            v = 0.0
        return float(v)

    def beta_condition(self) -> bool:
        """Whether ``beta(t) >= 1`` on ``[0, max observation]``; informative only."""
        obs = np.concatenate([self.exact, self.censored])
        hi = obs.max() if obs.size else self.grid[-1]
        t = self.grid[self.grid <= hi]
        ok = bool(np.all(self.beta_at(t) >= 1.0))
        if not ok:
            warnings.warn("beta(t) < 1 somewhere below the largest observation", RuntimeWarning,
                          stacklevel=2)
        return ok

    # -- path sampling ---------------------------------------------------
    def sample_survival(self, k: int, seed) -> "PathBatch":
        """``k`` posterior survival paths on the grid."""
        rng = seed if isinstance(seed, np.random.Generator) else make_rng(seed, "paths")
        tab = self._tables
        m = tab.t.size
        right = np.empty((k, m))
        left = np.empty((k, m))
        cont_free = tab.dalpha == 0
        cont_zero = (tab.b == 0) & ~cont_free
        cont_draw = ~(cont_free | cont_zero)
        atom = tab.d > 0
        atom_zero = atom & (tab.B <= 0)
        atom_draw = atom & ~atom_zero
        for lo in range(0, k, CHUNK):
            hi = min(k, lo + CHUNK)
            rows = hi - lo
            W = np.ones((rows, m - 1))
            W[:, cont_zero] = 0.0
            if cont_draw.any():
                W[:, cont_draw] = rng.beta(tab.b[cont_draw], tab.dalpha[cont_draw],
                                           size=(rows, int(cont_draw.sum())))
            Wa = np.ones((rows, m - 1))
            Wa[:, atom_zero] = 0.0
            if atom_draw.any():
                Wa[:, atom_draw] = rng.beta(tab.B[atom_draw], tab.d[atom_draw],
                                            size=(rows, int(atom_draw.sum())))
            sr = np.cumprod(W * Wa, axis=1)
            right[lo:hi, 0] = 1.0
            right[lo:hi, 1:] = sr
            left[lo:hi, 0] = 1.0
            left[lo:hi, 1:] = np.concatenate([np.ones((rows, 1)), sr[:, :-1]], axis=1) * W
        return PathBatch(tab.t, 1.0 - right, 1.0 - left, self.tail_factor)

    # -- updating and serialisation --------------------------------------
    def update(self, data) -> "BetaStacyState":
        return posterior_update(self, data)

    def prior(self) -> "BetaStacyState":
        return replace(self, exact=np.zeros(0), censored=np.zeros(0))

    def to_dict(self) -> dict:
        tab = self._tables
        G = self.bayes_cdf()
        return {
            "grid": tab.t.tolist(),
            "c": tab.c.tolist(),
            "H": tab.H.tolist(),
            "G_hat": G.F.tolist(),
            "atoms": {"t": G.t[G.jumps > 0].tolist(), "mass": G.jumps[G.jumps > 0].tolist()},
            "exact": self.exact.tolist(),
            "censored": self.censored.tolist(),
            "bound": self.bound,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


@dataclass(frozen=True, eq=False)
class PathBatch:
    """A batch of sampled cdf paths on a common grid.

    ``right`` and ``left`` hold ``G(t_j)`` and ``G(t_j-)`` per path.  Mass not
    reached by the grid is spread beyond ``t[-1]`` like the prior guess, via
    ``tail_factor``.
    """

    t: np.ndarray
    right: np.ndarray
    left: np.ndarray
    tail_factor: float = 0.0

    def __len__(self) -> int:
        return self.right.shape[0]

    def cdf(self, x) -> np.ndarray:
        """Path values at ``x`` (shape ``(k, len(x))``), linear within cells."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        j = np.clip(np.searchsorted(self.t, x, side="left"), 1, self.t.size - 1)
        w = (x - self.t[j - 1]) / (self.t[j] - self.t[j - 1])
        val = self.right[:, j - 1] + w * (self.left[:, j] - self.right[:, j - 1])
        on = x == self.t[j]
        val[:, on] = self.right[:, j[on]]
        val[:, x <= 0] = np.where(x[x <= 0] == 0, self.right[:, [0]], 0.0)
        val[:, x > self.t[-1]] = 1.0
        return val

    def means(self) -> np.ndarray:
        return integrated_survival(self.t, self.right, self.left) + (1.0 - self.right[:, -1]) * self.tail_factor

    def truncated_means(self, bound: float) -> np.ndarray:
        """``int_0^bound (1 - G)``."""
        keep = self.t <= bound
        if not keep.all() and self.t[keep][-1] < bound:
            raise ConfigurationError("truncation bound must be a grid point")
        return integrated_survival(self.t[keep], self.right[:, keep], self.left[:, keep])

    def lst(self, z) -> np.ndarray:
        return stieltjes_lst(self.t, self.right, self.left, z)

    def path(self, i: int) -> GridCdf:
        return GridCdf(self.t, self.right[i], self.right[i] - self.left[i])


# -- functional interface ----------------------------------------------------

def dirichlet_as_beta_stacy(alpha_total: float, base, n_cells: int = N_CELLS) -> BetaStacyState:
    """Dirichlet process with total mass ``alpha_total`` and base ``base`` as a beta-Stacy state."""
    if not alpha_total > 0:
        raise ConfigurationError("Dirichlet total mass must be positive")
    return BetaStacyState(float(alpha_total), base, n_cells=n_cells)


def posterior_update(prior: BetaStacyState, data) -> BetaStacyState:
    """Condition on further service observations.

    ``data`` is a :class:`SampleData` (censoring flags honoured) or an array
    of exact service times.  Updating twice equals updating once with the
    pooled data.
    """
    if isinstance(data, SampleData):
        ex, ce = data.services[~data.censored], data.services[data.censored]
    else:
        ex, ce = np.asarray(data, dtype=float).ravel(), np.zeros(0)
    return replace(
        prior,
        exact=np.concatenate([prior.exact, ex]),
        censored=np.concatenate([prior.censored, ce]),
    )


def bayes_cdf(post: BetaStacyState) -> GridCdf:
    """Posterior mean of the random cdf, ``H_n*``."""
    return post.bayes_cdf()


def posterior_mean_of_mean(post: BetaStacyState) -> float:
    """``E[int t dG(t) | data]``."""
    return post.mean_of_mean()


def posterior_second_moment_of_mean(post: BetaStacyState) -> float:
    return post.second_moment_of_mean()


def posterior_var_of_mean(post: BetaStacyState) -> float:
    return post.var_of_mean()


def sample_posterior_path(post: BetaStacyState, seed) -> GridCdf:
    """One posterior draw of the service cdf."""
    return post.sample_survival(1, seed).path(0)


def sample_posterior_paths(post: BetaStacyState, k: int, seed) -> PathBatch:
    return post.sample_survival(int(k), seed)


def truncate_prior(post: BetaStacyState, M_bound: float) -> BetaStacyState:
    """Restrict to cdfs with ``G(M) = 1``.

    The prior guess must already satisfy ``H(M) = 1``; observations beyond
    ``M`` are rejected.
    """
    if not M_bound > 0:
        raise ConfigurationError("truncation bound must be positive")
    if post.H.cdf(M_bound) < 1.0 - 1e-12:
        raise InconsistentTruncationError(
            f"prior guess has mass {1 - float(post.H.cdf(M_bound)):.3g} beyond {M_bound}"
        )
    return replace(post, bound=float(M_bound))
