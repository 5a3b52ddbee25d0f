"""Frequentist checks: consistency tables and Bernstein-von Mises covariances.

Limit covariances
-----------------
The centred, rescaled service cdf converges to ``A(t) = -(1 - G0(t)) W(K(t))``
with a Brownian motion ``W`` and a time change ``K``.  Its covariance is

    h(u, v) = (1 - G0(u)) (1 - G0(v)) K(min(u, v)).

``time_change="hazard"`` (the default) takes ``K = A0 = -log(1 - G0)``, the
cumulative-hazard clock.  ``time_change="odds"`` takes
``K = G0 / (1 - G0)``, which turns ``h`` into the Brownian-bridge covariance
``G0(min) (1 - G0(max))`` of the empirical process.

Every double integral against ``h`` is reduced to a single Stieltjes integral

    int int a(s) b(t) h(s, t) ds dt = int_0^M I_a(r) I_b(r) dK(r),
    I_a(r) = int_r^M a(s) (1 - G0(s)) ds,

evaluated with the midpoint rule on a fine grid.
"""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .arrival_inference import GammaPosterior, bayes_lambda, sample_lambda, update_gamma
from .exceptions import ConfigurationError, InstabilityError, NumericDomainError
from .gridcdf import GridCdf
from .queue_core import MG1Truth, ServiceDist, pk_transforms, simulate_mg1
from .rng import make_rng
from .service_inference import BetaStacyState, posterior_update, truncate_prior
from .transforms import build_transforms, z_grid

BVM_GRID = (0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0)
FUNCTIONALS = ("cdf", "lst", "mean", "waiting_lst")
TIME_CHANGES = ("hazard", "odds")


def _as_dist(G) -> ServiceDist:
    if isinstance(G, ServiceDist):
        return G
    if isinstance(G, GridCdf):
        return ServiceDist.from_grid(G)
    raise ConfigurationError("G0 must be a ServiceDist or GridCdf")


@dataclass(frozen=True, eq=False)
class CovarianceRefs:
    """True quantities entering the limit covariances.

    Parameters
    ----------
    G0 : ServiceDist or GridCdf
        True service cdf.
    lambda0 : float
        True arrival rate.
    M_bound : float
        Upper integration limit (the truncation bound).
    time_change : {"hazard", "odds"}
        Clock of the Brownian motion in ``h``.
    n_quad : int
        Cells of the quadrature grid on ``[0, M]``.
    """

    G0: ServiceDist
    lambda0: float
    M_bound: float
    time_change: str = "hazard"
    n_quad: int = 20000

    def __post_init__(self):
        object.__setattr__(self, "G0", _as_dist(self.G0))
        if not (self.lambda0 > 0 and self.M_bound > 0):
            raise ConfigurationError("lambda0 and M_bound must be positive")
        if self.time_change not in TIME_CHANGES:
            raise ConfigurationError(f"time_change must be one of {TIME_CHANGES}")

    # -- true quantities -------------------------------------------------
    def A0(self, t):
        """Cumulative hazard ``-log(1 - G0(t))``."""
        with np.errstate(divide="ignore"):
            return -np.log1p(-np.asarray(self.G0.cdf(t), dtype=float))

    def clock(self, t):
        G = np.asarray(self.G0.cdf(t), dtype=float)
        with np.errstate(divide="ignore"):
            if self.time_change == "hazard":
                return -np.log1p(-G)
            return G / (1.0 - G)

    @cached_property
    def mu0(self) -> float:
        q = self._quad
        return float(np.sum(q.sf_mid * q.dt))

    @property
    def rho0(self) -> float:
        return self.lambda0 * self.mu0

    def g0(self, z):
        return self.G0.lst(z)

    @cached_property
    def _pk(self):
        return pk_transforms(self.lambda0, self.g0, self.rho0, service_mean=self.mu0)

    def w0(self, z):
        return self._pk.w(z)

    # -- quadrature ------------------------------------------------------
    @cached_property
    def _quad(self):
        r = np.linspace(0.0, self.M_bound, self.n_quad + 1)
        mid = 0.5 * (r[1:] + r[:-1])
        dt = np.diff(r)
        G = np.asarray(self.G0.cdf(r), dtype=float)
        sf_mid = np.asarray(self.G0.sf(mid), dtype=float)
        dG = np.maximum(np.diff(G), 0.0)
        power = 1 if self.time_change == "hazard" else 2
        with np.errstate(divide="ignore", invalid="ignore"):
            dK = np.where(sf_mid > 0, dG / sf_mid**power, 0.0)
        return type("Quad", (), dict(r=r, mid=mid, dt=dt, sf_mid=sf_mid, dK=dK))

    def _tail_integrals(self, zs) -> np.ndarray:
        """``I_z(r) = int_r^M exp(-z s) (1 - G0(s)) ds`` at the cell midpoints.

        Returns shape ``(len(zs), n_quad)``.
        """
        q = self._quad
        zs = np.atleast_1d(np.asarray(zs, dtype=float))
        f = np.exp(-np.outer(zs, q.mid)) * q.sf_mid * q.dt
        # integral from each midpoint: half of the own cell plus all later cells
        later = np.cumsum(f[:, ::-1], axis=1)[:, ::-1]
        return later - 0.5 * f

    def pair_integral(self, zs_a, zs_b) -> np.ndarray:
        """``int int e^{-a s} e^{-b t} h(s, t) ds dt`` for all pairs."""
        Ia = self._tail_integrals(zs_a)
        Ib = self._tail_integrals(zs_b)
        return (Ia * self._quad.dK) @ Ib.T


def cov_h(refs: CovarianceRefs, u, v):
    """``h(u, v) = (1 - G0(u)) (1 - G0(v)) K(min(u, v))``."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    if np.any(u < 0) or np.any(v < 0):
        raise NumericDomainError("h is defined on the positive half-line")
    su, sv = np.asarray(refs.G0.sf(u)), np.asarray(refs.G0.sf(v))
    if np.any(su <= 0) or np.any(sv <= 0):
        raise NumericDomainError("h needs G0 < 1 at its arguments")
    out = su * sv * refs.clock(np.minimum(u, v))
    return out if np.ndim(out) else float(out)


def cov_matrix_h(refs: CovarianceRefs, grid) -> np.ndarray:
    g = np.asarray(grid, dtype=float)
    return cov_h(refs, g[:, None], g[None, :])


def cov_gamma(refs: CovarianceRefs, u, v):
    """Covariance ``uv int int e^{-(us + vt)} h(s, t) ds dt`` of the LST limit."""
    u_arr, v_arr = np.atleast_1d(np.asarray(u, float)), np.atleast_1d(np.asarray(v, float))
    out = np.outer(u_arr, v_arr) * refs.pair_integral(u_arr, v_arr)
    if np.ndim(u) == 0 and np.ndim(v) == 0:
        return float(out[0, 0])
    return out


def var_eta(refs: CovarianceRefs) -> float:
    """Variance ``int int h(s, t) ds dt`` of the mean limit."""
    return float(max(refs.pair_integral([0.0], [0.0])[0, 0], 0.0))


def cross_integral(refs: CovarianceRefs, z) -> np.ndarray:
    """``int int e^{-z t} h(s, t) ds dt``."""
    z = np.atleast_1d(np.asarray(z, dtype=float))
    return refs.pair_integral([0.0], z)[0]


def _zeta_parts(refs: CovarianceRefs, z):
    z = np.atleast_1d(np.asarray(z, dtype=float))
    if np.any(z <= 0):
        raise NumericDomainError("zeta needs strictly positive arguments")
    if refs.rho0 >= 1:
        raise InstabilityError(f"true traffic intensity {refs.rho0:.4g} >= 1")
    lam, rho, mu = refs.lambda0, refs.rho0, refs.mu0
    g0 = np.asarray(refs.g0(z), dtype=float)
    w0 = np.asarray(refs.w0(z), dtype=float)
    D = z - lam * (1.0 - g0)
    return z, lam, rho, mu, g0, w0, D


def zeta_coefficients(refs: CovarianceRefs, z) -> dict:
    """Linearisation ``Z = c_lam Lam + c_H H + c_G G(z)`` of the waiting-time LST.

    ``Lam ~ N(0, lambda0^2)`` is the arrival-rate limit, ``H`` the mean limit
    and ``G`` the service-LST limit.
    """
    z, lam, rho, mu, g0, w0, D = _zeta_parts(refs, z)
    return {
        "lambda": w0 * (-mu / (1.0 - rho) + (1.0 - g0) / D),
        "H": -w0 * lam / (1.0 - rho),
        "G": -lam * w0 / D,
    }


def cov_zeta(refs: CovarianceRefs, u, v):
    """Covariance of the waiting-time LST limit.

    Assembled from the linearisation in :func:`zeta_coefficients`, with the
    arrival-rate limit variance ``lambda0^2`` (inverse Fisher information)
    in every arrival term.
    """
    scalar = np.ndim(u) == 0 and np.ndim(v) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))
    v = np.atleast_1d(np.asarray(v, dtype=float))
    cu, cv = zeta_coefficients(refs, u), zeta_coefficients(refs, v)
    lam = refs.lambda0
    gam = cov_gamma(refs, u, v)
    gam = np.atleast_2d(gam)
    eta = var_eta(refs)
    # Cov(H, G(z)) = -z int int e^{-z t} h(s, t) ds dt
    cov_HG_v = -v * cross_integral(refs, v)
    cov_HG_u = -u * cross_integral(refs, u)
    out = (
        lam**2 * np.outer(cu["lambda"], cv["lambda"])
        + eta * np.outer(cu["H"], cv["H"])
        + gam * np.outer(cu["G"], cv["G"])
        + np.outer(cu["H"], cv["G"] * cov_HG_v)
        + np.outer(cu["G"] * cov_HG_u, cv["H"])
    )
    return float(out[0, 0]) if scalar else out


def cov_zeta_naive(refs: CovarianceRefs, u, v):
    """A naive assembly of the waiting-time covariance, kept as a cross-check.

    It weights the arrival terms by ``lambda0^-2`` and carries a single power
    of ``lambda0`` in the last bracket.  It does not match the limit
    simulation; use :func:`cov_zeta`.
    """
    scalar = np.ndim(u) == 0 and np.ndim(v) == 0
    u = np.atleast_1d(np.asarray(u, dtype=float))[:, None]
    v = np.atleast_1d(np.asarray(v, dtype=float))[None, :]
    _, lam, rho, mu, gu, wu, _ = _zeta_parts(refs, u.ravel())
    _, _, _, _, gv, wv, _ = _zeta_parts(refs, v.ravel())
    gu, wu = gu[:, None], wu[:, None]
    gv, wv = gv[None, :], wv[None, :]
    eta = var_eta(refs)
    gam = np.atleast_2d(cov_gamma(refs, u.ravel(), v.ravel()))
    Xu = cross_integral(refs, u.ravel())[:, None]
    Xv = cross_integral(refs, v.ravel())[None, :]
    du, dv = lam * (1 - gu) - u, lam * (1 - gv) - v
    out = (
        wu * wv / (1 - rho) ** 2 * (lam**2 * eta + mu**2 / lam**2)
        + lam**-2 * (wu * (1 - gu) / du) * (wv * (1 - gv) / dv)
        + wu * wv * lam**2 / (du * dv) * gam
        - mu * wu * wv / (lam * (1 - rho)) ** 2 * (wu * (1 - gu) / u + wv * (1 - gv) / v)
        - lam * wu * wv / (1 - rho) ** 2 * (wu * Xu + wv * Xv)
    )
    return float(out[0, 0]) if scalar else out


def zeta_mc_oracle(refs: CovarianceRefs, z, n_paths: int = 100_000, seed=0,
                   n_grid: int = 2000, chunk: int = 5000) -> np.ndarray:
    """Covariance of ``Z(z)`` estimated by simulating the limit objects.

    Each path draws a Brownian motion on the clock ``K``, forms
    ``B = (1 - G0) W(K)``, the mean limit ``H = int B``, the LST limit
    ``G(z) = -z int e^{-zs} B ds`` and an independent ``Lam ~ N(0, lambda0^2)``,
    then combines them through the derivatives of the waiting-time LST.
    """
    z = np.atleast_1d(np.asarray(z, dtype=float))
    coef = zeta_coefficients(refs, z)
    rng = make_rng(seed, "zeta-oracle")
    r = np.linspace(0.0, refs.M_bound, n_grid + 1)
    mid = 0.5 * (r[1:] + r[:-1])
    dt = np.diff(r)
    sf_mid = np.asarray(refs.G0.sf(mid), dtype=float)
    G = np.asarray(refs.G0.cdf(r), dtype=float)
    power = 1 if refs.time_change == "hazard" else 2
    with np.errstate(divide="ignore", invalid="ignore"):
        dK = np.where(sf_mid > 0, np.maximum(np.diff(G), 0.0) / sf_mid**power, 0.0)
    # W is sampled at the cell ends and averaged onto the midpoints
    wH = sf_mid * dt
    wG = -z[:, None] * np.exp(-np.outer(z, mid)) * sf_mid * dt
    acc = np.zeros((z.size, z.size))
    mean = np.zeros(z.size)
    done = 0
    while done < n_paths:
        k = min(chunk, n_paths - done)
        W = np.cumsum(rng.standard_normal((k, n_grid)) * np.sqrt(dK), axis=1)
        Wmid = 0.5 * (np.concatenate([np.zeros((k, 1)), W[:, :-1]], axis=1) + W)
        H = Wmid @ wH
        Gz = Wmid @ wG.T
        Lam = rng.normal(0.0, refs.lambda0, k)
        Z = coef["lambda"] * Lam[:, None] + coef["H"] * H[:, None] + coef["G"] * Gz
        acc += Z.T @ Z
        mean += Z.sum(axis=0)
        done += k
    mean /= n_paths
    return (acc - n_paths * np.outer(mean, mean)) / (n_paths - 1)


# -- experiments -------------------------------------------------------------

@dataclass(frozen=True)
class PriorSpec:
    """Hyperparameters for both posteriors.

    ``H`` defaults to the true service law; ``M_bound`` truncates the
    beta-Stacy prior (``H`` is then truncated to ``[0, M]`` as well).
    """

    a: float = 1.0
    b: float = 1.0
    c: float = 1.0
    H: ServiceDist | None = None
    M_bound: float | None = None
    n_cells: int = 2000

    def gamma(self) -> GammaPosterior:
        return GammaPosterior(self.a, self.b)

    def beta_stacy(self, truth: MG1Truth) -> BetaStacyState:
        H = self.H if self.H is not None else truth.service
        if self.M_bound is not None:
            if H.bound is None or H.bound > self.M_bound:
                H = H.truncated(self.M_bound)
            return truncate_prior(BetaStacyState(self.c, H, n_cells=self.n_cells), self.M_bound)
        return BetaStacyState(self.c, H, n_cells=self.n_cells)


CONSISTENCY_COLUMNS = ("n", "seed", "err_G", "err_g", "err_w", "err_q", "err_n",
                       "err_mu", "err_lambda", "err_rho")


@dataclass
class ConsistencyTable:
    rows: list = field(default_factory=list)
    unstable: list = field(default_factory=list)

    def column(self, name: str) -> np.ndarray:
        return np.array([r[name] for r in self.rows], dtype=float)

    def averaged(self) -> dict:
        """Seed-averaged error per ``n``: ``{n: {column: mean}}``."""
        out = {}
        for n in sorted({r["n"] for r in self.rows}):
            sel = [r for r in self.rows if r["n"] == n]
            out[n] = {k: float(np.mean([r[k] for r in sel])) for k in CONSISTENCY_COLUMNS[2:]}
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CONSISTENCY_COLUMNS)
        for r in self.rows:
            w.writerow([r["n"], r["seed"]] + [format(r[k], ".17g") for k in CONSISTENCY_COLUMNS[2:]])
        return buf.getvalue()


def _sup_cdf_gap(G: GridCdf, dist: ServiceDist) -> float:
    """``sup_t |G(t) - G0(t)|`` over the knots of ``G`` (both one-sided limits)."""
    t = G.t
    true = np.asarray(dist.cdf(t), dtype=float)
    return float(max(np.abs(G.F - true).max(), np.abs(G.F - G.jumps - true).max()))


def consistency_experiment(truth: MG1Truth, prior: PriorSpec, n_list, seeds,
                           z=None, t=None) -> ConsistencyTable:
    """Estimation errors for every ``(n, seed)``.

    For each seed one sample of size ``max(n_list)`` is drawn and its prefixes
    are used, so the rows for one seed are nested.  Errors are sup-norms over
    ``t`` (cdf) and ``z`` (transforms; ``q`` and ``n`` use the part of ``z`` in
    ``[0, 1]``).  Rows with an unstable estimate get NaN in the ``w``, ``q``,
    ``n`` columns and are listed in ``table.unstable``.
    """
    n_list = sorted(int(n) for n in n_list)
    if not n_list or n_list[0] < 0:
        raise ConfigurationError("n_list must be a nonempty list of sizes")
    z = z_grid() if z is None else np.asarray(z, dtype=float)
    zq = np.union1d(z[(z >= 0) & (z <= 1)], [0.0, 1.0])
    true = truth.transforms()
    g0, w0, q0, n0 = true.g(z), true.w(z), true.q(zq), true.n(zq)
    table = ConsistencyTable()
    for seed in seeds:
        full = simulate_mg1(truth, n_list[-1], seed)
        for n in n_list:
            data = full.head(n)
            lam_post = update_gamma(prior.gamma(), data)
            bs_post = posterior_update(prior.beta_stacy(truth), data)
            T = build_transforms(lam_post, bs_post)
            G = bs_post.bayes_cdf()
            err_G = _sup_cdf_gap(G, truth.service)
            if t is not None:
                err_G = max(err_G, float(np.abs(G.cdf(t) - truth.service.cdf(t)).max()))
            gz = T.g(z)
            err_g = float(np.abs(gz - g0).max())
            if err_g > err_G + 1e-6:
                warnings.warn(f"LST gap {err_g:.3g} exceeds cdf gap {err_G:.3g}", RuntimeWarning)
            if T.stable:
                err_w = float(np.abs(T.w(z, on_domain_error="nan") - w0).max())
                qz = T.q(zq, on_domain_error="nan")
                nz = T.n(zq, on_domain_error="nan")
                glz = T.g(T.lam * (1 - zq))
                if np.nanmax(np.abs(nz - qz * glz)) > 1e-12:
                    warnings.warn("n* differs from q* g*(lam(1-z))", RuntimeWarning)
                err_q = float(np.abs(qz - q0).max())
                err_n = float(np.abs(nz - n0).max())
            else:
                err_w = err_q = err_n = float("nan")
                table.unstable.append((n, seed))
            table.rows.append({
                "n": n, "seed": int(seed), "err_G": err_G, "err_g": err_g,
                "err_w": err_w, "err_q": err_q, "err_n": err_n,
                "err_mu": abs(T.mu_hat - truth.mu0),
                "err_lambda": abs(T.lam - truth.lambda0),
                "err_rho": abs(T.rho - truth.rho0),
            })
    return table


@dataclass(frozen=True, eq=False)
class BvmReport:
    """Empirical against theoretical covariance of a rescaled posterior functional."""

    functional: str
    grid: np.ndarray
    empirical: np.ndarray
    theoretical: np.ndarray
    mean: np.ndarray
    mean_se: np.ndarray
    n: int
    draws: int
    unstable_draws: int = 0

    @property
    def max_abs_dev(self) -> float:
        return float(np.abs(self.empirical - self.theoretical).max())

    @property
    def max_rel_dev(self) -> float:
        mask = np.abs(self.theoretical) > 0.01
        if not mask.any():
            return float("nan")
        return float((np.abs(self.empirical - self.theoretical)[mask] / np.abs(self.theoretical[mask])).max())

    def to_dict(self) -> dict:
        return {
            "functional": self.functional,
            "grid": self.grid.tolist(),
            "n": self.n,
            "draws": self.draws,
            "empirical": self.empirical.ravel().tolist(),
            "theoretical": self.theoretical.ravel().tolist(),
            "max_abs_dev": self.max_abs_dev,
            "max_rel_dev": self.max_rel_dev,
            "mean": self.mean.tolist(),
            "mean_se": self.mean_se.tolist(),
            "unstable_draws": self.unstable_draws,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def bvm_experiment(truth: MG1Truth, prior: PriorSpec, n: int, draws: int, seed,
                   grid=None, functional: str = "cdf", time_change: str = "hazard",
                   refs: CovarianceRefs | None = None) -> BvmReport:
    """Posterior draws of a rescaled functional against its limit covariance.

    The functional is evaluated on each posterior draw and centred at the
    plug-in estimate: the Bayes cdf for ``cdf``, ``g_n^{*M}`` for ``lst``,
    ``mu_n^*`` for ``mean`` and ``w_n^{*M}`` for ``waiting_lst``.  The
    theoretical covariance is ``h``, ``gamma``, ``eta`` or ``zeta``.
    """
    if functional not in FUNCTIONALS:
        raise ConfigurationError(f"functional must be one of {FUNCTIONALS}")
    if draws < 100:
        raise ConfigurationError("at least 100 posterior draws are needed")
    if functional != "cdf" and prior.M_bound is None:
        raise ConfigurationError(f"the {functional} functional needs a truncated prior")
    grid = np.asarray(BVM_GRID if grid is None else grid, dtype=float)
    if functional == "mean":
        grid = np.zeros(1)
    data = simulate_mg1(truth, n, seed)
    bs_post = posterior_update(prior.beta_stacy(truth), data)
    paths = bs_post.sample_survival(draws, make_rng(seed, "bvm-paths"))
    M = prior.M_bound
    if refs is None:
        refs = CovarianceRefs(truth.service, truth.lambda0,
                              M if M is not None else truth.service.upper(1e-10), time_change)
    unstable = 0
    if functional == "cdf":
        center = bs_post.bayes_cdf().cdf(grid)
        X = paths.cdf(grid) - center
        theo = cov_matrix_h(refs, grid)
    elif functional == "lst":
        center = bs_post.bayes_cdf().restrict(M).lst(grid)
        X = paths.lst(grid) - center
        theo = cov_gamma(refs, grid, grid)
    elif functional == "mean":
        center = bs_post.bayes_cdf().restrict(M).mean()
        X = (paths.truncated_means(M) - center)[:, None]
        theo = np.array([[var_eta(refs)]])
    else:
        lam_post = update_gamma(prior.gamma(), data)
        T = build_transforms(lam_post, bs_post, trunc_M=M, require_stable=True)
        center = T.w(grid)
        lam = sample_lambda(lam_post, draws, make_rng(seed, "bvm-lambda"))[:, None]
        mu = paths.truncated_means(M)[:, None]
        g = paths.lst(grid)
        unstable = int(np.sum(lam[:, 0] * mu[:, 0] >= 1))
        X = grid * (1 - lam * mu) / (grid - lam * (1 - g)) - center
        theo = cov_zeta(refs, grid, grid)
    X = math.sqrt(n) * X
    emp = np.atleast_2d(np.cov(X, rowvar=False))
    emp = 0.5 * (emp + emp.T)
    theo = 0.5 * (np.atleast_2d(theo) + np.atleast_2d(theo).T)
    return BvmReport(functional, grid, emp, theo, X.mean(axis=0),
                     X.std(axis=0, ddof=1) / math.sqrt(draws), int(n), int(draws), unstable)
