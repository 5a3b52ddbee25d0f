"""Ground-truth M/G/1 model: service laws, simulation, Pollaczek-Khinchine.

Service distributions are wrapped in :class:`ServiceDist`, which can be
truncated to ``[0, M]`` (conditioning on ``S <= M``).  :class:`TransformSet`
bundles the service LST ``g`` with the waiting-time LST ``w``, the
queue-length pgf ``q`` and the system-size pgf ``n``::

    n(z) = g(lam (1 - z)) (1 - z)(1 - rho) / (g(lam (1 - z)) - z)
    q(z) = (1 - z)(1 - rho) / (g(lam (1 - z)) - z)
    w(z) = z (1 - rho) / (z - lam (1 - g(z)))
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import integrate, special, stats

from .exceptions import (
    ConfigurationError,
    InstabilityError,
    NumericDomainError,
    UnsupportedDataError,
)
from .gridcdf import GridCdf
from .rng import open_uniforms, spawn

FAMILIES = ("exponential", "weibull", "gamma", "lognormal", "uniform", "grid")

# parameter names per family, in positional order
_PARAM_NAMES = {
    "exponential": ("rate",),
    "weibull": ("shape", "scale"),
    "gamma": ("shape", "scale"),
    "lognormal": ("sigma", "scale"),
    "uniform": ("low", "high"),
    "grid": (),
}

# tail mass left out of numeric LST quadrature
LST_TAIL = 1e-10


@dataclass(frozen=True, eq=False)
class ServiceDist:
    """A service-time law on the positive half-line.

    Parameters
    ----------
    family : str
        One of ``exponential`` (rate), ``weibull`` (shape, scale), ``gamma``
        (shape, scale), ``lognormal`` (sigma, scale), ``uniform`` (low, high)
        or ``grid`` (a :class:`GridCdf` passed as ``grid``).
    params : tuple of float
        Family parameters in the order above.
    bound : float, optional
        Truncation bound ``M``; the law is conditioned on ``[0, M]``.
    grid : GridCdf, optional
        The cdf for the ``grid`` family.
    """

    family: str
    params: tuple = ()
    bound: float | None = None
    grid: GridCdf | None = None
    _frozen: object = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigurationError(f"unknown service family {self.family!r}")
        params = tuple(float(p) for p in self.params)
        object.__setattr__(self, "params", params)
        if len(params) != len(_PARAM_NAMES[self.family]):
            raise ConfigurationError(
                f"{self.family} expects parameters {_PARAM_NAMES[self.family]}, got {params}"
            )
        if self.family == "uniform":
            low, high = params
            if not (0 <= low < high) or not math.isfinite(high):
                raise ConfigurationError("uniform needs 0 <= low < high")
        elif any(not (p > 0 and math.isfinite(p)) for p in params):
            raise ConfigurationError(f"{self.family} parameters must be positive, got {params}")
        if self.family == "grid" and not isinstance(self.grid, GridCdf):
            raise ConfigurationError("grid family requires a GridCdf")
        if self.bound is not None:
            if not (self.bound > 0 and math.isfinite(self.bound)):
                raise ConfigurationError("truncation bound must be positive")
            if self._base_cdf(self.bound) <= 0:
                raise ConfigurationError("truncation bound leaves no probability mass")
        object.__setattr__(self, "_frozen", self._make_frozen())

    # -- constructors ----------------------------------------------------
    @classmethod
    def exponential(cls, rate: float, bound: float | None = None) -> "ServiceDist":
        return cls("exponential", (rate,), bound)

    @classmethod
    def from_grid(cls, grid: GridCdf, bound: float | None = None) -> "ServiceDist":
        return cls("grid", (), bound, grid)

    def truncated(self, bound: float) -> "ServiceDist":
        return ServiceDist(self.family, self.params, bound, self.grid)

    # -- base (untruncated) law ------------------------------------------
    def _make_frozen(self):
        p = self.params
        if self.family == "exponential":
            return stats.expon(scale=1.0 / p[0])
        if self.family == "weibull":
            return stats.weibull_min(p[0], scale=p[1])
        if self.family == "gamma":
            return stats.gamma(p[0], scale=p[1])
        if self.family == "lognormal":
            return stats.lognorm(p[0], scale=p[1])
        if self.family == "uniform":
            return stats.uniform(loc=p[0], scale=p[1] - p[0])
        return None

    def _base_cdf(self, x):
        if self.family == "grid":
            return self.grid.cdf(x)
        if self._frozen is None:
            object.__setattr__(self, "_frozen", self._make_frozen())
        return self._frozen.cdf(x)

    @property
    def _mass(self) -> float:
        return 1.0 if self.bound is None else float(self._base_cdf(self.bound))

    # -- distribution interface -----------------------------------------
    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        val = np.asarray(self._base_cdf(np.maximum(x, 0.0)), dtype=float) / self._mass
        val = np.where(x < 0, 0.0, np.minimum(val, 1.0))
        if self.bound is not None:
            val = np.where(x >= self.bound, 1.0, val)
        return val if val.ndim else float(val)

    def sf(self, x):
        x = np.asarray(x, dtype=float)
        if self.bound is None and self._frozen is not None:
            val = np.where(x < 0, 1.0, self._frozen.sf(np.maximum(x, 0.0)))
            return val if val.ndim else float(val)
        val = 1.0 - np.asarray(self.cdf(x))
        return val if val.ndim else float(val)

    def pdf(self, x):
        if self.family == "grid":
            raise UnsupportedDataError("grid-cdf laws have no density")
        x = np.asarray(x, dtype=float)
        val = self._frozen.pdf(x) / self._mass
        if self.bound is not None:
            val = np.where(x > self.bound, 0.0, val)
        return val

    def ppf(self, u):
        u = np.asarray(u, dtype=float)
        if self.family == "grid":
            return self.grid.ppf(u * self._mass)
        if self.bound is None:
            return self._frozen.ppf(u)
        return np.minimum(self._frozen.ppf(u * self._mass), self.bound)

    def upper(self, tail: float = 1e-4) -> float:
        """Point beyond which at most ``tail`` mass remains."""
        if self.bound is not None:
            return float(self.bound)
        if self.family == "grid":
            return self.grid.support_max
        return float(self._frozen.isf(tail))

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        """``n`` draws by inversion (a prefix of a longer draw is a shorter draw)."""
        return np.asarray(self.ppf(open_uniforms(rng, n)), dtype=float)

    def mean(self) -> float:
        if self.family == "grid":
            return self._grid_view().mean()
        if self.bound is None:
            return float(self._frozen.mean())
        val, _ = integrate.quad(self.sf, 0.0, self.bound, limit=200, epsabs=1e-13)
        return float(val)

    def var(self) -> float:
        if self.family == "grid":
            return self._grid_view().var()
        if self.bound is None:
            return float(self._frozen.var())
        m2, _ = integrate.quad(lambda t: 2.0 * t * self.sf(t), 0.0, self.bound, limit=200, epsabs=1e-13)
        return float(m2 - self.mean() ** 2)

    def tail_integral(self, x: float) -> float:
        """``int_x^inf (1 - F(t)) dt``."""
        if self.bound is not None or self.family == "grid":
            hi = self.bound if self.bound is not None else self.grid.support_max
            if x >= hi:
                return 0.0
            val, _ = integrate.quad(self.sf, x, hi, limit=200, epsabs=1e-14)
            return float(val)
        if self.family == "exponential":
            return float(self._frozen.sf(x) / self.params[0])
        val, _ = integrate.quad(self.sf, x, np.inf, limit=200, epsabs=1e-14)
        return float(val)

    def _grid_view(self) -> GridCdf:
        return self.grid if self.bound is None else self.grid.restrict(self.bound)

    def lst(self, z):
        return lst_of_dist(self, z)

    def to_dict(self) -> dict:
        d = {"family": self.family}
        d.update(dict(zip(_PARAM_NAMES[self.family], self.params)))
        if self.bound is not None:
            d["bound"] = self.bound
        if self.grid is not None:
            d["grid"] = self.grid.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ServiceDist":
        family = d["family"]
        if family not in FAMILIES:
            raise ConfigurationError(f"unknown service family {family!r}")
        try:
            params = tuple(float(d[name]) for name in _PARAM_NAMES[family])
        except KeyError as exc:
            raise ConfigurationError(f"{family} is missing parameter {exc.args[0]!r}") from None
        grid = GridCdf.from_dict(d["grid"]) if "grid" in d else None
        bound = float(d["bound"]) if d.get("bound") not in (None, "") else None
        return cls(family, params, bound, grid)


def lst_of_dist(dist: ServiceDist, z):
    """Laplace-Stieltjes transform ``int exp(-z s) dG(s)`` of a service law.

    Closed forms are used for the exponential, gamma, uniform and grid
    families (truncated or not); Weibull and lognormal laws are integrated
    numerically as ``1 - z int_0^T exp(-z s) (1 - G(s)) ds`` with ``T`` cutting
    off at most ``1e-10`` of tail mass.
    """
    zz = np.asarray(z, dtype=float)
    if np.any(zz < 0):
        raise NumericDomainError("LST arguments must be nonnegative")
    flat = zz.ravel()
    out = np.array([_lst_scalar(dist, float(v)) for v in flat]) if dist.family not in ("grid",) \
        else np.asarray(dist._grid_view().lst(flat), dtype=float)
    out = np.where(flat == 0.0, 1.0, out)
    return out.reshape(zz.shape) if zz.ndim else float(out[0])


def _lst_scalar(dist: ServiceDist, z: float) -> float:
    if z == 0.0:
        return 1.0
    p, M = dist.params, dist.bound
    if dist.family == "exponential":
        r = p[0]
        if M is None:
            return r / (r + z)
        return r * -math.expm1(-(r + z) * M) / ((r + z) * -math.expm1(-r * M))
    if dist.family == "gamma":
        k, theta = p
        base = (1.0 + z * theta) ** -k
        if M is None:
            return base
        return base * special.gammainc(k, M * (z + 1.0 / theta)) / special.gammainc(k, M / theta)
    if dist.family == "uniform":
        low, high = p
        if M is not None:
            high = min(high, M)
        return math.exp(-z * low) * -math.expm1(-z * (high - low)) / (z * (high - low))
    T = M if M is not None else dist.upper(LST_TAIL)
    val, _ = integrate.quad(
        lambda s: math.exp(-z * s) * float(dist.sf(s)), 0.0, T, limit=400, epsabs=1e-13, epsrel=1e-12
    )
    return float(min(max(1.0 - z * val, 0.0), 1.0))


@dataclass(frozen=True)
class SampleData:
    """Observed inter-arrival times, service times and censoring flags."""

    inter_arrivals: np.ndarray
    services: np.ndarray
    censored: np.ndarray | None = None

    def __post_init__(self):
        a = np.array(self.inter_arrivals, dtype=float, ndmin=1).ravel()
        s = np.array(self.services, dtype=float, ndmin=1).ravel()
        c = np.zeros(s.shape, dtype=bool) if self.censored is None \
            else np.array(self.censored, dtype=bool, ndmin=1).ravel()
        if c.shape != s.shape:
            raise UnsupportedDataError("services and censored must have equal length")
        if np.any(~np.isfinite(a)) or np.any(a <= 0) or np.any(~np.isfinite(s)) or np.any(s <= 0):
            raise UnsupportedDataError("all inter-arrival and service times must be positive")
        for name, arr in (("inter_arrivals", a), ("services", s), ("censored", c)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def n(self) -> int:
        return int(max(self.inter_arrivals.size, self.services.size))

    @property
    def exact_services(self) -> np.ndarray:
        return self.services[~self.censored]

    def head(self, n: int) -> "SampleData":
        return SampleData(self.inter_arrivals[:n], self.services[:n], self.censored[:n])

    def concat(self, other: "SampleData") -> "SampleData":
        return SampleData(
            np.concatenate([self.inter_arrivals, other.inter_arrivals]),
            np.concatenate([self.services, other.services]),
            np.concatenate([self.censored, other.censored]),
        )

    @classmethod
    def empty(cls) -> "SampleData":
        return cls([], [], [])

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["a", "s", "censored"])
        for i in range(self.n):
            a = format(self.inter_arrivals[i], ".17g") if i < self.inter_arrivals.size else ""
            if i < self.services.size:
                s, c = format(self.services[i], ".17g"), str(int(self.censored[i]))
            else:
                s, c = "", ""
            w.writerow([a, s, c])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "SampleData":
        """Parse the ``a,s,censored`` format; blank cells mark missing entries."""
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header is None or [h.strip() for h in header] != ["a", "s", "censored"]:
            raise UnsupportedDataError("line 1: expected header 'a,s,censored'")
        a, s, c = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not x.strip() for x in row):
                continue
            if len(row) != 3:
                raise UnsupportedDataError(f"line {lineno}: expected 3 fields, got {len(row)}")
            try:
                if row[0].strip():
                    a.append(float(row[0]))
                if row[1].strip():
                    s.append(float(row[1]))
                    flag = row[2].strip().lower()
                    if flag not in ("0", "1", "true", "false", ""):
                        raise ValueError(flag)
                    c.append(flag in ("1", "true"))
            except ValueError as exc:
                raise UnsupportedDataError(f"line {lineno}: cannot parse {row!r} ({exc})") from None
            if (a and a[-1] <= 0) or (s and s[-1] <= 0):
                raise UnsupportedDataError(f"line {lineno}: times must be positive")
        return cls(a, s, c)


@dataclass(frozen=True)
class MG1Truth:
    """True arrival rate and service law of a simulated queue."""

    lambda0: float
    service: ServiceDist

    def __post_init__(self):
        if not (self.lambda0 > 0 and math.isfinite(self.lambda0)):
            raise ConfigurationError("lambda0 must be positive")

    @property
    def mu0(self) -> float:
        return self.service.mean()

    @property
    def rho0(self) -> float:
        return self.lambda0 * self.mu0

    @property
    def stable(self) -> bool:
        return self.rho0 < 1.0

    def transforms(self) -> "TransformSet":
        return pk_transforms(self.lambda0, self.service.lst, self.rho0, service_mean=self.mu0)


def simulate_mg1(truth: MG1Truth, n: int, seed: int) -> SampleData:
    """Draw ``n`` inter-arrival and ``n`` service times from the true model.

    The two samples come from independent child streams of ``seed``, and a
    run with a larger ``n`` extends a run with a smaller one.
    """
    if n < 0:
        raise ConfigurationError("n must be nonnegative")
    rng_a, rng_s = spawn(seed, 2)
    a = rng_a.exponential(1.0 / truth.lambda0, n)
    s = truth.service.sample(rng_s, n)
    return SampleData(a, s, np.zeros(n, dtype=bool))


def lindley_waits(data: SampleData) -> np.ndarray:
    """Waiting times of a FIFO queue started empty: ``W_{k+1} = max(0, W_k + S_k - A_{k+1})``."""
    if data.censored.any():
        raise UnsupportedDataError("Lindley recursion needs exact service times")
    a, s = data.inter_arrivals, data.services
    n = s.size
    if a.size < n:
        raise UnsupportedDataError("need one inter-arrival time per service")
    w = np.zeros(n)
    for k in range(1, n):
        w[k] = max(0.0, w[k - 1] + s[k - 1] - a[k])
    return w


def pk_mean_system_size(rho: float, lam: float, var_s: float) -> float:
    """Pollaczek-Khinchine mean number in system, ``rho + (rho^2 + lam^2 Var S) / (2 (1 - rho))``.

    ``rho = 0`` means a nonnegative service time with mean zero, which has no
    variance either, so the system is empty.
    """
    if rho >= 1:
        raise InstabilityError(f"traffic intensity {rho} >= 1")
    if rho < 0 or lam <= 0 or var_s < 0:
        raise ConfigurationError("need rho >= 0, lam > 0 and var_s >= 0")
    if rho == 0:
        return 0.0
    return rho + (rho**2 + lam**2 * var_s) / (2.0 * (1.0 - rho))


@dataclass(frozen=True, eq=False)
class TransformSet:
    """Evaluators for the service LST and the PK transforms.

    ``g`` is always available.  ``w``, ``q`` and ``n`` raise
    :class:`InstabilityError` when ``rho >= 1``.  At the removable points
    (``z = 1`` for ``q`` and ``n``, ``z = 0`` for ``w``) the value is the
    continuous limit ``(1 - rho) / (1 - lam * service_mean)``.

    With ``on_domain_error="nan"`` a vanishing or negative denominator at a
    non-removable point yields NaN instead of :class:`NumericDomainError`.
    """

    lam: float
    g: Callable
    rho: float
    service_mean: float
    bound: float | None = None
    mu_hat: float | None = None

    @property
    def lambda_hat(self) -> float:
        return self.lam

    @property
    def rho_hat(self) -> float:
        return self.rho

    @property
    def stable(self) -> bool:
        return self.rho < 1.0

    def _check_stable(self):
        if not self.stable:
            raise InstabilityError(f"traffic intensity {self.rho:.6g} >= 1; only g is available")

    def _limit(self) -> float:
        return (1.0 - self.rho) / (1.0 - self.lam * self.service_mean)

    @staticmethod
    def _finish(val, bad, on_domain_error, what):
        if np.any(bad):
            if on_domain_error == "raise":
                raise NumericDomainError(f"{what}: denominator vanishes")
            val = np.where(bad, np.nan, val)
        return val

    def w(self, z, on_domain_error: str = "raise"):
        """Waiting-time LST on ``z >= 0``."""
        self._check_stable()
        zz = np.atleast_1d(np.asarray(z, dtype=float))
        if np.any(zz < 0):
            raise NumericDomainError("w is defined on z >= 0")
        gz = np.asarray(self.g(zz), dtype=float)
        den = zz - self.lam * (1.0 - gz)
        removable = zz == 0.0
        bad = (den <= 0) & ~removable
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(removable, self._limit(), zz * (1.0 - self.rho) / den)
        val = self._finish(val, bad, on_domain_error, "w")
        return val.reshape(np.shape(z)) if np.ndim(z) else float(val[0])

    def _pgf_parts(self, z):
        zz = np.atleast_1d(np.asarray(z, dtype=float))
        if np.any((zz < 0) | (zz > 1)):
            raise NumericDomainError("q and n are defined on [0, 1]")
        gl = np.asarray(self.g(self.lam * (1.0 - zz)), dtype=float)
        return zz, gl

    def q(self, z, on_domain_error: str = "raise"):
        """Queue-length pgf on ``[0, 1]``."""
        self._check_stable()
        zz, gl = self._pgf_parts(z)
        den = gl - zz
        removable = zz == 1.0
        bad = (den <= 0) & ~removable
        with np.errstate(divide="ignore", invalid="ignore"):
            val = np.where(removable, self._limit(), (1.0 - zz) * (1.0 - self.rho) / den)
        val = self._finish(val, bad, on_domain_error, "q")
        return val.reshape(np.shape(z)) if np.ndim(z) else float(val[0])

    def n(self, z, on_domain_error: str = "raise"):
        """System-size pgf on ``[0, 1]``: ``n(z) = q(z) g(lam (1 - z))``."""
        zz, gl = self._pgf_parts(z)
        val = np.asarray(self.q(zz, on_domain_error), dtype=float) * gl
        return val.reshape(np.shape(z)) if np.ndim(z) else float(val[0])

    def table(self, z) -> dict[str, np.ndarray]:
        """Columns ``z, g, w, q, n``; entries outside a domain or unstable are NaN."""
        z = np.asarray(z, dtype=float)
        cols = {"z": z, "g": np.asarray(self.g(z), dtype=float)}
        for name in ("w", "q", "n"):
            col = np.full(z.shape, np.nan)
            if self.stable:
                mask = z >= 0 if name == "w" else (z >= 0) & (z <= 1)
                if mask.any():
                    col[mask] = getattr(self, name)(z[mask], on_domain_error="nan")
            cols[name] = col
        return cols

    def to_csv(self, z) -> str:
        cols = self.table(z)
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["z", "g", "w", "q", "n"])
        for i in range(len(cols["z"])):
            w.writerow([format(cols[k][i], ".17g") for k in ("z", "g", "w", "q", "n")])
        return buf.getvalue()


def pk_transforms(lam: float, g: Callable, rho: float, service_mean: float | None = None) -> TransformSet:
    """Pollaczek-Khinchine transforms for arrival rate ``lam`` and service LST ``g``.

    ``service_mean`` defaults to ``rho / lam``, the mean consistent with ``rho``.
    """
    if not lam > 0:
        raise ConfigurationError("arrival rate must be positive")
    if rho >= 1:
        raise InstabilityError(f"traffic intensity {rho} >= 1")
    if rho < 0:
        raise ConfigurationError("traffic intensity must be nonnegative")
    if service_mean is None:
        service_mean = rho / lam
    return TransformSet(float(lam), g, float(rho), float(service_mean))
