"""Piecewise-linear distribution functions with atoms.

A :class:`GridCdf` is stored as support points ``t_0 < t_1 < ... < t_m``, the
right-continuous values ``F(t_j)`` and the atom masses ``F(t_j) - F(t_j-)``.
Between support points the continuous part is interpolated linearly; before
``t_0`` the cdf rises linearly from ``(0, 0)`` to ``F(t_0-)``, and beyond
``t_m`` it equals one (any residual mass ``1 - F(t_m)`` sits just right of
``t_m``).
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .exceptions import ConfigurationError

_TOL = 1e-12


def cell_lst_weights(t: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Exact Laplace weights of uniform mass on each cell ``(t_{j-1}, t_j)``.

    Returns an array of shape ``(len(z), len(t) - 1)`` with entries
    ``(exp(-z t_{j-1}) - exp(-z t_j)) / (z (t_j - t_{j-1}))``.
    """
    t = np.asarray(t, dtype=float)
    z = np.atleast_1d(np.asarray(z, dtype=float))[:, None]
    left = t[:-1][None, :]
    width = np.diff(t)[None, :]
    zw = z * width
    with np.errstate(invalid="ignore", divide="ignore"):
        ratio = np.where(zw == 0.0, 1.0, -np.expm1(-zw) / np.where(zw == 0.0, 1.0, zw))
    return np.exp(-z * left) * ratio


def stieltjes_lst(t, right, left, z) -> np.ndarray:
    """LST of cdf paths given on a grid.

    Parameters
    ----------
    t : (m,) array
        Grid with ``t[0] == 0``.
    right, left : (..., m) arrays
        Right values ``F(t_j)`` and left limits ``F(t_j-)``; ``left[..., 0]``
        is taken to be zero.
    z : array_like
        Transform arguments, ``z >= 0``.

    Returns
    -------
    (..., len(z)) array
    """
    t = np.asarray(t, dtype=float)
    right = np.asarray(right, dtype=float)
    left = np.asarray(left, dtype=float)
    z = np.atleast_1d(np.asarray(z, dtype=float))
    cont = left[..., 1:] - right[..., :-1]
    atoms = right - left
    atoms[..., 0] = right[..., 0]
    out = cont @ cell_lst_weights(t, z).T
    out += atoms @ np.exp(-np.outer(z, t)).T
    out += (1.0 - right[..., -1])[..., None] * np.exp(-z * t[-1])
    return out


def integrated_survival(t, right, left) -> np.ndarray:
    """``int_0^{t_m} (1 - F)`` for paths on a grid, exact for linear cells."""
    t = np.asarray(t, dtype=float)
    dt = np.diff(t)
    s_right = 1.0 - np.asarray(right, dtype=float)
    s_left = 1.0 - np.asarray(left, dtype=float)
    return 0.5 * ((s_right[..., :-1] + s_left[..., 1:]) * dt).sum(axis=-1)


@dataclass(frozen=True, eq=False)
class GridCdf:
    """Distribution function on a grid: linear continuous part plus atoms.

    Parameters
    ----------
    t : array_like
        Strictly increasing, nonnegative support points.
    F : array_like
        Right-continuous cdf values at ``t``.
    jumps : array_like, optional
        Atom masses at ``t``; zero where omitted.
    """

    t: np.ndarray
    F: np.ndarray
    jumps: np.ndarray | None = None

    def __post_init__(self):
        t = np.array(self.t, dtype=float, ndmin=1)
        F = np.array(self.F, dtype=float, ndmin=1)
        J = np.zeros_like(t) if self.jumps is None else np.array(self.jumps, dtype=float, ndmin=1)
        if not (t.shape == F.shape == J.shape) or t.size == 0:
            raise ConfigurationError("t, F and jumps must be nonempty and of equal length")
        if t[0] < 0 or np.any(np.diff(t) <= 0):
            raise ConfigurationError("support points must be nonnegative and strictly increasing")
        if np.any(J < -_TOL):
            raise ConfigurationError("atom masses must be nonnegative")
        left = F - J
        if F.min() < -_TOL or F.max() > 1 + 1e-9 or left.min() < -_TOL:
            raise ConfigurationError("cdf values must lie in [0, 1]")
        if np.any(left[1:] < F[:-1] - 1e-9) or (t[0] > 0 and left[0] < -_TOL):
            raise ConfigurationError("cdf must be nondecreasing")
        if t[0] == 0 and left[0] > 1e-9:
            raise ConfigurationError("cdf must start at zero")
        for name, arr in (("t", t), ("F", np.clip(F, 0.0, 1.0)), ("jumps", np.clip(J, 0.0, None))):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    # -- internal views --------------------------------------------------
    def _padded(self):
        """Arrays with a leading ``(0, 0)`` point when ``t_0 > 0``."""
        t, F, J = self.t, self.F, self.jumps
        if t[0] > 0:
            t = np.concatenate([[0.0], t])
            F = np.concatenate([[0.0], F])
            J = np.concatenate([[0.0], J])
        return t, F, F - J

    # -- evaluation ------------------------------------------------------
    def __call__(self, x):
        return self.cdf(x)

    def cdf(self, x):
        x = np.asarray(x, dtype=float)
        t, F, L = self._padded()
        j = np.clip(np.searchsorted(t, x, side="left"), 1, len(t) - 1)
        w = (x - t[j - 1]) / (t[j] - t[j - 1])
        val = F[j - 1] + w * (L[j] - F[j - 1])
        val = np.where(x == t[j], F[j], val)
        val = np.where(x <= t[0], np.where(x == t[0], F[0], 0.0), val)
        val = np.where(x > t[-1], 1.0, val)
        return val if val.ndim else float(val)

    def left_limit(self, x):
        """``F(x-)``."""
        x = np.asarray(x, dtype=float)
        t, F, L = self._padded()
        j = np.searchsorted(t, x, side="left")
        on_grid = (j < len(t)) & (t[np.minimum(j, len(t) - 1)] == x)
        val = np.where(on_grid, L[np.minimum(j, len(t) - 1)], self.cdf(x))
        return val if val.ndim else float(val)

    def sf(self, x):
        return 1.0 - np.asarray(self.cdf(x))

    @property
    def residual(self) -> float:
        """Mass not accounted for on the grid (placed just after ``t_m``)."""
        return float(1.0 - self.F[-1])

    @property
    def support_max(self) -> float:
        return float(self.t[-1])

    def mean(self) -> float:
        t, F, L = self._padded()
        return float(integrated_survival(t, F, L))

    def second_moment(self) -> float:
        """``E[S^2] = 2 int t (1 - F(t)) dt``, exact on linear cells."""
        t, F, L = self._padded()
        a, b = t[:-1], t[1:]
        sa, sb = 1.0 - F[:-1], 1.0 - L[1:]
        # exact integral of t * (linear survival) over each cell
        h = b - a
        integral = h * (sa * (2 * a + b) + sb * (a + 2 * b)) / 6.0
        return float(2.0 * integral.sum())

    def var(self) -> float:
        return max(self.second_moment() - self.mean() ** 2, 0.0)

    def lst(self, z):
        """``int exp(-z s) dF(s)``; exact for the piecewise-linear representation."""
        t, F, L = self._padded()
        zz = np.asarray(z, dtype=float)
        out = stieltjes_lst(t, F, L, zz.ravel())
        return out.reshape(zz.shape) if zz.ndim else float(out[0])

    def ppf(self, u):
        """Generalised inverse ``inf{t : F(t) >= u}``."""
        u = np.asarray(u, dtype=float)
        t, F, L = self._padded()
        # knots of the piecewise-linear graph, with vertical steps at atoms
        xs = np.repeat(t, 2)
        ys = np.ravel(np.column_stack([L, F]))
        k = np.searchsorted(ys, u, side="left")
        k = np.clip(k, 1, len(ys) - 1)
        y0, y1 = ys[k - 1], ys[k]
        x0, x1 = xs[k - 1], xs[k]
        with np.errstate(invalid="ignore", divide="ignore"):
            w = np.where(y1 > y0, (u - y0) / (y1 - y0), 1.0)
        out = x0 + w * (x1 - x0)
        out = np.where(u > ys[-1], t[-1], out)
        out = np.where(u <= 0, 0.0, out)
        return out if out.ndim else float(out)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return np.asarray(self.ppf(rng.random(n) + 2.0**-54), dtype=float)

    def restrict(self, bound: float) -> "GridCdf":
        """Same cdf with every point beyond ``bound`` dropped and ``F(bound) = 1``."""
        keep = self.t < bound
        t = np.append(self.t[keep], bound)
        left = float(self.left_limit(bound))
        F = np.append(self.F[keep], 1.0)
        J = np.append(self.jumps[keep], 1.0 - left)
        return GridCdf(t, F, J)

    # -- serialisation ---------------------------------------------------
    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["t", "F"])
        for ti, Fi in zip(self.t, self.F):
            w.writerow([format(ti, ".17g"), format(Fi, ".17g")])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "GridCdf":
        """Read a ``t,F`` table; jumps are inferred where F steps between equal t."""
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or [c.strip() for c in rows[0]] != ["t", "F"]:
            raise ConfigurationError("expected header 't,F'")
        t = np.array([float(r[0]) for r in rows[1:]])
        F = np.array([float(r[1]) for r in rows[1:]])
        return cls(t, F)

    def to_dict(self) -> dict:
        return {"t": self.t.tolist(), "F": self.F.tolist(), "jumps": self.jumps.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "GridCdf":
        return cls(d["t"], d["F"], d.get("jumps"))

    @classmethod
    def point_mass(cls, x: float) -> "GridCdf":
        return cls([x], [1.0], [1.0])
