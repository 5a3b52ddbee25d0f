import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnpqueue.exceptions import ConfigurationError
from bnpqueue.gridcdf import GridCdf, integrated_survival, stieltjes_lst


def exp_grid(m=4000, T=30.0):
    t = np.linspace(0, T, m + 1)
    return GridCdf(t, 1 - np.exp(-t))


def test_point_mass_lst_and_mean():
    d = GridCdf.point_mass(1.0)
    assert d.lst(1.0) == pytest.approx(math.exp(-1), abs=1e-15)
    assert d.mean() == pytest.approx(1.0)
    assert d.var() == pytest.approx(0.0, abs=1e-12)
    assert d.cdf(0.999) == 0.0 and d.cdf(1.0) == 1.0


def test_exponential_grid_moments():
    G = exp_grid()
    assert G.mean() == pytest.approx(1.0, abs=1e-5)
    assert G.second_moment() == pytest.approx(2.0, abs=1e-4)
    assert G.lst(1.0) == pytest.approx(0.5, abs=1e-5)


def test_atom_and_left_limit():
    G = GridCdf([0.0, 1.0, 2.0], [0.0, 0.6, 1.0], [0.0, 0.3, 0.0])
    assert G.left_limit(1.0) == pytest.approx(0.3)
    assert G.cdf(1.0) == pytest.approx(0.6)
    assert G.cdf(0.5) == pytest.approx(0.15)
    assert G.ppf(0.45) == pytest.approx(1.0)


def test_restrict_puts_residual_at_bound():
    G = exp_grid(1000, 10.0).restrict(5.0)
    assert G.cdf(5.0) == 1.0
    assert G.jumps[-1] == pytest.approx(math.exp(-5), rel=1e-9)


@pytest.mark.parametrize("bad", [
    ([1.0, 0.5], [0.2, 0.4]),
    ([0.0, 1.0], [0.5, 0.4]),
    ([0.0, 1.0], [0.0, 1.5]),
])
def test_invalid_grids(bad):
    with pytest.raises(ConfigurationError):
        GridCdf(*bad)


def test_csv_round_trip():
    G = exp_grid(10, 3.0)
    back = GridCdf.from_csv(G.to_csv())
    np.testing.assert_array_equal(back.t, G.t)
    np.testing.assert_array_equal(back.F, G.F)


def test_batch_helpers_match_single_path():
    G = exp_grid(200, 10.0)
    right, left = G.F[None, :], (G.F - G.jumps)[None, :]
    assert integrated_survival(G.t, right, left)[0] == pytest.approx(G.mean())
    z = np.array([0.0, 0.5, 3.0])
    np.testing.assert_allclose(stieltjes_lst(G.t, right, left, z)[0], G.lst(z))


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(0.01, 0.99), min_size=2, max_size=12))
def test_random_cdf_properties(vals):
    F = np.sort(np.asarray(vals))
    t = np.arange(1, F.size + 1, dtype=float)
    G = GridCdf(t, F)
    x = np.linspace(0, t[-1] + 1, 97)
    c = G.cdf(x)
    assert np.all(np.diff(c) >= -1e-12)
    assert c.min() >= 0 and c.max() <= 1
    z = np.linspace(0, 5, 21)
    g = G.lst(z)
    assert g[0] == pytest.approx(1.0)
    assert np.all(np.diff(g) <= 1e-12)
    u = np.linspace(0.01, F[-1], 17)
    assert np.all(G.cdf(G.ppf(u)) >= u - 1e-9)
