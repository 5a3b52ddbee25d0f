import json
import math

import numpy as np
import pytest

from bnpqueue import (
    CovarianceRefs,
    GridCdf,
    MG1Truth,
    PriorSpec,
    ServiceDist,
    bvm_experiment,
    consistency_experiment,
    cov_gamma,
    cov_h,
    cov_zeta,
    cov_zeta_naive,
    var_eta,
    zeta_mc_oracle,
)
from bnpqueue.asymptotics import CONSISTENCY_COLUMNS, cov_matrix_h, zeta_coefficients
from bnpqueue.exceptions import ConfigurationError, InstabilityError, NumericDomainError

EXP1 = ServiceDist.exponential(1.0)


@pytest.fixture(scope="module")
def refs():
    return CovarianceRefs(EXP1, 0.5, 10.0)


@pytest.fixture(scope="module")
def odds():
    return CovarianceRefs(EXP1, 0.5, 10.0, time_change="odds")


class TestReferenceCovariances:
    def test_h_value(self, refs):
        assert cov_h(refs, 1.0, 1.0) == pytest.approx(math.exp(-2), abs=1e-12)

    def test_h_closed_form(self, refs):
        u, v = np.meshgrid([0.3, 1.0, 2.5], [0.5, 1.7])
        np.testing.assert_allclose(cov_h(refs, u, v), np.exp(-u - v) * np.minimum(u, v), rtol=1e-12)

    def test_h_odds_is_bridge(self, odds):
        u = np.array([0.2, 1.0, 3.0])
        G = 1 - np.exp(-u)
        np.testing.assert_allclose(cov_h(odds, u, u), G * (1 - G), rtol=1e-12)
        assert cov_h(odds, 0.5, 2.0) == pytest.approx((1 - math.exp(-0.5)) * math.exp(-2.0), rel=1e-12)

    def test_gamma_and_eta(self, refs):
        assert cov_gamma(refs, 1.0, 1.0) == pytest.approx(1 / 16, abs=1e-4)
        assert var_eta(refs) == pytest.approx(0.5, abs=1e-3)

    @pytest.mark.parametrize("u,v", [(0.5, 0.5), (1.0, 2.0), (0.3, 4.0)])
    def test_gamma_odds_is_lst_covariance(self, odds, u, v):
        # the Brownian-bridge limit has covariance Cov(e^{-uS}, e^{-vS})
        expected = 1 / (1 + u + v) - 1 / ((1 + u) * (1 + v))
        assert cov_gamma(odds, u, v) == pytest.approx(expected, abs=1e-5)

    def test_eta_odds_is_variance(self, odds):
        assert var_eta(odds) == pytest.approx(1.0, abs=1e-3)

    def test_symmetry(self, refs):
        g = np.array([0.25, 0.5, 1.0, 2.0, 4.0])
        H = cov_matrix_h(refs, g)
        C = cov_gamma(refs, g, g)
        Z = cov_zeta(refs, g, g)
        for A in (H, C, Z):
            assert np.abs(A - A.T).max() <= 1e-8 * max(1.0, np.abs(A).max())
        assert np.all(np.linalg.eigvalsh(C) > -1e-10)

    def test_grid_doubling(self):
        a = CovarianceRefs(EXP1, 0.5, 10.0, n_quad=20000)
        b = CovarianceRefs(EXP1, 0.5, 10.0, n_quad=40000)
        g = [0.5, 1.0, 2.0]
        assert np.abs(cov_gamma(a, g, g) - cov_gamma(b, g, g)).max() < 1e-4
        assert abs(var_eta(a) - var_eta(b)) < 1e-4

    def test_point_mass(self):
        r = CovarianceRefs(GridCdf.point_mass(1.0), 0.5, 2.0)
        assert var_eta(r) == pytest.approx(0.0, abs=1e-6)
        assert cov_h(r, 0.5, 0.5) == 0.0

    def test_errors(self, refs):
        with pytest.raises(NumericDomainError):
            cov_h(refs, -1.0, 1.0)
        with pytest.raises(ConfigurationError):
            CovarianceRefs(EXP1, 0.5, 10.0, time_change="logit")
        with pytest.raises(ConfigurationError):
            CovarianceRefs(EXP1, -0.5, 10.0)
        with pytest.raises(NumericDomainError):
            cov_zeta(refs, 0.0, 1.0)
        with pytest.raises(InstabilityError):
            cov_zeta(CovarianceRefs(EXP1, 1.5, 10.0), 1.0, 1.0)


class TestZeta:
    def test_finite_positive_diagonal(self, refs):
        z = np.linspace(0.1, 5.0, 25)
        Z = cov_zeta(refs, z, z)
        assert np.all(np.isfinite(Z)) and np.all(np.diag(Z) > 0)

    def test_coefficients_match_finite_differences(self, refs):
        # w(z) = z (1 - lam mu) / (z - lam (1 - g(z))), perturbed in lam, mu, g
        z, lam, mu = 1.0, refs.lambda0, refs.mu0
        g = float(refs.g0(z))

        def w(lam, mu, g):
            return z * (1 - lam * mu) / (z - lam * (1 - g))

        eps = 1e-6
        c = {k: float(v[0]) for k, v in zeta_coefficients(refs, z).items()}
        assert (w(lam + eps, mu, g) - w(lam - eps, mu, g)) / (2 * eps) == pytest.approx(c["lambda"], rel=1e-6)
        assert (w(lam, mu + eps, g) - w(lam, mu - eps, g)) / (2 * eps) == pytest.approx(c["H"], rel=1e-6)
        assert (w(lam, mu, g + eps) - w(lam, mu, g - eps)) / (2 * eps) == pytest.approx(c["G"], rel=1e-6)

    @pytest.mark.slow
    @pytest.mark.parametrize("clock", ["hazard", "odds"])
    def test_matches_limit_simulation(self, clock):
        r = CovarianceRefs(EXP1, 0.5, 10.0, time_change=clock)
        z = [0.5, 1.0, 2.0]
        theo = cov_zeta(r, z, z)
        mc = zeta_mc_oracle(r, z, n_paths=100_000, seed=1)
        assert np.abs(mc - theo).max() / np.abs(theo).max() < 0.1

    def test_naive_assembly_disagrees(self, refs):
        z = [0.5, 1.0, 2.0]
        assert np.abs(cov_zeta_naive(refs, z, z)).max() > 2 * np.abs(cov_zeta(refs, z, z)).max()


class TestExperiments:
    def test_consistency_table(self):
        table = consistency_experiment(MG1Truth(0.5, EXP1), PriorSpec(n_cells=400), [20, 40], [0, 1])
        assert len(table.rows) == 4
        assert list(table.to_csv().splitlines()[0].split(",")) == list(CONSISTENCY_COLUMNS)
        assert set(table.averaged()) == {20, 40}
        assert np.all(table.column("err_G") > 0)

    def test_consistency_nested_and_reproducible(self):
        args = (MG1Truth(0.5, EXP1), PriorSpec(n_cells=400), [10, 30], [3])
        assert consistency_experiment(*args).to_csv() == consistency_experiment(*args).to_csv()

    def test_bvm_guards(self):
        truth = MG1Truth(0.5, EXP1)
        with pytest.raises(ConfigurationError):
            bvm_experiment(truth, PriorSpec(), 100, 50, 0)
        with pytest.raises(ConfigurationError):
            bvm_experiment(truth, PriorSpec(), 100, 200, 0, functional="lst")
        with pytest.raises(ConfigurationError):
            bvm_experiment(truth, PriorSpec(), 100, 200, 0, functional="quantile")

    def test_bvm_cdf_odds_clock(self):
        truth = MG1Truth(0.5, EXP1)
        rep = bvm_experiment(truth, PriorSpec(M_bound=10.0), 1000, 2000, 3, time_change="odds")
        assert rep.max_abs_dev < 0.03
        assert np.all(np.abs(rep.mean) < 4 * rep.mean_se)
        d = json.loads(rep.to_json())
        assert d["functional"] == "cdf" and len(d["empirical"]) == 64

    def test_bvm_mean_odds_clock(self):
        truth = MG1Truth(0.5, EXP1)
        rep = bvm_experiment(truth, PriorSpec(M_bound=10.0), 1000, 2000, 4, functional="mean",
                             time_change="odds")
        assert rep.empirical.shape == (1, 1)
        assert rep.empirical[0, 0] == pytest.approx(1.0, rel=0.15)
