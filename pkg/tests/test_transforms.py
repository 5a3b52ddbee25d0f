import json

import numpy as np
import pytest

from bnpqueue import (
    GammaPosterior,
    MG1Truth,
    ServiceDist,
    build_transforms,
    dirichlet_as_beta_stacy,
    posterior_update,
    simulate_mg1,
    stability_probability,
    update_gamma,
    z_grid,
)
from bnpqueue.exceptions import ConfigurationError, InstabilityError

EXP1 = ServiceDist.exponential(1.0)


@pytest.fixture
def prior_pipeline():
    return build_transforms(GammaPosterior(1.0, 2.0), dirichlet_as_beta_stacy(1.0, EXP1))


@pytest.fixture(scope="module")
def fitted():
    data = simulate_mg1(MG1Truth(0.5, EXP1), 300, 4)
    lam = update_gamma(GammaPosterior(1.0, 1.0), data)
    bs = posterior_update(dirichlet_as_beta_stacy(1.0, EXP1), data)
    return lam, bs


class TestPriorPipeline:
    def test_values(self, prior_pipeline):
        T = prior_pipeline
        assert T.rho_hat == pytest.approx(0.5, abs=1e-3)
        assert T.w(1.0) == pytest.approx(2 / 3, abs=1e-3)
        assert T.q(0.0) == pytest.approx(0.75, abs=1e-3)
        assert T.n(0.0) == pytest.approx(0.5, abs=1e-3)
        assert T.g(0.0) == pytest.approx(1.0, abs=1e-12)

    def test_rho_is_product(self, prior_pipeline):
        T = prior_pipeline
        assert T.rho_hat == pytest.approx(T.lambda_hat * T.mu_hat, rel=1e-14)

    def test_n_identity(self, fitted):
        T = build_transforms(*fitted)
        z = np.linspace(0, 1, 101)
        np.testing.assert_allclose(T.n(z), T.q(z) * T.g(T.lam * (1 - z)), rtol=0, atol=1e-12)

    def test_g_monotone_bounded(self, fitted):
        g = build_transforms(*fitted).g(z_grid())
        assert np.all(np.diff(g) <= 1e-15) and g.min() >= 0 and g.max() <= 1 + 1e-12

    def test_lst_bound_by_cdf_distance(self, fitted):
        # |g_n - g_0| <= sup |G_n - G_0| by integration by parts
        _, bs = fitted
        G = bs.bayes_cdf()
        z = z_grid()
        gap_g = np.abs(G.lst(z) - EXP1.lst(z)).max()
        t = np.union1d(G.t, np.linspace(0, G.t[-1], 20001))
        gap_G = max(np.abs(G(t) - EXP1.cdf(t)).max(), np.abs(G.left_limit(t) - EXP1.cdf(t)).max())
        assert gap_g <= gap_G + 1e-6

    def test_truncated(self, fitted):
        lam, _ = fitted
        H = EXP1.truncated(10.0)
        from bnpqueue import truncate_prior
        data = simulate_mg1(MG1Truth(0.5, H), 200, 5)
        bs = posterior_update(truncate_prior(dirichlet_as_beta_stacy(1.0, H), 10.0), data)
        T = build_transforms(lam, bs, trunc_M=10.0)
        assert T.bound == 10.0
        assert T.mu_hat <= 10.0
        assert T.mu_hat == pytest.approx(bs.bayes_cdf().restrict(10.0).mean(), rel=1e-12)
        with pytest.raises(ConfigurationError):
            build_transforms(lam, bs, trunc_M=0.0)


class TestInstability:
    def test_unstable_keeps_g(self):
        T = build_transforms(GammaPosterior(30.0, 10.0), dirichlet_as_beta_stacy(1.0, EXP1))
        assert not T.stable
        assert T.g(0.0) == pytest.approx(1.0)
        with pytest.raises(InstabilityError):
            T.w(1.0)
        with pytest.raises(InstabilityError):
            T.q(0.5)
        assert np.all(np.isnan(T.table(np.array([0.5]))["w"]))

    def test_require_stable(self):
        with pytest.raises(InstabilityError):
            build_transforms(GammaPosterior(30.0, 10.0), dirichlet_as_beta_stacy(1.0, EXP1), require_stable=True)


class TestStability:
    @pytest.mark.parametrize("lam,mu,expected", [(0.5, 1.0, 1.0), (2.0, 1.0, 0.0), (1.0, 1.0, 0.0)])
    def test_stubbed(self, fitted, lam, mu, expected):
        rep = stability_probability(*fitted, 50, 0, lam_draws=lam, mu_draws=mu)
        assert rep.p_stable == expected and rep.se == 0.0 and rep.k == 50

    def test_k_validation(self, fitted):
        with pytest.raises(ConfigurationError):
            stability_probability(*fitted, 0, 0)

    def test_reproducible_and_json(self, fitted):
        a = stability_probability(*fitted, 200, 3)
        b = stability_probability(*fitted, 200, 3)
        assert a == b
        assert set(json.loads(a.to_json())) == {"p_stable", "se", "k"}

    def test_doubling_k(self):
        # a short sample keeps the probability away from 0 and 1
        data = simulate_mg1(MG1Truth(0.8, EXP1), 40, 6)
        lam = update_gamma(GammaPosterior(1.0, 1.0), data)
        bs = posterior_update(dirichlet_as_beta_stacy(1.0, EXP1), data)
        a = stability_probability(lam, bs, 1000, 7)
        b = stability_probability(lam, bs, 2000, 8)
        assert 0.05 < a.p_stable < 0.95
        se = np.hypot(a.se, b.se)
        assert abs(a.p_stable - b.p_stable) <= 2 * se

    @pytest.mark.parametrize("lam0,check", [(0.5, lambda p: p > 0.99), (1.5, lambda p: p < 0.01)])
    def test_concentration(self, lam0, check):
        data = simulate_mg1(MG1Truth(lam0, EXP1), 1000, 2)
        lam = update_gamma(GammaPosterior(1.0, 1.0), data)
        bs = posterior_update(dirichlet_as_beta_stacy(1.0, EXP1), data)
        assert check(stability_probability(lam, bs, 2000, 2).p_stable)


def test_z_grid():
    z = z_grid()
    assert z.size == 201 and z[0] == 0 and z[1] == pytest.approx(1e-3) and z[-1] == pytest.approx(20)
