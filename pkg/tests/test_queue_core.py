import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bnpqueue import (
    GridCdf,
    MG1Truth,
    SampleData,
    ServiceDist,
    lindley_waits,
    lst_of_dist,
    pk_mean_system_size,
    pk_transforms,
    simulate_mg1,
)
from bnpqueue.exceptions import (
    ConfigurationError,
    InstabilityError,
    NumericDomainError,
    UnsupportedDataError,
)

Z20 = np.linspace(0.05, 0.95, 20)


def mm1_w(z, lam=0.5, mu=1.0):
    rho = lam / mu
    return (1 - rho) + rho * (mu - lam) / (mu - lam + z)


def mm1_n(z, rho=0.5):
    return (1 - rho) / (1 - rho * z)


def mm1_q(z, rho=0.5):
    # P(Q = 0) = P(N <= 1), P(Q = k) = P(N = k + 1)
    return (1 - rho) + (mm1_n(z, rho) - (1 - rho)) / z


class TestSimulation:
    def test_zero_length(self, exp1):
        d = simulate_mg1(MG1Truth(1.0, exp1), 0, 7)
        assert d.n == 0 and d.services.size == 0

    def test_seeded_determinism(self, exp1):
        a = simulate_mg1(MG1Truth(1.0, exp1), 100, 42)
        b = simulate_mg1(MG1Truth(1.0, exp1), 100, 42)
        assert a.to_csv() == b.to_csv()

    def test_prefix_property(self, exp1):
        a = simulate_mg1(MG1Truth(1.0, exp1), 50, 3)
        b = simulate_mg1(MG1Truth(1.0, exp1), 80, 3)
        np.testing.assert_array_equal(a.services, b.services[:50])
        np.testing.assert_array_equal(a.inter_arrivals, b.inter_arrivals[:50])

    def test_interarrival_mean_band(self, exp1):
        d = simulate_mg1(MG1Truth(2.0, exp1), 10_000, 1)
        assert 0.485 <= d.inter_arrivals.mean() <= 0.515
        assert not d.censored.any()

    def test_bad_truth(self, exp1):
        with pytest.raises(ConfigurationError):
            MG1Truth(0.0, exp1)
        with pytest.raises(ConfigurationError):
            ServiceDist("weibull", (-1.0, 1.0))


class TestLindley:
    def test_hand_recursions(self):
        assert lindley_waits(SampleData([1, 1, 1], [2, 2, 2])).tolist() == [0, 1, 2]
        assert lindley_waits(SampleData([5, 5], [1, 1])).tolist() == [0, 0]

    def test_censored_rejected(self):
        with pytest.raises(UnsupportedDataError):
            lindley_waits(SampleData([1, 1], [1, 1], [False, True]))

    def test_mm1_idle_probability(self, exp1):
        d = simulate_mg1(MG1Truth(0.5, exp1), 100_000, 11)
        p0 = np.mean(lindley_waits(d) == 0)
        assert abs(p0 - 0.5) < 0.02

    @settings(max_examples=40, deadline=None)
    @given(st.lists(st.tuples(st.floats(0.01, 5), st.floats(0.01, 5)), min_size=1, max_size=30))
    def test_nonnegative_and_monotone_in_arrivals(self, pairs):
        a, s = map(np.array, zip(*pairs))
        w = lindley_waits(SampleData(a, s))
        w2 = lindley_waits(SampleData(2 * a, s))
        assert np.all(w >= 0)
        assert np.all(w2 <= w + 1e-12)


class TestPKMean:
    @pytest.mark.parametrize("rho,lam,var,expected", [
        (0.0, 1.0, 1.0, 0.0),
        (0.5, 0.5, 1.0, 1.0),
        (0.5, 0.5, 0.0, 0.75),
    ])
    def test_values(self, rho, lam, var, expected):
        assert pk_mean_system_size(rho, lam, var) == pytest.approx(expected, abs=1e-15)

    def test_unstable(self):
        with pytest.raises(InstabilityError):
            pk_mean_system_size(1.0, 1.0, 1.0)


class TestLST:
    def test_exponential(self, exp1):
        assert lst_of_dist(exp1, 0.0) == 1.0
        assert lst_of_dist(exp1, 1.0) == pytest.approx(0.5, abs=1e-15)

    def test_dirac(self):
        d = ServiceDist.from_grid(GridCdf.point_mass(1.0))
        assert lst_of_dist(d, 1.0) == pytest.approx(math.exp(-1), abs=1e-12)

    def test_negative_argument(self, exp1):
        with pytest.raises(NumericDomainError):
            lst_of_dist(exp1, -0.1)

    @pytest.mark.parametrize("dist,closed", [
        (ServiceDist("gamma", (2.0, 0.5)), lambda z: (1 + 0.5 * z) ** -2.0),
        (ServiceDist("uniform", (1.0, 3.0)), lambda z: (math.exp(-z) - math.exp(-3 * z)) / (2 * z)),
        (ServiceDist("weibull", (1.0, 2.0)), lambda z: 1 / (1 + 2 * z)),
        (ServiceDist.exponential(2.0, bound=1.0),
         lambda z: 2 * (1 - math.exp(-(z + 2))) / ((z + 2) * (1 - math.exp(-2)))),
    ])
    def test_closed_forms(self, dist, closed):
        for z in (0.3, 1.0, 4.0):
            assert lst_of_dist(dist, z) == pytest.approx(closed(z), abs=1e-9)

    def test_truncated_gamma_matches_numeric(self):
        g = ServiceDist("gamma", (2.5, 1.0), bound=3.0)
        from scipy import integrate
        num = integrate.quad(lambda s: math.exp(-0.7 * s) * g.pdf(s), 0, 3)[0]
        assert lst_of_dist(g, 0.7) == pytest.approx(num, abs=1e-10)

    @pytest.mark.parametrize("dist", [
        ServiceDist.exponential(1.0),
        ServiceDist("weibull", (1.5, 1.0)),
        ServiceDist("gamma", (0.5, 2.0)),
        ServiceDist("lognormal", (0.5, 1.0)),
        ServiceDist("uniform", (0.0, 2.0)),
        ServiceDist("lognormal", (1.0, 1.0), bound=5.0),
    ])
    def test_lst_invariants(self, dist):
        z = np.linspace(0, 10, 41)
        g = lst_of_dist(dist, z)
        assert g[0] == 1.0
        assert np.all(np.diff(g) <= 1e-12)
        assert np.all((g >= 0) & (g <= 1))


class TestPKTransforms:
    def test_mm1_points(self, exp1):
        T = pk_transforms(0.5, exp1.lst, 0.5)
        assert T.w(1.0) == pytest.approx(2 / 3, abs=1e-12)
        assert T.q(0.0) == pytest.approx(0.75, abs=1e-12)
        assert T.n(0.0) == pytest.approx(0.5, abs=1e-12)

    def test_closed_form_path(self, exp1):
        T = pk_transforms(0.5, exp1.lst, 0.5)
        np.testing.assert_allclose(T.w(Z20), mm1_w(Z20), atol=1e-10, rtol=0)
        np.testing.assert_allclose(T.n(Z20), mm1_n(Z20), atol=1e-10, rtol=0)
        np.testing.assert_allclose(T.q(Z20), mm1_q(Z20), atol=1e-10, rtol=0)

    def test_quadrature_path(self):
        weib = ServiceDist("weibull", (1.0, 1.0))  # Exp(1) through numeric quadrature
        T = pk_transforms(0.5, weib.lst, 0.5)
        np.testing.assert_allclose(T.w(Z20), mm1_w(Z20), atol=1e-6, rtol=0)
        np.testing.assert_allclose(T.q(Z20), mm1_q(Z20), atol=1e-6, rtol=0)
        np.testing.assert_allclose(T.n(Z20), mm1_n(Z20), atol=1e-6, rtol=0)

    def test_removable_points(self, exp1):
        T = pk_transforms(0.5, exp1.lst, 0.5)
        assert T.q(1.0) == pytest.approx(1.0)
        assert T.n(1.0) == pytest.approx(1.0)
        assert T.w(0.0) == pytest.approx(1.0)
        # continuity at the removable points
        assert T.q(1 - 1e-6) == pytest.approx(1.0, abs=1e-5)
        assert T.w(1e-7) == pytest.approx(1.0, abs=1e-5)

    def test_identity_n_equals_q_times_g(self, exp1):
        T = pk_transforms(0.4, ServiceDist("gamma", (2.0, 0.5)).lst, 0.4)
        z = np.linspace(0, 1, 101)
        np.testing.assert_allclose(T.n(z), T.q(z) * T.g(0.4 * (1 - z)), atol=1e-12, rtol=0)

    def test_instability_and_domain(self, exp1):
        with pytest.raises(InstabilityError):
            pk_transforms(1.5, exp1.lst, 1.5)
        T = pk_transforms(0.5, exp1.lst, 0.5)
        with pytest.raises(NumericDomainError):
            T.q(1.5)

    def test_nonremovable_zero_denominator(self, exp1):
        # rho inconsistent with g: the w denominator changes sign on (0, inf)
        T = pk_transforms(3.0, exp1.lst, 0.5, service_mean=1.0)
        with pytest.raises(NumericDomainError):
            T.w(np.array([0.5, 1.0]))
        assert np.isnan(T.w(0.5, on_domain_error="nan"))


class TestSampleDataIO:
    def test_round_trip(self):
        d = SampleData([1.5, 0.25], [0.5, 2.0], [False, True])
        back = SampleData.from_csv(d.to_csv())
        np.testing.assert_array_equal(back.services, d.services)
        np.testing.assert_array_equal(back.censored, d.censored)
        assert d.to_csv().splitlines()[0] == "a,s,censored"

    @pytest.mark.parametrize("text,line", [
        ("a,s,censored\n1,2,0\n1,x,0\n", "line 3"),
        ("a,s,censored\n1,-2,0\n", "line 2"),
        ("x,y\n", "line 1"),
    ])
    def test_malformed(self, text, line):
        with pytest.raises(UnsupportedDataError, match=line):
            SampleData.from_csv(text)
