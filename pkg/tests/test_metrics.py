import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from isabc.channel import ChannelSet
from isabc.metrics import (
    BeamformingSolution,
    EhModel,
    EhParams,
    NoiseSpec,
    dbm_to_watt,
    eh_forward,
    eh_inverse,
    eh_logistic,
    empirical_sinr,
    incident_power,
    noise_power,
    rate_summary,
    sensing_sinr,
    tag_sinr,
    user_sinr,
    watt_to_dbm,
)
from isabc.ao import mmse_receivers

from conftest import make_channel


def scalar_channel(f=1.0, h=1.0):
    """M = N = 1, single tag, hand-checkable."""
    f = np.array([f], complex)
    gf = np.array([[1.0]], complex)
    gb = np.array([[1.0]], complex)
    v = np.array([h], complex)
    return ChannelSet(
        f=f, g_f=gf, g_b=gb, v=v, h=gf * v[:, None],
        G=np.stack([np.outer(gb[0], gf[0].conj())]),
        theta=np.zeros(1), zeta_f=1.0, zeta_g=np.ones(1), zeta_v=np.ones(1),
    )


def random_solution(ch, rng, power=1.0):
    m = ch.num_tx
    w = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) * math.sqrt(power / (2 * m))
    a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    s = (a @ a.conj().T) * (power / (4 * m))
    alpha = rng.uniform(0.2, 0.8, ch.num_tags)
    u = mmse_receivers(ch, w, s, alpha, 1e-13) if ch.num_tags else np.zeros((0, ch.num_rx))
    return BeamformingSolution(w=w, S=s, u=u, alpha=alpha)


class TestConversions:
    def test_zero_dbm(self):
        assert dbm_to_watt(0.0) == pytest.approx(1e-3, rel=1e-12)

    def test_minus_twenty(self):
        assert dbm_to_watt(-20.0) == pytest.approx(1e-5, rel=1e-12)

    @given(st.floats(-120, 60))
    def test_round_trip(self, x):
        assert watt_to_dbm(dbm_to_watt(x)) == pytest.approx(x, abs=1e-12)

    def test_nonpositive_watt_rejected(self):
        with pytest.raises(ValueError):
            watt_to_dbm(0.0)


class TestNoise:
    def test_default_setup(self):
        # -174 + 70 + 10 = -94 dBm
        sigma2 = noise_power(NoiseSpec(10e6, 10.0))
        assert watt_to_dbm(sigma2) == pytest.approx(-94.0, abs=1e-9)

    def test_one_hz(self):
        assert watt_to_dbm(noise_power(NoiseSpec(1.0, 0.0))) == pytest.approx(-174.0, abs=1e-9)

    def test_double_bandwidth(self):
        a = noise_power(NoiseSpec(5e6, 7.0))
        b = noise_power(NoiseSpec(10e6, 7.0))
        assert 10 * math.log10(b / a) == pytest.approx(10 * math.log10(2), abs=1e-12)


class TestSinrClosedForms:
    def test_user_no_interference(self):
        ch = scalar_channel(f=2.0, h=0.0)
        sol = BeamformingSolution(
            w=np.array([3.0 + 0j]), S=np.zeros((1, 1)), u=np.ones((1, 1)), alpha=np.array([0.5])
        )
        assert user_sinr(ch, sol, 1e-2) == pytest.approx(36.0 / 1e-2, rel=1e-12)

    def test_user_scalar_case(self):
        # |f^H w|^2 = p, one tag with unit cascade and alpha = 0.5
        p, sigma2 = 2.5, 0.3
        ch = scalar_channel(f=1.0, h=1.0)
        sol = BeamformingSolution(
            w=np.array([math.sqrt(p) + 0j]), S=np.zeros((1, 1)),
            u=np.ones((1, 1)), alpha=np.array([0.5]),
        )
        assert user_sinr(ch, sol, sigma2) == pytest.approx(p / (0.5 * p + sigma2), rel=1e-12)

    def test_tag_single(self):
        ch = scalar_channel(f=1.0, h=2.0)
        sol = BeamformingSolution(
            w=np.array([1.0 + 0j]), S=np.zeros((1, 1)), u=np.ones((1, 1)), alpha=np.array([0.25])
        )
        # numerator 0.25 * |2|^2, empty interference sum
        assert tag_sinr(ch, sol, 0, 1e-3) == pytest.approx(0.25 * 4.0 / 1e-3, rel=1e-12)

    def test_tag_symmetry(self, sigma2):
        ch = make_channel(seed=11, k=2)
        # force identical cascades so the two tags are symmetric
        object.__setattr__(ch, "h", np.stack([ch.h[0], ch.h[0]]))
        sol = random_solution(ch, np.random.default_rng(0))
        sol.alpha = np.array([0.5, 0.5])
        s0 = tag_sinr(ch, sol, 0, sigma2)
        s1 = tag_sinr(ch, sol, 1, sigma2)
        assert s0 == pytest.approx(s1, rel=1e-9)

    def test_sensing_single_tag_noise_only(self, sigma2):
        ch = make_channel(seed=12, k=1)
        sol = random_solution(ch, np.random.default_rng(1))
        rx = sol.covariance()
        expected = (
            sol.alpha[0]
            * np.vdot(sol.u[0], ch.G[0] @ rx @ ch.G[0].conj().T @ sol.u[0]).real
            / sigma2
        )
        assert sensing_sinr(ch, sol, 0, sigma2) == pytest.approx(expected, rel=1e-12)

    def test_sensing_orthogonal_receiver_zero(self, sigma2):
        ch = make_channel(seed=13, k=1, n=4)
        sol = random_solution(ch, np.random.default_rng(2))
        # build u orthogonal to the return steering
        g = ch.g_b[0]
        u = np.zeros(4, complex)
        u[0], u[1] = g[1].conj(), -g[0].conj()
        u /= np.linalg.norm(u)
        sol.u = u[None, :]
        assert sensing_sinr(ch, sol, 0, sigma2) < 1e-12

    def test_sensing_phase_invariance(self, sigma2):
        ch = make_channel(seed=14)
        sol = random_solution(ch, np.random.default_rng(3))
        base = sensing_sinr(ch, sol, 1, sigma2)
        sol.u = sol.u * np.exp(1j * 0.7)
        assert sensing_sinr(ch, sol, 1, sigma2) == pytest.approx(base, rel=1e-12)

    def test_incident_power_matched_and_orthogonal(self):
        ch = make_channel(seed=15, k=1, m=4)
        g = ch.g_f[0]
        w = g / np.linalg.norm(g) * 2.0
        sol = BeamformingSolution(
            w=w, S=np.zeros((4, 4)), u=np.ones((1, ch.num_rx)) / math.sqrt(ch.num_rx),
            alpha=np.array([0.5]),
        )
        assert incident_power(ch, sol, 0) == pytest.approx(4.0 * ch.zeta_g[0], rel=1e-12)
        # isotropic covariance: g^H (c I) g = c * zeta
        sol.w = np.zeros(4, complex)
        sol.S = 0.25 * np.eye(4)
        assert incident_power(ch, sol, 0) == pytest.approx(0.25 * ch.zeta_g[0], rel=1e-12)

    def test_scale_covariance(self, sigma2):
        ch = make_channel(seed=16)
        sol = random_solution(ch, np.random.default_rng(4))
        beta = 3.7
        scaled = BeamformingSolution(
            w=math.sqrt(beta) * sol.w, S=beta * sol.S, u=sol.u, alpha=sol.alpha
        )
        for k in range(ch.num_tags):
            assert incident_power(ch, scaled, k) == pytest.approx(
                beta * incident_power(ch, sol, k), rel=1e-9
            )
        # with noise scaled too, every SINR is invariant
        assert user_sinr(ch, scaled, beta * sigma2) == pytest.approx(
            user_sinr(ch, sol, sigma2), rel=1e-9
        )
        assert tag_sinr(ch, scaled, 0, beta * sigma2) == pytest.approx(
            tag_sinr(ch, sol, 0, sigma2), rel=1e-9
        )
        assert sensing_sinr(ch, scaled, 0, beta * sigma2) == pytest.approx(
            sensing_sinr(ch, sol, 0, sigma2), rel=1e-9
        )


class TestEnergyHarvester:
    def test_zero_input_zero_output(self, eh_params):
        assert eh_forward(0.0, eh_params) == 0.0

    def test_midpoint(self, eh_params):
        # logistic midpoint at b_nl; hand-evaluated shifted value
        assert eh_forward(0.003, eh_params) == pytest.approx(0.009999999954128182, rel=1e-12)

    def test_saturation(self, eh_params):
        assert eh_forward(1.0, eh_params) == pytest.approx(0.02, rel=1e-9)

    def test_monotone(self, eh_params):
        grid = np.linspace(0.0, 1.0, 2001)
        vals = np.array([eh_forward(p, eh_params) for p in grid])
        assert np.all(np.diff(vals) >= -1e-15)

    def test_inverse_printed_value(self, eh_params):
        assert eh_inverse(1e-5, eh_params) == pytest.approx(1.8124371352343125e-3, abs=1e-12)

    def test_inverse_midpoint(self, eh_params):
        assert eh_inverse(0.01, eh_params) == pytest.approx(0.003, rel=1e-12)

    @given(st.floats(1e-7, 0.0199))
    @settings(max_examples=100)
    def test_logistic_round_trip(self, p):
        params = EhParams(p_b=1e-5)
        assert eh_logistic(eh_inverse(p, params), params) == pytest.approx(p, rel=1e-12)

    def test_inverse_domain(self, eh_params):
        with pytest.raises(ValueError):
            eh_inverse(0.02, eh_params)
        with pytest.raises(ValueError):
            eh_inverse(0.0, eh_params)

    def test_linear_model(self):
        params = EhParams(p_b=1e-5, eta_linear=0.5, model=EhModel.LINEAR)
        assert eh_forward(0.01, params) == pytest.approx(0.005)
        assert eh_inverse(0.005, params) == pytest.approx(0.01)


class TestRates:
    def test_unit_sinr_unit_rate(self, sigma2):
        ch = scalar_channel(f=1.0, h=0.0)
        sol = BeamformingSolution(
            w=np.array([math.sqrt(sigma2) + 0j]), S=np.zeros((1, 1)),
            u=np.ones((1, 1)), alpha=np.array([0.5]),
        )
        rs = rate_summary(ch, sol, sigma2)
        assert rs.user_rate == pytest.approx(1.0, rel=1e-9)

    def test_zero_beams_zero_rates(self, sigma2):
        ch = make_channel(seed=17)
        sol = BeamformingSolution(
            w=np.zeros(8, complex), S=np.zeros((8, 8)),
            u=np.ones((3, 8)) / math.sqrt(8), alpha=np.full(3, 0.5),
        )
        rs = rate_summary(ch, sol, sigma2)
        assert rs.user_rate == 0.0
        assert np.all(rs.tag_rates == 0.0)
        assert np.all(rs.sensing_rates == 0.0)
        assert rs.sum_rate == 0.0


class TestEmpiricalOracle:
    def test_matches_analytic(self, sigma2):
        ch = make_channel(seed=18, m=4, n=4, k=2)
        sol = random_solution(ch, np.random.default_rng(5))
        est = empirical_sinr(ch, sol, sigma2, 200_000, np.random.default_rng(6))
        assert abs(est.user - user_sinr(ch, sol, sigma2)) < 3 * est.user_se
        for j in range(2):
            assert abs(est.tag[j] - tag_sinr(ch, sol, j, sigma2)) < 3 * est.tag_se[j]
            assert abs(est.sensing[j] - sensing_sinr(ch, sol, j, sigma2)) < 3 * est.sensing_se[j]

    def test_degenerate_no_reflection(self, sigma2):
        ch = make_channel(seed=19, m=4, n=4, k=1)
        sol = random_solution(ch, np.random.default_rng(7))
        sol.S = np.zeros((4, 4))
        sol.alpha = np.array([1e-12])
        est = empirical_sinr(ch, sol, sigma2, 100_000, np.random.default_rng(8))
        direct = abs(np.vdot(ch.f, sol.w)) ** 2 / sigma2
        assert est.user == pytest.approx(direct, rel=0.05)
