import math

import numpy as np
import pytest
import scipy.linalg

from isabc.ao import (
    AoConfig,
    AoStatus,
    SchemeFlags,
    SchemeSpec,
    SubproblemInfeasible,
    ao_solve,
    build_transmit_sdp,
    mmse_receivers,
    solve_reflection_lp,
    verify_solution,
)
from isabc.channel import strip_tags
from isabc.metrics import EhParams, activation_input
from isabc.sdp import Sense, solve_sdp

from conftest import make_channel, make_thresholds, opt_rng


def random_beam(ch, rng, power=1.0):
    m = ch.num_tx
    w = (rng.standard_normal(m) + 1j * rng.standard_normal(m)) * math.sqrt(power / (2 * m))
    a = rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))
    s = (a @ a.conj().T) * (power / (4 * m))
    return w, s


class TestMmseReceivers:
    def test_single_tag_whitened_match(self, sigma2):
        ch = make_channel(seed=20, k=1)
        rng = np.random.default_rng(0)
        w, s = random_beam(ch, rng)
        u = mmse_receivers(ch, w, s, np.array([0.5]), sigma2)
        # K = 1: Q is a scaled identity, so u is the matched direction
        g = ch.g_b[0] / np.linalg.norm(ch.g_b[0])
        assert abs(np.vdot(u[0], g)) == pytest.approx(1.0, abs=1e-9)

    def test_generalized_eigenvector_oracle(self, sigma2):
        rng = np.random.default_rng(1)
        for seed in range(5):
            ch = make_channel(seed=21 + seed, k=3)
            w, s = random_beam(ch, rng)
            alpha = rng.uniform(0.2, 0.8, 3)
            u = mmse_receivers(ch, w, s, alpha, sigma2)
            rx = np.outer(w, w.conj()) + s
            for j in range(3):
                q = sigma2 * np.eye(ch.num_rx, dtype=complex)
                for i in range(3):
                    if i != j:
                        gi = ch.G[i]
                        q += alpha[i] * gi @ rx @ gi.conj().T
                num = alpha[j] * ch.G[j] @ rx @ ch.G[j].conj().T
                vals, vecs = scipy.linalg.eigh(num, q)
                v = vecs[:, -1] / np.linalg.norm(vecs[:, -1])
                assert abs(np.vdot(v, u[j])) == pytest.approx(1.0, abs=1e-8)

    def test_dominates_random_vectors(self, sigma2):
        ch = make_channel(seed=26, k=2)
        rng = np.random.default_rng(2)
        w, s = random_beam(ch, rng)
        alpha = np.array([0.4, 0.7])
        u = mmse_receivers(ch, w, s, alpha, sigma2)
        rx = np.outer(w, w.conj()) + s

        def quotient(vec, j):
            q = sigma2 * np.eye(ch.num_rx, dtype=complex)
            for i in range(2):
                if i != j:
                    gi = ch.G[i]
                    q += alpha[i] * gi @ rx @ gi.conj().T
            num = alpha[j] * ch.G[j] @ rx @ ch.G[j].conj().T
            return (vec.conj() @ num @ vec).real / (vec.conj() @ q @ vec).real

        for j in range(2):
            best = quotient(u[j], j)
            for _ in range(1000):
                v = rng.standard_normal(ch.num_rx) + 1j * rng.standard_normal(ch.num_rx)
                v /= np.linalg.norm(v)
                assert quotient(v, j) <= best * (1 + 1e-9)

    def test_direction_stable_under_alpha_scaling(self, sigma2):
        ch = make_channel(seed=27, k=3)
        rng = np.random.default_rng(3)
        w, s = random_beam(ch, rng)
        alpha = np.array([0.3, 0.5, 0.7])
        u1 = mmse_receivers(ch, w, s, alpha, sigma2)
        u2 = mmse_receivers(ch, w, s, 0.999 * alpha, sigma2)
        for j in range(3):
            assert abs(np.vdot(u1[j], u2[j])) > 1 - 1e-3


class TestBuildTransmitSdp:
    def test_constraint_count_default(self, sigma2, eh_params):
        ch = make_channel(seed=28, k=3)
        u = ch.g_b / np.linalg.norm(ch.g_b, axis=1, keepdims=True)
        problem = build_transmit_sdp(
            ch, u, np.full(3, 0.5), make_thresholds(3), sigma2, eh_params
        )
        # sensing + combined-comm + harvesting rows, one of each per tag
        assert len(problem.constraints) == 9
        assert problem.include_s

    def test_com_only_closed_form(self, sigma2, eh_params):
        ch = strip_tags(make_channel(seed=29))
        flags = SchemeFlags(
            enable_user_sinr=True, enable_tag_sinr=False, enable_sensing_sinr=False,
            enable_eh=False, optimize_alpha=False, optimize_receivers=False,
            enable_sensing_covariance=False,
        )
        th = make_thresholds(0, gamma_u=2.0)
        problem = build_transmit_sdp(ch, np.zeros((0, 8)), np.zeros(0), th, sigma2, eh_params, flags)
        assert len(problem.constraints) == 1
        sol = solve_sdp(problem)
        expected = 2.0 * sigma2 / np.vdot(ch.f, ch.f).real
        assert sol.objective_value == pytest.approx(expected, rel=1e-6)

    def test_vacuous_targets_zero_power(self, sigma2, eh_params):
        ch = make_channel(seed=30, k=2)
        u = ch.g_b / np.linalg.norm(ch.g_b, axis=1, keepdims=True)
        th = make_thresholds(2, gamma_u=0.0, gamma_t=0.0, upsilon=0.0)
        flags = SchemeFlags(enable_eh=False)
        problem = build_transmit_sdp(ch, u, np.full(2, 0.5), th, sigma2, eh_params, flags)
        sol = solve_sdp(problem)
        assert sol.objective_value == pytest.approx(0.0, abs=1e-9)

    def test_rows_are_hermitian_and_affine(self, sigma2, eh_params):
        ch = make_channel(seed=31, k=3)
        u = ch.g_b / np.linalg.norm(ch.g_b, axis=1, keepdims=True)
        problem = build_transmit_sdp(
            ch, u, np.full(3, 0.5), make_thresholds(3, lambda_si=1e-9), sigma2, eh_params
        )
        for c in problem.constraints:
            assert np.allclose(c.coeff_w, c.coeff_w.conj().T)
            assert c.sense is Sense.GEQ


class TestReflectionLp:
    def test_single_tag_grid_oracle(self, sigma2, eh_params):
        ch = make_channel(seed=32, k=1)
        rng = np.random.default_rng(4)
        # transmit point comfortably above the harvesting floor
        g = ch.g_f[0]
        w = g / np.linalg.norm(g) * math.sqrt(4 * activation_input(eh_params) / ch.zeta_g[0])
        s = np.zeros((ch.num_tx, ch.num_tx), complex)
        u = ch.g_b[:1] / np.linalg.norm(ch.g_b[0])
        th = make_thresholds(1)
        alpha, t1, t2 = solve_reflection_lp(ch, w, s, u, th, sigma2, eh_params)

        # oracle: dense grid over the single coefficient
        p_act = activation_input(eh_params)
        rx = np.outer(w, w.conj())
        n11 = abs(np.vdot(u[0], ch.g_b[0])) ** 2 * np.vdot(g, rx @ g).real
        p_in = np.vdot(g, rx @ g).real
        best_val, best_a = -np.inf, None
        for a in np.linspace(1e-3, 1 - 1e-3, 10_000):
            tau1 = (a * n11 - th.upsilon[0] * sigma2) / sigma2
            tau2 = ((1 - a) * p_in - p_act) / p_act
            if tau1 < 0 or tau2 < 0:
                continue
            val = tau1 + tau2
            if val > best_val:
                best_val, best_a = val, a
        assert alpha[0] == pytest.approx(best_a, abs=2e-4)

    def test_constructed_unique_point(self, sigma2, eh_params):
        # harvesting pins alpha from above, sensing from below; leave a sliver
        ch = make_channel(seed=33, k=1)
        g = ch.g_f[0]
        p_act = activation_input(eh_params)
        w = g / np.linalg.norm(g) * math.sqrt(2 * p_act / ch.zeta_g[0])
        s = np.zeros((ch.num_tx, ch.num_tx), complex)
        u = ch.g_b[:1] / np.linalg.norm(ch.g_b[0])
        p_in = np.vdot(g, np.outer(w, w.conj()) @ g).real
        # (1 - alpha) p_in >= p_act  =>  alpha <= 1 - p_act / p_in = 0.5
        n11 = abs(np.vdot(u[0], ch.g_b[0])) ** 2 * p_in
        ups = 0.499999 * n11 / sigma2  # sensing forces alpha >= 0.499999
        th = make_thresholds(1, upsilon=ups)
        alpha, t1, t2 = solve_reflection_lp(ch, w, s, u, th, sigma2, eh_params)
        assert 0.499999 - 1e-6 <= alpha[0] <= 0.5 + 1e-6

    def test_symmetric_tags_equal_alpha(self, sigma2, eh_params):
        ch = make_channel(seed=34, k=2)
        # symmetrize: identical steering and cascades for both tags
        for field in ("g_f", "g_b", "h"):
            arr = getattr(ch, field)
            object.__setattr__(ch, field, np.stack([arr[0], arr[0]]))
        object.__setattr__(ch, "G", np.stack([ch.G[0], ch.G[0]]))
        object.__setattr__(ch, "zeta_g", np.array([ch.zeta_g[0]] * 2))
        g = ch.g_f[0]
        w = g / np.linalg.norm(g) * math.sqrt(8 * activation_input(eh_params) / ch.zeta_g[0])
        s = np.zeros((ch.num_tx, ch.num_tx), complex)
        u = ch.g_b / np.linalg.norm(ch.g_b, axis=1, keepdims=True)
        th = make_thresholds(2, upsilon=1e-2)
        alpha, _, _ = solve_reflection_lp(ch, w, s, u, th, sigma2, eh_params)
        assert alpha[0] == pytest.approx(alpha[1], abs=1e-6)

    def test_infeasible_signalled(self, sigma2, eh_params):
        ch = make_channel(seed=35, k=1)
        w = np.zeros(ch.num_tx, complex)  # no incident power at all
        s = np.zeros((ch.num_tx, ch.num_tx), complex)
        u = ch.g_b[:1] / np.linalg.norm(ch.g_b[0])
        with pytest.raises(SubproblemInfeasible):
            solve_reflection_lp(ch, w, s, u, make_thresholds(1), sigma2, eh_params)

    def test_alpha_within_bounds(self, sigma2, eh_params):
        ch = make_channel(seed=36, k=3)
        rng = np.random.default_rng(5)
        w, s = random_beam(ch, rng, power=1e4)
        u = mmse_receivers(ch, w, s, np.full(3, 0.5), sigma2)
        th = make_thresholds(3, upsilon=1e-6)
        alpha, t1, t2 = solve_reflection_lp(ch, w, s, u, th, sigma2, eh_params)
        assert np.all(alpha >= 1e-3 - 1e-12)
        assert np.all(alpha <= 1 - 1e-3 + 1e-12)
        assert t1 >= 0 and t2 >= 0


def _spec(k=3, **kw):
    return SchemeSpec(
        flags=kw.pop("flags", SchemeFlags()),
        thresholds=kw.pop("thresholds", make_thresholds(k)),
        eh=kw.pop("eh", EhParams(p_b=1e-5)),
        sigma2=kw.pop("sigma2"),
    )


class TestAoSolve:
    def test_com_only_single_iteration_closed_form(self, sigma2, eh_params):
        ch = strip_tags(make_channel(seed=37))
        flags = SchemeFlags(
            enable_user_sinr=True, enable_tag_sinr=False, enable_sensing_sinr=False,
            enable_eh=False, optimize_alpha=False, optimize_receivers=False,
            enable_sensing_covariance=False,
        )
        spec = SchemeSpec(flags=flags, thresholds=make_thresholds(0), eh=eh_params, sigma2=sigma2)
        sol, trace = ao_solve(ch, spec, AoConfig(), opt_rng(0))
        expected = sigma2 / np.vdot(ch.f, ch.f).real
        assert trace.status is AoStatus.CONVERGED
        assert sol.transmit_power == pytest.approx(expected, rel=1e-6)
        # transmit beam is matched to the direct channel
        cos = abs(np.vdot(sol.w, ch.f)) / (np.linalg.norm(sol.w) * np.linalg.norm(ch.f))
        assert cos == pytest.approx(1.0, abs=1e-6)

    def test_monotone_and_feasible(self, sigma2, eh_params):
        for seed in range(5):
            ch = make_channel(seed=38 + seed)
            spec = _spec(sigma2=sigma2, eh=eh_params)
            sol, trace = ao_solve(ch, spec, AoConfig(), opt_rng(seed))
            f = trace.objective_per_iter
            assert all(b <= a * (1 + 1e-6) for a, b in zip(f[1:], f[2:]))
            ok, margins = verify_solution(ch, sol, spec, rtol=1e-6)
            assert ok, margins

    def test_threshold_monotonicity(self, sigma2, eh_params):
        ch = make_channel(seed=44)
        powers = []
        for gamma_u in (1.0, 2.0, 4.0):
            spec = SchemeSpec(
                flags=SchemeFlags(), thresholds=make_thresholds(3, gamma_u=gamma_u),
                eh=eh_params, sigma2=sigma2,
            )
            sol, trace = ao_solve(ch, spec, AoConfig(), opt_rng(1))
            assert trace.status is AoStatus.CONVERGED
            powers.append(sol.transmit_power)
        assert powers[0] <= powers[1] * (1 + 1e-6)
        assert powers[1] <= powers[2] * (1 + 1e-6)

    def test_unmeetable_targets_flagged(self, sigma2, eh_params):
        # more mutually interfering sensing targets than receive antennas:
        # the ratio conditions cannot all hold at unit targets
        ch = make_channel(seed=45, k=9, m=8, n=8)
        spec = SchemeSpec(
            flags=SchemeFlags(),
            thresholds=make_thresholds(9),
            eh=eh_params, sigma2=sigma2,
        )
        sol, trace = ao_solve(ch, spec, AoConfig(), opt_rng(2))
        assert trace.status is AoStatus.SUBPROBLEM_INFEASIBLE

    def test_trace_timing_recorded(self, sigma2, eh_params):
        ch = make_channel(seed=46)
        spec = _spec(sigma2=sigma2, eh=eh_params)
        _, trace = ao_solve(ch, spec, AoConfig(), opt_rng(3))
        assert trace.stage_seconds["transmit"] > 0.0
        assert trace.stage_seconds["receivers"] >= 0.0
        assert trace.iterations >= 1
