"""Three-block alternating optimizer for transmit-power minimization.

Each outer iteration updates, in order:

1. the receive beamformers (closed-form MMSE filters, each the
   principal generalized eigenvector of its sensing-SINR quotient),
2. the transmit beamformer and sensing covariance (relaxed trace SDP
   followed by rank-one recovery),
3. the tag reflection coefficients (a linear program that maximizes the
   worst sensing and harvesting margins).

The recorded objective is the total transmit power; it is non-increasing
across iterations up to solver noise because every stage keeps the
previous iterate feasible.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linprog

from .channel import ChannelSet
from .metrics import (
    BeamformingSolution,
    EhParams,
    Thresholds,
    activation_input,
    incident_power,
    sensing_sinr,
    tag_sinr,
    user_sinr,
)
from .sdp import (
    NoFeasibleCandidate,
    SdpProblem,
    SdpStatus,
    Sense,
    TraceConstraint,
    gaussian_randomization,
    hermitian_eig,
    min_feasible_scale,
    solve_sdp,
)

__all__ = [
    "SchemeFlags",
    "SchemeSpec",
    "AoConfig",
    "AoStatus",
    "ConvergenceTrace",
    "SubproblemInfeasible",
    "mmse_receivers",
    "build_transmit_sdp",
    "solve_reflection_lp",
    "ao_solve",
    "verify_solution",
]

ALPHA_BOUNDS_DEFAULT = (1e-3, 1.0 - 1e-3)


class SubproblemInfeasible(RuntimeError):
    """A stage of the alternating loop has an empty feasible set."""


@dataclass(frozen=True)
class SchemeFlags:
    """Which constraint families and optimizer stages are active."""

    enable_user_sinr: bool = True
    enable_tag_sinr: bool = True
    enable_sensing_sinr: bool = True
    enable_eh: bool = True
    optimize_alpha: bool = True
    optimize_receivers: bool = True
    enable_sensing_covariance: bool = True


@dataclass
class SchemeSpec:
    """Everything the optimizer needs besides the channels."""

    flags: SchemeFlags
    thresholds: Thresholds
    eh: EhParams
    sigma2: float
    fixed_alpha: np.ndarray | None = None
    fixed_receivers: np.ndarray | None = None
    initial_alpha: float = 0.5


@dataclass
class AoConfig:
    epsilon: float = 1e-3
    max_iter: int = 20
    randomization_trials: int = 1000
    final_randomization_trials: int = 100_000
    lambda1: float = 1.0
    lambda2: float = 1.0
    alpha_bounds: tuple[float, float] = ALPHA_BOUNDS_DEFAULT
    polish_rank_one: bool = True
    refine_final: bool = True
    sdp_tol_feas: float = 1e-8
    sdp_tol_gap: float = 1e-8
    sdp_max_iter: int = 100

    def __post_init__(self):
        if self.epsilon <= 0.0:
            raise ValueError("epsilon must be positive")
        lo, hi = self.alpha_bounds
        if not (0.0 < lo < hi < 1.0):
            raise ValueError("alpha bounds must satisfy 0 < lo < hi < 1")
        if self.lambda1 <= 0.0 or self.lambda2 <= 0.0:
            raise ValueError("slack weights must be positive")


class AoStatus(enum.Enum):
    CONVERGED = "converged"
    MAX_ITER = "max_iter"
    SUBPROBLEM_INFEASIBLE = "subproblem_infeasible"


@dataclass
class ConvergenceTrace:
    objective_per_iter: list[float] = field(default_factory=list)
    status: AoStatus = AoStatus.MAX_ITER
    iterations: int = 0
    stage_seconds: dict[str, float] = field(
        default_factory=lambda: {"receivers": 0.0, "transmit": 0.0, "reflection": 0.0}
    )
    high_rank: bool = False
    sdr_bound: float = float("nan")


def _rank_one_cross_gains(ch: ChannelSet, rx: np.ndarray) -> np.ndarray:
    """q_i = g_f_i^H R_x g_f_i, the transmit power seen by each tag."""
    k = ch.num_tags
    return np.array([np.vdot(ch.g_f[i], rx @ ch.g_f[i]).real for i in range(k)])


def _zeroforcing_receivers(ch: ChannelSet, cond_limit: float = 1e8) -> np.ndarray | None:
    """Interference-nulling receivers, or None when they do not exist.

    Used as the fallback initialization when the matched-filter start
    leaves the first transmit problem infeasible (unresolvable mutual
    sensing interference between closely spaced tags).
    """
    k, n = ch.num_tags, ch.num_rx
    if k == 0 or n < k:
        return None
    h_b = ch.g_b.T
    if np.linalg.cond(h_b) > cond_limit:
        return None
    cols = h_b @ np.linalg.inv(h_b.conj().T @ h_b)
    out = np.zeros((k, n), dtype=complex)
    for i in range(k):
        nrm = np.linalg.norm(cols[:, i])
        if nrm <= 0.0:
            return None
        out[i] = cols[:, i] / nrm
    return out


def mmse_receivers(
    ch: ChannelSet,
    w: np.ndarray,
    s_cov: np.ndarray,
    alpha: np.ndarray,
    sigma2: float,
) -> np.ndarray:
    """Closed-form receive filters maximizing each sensing quotient.

    u_k is proportional to Q_k^{-1} Gtilde_k where Gtilde_k is the tag-k
    reflection of the transmit signal (deterministic surrogate: the
    principal component of S stands in for the sensing waveform) and Q_k
    collects the other tags' reflected covariance plus noise.  Because
    each reflection matrix is an outer product, this equals the
    principal generalized eigenvector of the quotient pair.
    """
    k, n = ch.num_tags, ch.num_rx
    rx = np.outer(w, w.conj()) + s_cov
    vals, vecs = np.linalg.eigh(s_cov) if s_cov.size else (np.zeros(1), np.eye(1))
    s_eq = np.sqrt(max(vals[-1], 0.0)) * vecs[:, -1] if s_cov.size else 0.0
    q_gain = _rank_one_cross_gains(ch, rx)

    out = np.zeros((k, n), dtype=complex)
    for j in range(k):
        q = sigma2 * np.eye(n, dtype=complex)
        for i in range(k):
            if i != j:
                q += alpha[i] * q_gain[i] * np.outer(ch.g_b[i], ch.g_b[i].conj())
        g_tilde = np.sqrt(alpha[j]) * ch.g_b[j] * np.vdot(ch.g_f[j], w + s_eq)
        u = np.linalg.solve(q, g_tilde)
        nrm = np.linalg.norm(u)
        if nrm < 1e-30:
            # Transmit signal orthogonal to the forward steering; fall back
            # to the same Q-whitened return direction.
            u = np.linalg.solve(q, ch.g_b[j])
            nrm = np.linalg.norm(u)
        if nrm < 1e-30:
            u = ch.g_b[j]
            nrm = np.linalg.norm(u)
        out[j] = u / nrm
    return out


def build_transmit_sdp(
    ch: ChannelSet,
    u: np.ndarray,
    alpha: np.ndarray,
    thresholds: Thresholds,
    sigma2: float,
    eh: EhParams,
    flags: SchemeFlags | None = None,
) -> SdpProblem:
    """Assemble the transmit-stage SDP for fixed receivers and reflections.

    Emits, per active family: sensing SINR rows, the combined
    user-plus-tag rate rows (or a single user row when tag rates are
    off), and harvesting activation rows.  All are affine in (W, S).
    """
    flags = flags or SchemeFlags()
    k, m = ch.num_tags, ch.num_tx
    ff = np.outer(ch.f, ch.f.conj())
    hh = [np.outer(ch.h[i], ch.h[i].conj()) for i in range(k)]
    constraints: list[TraceConstraint] = []

    if flags.enable_sensing_sinr and k:
        # M[j][i] = (G_i^H u_j)(G_i^H u_j)^H enters both blocks.
        mm = [[None] * k for _ in range(k)]
        for j in range(k):
            for i in range(k):
                vec = ch.g_f[i] * np.vdot(ch.g_b[i], u[j])  # G_i^H u_j
                mm[j][i] = np.outer(vec, vec.conj())
        for j in range(k):
            ups = thresholds.upsilon[j]
            if ups <= 0.0:
                continue  # zero target: the row is vacuous
            coeff = alpha[j] * mm[j][j]
            for i in range(k):
                if i != j:
                    coeff = coeff - ups * alpha[i] * mm[j][i]
            coeff_w = coeff - ups * thresholds.lambda_si * ff
            constraints.append(
                TraceConstraint(coeff_w, coeff.copy(), Sense.GEQ, ups * sigma2)
            )

    if flags.enable_user_sinr and thresholds.gamma_u > 0.0 and flags.enable_tag_sinr and k:
        for j in range(k):
            scale = thresholds.gamma_u * (1.0 + thresholds.gamma_t[j])
            inter = sum(alpha[i] * hh[i] for i in range(k) if i != j)
            inter = inter if isinstance(inter, np.ndarray) else np.zeros((m, m), complex)
            constraints.append(
                TraceConstraint(ff / scale - inter, -inter, Sense.GEQ, sigma2)
            )
    elif flags.enable_user_sinr and thresholds.gamma_u > 0.0:
        inter = sum(alpha[i] * hh[i] for i in range(k))
        inter = inter if isinstance(inter, np.ndarray) else np.zeros((m, m), complex)
        gamma = thresholds.gamma_u
        constraints.append(
            TraceConstraint(ff - gamma * inter, -gamma * inter, Sense.GEQ, gamma * sigma2)
        )

    if flags.enable_eh and k:
        p_act = activation_input(eh)
        for j in range(k):
            gg = (1.0 - alpha[j]) * np.outer(ch.g_f[j], ch.g_f[j].conj())
            constraints.append(TraceConstraint(gg, gg.copy(), Sense.GEQ, p_act))

    if not constraints:
        # Degenerate scheme with nothing active: pin the trivial optimum.
        zero = np.zeros((m, m), dtype=complex)
        constraints.append(TraceConstraint(zero, zero.copy(), Sense.GEQ, 0.0))
    return SdpProblem(dim=m, constraints=constraints, include_s=flags.enable_sensing_covariance)


def solve_reflection_lp(
    ch: ChannelSet,
    w: np.ndarray,
    s_cov: np.ndarray,
    u: np.ndarray,
    thresholds: Thresholds,
    sigma2: float,
    eh: EhParams,
    lambda1: float = 1.0,
    lambda2: float = 1.0,
    alpha_bounds: tuple[float, float] = ALPHA_BOUNDS_DEFAULT,
    flags: SchemeFlags | None = None,
) -> tuple[np.ndarray, float, float]:
    """Reflection-coefficient stage: maximize the slack residuals.

    Variables are (alpha, t1, t2) where t1 pads every sensing row and t2
    every harvesting row.  Internally the slacks are normalized by the
    noise power and the activation input so their weights are
    commensurate; the returned residuals are in watts.
    """
    flags = flags or SchemeFlags()
    k = ch.num_tags
    if k == 0:
        return np.zeros(0), 0.0, 0.0
    lo, hi = alpha_bounds
    rx = np.outer(w, w.conj()) + s_cov
    q_gain = _rank_one_cross_gains(ch, rx)
    # n[j, i] = u_j^H G_i R_x G_i^H u_j factorizes through the outer product.
    ub2 = np.abs(np.array([[np.vdot(u[j], ch.g_b[i]) for i in range(k)] for j in range(k)])) ** 2
    n_mat = ub2 * q_gain[None, :]
    m_vec = np.array(
        [abs(np.vdot(ch.h[i], w)) ** 2 + np.vdot(ch.h[i], s_cov @ ch.h[i]).real for i in range(k)]
    )
    p_in = np.array([np.vdot(ch.g_f[i], rx @ ch.g_f[i]).real for i in range(k)])
    fw2 = abs(np.vdot(ch.f, w)) ** 2

    use_t1 = flags.enable_sensing_sinr
    use_t2 = flags.enable_eh
    n_var = k + 2
    cost = np.zeros(n_var)
    cost[k] = -lambda1 if use_t1 else 0.0
    cost[k + 1] = -lambda2 if use_t2 else 0.0

    rows, rhs = [], []
    if use_t1:
        for j in range(k):
            ups = thresholds.upsilon[j]
            row = np.zeros(n_var)
            row[:k] = ups * n_mat[j] / sigma2
            row[j] = -n_mat[j, j] / sigma2
            row[k] = 1.0
            rows.append(row)
            rhs.append(-ups * (1.0 + thresholds.lambda_si * fw2 / sigma2))
    if flags.enable_user_sinr and flags.enable_tag_sinr:
        for j in range(k):
            cu = fw2 / (thresholds.gamma_u * (1.0 + thresholds.gamma_t[j]))
            row = np.zeros(n_var)
            row[:k] = m_vec / sigma2
            row[j] = 0.0
            rows.append(row)
            rhs.append(cu / sigma2 - 1.0)
    if use_t2:
        p_act = activation_input(eh)
        for j in range(k):
            row = np.zeros(n_var)
            row[j] = p_in[j] / p_act
            row[k + 1] = 1.0
            rows.append(row)
            rhs.append(p_in[j] / p_act - 1.0)

    bounds = [(lo, hi)] * k
    bounds.append((0.0, None) if use_t1 else (0.0, 0.0))
    bounds.append((0.0, None) if use_t2 else (0.0, 0.0))
    res = linprog(
        cost,
        A_ub=np.array(rows) if rows else None,
        b_ub=np.array(rhs) if rhs else None,
        bounds=bounds,
        method="highs",
    )
    if not res.success:
        raise SubproblemInfeasible(f"reflection LP failed: {res.message}")
    alpha = np.clip(res.x[:k], lo, hi)
    t1 = res.x[k] * sigma2
    t2 = res.x[k + 1] * activation_input(eh)
    return alpha, float(t1), float(t2)


def _project_psd(a: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh(0.5 * (a + a.conj().T))
    return (vecs * np.clip(vals, 0.0, None)) @ vecs.conj().T


def _split_rank_one(
    w_rel: np.ndarray,
    s_rel: np.ndarray,
    f: np.ndarray,
    has_comm: bool,
) -> tuple[np.ndarray, np.ndarray] | None:
    """Move the relaxed solution to an equivalent point with rank-one W.

    ``w = W f / sqrt(f^H W f)`` preserves the data-beam gain ``f^H W f``
    exactly, and ``W + S - w w^H`` stays PSD, so every trace constraint
    and the objective are unchanged.  Without a data-rate constraint all
    mass can simply move into S.  Returns None when the gain is too
    small to normalize.
    """
    total = w_rel + s_rel
    if not has_comm:
        return np.zeros(w_rel.shape[0], dtype=complex), _project_psd(total)
    gain = float(np.vdot(f, w_rel @ f).real)
    if gain <= 1e-300 * (1.0 + abs(np.trace(w_rel).real)):
        return None
    w = w_rel @ f / np.sqrt(gain)
    s_new = _project_psd(total - np.outer(w, w.conj()))
    return w, s_new


def _incumbent_ok(problem, incumbent, tol):
    from .sdp import feasibility_violation

    if incumbent is None:
        return False
    w_inc, s_inc = incumbent
    w_mat = np.outer(w_inc, w_inc.conj())
    s_mat = s_inc if problem.include_s else np.zeros_like(w_mat)
    return feasibility_violation(problem, w_mat, s_mat) <= 100 * tol


def _transmit_stage(ch, spec, cfg, alpha, u, rng, final=False, incumbent=None):
    """One SDP solve plus rank-one recovery.

    Returns (w, S, achieved_power, sdr_bound, high_rank_flag).  Weakly
    feasible geometries can defeat the solver's infeasibility test, so
    an unusable solve falls back to the incumbent point whenever that
    still satisfies the new constraints; the incumbent is likewise
    preferred over a noisier recovered candidate, which keeps the power
    sequence non-increasing.
    """
    from .sdp import feasibility_violation

    problem = build_transmit_sdp(
        ch, u, alpha, spec.thresholds, spec.sigma2, spec.eh, spec.flags
    )
    sol = solve_sdp(problem, cfg.sdp_tol_feas, cfg.sdp_tol_gap, cfg.sdp_max_iter)
    usable = sol.status is SdpStatus.OPTIMAL or (
        sol.status is SdpStatus.MAX_ITER
        and np.isfinite(sol.objective_value)
        and sol.residuals.primal <= 100 * cfg.sdp_tol_feas
    )
    inc_power = (
        float(np.vdot(incumbent[0], incumbent[0]).real + np.trace(incumbent[1]).real)
        if incumbent is not None
        else np.inf
    )
    if not usable:
        if _incumbent_ok(problem, incumbent, cfg.sdp_tol_feas):
            return incumbent[0], incumbent[1], inc_power, inc_power, False
        raise SubproblemInfeasible(f"transmit SDP {sol.status.value}")

    w_rel, s_rel = sol.W, sol.S
    bound = sol.objective_value
    has_comm = spec.flags.enable_user_sinr
    if cfg.polish_rank_one and problem.include_s:
        split = _split_rank_one(w_rel, s_rel, ch.f, has_comm)
        if split is not None:
            w_rel = np.outer(split[0], split[0].conj())
            s_rel = split[1]

    trials = cfg.final_randomization_trials if final else cfg.randomization_trials
    s_arg = s_rel if problem.include_s else None
    high_rank = False
    try:
        w, power = gaussian_randomization(w_rel, s_arg, problem.constraints, trials, rng)
    except NoFeasibleCandidate:
        vals, vecs = hermitian_eig(w_rel)
        beta = min_feasible_scale(
            np.outer(vecs[:, -1], vecs[:, -1].conj()), s_arg, problem.constraints
        )
        if beta is None:
            # Keep the relaxed principal component and flag the bound.
            w = np.sqrt(max(vals[-1], 0.0)) * vecs[:, -1]
            power = float(max(vals[-1], 0.0) + np.trace(s_rel).real)
            high_rank = True
        else:
            w = np.sqrt(beta) * vecs[:, -1]
            power = float(beta + np.trace(s_rel).real)
    s_out = s_rel if problem.include_s else np.zeros_like(s_rel)

    # Safety net: a sloppy relaxed block can leave the recovered point
    # marginally infeasible; a one-dimensional rescale of w repairs it.
    if not high_rank:
        viol = feasibility_violation(problem, np.outer(w, w.conj()), s_out)
        if viol > 100 * cfg.sdp_tol_feas:
            nw2 = float(np.vdot(w, w).real)
            if nw2 > 0:
                beta = min_feasible_scale(
                    np.outer(w, w.conj()) / nw2, s_arg, problem.constraints
                )
                if beta is not None:
                    power += beta - nw2
                    w = w * np.sqrt(beta / nw2)

    if incumbent is not None and power > inc_power * (1.0 + 1e-9):
        if _incumbent_ok(problem, incumbent, cfg.sdp_tol_feas):
            return incumbent[0], incumbent[1], inc_power, min(bound, inc_power), False
    return w, s_out, power, bound, high_rank


def ao_solve(
    ch: ChannelSet,
    spec: SchemeSpec,
    config: AoConfig | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[BeamformingSolution, ConvergenceTrace]:
    """Run the alternating loop until the power change falls below epsilon.

    The initial point uses mid-range reflections and return-direction
    matched receive filters; each iteration then refines receivers,
    transmit covariance, and reflections in order.  On a first-iteration
    infeasibility the trace carries SUBPROBLEM_INFEASIBLE; afterwards
    the best previous iterate is returned with MAX_ITER status.
    """
    config = config or AoConfig()
    rng = rng or np.random.default_rng()
    k, n = ch.num_tags, ch.num_rx
    flags = spec.flags
    trace = ConvergenceTrace()

    if spec.fixed_alpha is not None:
        alpha = np.asarray(spec.fixed_alpha, dtype=float).copy()
    else:
        alpha = np.full(k, spec.initial_alpha)
    if spec.fixed_receivers is not None:
        u = np.asarray(spec.fixed_receivers, dtype=complex).copy()
    elif k:
        u = ch.g_b / np.linalg.norm(ch.g_b, axis=1, keepdims=True)
    else:
        u = np.zeros((0, n), dtype=complex)

    def make_solution(w, s_cov):
        return BeamformingSolution(w=w, S=s_cov, u=u.copy(), alpha=alpha.copy())

    t0 = time.perf_counter()
    try:
        w, s_cov, power, bound, hr = _transmit_stage(ch, spec, config, alpha, u, rng)
    except SubproblemInfeasible:
        # The matched-filter start cannot always support the sensing
        # targets; retry once from interference-nulling receivers before
        # declaring the realization infeasible.
        u_zf = (
            _zeroforcing_receivers(ch)
            if (flags.optimize_receivers and spec.fixed_receivers is None and k)
            else None
        )
        try:
            if u_zf is None:
                raise SubproblemInfeasible("no initialization fallback")
            u = u_zf
            w, s_cov, power, bound, hr = _transmit_stage(ch, spec, config, alpha, u, rng)
        except SubproblemInfeasible:
            trace.status = AoStatus.SUBPROBLEM_INFEASIBLE
            zero = np.zeros((ch.num_tx, ch.num_tx), dtype=complex)
            return make_solution(np.zeros(ch.num_tx, dtype=complex), zero), trace
    trace.stage_seconds["transmit"] += time.perf_counter() - t0
    trace.objective_per_iter.append(power)
    trace.sdr_bound = bound
    trace.high_rank = hr
    best = (power, w, s_cov, u.copy(), alpha.copy())

    for it in range(1, config.max_iter + 1):
        trace.iterations = it
        try:
            t0 = time.perf_counter()
            if flags.optimize_receivers and k:
                u = mmse_receivers(ch, w, s_cov, alpha, spec.sigma2)
            trace.stage_seconds["receivers"] += time.perf_counter() - t0

            t0 = time.perf_counter()
            w, s_cov, power, bound, hr = _transmit_stage(
                ch, spec, config, alpha, u, rng, incumbent=(w, s_cov)
            )
            trace.stage_seconds["transmit"] += time.perf_counter() - t0
            trace.sdr_bound = bound
            trace.high_rank = trace.high_rank or hr

            t0 = time.perf_counter()
            if flags.optimize_alpha and k:
                alpha, _, _ = solve_reflection_lp(
                    ch, w, s_cov, u, spec.thresholds, spec.sigma2, spec.eh,
                    config.lambda1, config.lambda2, config.alpha_bounds, flags,
                )
            trace.stage_seconds["reflection"] += time.perf_counter() - t0
        except SubproblemInfeasible:
            power, w, s_cov, u, alpha = best
            trace.status = AoStatus.MAX_ITER
            trace.objective_per_iter.append(power)
            return make_solution(w, s_cov), trace

        trace.objective_per_iter.append(power)
        if power < best[0]:
            best = (power, w, s_cov, u.copy(), alpha.copy())
        # First pass never terminates (the zero-initialized objective
        # convention): the reflection update's effect on the power is
        # priced only by the next transmit solve.
        prev = trace.objective_per_iter[-2]
        if it > 1 and power > 0 and abs(power - prev) / power < config.epsilon:
            trace.status = AoStatus.CONVERGED
            break
    else:
        trace.status = AoStatus.MAX_ITER

    if config.refine_final and trace.high_rank:
        try:
            t0 = time.perf_counter()
            w2, s2, power2, bound, _ = _transmit_stage(
                ch, spec, config, alpha, u, rng, final=True, incumbent=(w, s_cov)
            )
            trace.stage_seconds["transmit"] += time.perf_counter() - t0
            if power2 <= trace.objective_per_iter[-1]:
                w, s_cov = w2, s2
                trace.objective_per_iter.append(power2)
        except SubproblemInfeasible:
            pass
    return make_solution(w, s_cov), trace


def verify_solution(
    ch: ChannelSet,
    sol: BeamformingSolution,
    spec: SchemeSpec,
    rtol: float = 1e-6,
) -> tuple[bool, dict[str, float]]:
    """Re-check the active constraint families from the analytic metrics.

    Independent of the SDP assembly: margins are evaluated with the
    closed-form SINR/power expressions.  The communication check is the
    combined user-plus-tag form actually enforced by the optimizer; for
    schemes without tag rates it is the plain user SINR target.
    Margins are normalized so a value >= -rtol passes.
    """
    k = ch.num_tags
    th, flags = spec.thresholds, spec.flags
    margins: dict[str, float] = {}

    if flags.enable_sensing_sinr and k:
        worst = min(
            sensing_sinr(ch, sol, j, spec.sigma2, th.lambda_si) / th.upsilon[j] - 1.0
            for j in range(k)
        )
        margins["sensing"] = worst
    if flags.enable_user_sinr and flags.enable_tag_sinr and k:
        fw2 = abs(np.vdot(ch.f, sol.w)) ** 2
        worst = np.inf
        for j in range(k):
            inter = sum(
                sol.alpha[i]
                * (abs(np.vdot(ch.h[i], sol.w)) ** 2 + np.vdot(ch.h[i], sol.S @ ch.h[i]).real)
                for i in range(k)
                if i != j
            )
            need = th.gamma_u * (1.0 + th.gamma_t[j]) * (inter + spec.sigma2)
            worst = min(worst, fw2 / need - 1.0)
        margins["comm"] = float(worst)
    elif flags.enable_user_sinr:
        margins["comm"] = user_sinr(ch, sol, spec.sigma2) / th.gamma_u - 1.0
    if flags.enable_eh and k:
        p_act = activation_input(spec.eh)
        worst = min(
            (1.0 - sol.alpha[j]) * incident_power(ch, sol, j) / p_act - 1.0
            for j in range(k)
        )
        margins["eh"] = worst

    ok = all(v >= -rtol for v in margins.values())
    return ok, margins
