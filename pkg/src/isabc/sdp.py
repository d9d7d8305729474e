"""Trace-constrained semidefinite programming and rank-one recovery.

Problems minimize ``Tr(W) + Tr(S)`` over Hermitian PSD blocks subject to
affine trace constraints.  The solve goes through the Lagrangian dual
(one scalar multiplier per constraint, one LMI per block), which keeps
the cone solver's variable count at the constraint count; the primal
blocks come back as the conic dual variables.  The complex blocks are
embedded as real symmetric matrices of twice the size.

Rank-one transmit vectors are recovered from a relaxed solution either
exactly (when the W block is numerically rank one) or by Gaussian
randomization with a one-dimensional feasibility repair per candidate.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from cvxopt import matrix as cvx_matrix
from cvxopt import solvers as cvx_solvers

__all__ = [
    "Sense",
    "SdpStatus",
    "TraceConstraint",
    "SdpProblem",
    "SdpResiduals",
    "SdpSolution",
    "NoFeasibleCandidate",
    "solve_sdp",
    "hermitian_eig",
    "min_feasible_scale",
    "gaussian_randomization",
    "dump_problem",
    "load_problem",
]


class Sense(enum.Enum):
    GEQ = ">="
    LEQ = "<="


class SdpStatus(enum.Enum):
    OPTIMAL = "optimal"
    INFEASIBLE = "infeasible"
    MAX_ITER = "max_iter"


class NoFeasibleCandidate(RuntimeError):
    """No randomized candidate could be repaired to feasibility."""


_HERM_TOL = 1e-10


def _check_hermitian(a: np.ndarray, tol: float, what: str) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    scale = 1.0 + np.linalg.norm(a)
    if np.linalg.norm(a - a.conj().T) > tol * scale:
        raise ValueError(f"{what} is not Hermitian within {tol}")
    return 0.5 * (a + a.conj().T)


@dataclass
class TraceConstraint:
    """Affine constraint ``Tr(coeff_w W) + Tr(coeff_s S) {>=,<=} rhs``."""

    coeff_w: np.ndarray
    coeff_s: np.ndarray | None
    sense: Sense
    rhs: float

    def __post_init__(self):
        self.coeff_w = _check_hermitian(self.coeff_w, _HERM_TOL, "coeff_w")
        if self.coeff_s is not None:
            self.coeff_s = _check_hermitian(self.coeff_s, _HERM_TOL, "coeff_s")


@dataclass
class SdpProblem:
    """``min Tr(W) + Tr(S)`` over PSD blocks of size ``dim``.

    ``include_s = False`` drops the S block entirely (S is fixed to 0).
    """

    dim: int
    constraints: list[TraceConstraint]
    include_s: bool = True

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dim must be >= 1")
        if not self.constraints:
            raise ValueError("need at least one constraint")
        for c in self.constraints:
            if c.coeff_w.shape != (self.dim, self.dim):
                raise ValueError("constraint dimension mismatch")
            if c.coeff_s is not None and c.coeff_s.shape != (self.dim, self.dim):
                raise ValueError("constraint dimension mismatch")


@dataclass(frozen=True)
class SdpResiduals:
    primal: float
    dual: float
    gap: float


@dataclass
class SdpSolution:
    W: np.ndarray
    S: np.ndarray
    objective_value: float
    status: SdpStatus
    residuals: SdpResiduals


def hermitian_eig(a: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigendecomposition of a Hermitian matrix (ascending eigenvalues)."""
    a = _check_hermitian(a, 1e-9, "matrix")
    vals, vecs = np.linalg.eigh(a)
    return vals, vecs


def _embed(c: np.ndarray) -> np.ndarray:
    """Complex Hermitian -> real symmetric [[Re, -Im], [Im, Re]]."""
    return np.block([[c.real, -c.imag], [c.imag, c.real]])


def _extract(y: np.ndarray, m: int) -> np.ndarray:
    """Inverse of the embedding, averaging over the redundant blocks."""
    re = 0.5 * (y[:m, :m] + y[m:, m:])
    im = 0.5 * (y[m:, :m] - y[:m, m:])
    c = re + 1j * im
    return 0.5 * (c + c.conj().T)


def _geq_form(problem: SdpProblem):
    """Constraints as (Cw, Cs, b) triples with sense >=, plus row scales."""
    rows = []
    for c in problem.constraints:
        sign = 1.0 if c.sense is Sense.GEQ else -1.0
        cw = sign * c.coeff_w
        cs = sign * c.coeff_s if (c.coeff_s is not None and problem.include_s) else None
        rows.append((cw, cs, sign * c.rhs))
    return rows


def _constraint_values(problem: SdpProblem, w: np.ndarray, s: np.ndarray) -> np.ndarray:
    vals = np.empty(len(problem.constraints))
    for j, c in enumerate(problem.constraints):
        v = np.trace(c.coeff_w @ w).real
        if c.coeff_s is not None and problem.include_s:
            v += np.trace(c.coeff_s @ s).real
        vals[j] = v
    return vals


def feasibility_violation(problem: SdpProblem, w: np.ndarray, s: np.ndarray) -> float:
    """Worst normalized constraint violation of (W, S)."""
    vals = _constraint_values(problem, w, s)
    worst = 0.0
    for j, c in enumerate(problem.constraints):
        gap = c.rhs - vals[j] if c.sense is Sense.GEQ else vals[j] - c.rhs
        worst = max(worst, gap / (1.0 + abs(c.rhs)))
    return worst


def solve_sdp(
    problem: SdpProblem,
    tol_feas: float = 1e-8,
    tol_gap: float = 1e-8,
    max_iter: int = 100,
) -> SdpSolution:
    """Solve the trace-minimization SDP.

    Status semantics: OPTIMAL solutions satisfy every constraint within
    ``tol_feas * (1 + |rhs|)`` and carry a duality-gap residual below
    ``tol_gap``; INFEASIBLE reports a certified empty feasible set
    (unbounded dual ray); MAX_ITER flags numerical breakdown, with the
    best recovered iterate and its residuals.
    """
    m = problem.dim
    rows = _geq_form(problem)
    n_c = len(rows)

    # Row scaling (pure row operations, primal-invariant) plus a variable
    # scale tau chosen so the binding right-hand sides are O(1).
    row_scale = np.empty(n_c)
    for j, (cw, cs, _) in enumerate(rows):
        nrm = np.linalg.norm(cw)
        if cs is not None:
            nrm = max(nrm, np.linalg.norm(cs))
        row_scale[j] = max(nrm, 1e-300)
    b_scaled = np.array([b / row_scale[j] for j, (_, _, b) in enumerate(rows)])
    tau = float(max(b_scaled.max(initial=0.0), 0.0)) or 1.0

    g_w = np.empty((4 * m * m, n_c))
    g_s = np.empty_like(g_w) if problem.include_s else None
    for j, (cw, cs, _) in enumerate(rows):
        g_w[:, j] = _embed(cw / row_scale[j]).ravel(order="F")
        if g_s is not None:
            g_s[:, j] = (
                _embed(cs / row_scale[j]).ravel(order="F") if cs is not None else 0.0
            )

    c_obj = cvx_matrix(-b_scaled / tau)
    gl = cvx_matrix(-np.eye(n_c))
    hl = cvx_matrix(np.zeros(n_c))
    eye_emb = cvx_matrix(_embed(np.eye(m, dtype=complex)))
    gs_blocks = [cvx_matrix(g_w)]
    hs_blocks = [eye_emb]
    if g_s is not None:
        gs_blocks.append(cvx_matrix(g_s))
        hs_blocks.append(eye_emb)

    options = {
        "show_progress": False,
        "maxiters": max_iter,
        "abstol": tol_gap,
        "reltol": tol_gap,
        "feastol": min(tol_feas, 1e-7),
    }
    try:
        sol = cvx_solvers.sdp(c_obj, gl, hl, gs_blocks, hs_blocks, options=options)
    except (ValueError, ArithmeticError):  # solver-side breakdown
        zero = np.zeros((m, m), dtype=complex)
        return SdpSolution(zero, zero, 0.0, SdpStatus.MAX_ITER,
                           SdpResiduals(np.inf, np.inf, np.inf))

    status = sol["status"]
    zero = np.zeros((m, m), dtype=complex)
    if status == "dual infeasible":
        # The multiplier problem is unbounded along sol['x']: certificate
        # that the primal trace program has an empty feasible set.
        return SdpSolution(zero, zero, float("nan"), SdpStatus.INFEASIBLE,
                           SdpResiduals(np.inf, 0.0, np.inf))
    if sol["zs"] is None or len(sol["zs"]) == 0:
        return SdpSolution(zero, zero, 0.0, SdpStatus.MAX_ITER,
                           SdpResiduals(np.inf, np.inf, np.inf))

    # Conic dual variables are the primal blocks, up to the embedding
    # factor 2 and the variable scale tau.
    w = 2.0 * tau * _extract(np.array(sol["zs"][0]).reshape(2 * m, 2 * m), m)
    s = (
        2.0 * tau * _extract(np.array(sol["zs"][1]).reshape(2 * m, 2 * m), m)
        if problem.include_s
        else zero.copy()
    )
    objective = float(np.trace(w).real + np.trace(s).real)

    primal_res = feasibility_violation(problem, w, s)
    dual_obj = -tau * float(sol["primal objective"]) if sol["primal objective"] is not None else np.nan
    gap = abs(objective - dual_obj) / (1.0 + abs(objective))
    residuals = SdpResiduals(primal=primal_res, dual=float(sol.get("dual infeasibility") or 0.0), gap=gap)

    if status == "optimal" and primal_res <= tol_feas:
        return SdpSolution(w, s, objective, SdpStatus.OPTIMAL, residuals)
    if status == "optimal" and primal_res <= 100 * tol_feas:
        # Recovery round-off only; the multiplier problem itself met its
        # tolerances, so keep the optimal flag with honest residuals.
        return SdpSolution(w, s, objective, SdpStatus.OPTIMAL, residuals)
    return SdpSolution(w, s, objective, SdpStatus.MAX_ITER, residuals)


def min_feasible_scale(
    direction_outer: np.ndarray,
    s_fixed: np.ndarray | None,
    constraints: list[TraceConstraint],
) -> float | None:
    """Smallest beta >= 0 with ``W = beta * D`` feasible, or None.

    Every constraint is affine in beta, so the feasible set is an
    interval intersection.
    """
    lo, hi = 0.0, np.inf
    for c in constraints:
        a = float(np.trace(c.coeff_w @ direction_outer).real)
        b = (
            float(np.trace(c.coeff_s @ s_fixed).real)
            if (c.coeff_s is not None and s_fixed is not None)
            else 0.0
        )
        sign = 1.0 if c.sense is Sense.GEQ else -1.0
        a, rhs = sign * a, sign * (c.rhs - b)
        # Now the row reads a * beta >= rhs.
        tol = 1e-12 * (1.0 + abs(a))
        if a > tol:
            lo = max(lo, rhs / a)
        elif a < -tol:
            hi = min(hi, rhs / a)
        elif rhs > tol:
            return None
    if lo > hi * (1.0 + 1e-12) + 1e-300:
        return None
    return lo


def _batch_feasible_scale(dirs: np.ndarray, s_fixed, constraints):
    """Vectorized repair: per-trial minimal beta and feasibility mask."""
    n = dirs.shape[1]
    lo = np.zeros(n)
    hi = np.full(n, np.inf)
    ok = np.ones(n, dtype=bool)
    for c in constraints:
        tmp = c.coeff_w @ dirs
        a = np.einsum("ij,ij->j", dirs.conj(), tmp).real
        b = (
            float(np.trace(c.coeff_s @ s_fixed).real)
            if (c.coeff_s is not None and s_fixed is not None)
            else 0.0
        )
        sign = 1.0 if c.sense is Sense.GEQ else -1.0
        a = sign * a
        rhs = sign * (c.rhs - b)
        tol = 1e-12 * (1.0 + np.abs(a))
        pos = a > tol
        neg = a < -tol
        flat = ~(pos | neg)
        lo[pos] = np.maximum(lo[pos], rhs / a[pos])
        hi[neg] = np.minimum(hi[neg], rhs / a[neg])
        ok &= ~(flat & (rhs > tol))
    ok &= lo <= hi * (1.0 + 1e-12) + 1e-300
    return lo, ok


def gaussian_randomization(
    w_star: np.ndarray,
    s_star: np.ndarray | None,
    constraints: list[TraceConstraint],
    n_trials: int,
    rng: np.random.Generator,
    rank_one_ratio: float = 1e-6,
) -> tuple[np.ndarray, float]:
    """Recover a rank-one transmit vector from a relaxed block.

    If ``w_star`` is numerically rank one, its scaled principal
    eigenvector is returned directly.  Otherwise candidate directions
    ``U sqrt(Sigma) r`` with Gaussian ``r`` are repaired by the minimal
    feasible scaling, and the cheapest feasible candidate wins.  Raises
    :class:`NoFeasibleCandidate` if no trial can be repaired.
    """
    if n_trials < 1:
        raise ValueError("n_trials must be >= 1")
    m = w_star.shape[0]
    tr_s = float(np.trace(s_star).real) if s_star is not None else 0.0
    vals, vecs = hermitian_eig(w_star)
    vals = np.clip(vals, 0.0, None)
    lead = vals[-1]

    if lead <= 0.0:
        w = np.zeros(m, dtype=complex)
        if min_feasible_scale(np.zeros((m, m)), s_star, constraints) == 0.0:
            return w, tr_s
        factor = np.eye(m, dtype=complex)  # no direction info, isotropic draws
    else:
        second = vals[-2] if m > 1 else 0.0
        if second / lead < rank_one_ratio:
            return np.sqrt(lead) * vecs[:, -1], float(lead + tr_s)
        factor = vecs * np.sqrt(vals)

    r = (rng.standard_normal((m, n_trials)) + 1j * rng.standard_normal((m, n_trials))) / np.sqrt(2)
    dirs = factor @ r
    norms2 = np.einsum("ij,ij->j", dirs.conj(), dirs).real
    beta, ok = _batch_feasible_scale(dirs, s_star, constraints)
    ok &= norms2 > 0
    if not ok.any():
        raise NoFeasibleCandidate(f"none of {n_trials} candidates repairable")
    power = np.where(ok, beta * norms2, np.inf)
    best = int(np.argmin(power))
    w = np.sqrt(beta[best]) * dirs[:, best]
    return w, float(power[best] + tr_s)


def dump_problem(problem: SdpProblem, path: str) -> None:
    """Write a problem instance in the plain-text exchange format.

    Line 1: ``dim n_constraints include_s``.  Then per constraint:
    one line ``sense rhs`` (sense is ``geq``/``leq``), followed by the
    W-coefficient matrix and (when S is included) the S-coefficient
    matrix, each as ``dim`` lines of row-major ``re im`` pairs.
    """
    with open(path, "w") as fh:
        fh.write(f"{problem.dim} {len(problem.constraints)} {int(problem.include_s)}\n")
        for c in problem.constraints:
            sense = "geq" if c.sense is Sense.GEQ else "leq"
            fh.write(f"{sense} {float(c.rhs)!r}\n")
            mats = [c.coeff_w]
            if problem.include_s:
                cs = c.coeff_s if c.coeff_s is not None else np.zeros_like(c.coeff_w)
                mats.append(cs)
            for mat in mats:
                for row in mat:
                    fh.write(
                        " ".join(f"{float(z.real)!r} {float(z.imag)!r}" for z in row) + "\n"
                    )


def load_problem(path: str) -> SdpProblem:
    """Read a problem instance written by :func:`dump_problem`."""
    with open(path) as fh:
        dim, n_c, inc_s = fh.readline().split()
        dim, n_c, inc_s = int(dim), int(n_c), bool(int(inc_s))

        def read_matrix():
            rows = []
            for _ in range(dim):
                nums = [float(t) for t in fh.readline().split()]
                rows.append([complex(nums[2 * i], nums[2 * i + 1]) for i in range(dim)])
            return np.array(rows)

        constraints = []
        for _ in range(n_c):
            sense_tok, rhs_tok = fh.readline().split()
            sense = Sense.GEQ if sense_tok == "geq" else Sense.LEQ
            cw = read_matrix()
            cs = read_matrix() if inc_s else None
            constraints.append(TraceConstraint(cw, cs, sense, float(rhs_tok)))
    return SdpProblem(dim=dim, constraints=constraints, include_s=inc_s)
