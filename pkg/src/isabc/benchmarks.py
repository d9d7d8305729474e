"""Benchmark schemes as constraint/stage configurations.

Every comparison scheme is the same alternating optimizer with a fixed
set of flags: which SINR/harvesting families are enforced, whether the
reflection coefficients and receive filters are optimized, and whether
a dedicated sensing covariance is allowed.
"""

from __future__ import annotations

import enum
import time
from dataclasses import dataclass, field, replace

import numpy as np

from .ao import (
    AoConfig,
    AoStatus,
    ConvergenceTrace,
    SchemeFlags,
    SchemeSpec,
    ao_solve,
    verify_solution,
)
from .channel import ChannelSet, strip_tags
from .metrics import (
    BeamformingSolution,
    EhParams,
    RateSummary,
    Thresholds,
    rate_summary,
    watt_to_dbm,
)

__all__ = [
    "Scheme",
    "SchemeConfig",
    "MetricsReport",
    "canonical_flags",
    "mf_receivers",
    "zf_receivers",
    "run_scheme",
]


class Scheme(enum.Enum):
    """Stable CLI identifiers for every benchmark."""

    ISABC_PASSIVE = "isabc-p"
    ISABC_ACTIVE = "isabc-a"
    ISAC = "isac"
    BACKCOM = "backcom"
    COM_ONLY = "com-only"
    SENSING_ONLY = "sensing-only"
    RANDOM_ALPHA = "random-alpha"
    MF_RECEIVER = "mf"
    ZF_RECEIVER = "zf"


_ALL_ON = SchemeFlags()

_FLAG_TABLE: dict[Scheme, SchemeFlags] = {
    Scheme.ISABC_PASSIVE: _ALL_ON,
    Scheme.ISABC_ACTIVE: replace(_ALL_ON, enable_eh=False),
    Scheme.ISAC: replace(
        _ALL_ON, enable_tag_sinr=False, enable_eh=False, optimize_alpha=False
    ),
    Scheme.BACKCOM: replace(
        _ALL_ON, enable_sensing_sinr=False, enable_sensing_covariance=False
    ),
    Scheme.COM_ONLY: SchemeFlags(
        enable_user_sinr=True,
        enable_tag_sinr=False,
        enable_sensing_sinr=False,
        enable_eh=False,
        optimize_alpha=False,
        optimize_receivers=False,
        enable_sensing_covariance=False,
    ),
    Scheme.SENSING_ONLY: replace(
        _ALL_ON, enable_user_sinr=False, enable_tag_sinr=False
    ),
    Scheme.RANDOM_ALPHA: replace(_ALL_ON, optimize_alpha=False),
    Scheme.MF_RECEIVER: replace(_ALL_ON, optimize_receivers=False),
    Scheme.ZF_RECEIVER: replace(_ALL_ON, optimize_receivers=False),
}


def canonical_flags(scheme: Scheme) -> SchemeFlags:
    return _FLAG_TABLE[scheme]


@dataclass
class SchemeConfig:
    """A benchmark scheme plus the physical targets it enforces.

    ``flags`` defaults to the canonical table; explicit overrides that
    disagree with the table are rejected.
    """

    scheme: Scheme
    thresholds: Thresholds
    eh: EhParams
    sigma2: float
    flags: SchemeFlags | None = None
    alpha_bounds: tuple[float, float] = (1e-3, 1.0 - 1e-3)

    def __post_init__(self):
        canonical = canonical_flags(self.scheme)
        if self.flags is None:
            self.flags = canonical
        elif self.flags != canonical:
            raise ValueError(f"flags inconsistent with scheme {self.scheme.value}")


@dataclass
class MetricsReport:
    """Per-trial outcome row used by the experiment harness."""

    scheme: str
    power_w: float
    power_dbm: float
    iterations: int
    converged: bool
    feasible: bool
    rates: RateSummary | None
    alpha: np.ndarray
    stage_seconds: dict[str, float] = field(default_factory=dict)
    margins: dict[str, float] = field(default_factory=dict)
    high_rank: bool = False


def mf_receivers(ch: ChannelSet) -> np.ndarray:
    """Matched-filter receive beamformers: normalized return steering."""
    k = ch.num_tags
    out = np.zeros((k, ch.num_rx), dtype=complex)
    for i in range(k):
        nrm = np.linalg.norm(ch.g_b[i])
        if nrm <= 0.0:
            raise ValueError(f"zero return channel for tag {i}")
        out[i] = ch.g_b[i] / nrm
    return out


def zf_receivers(ch: ChannelSet, cond_limit: float = 1e8) -> np.ndarray:
    """Zero-forcing receive beamformers, unit-normalized per tag.

    Column k of ``H (H^H H)^{-1}`` is orthogonal to every other tag's
    return channel.  Requires N >= K and a well-conditioned H.
    """
    k, n = ch.num_tags, ch.num_rx
    if k == 0:
        return np.zeros((0, n), dtype=complex)
    if n < k:
        raise ValueError("zero-forcing needs at least as many antennas as tags")
    h_b = ch.g_b.T  # (N, K)
    if np.linalg.cond(h_b) > cond_limit:
        raise ValueError("return channel matrix is rank deficient; use the matched filter")
    pinv_cols = h_b @ np.linalg.inv(h_b.conj().T @ h_b)
    out = np.zeros((k, n), dtype=complex)
    for i in range(k):
        out[i] = pinv_cols[:, i] / np.linalg.norm(pinv_cols[:, i])
    return out


def _spec_for(scheme_config: SchemeConfig, ch: ChannelSet, rng: np.random.Generator):
    """Translate a scheme into the optimizer's problem description."""
    sc = scheme_config
    k = ch.num_tags
    fixed_alpha = None
    fixed_receivers = None
    if sc.scheme is Scheme.ISAC:
        fixed_alpha = np.ones(k)
    elif sc.scheme is Scheme.RANDOM_ALPHA:
        lo, hi = sc.alpha_bounds
        fixed_alpha = rng.uniform(lo, hi, size=k)
    elif sc.scheme is Scheme.COM_ONLY:
        fixed_alpha = np.zeros(0)
    if sc.scheme is Scheme.MF_RECEIVER:
        fixed_receivers = mf_receivers(ch)
    elif sc.scheme is Scheme.ZF_RECEIVER:
        fixed_receivers = zf_receivers(ch)
    return SchemeSpec(
        flags=sc.flags,
        thresholds=sc.thresholds,
        eh=sc.eh,
        sigma2=sc.sigma2,
        fixed_alpha=fixed_alpha,
        fixed_receivers=fixed_receivers,
    )


def run_scheme(
    scheme_config: SchemeConfig,
    ch: ChannelSet,
    ao_config: AoConfig | None = None,
    rng: np.random.Generator | None = None,
) -> tuple[BeamformingSolution, ConvergenceTrace, MetricsReport]:
    """Optimize one channel realization under the given scheme."""
    rng = rng or np.random.default_rng()
    ao_config = ao_config or AoConfig()
    work_ch = strip_tags(ch) if scheme_config.scheme is Scheme.COM_ONLY else ch
    spec = _spec_for(scheme_config, work_ch, rng)
    sol, trace = ao_solve(work_ch, spec, ao_config, rng)

    infeasible = trace.status is AoStatus.SUBPROBLEM_INFEASIBLE
    if infeasible:
        feasible, margins, rates = False, {}, None
    else:
        sol.validate()
        feasible, margins = verify_solution(work_ch, sol, spec, rtol=10 * ao_config.sdp_tol_feas)
        rates = rate_summary(work_ch, sol, spec.sigma2, spec.thresholds.lambda_si)
    power = sol.transmit_power
    report = MetricsReport(
        scheme=scheme_config.scheme.value,
        power_w=power,
        power_dbm=watt_to_dbm(power) if power > 0 else float("-inf"),
        iterations=trace.iterations,
        converged=trace.status is AoStatus.CONVERGED,
        feasible=feasible,
        rates=rates,
        alpha=sol.alpha.copy(),
        stage_seconds=dict(trace.stage_seconds),
        margins=margins,
        high_rank=trace.high_rank,
    )
    return sol, trace, report
