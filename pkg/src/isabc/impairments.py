"""Imperfect-CSI, residual self-interference, and fading-model knobs.

Optimization runs on the estimated channels; the resulting design is
then re-priced against the true channels by the smallest common power
scaling that restores every active constraint.  Trials where no scaling
up to the cap helps are reported as outages.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .ao import AoConfig, verify_solution
from .benchmarks import MetricsReport, SchemeConfig, Scheme, run_scheme, _spec_for
from .channel import ChannelSet, apply_csi_error, strip_tags
from .metrics import BeamformingSolution, watt_to_dbm

__all__ = ["ImpairmentSpec", "ImpairedResult", "optimize_with_impairments"]

RHO_CAP = 1e3


@dataclass(frozen=True)
class ImpairmentSpec:
    """CSI error strength, residual SI coefficient, optional Rician factor."""

    csi_eta: float = 0.0
    residual_si_lambda: float = 0.0
    rician_kappa: float | None = None

    def __post_init__(self):
        if self.csi_eta < 0.0:
            raise ValueError("csi_eta must be >= 0")
        if not 0.0 <= self.residual_si_lambda <= 1.0:
            raise ValueError("residual_si_lambda must be in [0, 1]")


@dataclass
class ImpairedResult:
    solution: BeamformingSolution
    reported_power_w: float
    rho: float
    outage: bool
    report: MetricsReport


def _scaled(sol: BeamformingSolution, rho: float) -> BeamformingSolution:
    return BeamformingSolution(
        w=np.sqrt(rho) * sol.w, S=rho * sol.S, u=sol.u, alpha=sol.alpha
    )


def optimize_with_impairments(
    ch_true: ChannelSet,
    spec: ImpairmentSpec,
    scheme_config: SchemeConfig,
    ao_config: AoConfig | None = None,
    rng: np.random.Generator | None = None,
) -> ImpairedResult:
    """Design on estimated channels, re-price on the true ones.

    The power scaling rho >= 1 multiplies the whole transmit covariance;
    every active SINR and harvesting margin is monotone in rho, so a
    bisection between the first feasible power and 1 finds the minimum
    to 1e-4 relative.
    """
    rng = rng or np.random.default_rng()
    ao_config = ao_config or AoConfig()
    thresholds = replace(scheme_config.thresholds, lambda_si=spec.residual_si_lambda)
    sc = replace(scheme_config, thresholds=thresholds, flags=None)

    ch_est = apply_csi_error(ch_true, spec.csi_eta, rng)
    sol, trace, report = run_scheme(sc, ch_est, ao_config, rng)
    nominal = sol.transmit_power

    if not report.feasible:
        return ImpairedResult(sol, nominal, 1.0, True, report)

    work_true = strip_tags(ch_true) if sc.scheme is Scheme.COM_ONLY else ch_true
    problem_spec = _spec_for(sc, work_true, np.random.default_rng(0))
    problem_spec.fixed_alpha = sol.alpha

    def feasible_at(rho: float) -> bool:
        ok, _ = verify_solution(work_true, _scaled(sol, rho), problem_spec, rtol=1e-9)
        return ok

    if spec.csi_eta == 0.0 or feasible_at(1.0):
        rho = 1.0
    else:
        hi = 2.0
        while hi <= RHO_CAP and not feasible_at(hi):
            hi *= 2.0
        if hi > RHO_CAP:
            report.feasible = False
            return ImpairedResult(sol, nominal, float("nan"), True, report)
        lo = hi / 2.0
        while (hi - lo) / hi > 1e-4:
            mid = 0.5 * (lo + hi)
            if feasible_at(mid):
                hi = mid
            else:
                lo = mid
        rho = hi

    reported = rho * nominal
    report.power_w = reported
    report.power_dbm = watt_to_dbm(reported) if reported > 0 else float("-inf")
    return ImpairedResult(_scaled(sol, rho), reported, rho, False, report)
