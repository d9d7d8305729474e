"""Closed-form performance metrics and their signal-level oracle.

User/tag/sensing SINRs, incident RF power at a tag, the logistic
energy-harvesting curve with its printed inverse, dB plumbing, and a
brute-force Monte Carlo SINR estimator that re-derives every analytic
ratio from sampled transmit symbols and noise.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .channel import ChannelSet

__all__ = [
    "EhModel",
    "BeamformingSolution",
    "EhParams",
    "NoiseSpec",
    "Thresholds",
    "RateSummary",
    "EmpiricalSinr",
    "noise_power",
    "user_sinr",
    "tag_sinr",
    "sensing_sinr",
    "incident_power",
    "eh_forward",
    "eh_logistic",
    "eh_inverse",
    "rate_summary",
    "empirical_sinr",
    "dbm_to_watt",
    "watt_to_dbm",
]


class EhModel(enum.Enum):
    NONLINEAR = "nonlinear"
    LINEAR = "linear"


@dataclass
class BeamformingSolution:
    """Transmit/receive design for one channel realization.

    Attributes:
        w:      (M,) transmit beamformer.
        S:      (M, M) Hermitian PSD sensing covariance.
        u:      (K, N) unit-norm receive beamformers.
        alpha:  (K,) power reflection coefficients in (0, 1]; the upper
                endpoint is reached only by fixed full-reflection targets.
    """

    w: np.ndarray
    S: np.ndarray
    u: np.ndarray
    alpha: np.ndarray

    def __post_init__(self):
        self.w = np.asarray(self.w, dtype=complex)
        self.S = np.asarray(self.S, dtype=complex)
        self.u = np.asarray(self.u, dtype=complex)
        self.alpha = np.asarray(self.alpha, dtype=float)

    def validate(self) -> None:
        m = self.w.shape[0]
        if self.S.shape != (m, m):
            raise ValueError("S shape mismatch")
        if np.linalg.norm(self.S - self.S.conj().T) > 1e-9 * (1.0 + np.linalg.norm(self.S)):
            raise ValueError("S is not Hermitian")
        tr = float(np.trace(self.S).real)
        if tr > 0 and np.linalg.eigvalsh(self.S).min() < -1e-9 * tr:
            raise ValueError("S has a significantly negative eigenvalue")
        for k in range(self.u.shape[0]):
            if abs(np.linalg.norm(self.u[k]) - 1.0) > 1e-9:
                raise ValueError(f"receive beamformer {k} is not unit norm")
        if self.alpha.size and (self.alpha.min() <= 0.0 or self.alpha.max() > 1.0):
            raise ValueError("alpha outside (0, 1]")

    @property
    def transmit_power(self) -> float:
        return float(np.vdot(self.w, self.w).real + np.trace(self.S).real)

    def covariance(self) -> np.ndarray:
        """Total transmit covariance ``w w^H + S``."""
        return np.outer(self.w, self.w.conj()) + self.S


@dataclass(frozen=True)
class EhParams:
    """Energy-harvesting circuit parameters.

    ``m_nl`` is the saturation level (W), ``a_nl``/``b_nl`` the logistic
    steepness and midpoint, ``p_b`` the activation threshold (W).  The
    linear model variant harvests ``eta_linear * input``.
    """

    m_nl: float = 20e-3
    a_nl: float = 6400.0
    b_nl: float = 0.003
    p_b: float = 1e-5
    eta_linear: float = 0.7
    model: EhModel = EhModel.NONLINEAR

    def __post_init__(self):
        if not (0.0 < self.p_b < self.m_nl):
            raise ValueError("need 0 < p_b < m_nl")
        if self.a_nl <= 0.0 or self.b_nl <= 0.0:
            raise ValueError("a_nl and b_nl must be positive")
        if not (0.0 < self.eta_linear <= 1.0):
            raise ValueError("eta_linear must be in (0, 1]")


@dataclass(frozen=True)
class NoiseSpec:
    bandwidth_hz: float = 10e6
    noise_figure_db: float = 10.0
    n0_dbm_per_hz: float = -174.0

    def __post_init__(self):
        if self.bandwidth_hz <= 0.0:
            raise ValueError("bandwidth must be positive")


@dataclass(frozen=True)
class Thresholds:
    """Linear SINR targets plus the residual self-interference knob.

    ``lambda_si`` scales the |f^H w|^2 leakage term that the imperfect
    SI cancellation adds to a SINR denominator.  It lands in the sensing
    SINR by default; ``si_in_tag_sinr`` moves it to the tag SINR at the
    user instead (the alternative reading).
    """

    gamma_u: float = 1.0
    gamma_t: np.ndarray = field(default_factory=lambda: np.ones(3))
    upsilon: np.ndarray = field(default_factory=lambda: np.ones(3))
    lambda_si: float = 0.0
    si_in_tag_sinr: bool = False

    def __post_init__(self):
        object.__setattr__(self, "gamma_t", np.asarray(self.gamma_t, dtype=float))
        object.__setattr__(self, "upsilon", np.asarray(self.upsilon, dtype=float))
        if not 0.0 <= self.lambda_si <= 1.0:
            raise ValueError("lambda_si must be in [0, 1]")


@dataclass(frozen=True)
class RateSummary:
    user_rate: float
    tag_rates: np.ndarray
    sensing_rates: np.ndarray

    @property
    def sum_rate(self) -> float:
        return float(self.user_rate + self.tag_rates.sum() + self.sensing_rates.sum())


@dataclass(frozen=True)
class EmpiricalSinr:
    """Monte Carlo SINR estimates with batch-based standard errors."""

    user: float
    tag: np.ndarray
    sensing: np.ndarray
    user_se: float
    tag_se: np.ndarray
    sensing_se: np.ndarray


def dbm_to_watt(x_dbm: float) -> float:
    return 10.0 ** ((x_dbm - 30.0) / 10.0)


def watt_to_dbm(x_watt: float) -> float:
    if x_watt <= 0.0:
        raise ValueError("power must be positive to convert to dBm")
    return 10.0 * math.log10(x_watt) + 30.0


def noise_power(spec: NoiseSpec) -> float:
    """AWGN power in watts: N0 + 10 log10(B) + NF, all in dB units."""
    sigma2_dbm = spec.n0_dbm_per_hz + 10.0 * math.log10(spec.bandwidth_hz) + spec.noise_figure_db
    return dbm_to_watt(sigma2_dbm)


def _reflected_power(ch: ChannelSet, sol: BeamformingSolution, k: int) -> float:
    """|h_k^H w|^2 + h_k^H S h_k, the power relayed through tag k."""
    hk = ch.h[k]
    return float(abs(np.vdot(hk, sol.w)) ** 2 + np.vdot(hk, sol.S @ hk).real)


def user_sinr(ch: ChannelSet, sol: BeamformingSolution, sigma2: float) -> float:
    sig = abs(np.vdot(ch.f, sol.w)) ** 2
    interference = sum(
        sol.alpha[k] * _reflected_power(ch, sol, k) for k in range(ch.num_tags)
    )
    return float(sig / (interference + sigma2))


def tag_sinr(
    ch: ChannelSet,
    sol: BeamformingSolution,
    k: int,
    sigma2: float,
    lambda_si: float = 0.0,
) -> float:
    """SINR of tag k's data at the user, after removal of the user's own symbol.

    ``lambda_si`` is only nonzero under the alternative SI placement.
    """
    num = sol.alpha[k] * _reflected_power(ch, sol, k)
    interference = sum(
        sol.alpha[i] * _reflected_power(ch, sol, i)
        for i in range(ch.num_tags)
        if i != k
    )
    si = lambda_si * abs(np.vdot(ch.f, sol.w)) ** 2
    return float(num / (interference + sigma2 + si))


def sensing_sinr(
    ch: ChannelSet,
    sol: BeamformingSolution,
    k: int,
    sigma2: float,
    lambda_si: float = 0.0,
) -> float:
    """Sensing SINR of tag k at the BS receiver through beamformer u_k."""
    rx = sol.covariance()
    uk = sol.u[k]
    gk = ch.G[k]
    num = sol.alpha[k] * np.vdot(uk, gk @ rx @ gk.conj().T @ uk).real
    q = sigma2 * np.eye(ch.num_rx, dtype=complex)
    for i in range(ch.num_tags):
        if i == k:
            continue
        gi = ch.G[i]
        q = q + sol.alpha[i] * (gi @ rx @ gi.conj().T)
    den = np.vdot(uk, q @ uk).real + lambda_si * abs(np.vdot(ch.f, sol.w)) ** 2
    return float(num / den)


def incident_power(ch: ChannelSet, sol: BeamformingSolution, k: int) -> float:
    """Incident RF power at tag k: |g_f^H w|^2 + g_f^H S g_f."""
    g = ch.g_f[k]
    p = abs(np.vdot(g, sol.w)) ** 2 + np.vdot(g, sol.S @ g).real
    return float(max(p, 0.0))


def eh_logistic(p_in: float, params: EhParams) -> float:
    """Raw logistic stage of the harvester, before the zero-input shift."""
    return params.m_nl / (1.0 + np.exp(-params.a_nl * (p_in - params.b_nl)))


def eh_forward(p_in_split: float, params: EhParams) -> float:
    """Harvested power for split input ``(1 - alpha) * p_in``.

    Nonlinear model: shifted logistic with exact zero response at zero
    input.  Linear model: constant conversion efficiency.
    """
    if p_in_split < 0.0:
        raise ValueError("input power must be >= 0")
    if params.model is EhModel.LINEAR:
        return params.eta_linear * p_in_split
    omega = 1.0 / (1.0 + np.exp(params.a_nl * params.b_nl))
    psi = params.m_nl / (1.0 + np.exp(-params.a_nl * (p_in_split - params.b_nl)))
    return float((psi - params.m_nl * omega) / (1.0 - omega))


def eh_inverse(p_target: float, params: EhParams) -> float:
    """Input power mapped to ``p_target`` by the logistic stage.

    Implements the printed closed form
    ``b - (1/a) ln((M - p) / p)``; it inverts the raw logistic, so the
    round trip holds through :func:`eh_logistic` exactly.
    """
    if params.model is EhModel.LINEAR:
        if p_target <= 0.0:
            raise ValueError("target power must be positive")
        return p_target / params.eta_linear
    if not (0.0 < p_target < params.m_nl):
        raise ValueError("target must lie strictly between 0 and the saturation level")
    return params.b_nl - math.log((params.m_nl - p_target) / p_target) / params.a_nl


def activation_input(params: EhParams) -> float:
    """Minimum split input power that wakes a tag: Phi^{-1}(p_b)."""
    return eh_inverse(params.p_b, params)


def _rate(sinr: float) -> float:
    return math.log2(1.0 + sinr)


def rate_summary(
    ch: ChannelSet,
    sol: BeamformingSolution,
    sigma2: float,
    lambda_si: float = 0.0,
) -> RateSummary:
    k = ch.num_tags
    user = _rate(user_sinr(ch, sol, sigma2))
    tags = np.array([_rate(tag_sinr(ch, sol, i, sigma2)) for i in range(k)])
    sensing = np.array([_rate(sensing_sinr(ch, sol, i, sigma2, lambda_si)) for i in range(k)])
    return RateSummary(user_rate=user, tag_rates=tags, sensing_rates=sensing)


def empirical_sinr(
    ch: ChannelSet,
    sol: BeamformingSolution,
    sigma2: float,
    n_samples: int,
    rng: np.random.Generator,
    n_batches: int = 50,
) -> EmpiricalSinr:
    """Estimate all SINRs by simulating the received signals.

    Draws unit-power Gaussian data symbols for the user and each tag, a
    Gaussian sensing waveform with covariance S, and receiver noise,
    then averages signal and interference-plus-noise powers.  Standard
    errors come from the spread of per-batch ratio estimates.
    """
    k, m, n_rx = ch.num_tags, ch.num_tx, ch.num_rx
    batch = max(1, n_samples // n_batches)

    evals, evecs = np.linalg.eigh(sol.S)
    s_fac = evecs * np.sqrt(np.clip(evals, 0.0, None))

    fw = np.vdot(ch.f, sol.w)
    hw = np.array([np.vdot(ch.h[i], sol.w) for i in range(k)])
    gfw = np.array([np.vdot(ch.g_f[i], sol.w) for i in range(k)])
    ugb = np.array([[np.vdot(sol.u[j], ch.g_b[i]) for i in range(k)] for j in range(k)])
    sq_alpha = np.sqrt(sol.alpha)

    ratios_user, ratios_tag, ratios_sen = [], [], []
    for _ in range(n_batches):
        xd = (rng.standard_normal(batch) + 1j * rng.standard_normal(batch)) / np.sqrt(2)
        c = (rng.standard_normal((batch, k)) + 1j * rng.standard_normal((batch, k))) / np.sqrt(2)
        g = (rng.standard_normal((batch, m)) + 1j * rng.standard_normal((batch, m))) / np.sqrt(2)
        s = g @ s_fac.T  # sensing waveform samples, covariance S
        zu = np.sqrt(sigma2 / 2) * (rng.standard_normal(batch) + 1j * rng.standard_normal(batch))
        zb = np.sqrt(sigma2 / 2) * (
            rng.standard_normal((batch, n_rx)) + 1j * rng.standard_normal((batch, n_rx))
        )

        # Per-tag relayed samples h_i^H (w x_d + s) and g_f-side samples.
        hx = xd[:, None] * hw[None, :] + s @ ch.h.conj().T if k else np.zeros((batch, 0), complex)
        tag_terms = sq_alpha[None, :] * hx * c if k else hx

        sig_u = fw * xd
        int_u = tag_terms.sum(axis=1) + zu
        ratios_user.append(np.mean(np.abs(sig_u) ** 2) / np.mean(np.abs(int_u) ** 2))

        if k:
            r_tag, r_sen = np.empty(k), np.empty(k)
            # BS side: u_j^H G_i x = (u_j^H g_b_i) * (g_f_i^H x).
            gfx = xd[:, None] * gfw[None, :] + s @ ch.g_f.conj().T
            for j in range(k):
                sig_t = tag_terms[:, j]
                int_t = tag_terms.sum(axis=1) - sig_t + zu
                r_tag[j] = np.mean(np.abs(sig_t) ** 2) / np.mean(np.abs(int_t) ** 2)

                bs_terms = sq_alpha[None, :] * ugb[j][None, :] * gfx * c
                sig_s = bs_terms[:, j]
                int_s = bs_terms.sum(axis=1) - sig_s + zb @ sol.u[j].conj()
                r_sen[j] = np.mean(np.abs(sig_s) ** 2) / np.mean(np.abs(int_s) ** 2)
            ratios_tag.append(r_tag)
            ratios_sen.append(r_sen)

    ru = np.array(ratios_user)
    if k:
        rt = np.stack(ratios_tag)
        rs = np.stack(ratios_sen)
    else:
        rt = np.zeros((n_batches, 0))
        rs = np.zeros((n_batches, 0))
    scale = math.sqrt(n_batches)
    return EmpiricalSinr(
        user=float(ru.mean()),
        tag=rt.mean(axis=0),
        sensing=rs.mean(axis=0),
        user_se=float(ru.std(ddof=1) / scale),
        tag_se=rt.std(axis=0, ddof=1) / scale,
        sensing_se=rs.std(axis=0, ddof=1) / scale,
    )
