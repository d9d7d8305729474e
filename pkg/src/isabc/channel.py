"""Channel generation for the ISABC workbench.

Builds one snapshot of every link in the network: the direct BS-to-user
channel, the cascaded BS-tag-user backscatter channels, and the LoS
BS-tag round-trip channels used for sensing.  Communication links
(BS-user, tag-user) are small-scale faded (Rayleigh or Rician on top of
a log-distance path loss); BS-tag links are deterministic uniform
linear array steering vectors at the tag's geometric angle.

All randomness flows through an explicit ``numpy.random.Generator`` so
that a (scenario, fading, seed) triple always reproduces the same
channel set bit for bit.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "LinkClass",
    "FadingModel",
    "Scenario",
    "FadingSpec",
    "ChannelSet",
    "path_loss",
    "steering_vector",
    "los_phase_ramp",
    "rayleigh_sample",
    "rician_sample",
    "build_channel_set",
    "apply_csi_error",
]


class LinkClass(enum.Enum):
    """Propagation class of a link: LoS BS-tag or NLoS communication."""

    BS_TAG = "bs_tag"
    COMM = "comm"


class FadingModel(enum.Enum):
    RAYLEIGH = "rayleigh"
    RICIAN = "rician"


@dataclass(frozen=True)
class Scenario:
    """Network geometry and array sizes.

    Positions are 2-D coordinates in meters.  ``num_tx``/``num_rx`` are
    the BS transmit/receive ULA sizes, ``num_tags`` the tag count.
    """

    bs_position: tuple[float, float] = (0.0, 0.0)
    user_position: tuple[float, float] = (12.0, 0.0)
    tag_positions: tuple[tuple[float, float], ...] = ()
    carrier_freq_hz: float = 3.0e9
    num_tx: int = 8
    num_rx: int = 8
    num_tags: int = 3

    def __post_init__(self):
        if self.num_tags < 1 or self.num_tx < 1 or self.num_rx < 1:
            raise ValueError("K, M, N must all be >= 1")
        if len(self.tag_positions) != self.num_tags:
            raise ValueError(
                f"expected {self.num_tags} tag positions, got {len(self.tag_positions)}"
            )
        bs = np.asarray(self.bs_position, dtype=float)
        user = np.asarray(self.user_position, dtype=float)
        if np.linalg.norm(user - bs) <= 0.0:
            raise ValueError("BS and user positions coincide")
        for pos in self.tag_positions:
            p = np.asarray(pos, dtype=float)
            if np.linalg.norm(p - bs) <= 0.0 or np.linalg.norm(p - user) <= 0.0:
                raise ValueError("tag coincides with BS or user")


@dataclass(frozen=True)
class FadingSpec:
    """Small-scale fading model for the communication links."""

    model: FadingModel = FadingModel.RAYLEIGH
    rician_kappa: float = 0.0

    def __post_init__(self):
        if self.rician_kappa < 0.0:
            raise ValueError("rician_kappa must be >= 0")


@dataclass(frozen=True)
class ChannelSet:
    """One realization of all links.

    Attributes:
        f:      (M,) BS -> user channel.
        g_f:    (K, M) BS -> tag steering vectors.
        g_b:    (K, N) tag -> BS steering vectors.
        v:      (K,) tag -> user scalar channels.
        h:      (K, M) cascaded channels, ``h[k] = g_f[k] * v[k]``.
        G:      (K, N, M) round-trip reflection matrices ``g_b[k] g_f[k]^H``.
        theta:  (K,) tag angles from array broadside, radians.
        zeta_f, zeta_g, zeta_v: linear path-loss gains of the
            BS-user, BS-tag, and tag-user links.
    """

    f: np.ndarray
    g_f: np.ndarray
    g_b: np.ndarray
    v: np.ndarray
    h: np.ndarray
    G: np.ndarray
    theta: np.ndarray
    zeta_f: float
    zeta_g: np.ndarray = field(default_factory=lambda: np.zeros(0))
    zeta_v: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @property
    def num_tags(self) -> int:
        return self.g_f.shape[0]

    @property
    def num_tx(self) -> int:
        return self.f.shape[0]

    @property
    def num_rx(self) -> int:
        return self.g_b.shape[1] if self.g_b.ndim == 2 else 0


def path_loss(distance_m: float, link_class: LinkClass, carrier_freq_hz: float) -> float:
    """Linear power gain of the log-distance path-loss law.

    BS-tag links use the LoS urban-micro law, communication links the
    NLoS one.  ``f`` enters in GHz.
    """
    if distance_m <= 0.0:
        raise ValueError(f"distance must be positive, got {distance_m}")
    f_ghz = carrier_freq_hz / 1e9
    if link_class is LinkClass.BS_TAG:
        pl_db = 22.0 * math.log10(distance_m) + 28.0 + 20.0 * math.log10(f_ghz)
    elif link_class is LinkClass.COMM:
        pl_db = 36.7 * math.log10(distance_m) + 22.7 + 26.0 * math.log10(f_ghz)
    else:
        raise ValueError(f"unknown link class {link_class!r}")
    return 10.0 ** (-pl_db / 10.0)


def steering_vector(theta: float, num_elements: int, gain: float) -> np.ndarray:
    """Half-wavelength ULA steering vector with total gain ``gain``.

    Element b is ``sqrt(gain / B) * exp(j * pi * b * sin(theta))``, so
    the squared norm equals ``gain`` exactly.
    """
    if num_elements < 1:
        raise ValueError("num_elements must be >= 1")
    if gain <= 0.0:
        raise ValueError("gain must be positive")
    b = np.arange(num_elements)
    return np.sqrt(gain / num_elements) * np.exp(1j * np.pi * b * np.sin(theta))


def los_phase_ramp(theta: float, num_elements: int) -> np.ndarray:
    """Unit-modulus ULA phase ramp used as the deterministic LoS component.

    Per-element magnitude is 1 so that mixing it with unit-variance
    scattered entries preserves average power for every Rician factor.
    """
    b = np.arange(num_elements)
    return np.exp(1j * np.pi * b * np.sin(theta))


def rayleigh_sample(gain: float, dim: int, rng: np.random.Generator) -> np.ndarray:
    """Draw ``sqrt(gain) * a`` with ``a ~ CN(0, I_dim)``."""
    if gain <= 0.0:
        raise ValueError("gain must be positive")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    a = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    return np.sqrt(gain / 2.0) * a


def rician_sample(
    gain: float,
    kappa: float,
    los: np.ndarray,
    rng: np.random.Generator,
) -> np.ndarray:
    """Rician draw mixing a deterministic LoS part with a Rayleigh part.

    ``los`` must have unit-modulus entries; ``kappa = 0`` reduces to a
    plain Rayleigh draw consuming the generator identically.
    """
    if kappa < 0.0:
        raise ValueError("kappa must be >= 0")
    los = np.asarray(los, dtype=complex)
    if los.ndim != 1 or los.shape[0] < 1:
        raise ValueError("los must be a nonempty vector")
    scattered = rayleigh_sample(1.0, los.shape[0], rng)
    mix = np.sqrt(kappa / (kappa + 1.0)) * los + np.sqrt(1.0 / (kappa + 1.0)) * scattered
    return np.sqrt(gain) * mix


def _comm_draw(gain, dim, fading, theta_los, rng):
    # Rician LoS for a vector link is the phase ramp toward the node;
    # a scalar link has LoS component 1 (theta irrelevant).
    if fading.model is FadingModel.RAYLEIGH:
        return rayleigh_sample(gain, dim, rng)
    los = los_phase_ramp(theta_los, dim) if dim > 1 else np.ones(1, dtype=complex)
    return rician_sample(gain, fading.rician_kappa, los, rng)


def build_channel_set(
    scenario: Scenario,
    fading: FadingSpec,
    rng: np.random.Generator,
) -> ChannelSet:
    """Generate one channel realization for ``scenario``.

    The ULA lies along the y axis with broadside toward +x, so a node at
    displacement (dx, dy) from the BS sits at angle ``atan2(dy, dx)``.
    Draw order is fixed (f first, then v_1..v_K) for reproducibility.
    """
    bs = np.asarray(scenario.bs_position, dtype=float)
    user = np.asarray(scenario.user_position, dtype=float)
    tags = [np.asarray(p, dtype=float) for p in scenario.tag_positions]
    m, n, k = scenario.num_tx, scenario.num_rx, scenario.num_tags
    fc = scenario.carrier_freq_hz

    d_user = float(np.linalg.norm(user - bs))
    theta_user = math.atan2(user[1] - bs[1], user[0] - bs[0])
    zeta_f = path_loss(d_user, LinkClass.COMM, fc)

    theta = np.array([math.atan2(p[1] - bs[1], p[0] - bs[0]) for p in tags])
    zeta_g = np.array([path_loss(float(np.linalg.norm(p - bs)), LinkClass.BS_TAG, fc) for p in tags])
    zeta_v = np.array(
        [path_loss(float(np.linalg.norm(p - user)), LinkClass.COMM, fc) for p in tags]
    )

    f = _comm_draw(zeta_f, m, fading, theta_user, rng)
    v = np.array([_comm_draw(zeta_v[i], 1, fading, 0.0, rng)[0] for i in range(k)])

    g_f = np.stack([steering_vector(theta[i], m, zeta_g[i]) for i in range(k)]) if k else np.zeros((0, m), complex)
    g_b = np.stack([steering_vector(theta[i], n, zeta_g[i]) for i in range(k)]) if k else np.zeros((0, n), complex)
    h = g_f * v[:, None] if k else np.zeros((0, m), complex)
    G = (
        np.stack([np.outer(g_b[i], g_f[i].conj()) for i in range(k)])
        if k
        else np.zeros((0, n, m), complex)
    )
    return ChannelSet(
        f=f, g_f=g_f, g_b=g_b, v=v, h=h, G=G, theta=theta,
        zeta_f=zeta_f, zeta_g=zeta_g, zeta_v=zeta_v,
    )


def apply_csi_error(ch: ChannelSet, eta: float, rng: np.random.Generator) -> ChannelSet:
    """Perturb the estimated communication channels.

    Every scalar entry x of ``f`` and every ``v_k`` receives an
    independent circularly-symmetric complex error of variance
    ``eta * |x|^2``.  Steering channels are geometric and stay exact;
    the cascaded channels are rebuilt from the perturbed ``v``.
    """
    if eta < 0.0:
        raise ValueError("eta must be >= 0")
    if eta == 0.0:
        return ch
    k = ch.num_tags

    def _perturb(x):
        x = np.atleast_1d(x)
        e = rng.standard_normal(x.shape) + 1j * rng.standard_normal(x.shape)
        return x + np.sqrt(eta / 2.0) * np.abs(x) * e

    f_hat = _perturb(ch.f)
    v_hat = _perturb(ch.v) if k else ch.v
    h_hat = ch.g_f * v_hat[:, None] if k else ch.h
    return replace(ch, f=f_hat, v=v_hat, h=h_hat)


def strip_tags(ch: ChannelSet) -> ChannelSet:
    """View of ``ch`` with zero tags (for communication-only runs)."""
    m, n = ch.num_tx, ch.num_rx
    z = np.zeros(0)
    return replace(
        ch,
        g_f=np.zeros((0, m), complex),
        g_b=np.zeros((0, n), complex),
        v=np.zeros(0, complex),
        h=np.zeros((0, m), complex),
        G=np.zeros((0, n, m), complex),
        theta=z,
        zeta_g=z,
        zeta_v=z,
    )


def sample_tag_positions(
    center: tuple[float, float],
    radius: float,
    count: int,
    rng: np.random.Generator,
) -> tuple[tuple[float, float], ...]:
    """Uniformly sample tag positions inside the deployment circle."""
    r = radius * np.sqrt(rng.uniform(size=count))
    phi = rng.uniform(0.0, 2.0 * np.pi, size=count)
    return tuple(
        (center[0] + r[i] * math.cos(phi[i]), center[1] + r[i] * math.sin(phi[i]))
        for i in range(count)
    )
