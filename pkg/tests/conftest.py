import numpy as np
import pytest

from isabc.ao import AoConfig
from isabc.channel import (
    FadingModel,
    FadingSpec,
    Scenario,
    build_channel_set,
    sample_tag_positions,
)
from isabc.metrics import EhParams, NoiseSpec, Thresholds, noise_power

TABLE_DEFAULTS = dict(m=8, n=8, k=3, fc=3e9)


def make_channel(seed=0, m=8, n=8, k=3, kappa=None, base_seed=1234):
    """One seeded default-geometry channel realization."""
    rng = np.random.default_rng(np.random.SeedSequence((base_seed, seed)))
    tags = sample_tag_positions((6.0, -4.0), 3.0, k, rng)
    scenario = Scenario(tag_positions=tags, num_tx=m, num_rx=n, num_tags=k)
    fading = (
        FadingSpec(FadingModel.RICIAN, rician_kappa=kappa)
        if kappa is not None
        else FadingSpec(FadingModel.RAYLEIGH)
    )
    return build_channel_set(scenario, fading, rng)


def make_thresholds(k=3, gamma_u=1.0, gamma_t=1.0, upsilon=1.0, lambda_si=0.0):
    return Thresholds(
        gamma_u=gamma_u,
        gamma_t=np.full(k, gamma_t),
        upsilon=np.full(k, upsilon),
        lambda_si=lambda_si,
    )


@pytest.fixture
def sigma2():
    return noise_power(NoiseSpec())


@pytest.fixture
def eh_params():
    return EhParams(p_b=1e-5)


@pytest.fixture
def ao_config():
    return AoConfig()


def opt_rng(seed=0, base_seed=1234):
    return np.random.default_rng(np.random.SeedSequence((base_seed, seed, 1)))
