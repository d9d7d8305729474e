"""Transmit-power minimization workbench for backscatter-aided
integrated sensing and communication networks.

Subpackages cover channel generation, closed-form metrics with a
signal-level oracle, a trace-form SDP layer with rank-one recovery, the
three-block alternating optimizer, benchmark schemes, beampatterns,
impairment studies, and a Monte Carlo experiment harness.
"""

from .ao import AoConfig, AoStatus, ConvergenceTrace, SchemeFlags, SchemeSpec, ao_solve
from .benchmarks import MetricsReport, Scheme, SchemeConfig, run_scheme
from .channel import (
    ChannelSet,
    FadingModel,
    FadingSpec,
    LinkClass,
    Scenario,
    apply_csi_error,
    build_channel_set,
    path_loss,
    steering_vector,
)
from .harness import ExperimentConfig, Sweep, measure_runtime, run_experiment
from .impairments import ImpairmentSpec, optimize_with_impairments
from .metrics import (
    BeamformingSolution,
    EhParams,
    NoiseSpec,
    Thresholds,
    dbm_to_watt,
    noise_power,
    watt_to_dbm,
)

__version__ = "0.1.0"
