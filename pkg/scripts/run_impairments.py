#!/usr/bin/env python3
"""Reported power under CSI error, residual self-interference, and
Rician fading, each as its own sweep under results/impairments/."""

import sys

from isabc.benchmarks import Scheme
from isabc.harness import ExperimentConfig, Sweep, run_experiment


def main() -> int:
    base = dict(schemes=(Scheme.ISABC_PASSIVE,), trials=100)
    code = 0
    code |= run_experiment(ExperimentConfig(
        sweep=Sweep.CSI_ETA, sweep_values=(0.0, 0.5, 1.0),
        out_dir="results/impairments/csi", **base,
    ))
    code |= run_experiment(ExperimentConfig(
        sweep=Sweep.RESIDUAL_SI, sweep_values=(0.0, 1e-9, 1e-8),
        out_dir="results/impairments/residual_si", **base,
    ))
    code |= run_experiment(ExperimentConfig(
        sweep=Sweep.RICIAN_KAPPA, sweep_values=(0.0, 2.0, 5.0, 10.0),
        out_dir="results/impairments/rician", **base,
    ))
    return code


if __name__ == "__main__":
    sys.exit(main())
