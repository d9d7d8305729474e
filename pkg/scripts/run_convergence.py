#!/usr/bin/env python3
"""Per-iteration transmit-power traces at the default operating point.

Writes results/convergence/convergence.csv with one row per
(scheme, trial, iteration); plot power_dbm against iteration to see the
drop-and-flatten shape of the alternating optimizer.
"""

import sys

from isabc.benchmarks import Scheme
from isabc.harness import ExperimentConfig, Sweep, run_experiment


def main() -> int:
    config = ExperimentConfig(
        schemes=(Scheme.ISABC_PASSIVE,),
        sweep=Sweep.CONVERGENCE,
        trials=50,
        out_dir="results/convergence",
    )
    return run_experiment(config)


if __name__ == "__main__":
    sys.exit(main())
