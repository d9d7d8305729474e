#!/usr/bin/env python3
"""Mean transmit power versus array size and versus tag count.

Runs the main schemes over an antennas sweep and a tags sweep at desk
scale and leaves per-cell summaries under results/sweeps/.
"""

import sys

from isabc.benchmarks import Scheme
from isabc.harness import ExperimentConfig, Sweep, run_experiment


def main() -> int:
    code = 0
    antennas = ExperimentConfig(
        schemes=(Scheme.ISABC_PASSIVE, Scheme.BACKCOM, Scheme.SENSING_ONLY),
        sweep=Sweep.ANTENNAS,
        sweep_values=(5.0, 10.0, 15.0, 20.0),
        trials=100,
        out_dir="results/sweeps/antennas",
    )
    code |= run_experiment(antennas)

    tags = ExperimentConfig(
        schemes=(Scheme.ISABC_PASSIVE, Scheme.ISABC_ACTIVE, Scheme.ISAC),
        sweep=Sweep.TAGS,
        sweep_values=(1.0, 3.0, 6.0),
        trials=100,
        out_dir="results/sweeps/tags",
    )
    code |= run_experiment(tags)
    return code


if __name__ == "__main__":
    sys.exit(main())
