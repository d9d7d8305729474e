"""Transmit, receive, and joint beampatterns over an angle grid.

Patterns use unit-gain steering vectors so the plots show array gain
rather than link budget.  The transmit pattern is the expected radiated
power ``b(theta)^H R_x b(theta)``; the receive pattern is the filter
response ``|u_k^H b(theta)|^2``; the joint pattern is their product.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .channel import steering_vector
from .metrics import BeamformingSolution

__all__ = [
    "AngleGrid",
    "tx_beampattern",
    "rx_beampattern",
    "joint_beampattern",
    "write_beampattern_csv",
    "find_local_maxima",
]


@dataclass(frozen=True)
class AngleGrid:
    start: float = -np.pi / 2
    stop: float = np.pi / 2
    num_points: int = 361

    def __post_init__(self):
        if not self.start < self.stop:
            raise ValueError("need start < stop")
        if self.num_points < 2:
            raise ValueError("need at least two grid points")

    def angles(self) -> np.ndarray:
        return np.linspace(self.start, self.stop, self.num_points)


def _steering_matrix(grid: AngleGrid, size: int) -> np.ndarray:
    return np.stack([steering_vector(t, size, 1.0) for t in grid.angles()])


def tx_beampattern(
    sol: BeamformingSolution, grid: AngleGrid, array_size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Expected transmit power versus angle; returns (angles, gains)."""
    b = _steering_matrix(grid, array_size)
    rx = sol.covariance()
    gains = np.einsum("ij,jk,ik->i", b.conj(), rx, b).real
    return grid.angles(), np.clip(gains, 0.0, None)


def rx_beampattern(
    sol: BeamformingSolution, k: int, grid: AngleGrid, array_size: int
) -> tuple[np.ndarray, np.ndarray]:
    """Receive filter response of tag k's beamformer versus angle."""
    b = _steering_matrix(grid, array_size)
    gains = np.abs(b.conj() @ sol.u[k]) ** 2
    return grid.angles(), gains


def joint_beampattern(
    sol: BeamformingSolution, k: int, grid: AngleGrid
) -> tuple[np.ndarray, np.ndarray]:
    """Cascade of transmission and reception: pointwise product."""
    m = sol.w.shape[0]
    n = sol.u.shape[1]
    _, tx = tx_beampattern(sol, grid, m)
    theta, rx = rx_beampattern(sol, k, grid, n)
    return theta, tx * rx


def find_local_maxima(gains: np.ndarray) -> np.ndarray:
    """Indices of strict interior local maxima (plateau-tolerant)."""
    g = np.asarray(gains)
    idx = []
    for i in range(1, len(g) - 1):
        if g[i] >= g[i - 1] and g[i] >= g[i + 1] and (g[i] > g[i - 1] or g[i] > g[i + 1]):
            idx.append(i)
    return np.array(idx, dtype=int)


def write_beampattern_csv(path: str, angles: np.ndarray, gains: np.ndarray) -> None:
    """Two-column CSV: angle in degrees, gain in dB (floor at -300 dB)."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["theta_deg", "gain_db"])
        for theta, gain in zip(angles, gains):
            gain_db = 10.0 * np.log10(max(gain, 1e-30))
            writer.writerow([f"{np.degrees(theta):.6f}", f"{gain_db:.6f}"])
