"""Agent dynamics, friction regressor and formation targets.

The plant owns the true parameter vector; the controller side only ever sees
the regressor and measurements, so "unknown parameter" is enforced by module
boundary rather than convention.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import IncidenceSet


@dataclass(frozen=True)
class FrictionModel:
    """Regressor phi = tanh(k_slow * v) - tanh(k_fast * v), elementwise in v."""

    kind: str = "tanh_pair"        # "none" or "tanh_pair"
    coeffs: tuple[float, float] = (10.0, 100.0)

    def __post_init__(self):
        if self.kind not in ("none", "tanh_pair"):
            raise ValueError(f"unknown friction kind {self.kind!r}")

    @property
    def num_params(self) -> int:
        return 0 if self.kind == "none" else 1

    def regressor(self, v: np.ndarray) -> np.ndarray:
        """Regressor at velocities v (N, d) -> (N, nu, d)."""
        if self.kind == "none":
            return np.zeros((v.shape[0], 0, v.shape[1]))
        k_slow, k_fast = self.coeffs
        return (np.tanh(k_slow * v) - np.tanh(k_fast * v))[:, None, :]


def friction_regressor(v: np.ndarray, coeffs: tuple[float, float] = (10.0, 100.0)) -> np.ndarray:
    """Elementwise tanh-pair regressor; vanishes at v = 0 and as |v| -> inf."""
    return np.tanh(coeffs[0] * np.asarray(v)) - np.tanh(coeffs[1] * np.asarray(v))


def plant_rate(x: np.ndarray, u: np.ndarray, theta: np.ndarray, phi: np.ndarray) -> np.ndarray:
    """Chain-of-integrators rate for state x (N, n, d).

    Top order obeys x_n_dot = u + phi^T theta with phi, theta shaped (N, nu, d).
    """
    xdot = np.empty_like(x)
    xdot[:, :-1] = x[:, 1:]
    xdot[:, -1] = u + (phi * theta).sum(axis=1)
    return xdot


@dataclass(frozen=True)
class FormationTarget:
    """Desired edge offsets (m, d), optionally backed by absolute positions."""

    offsets: np.ndarray
    desired_positions: np.ndarray | None = None


def check_admissible(offsets: np.ndarray, E: np.ndarray, tol: float = 1e-10) -> None:
    """Reject offset sets that cannot be realized by any absolute positions.

    Admissibility = offsets lie in the row space of E^T, i.e. they sum to zero
    around every cycle of the graph.
    """
    p, *_ = np.linalg.lstsq(E.T, offsets, rcond=None)
    residual = np.abs(E.T @ p - offsets).max() if offsets.size else 0.0
    if residual > tol:
        raise ValueError(f"formation offsets violate cycle closure by {residual:.3g}")


def offsets_from_positions(desired: np.ndarray, E: np.ndarray) -> FormationTarget:
    desired = np.asarray(desired, dtype=float)
    return FormationTarget(offsets=E.T @ desired, desired_positions=desired)


def pentagon_targets(E: np.ndarray) -> FormationTarget:
    """Unit pentagon with vertex i at angle 2(i-1)pi/5, offsets per edge orientation."""
    if E.shape[0] != 5:
        raise ValueError("pentagon formation is defined for 5 agents")
    idx = np.arange(5)
    p = np.stack([np.cos(2 * idx * np.pi / 5), np.sin(2 * idx * np.pi / 5)], axis=1)
    return offsets_from_positions(p, E)


def edge_errors(x1: np.ndarray, target: FormationTarget, inc: IncidenceSet) -> np.ndarray:
    """Formation errors (m, d): oriented differences minus desired offsets."""
    return inc.E.T @ x1 - target.offsets
