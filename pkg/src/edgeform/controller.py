"""Edge-based backstepping controller with adaptive parameter estimation.

All functions are pure and operate per spatial axis; arrays may carry a
trailing axis dimension so several axes evaluate in one call (the per-axis
problems are fully decoupled).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import GraphError, LaplacianSet, TopologyClass, TreePartition


@dataclass(frozen=True)
class ControllerGains:
    c: tuple[float, ...]            # c_1 .. c_n, all positive
    gamma: np.ndarray               # per-agent adaptation gains, all positive
    vartheta: float | None = None   # analysis constant; None -> auto
    epsilon: float = 1e-3

    def __post_init__(self):
        if any(ci <= 0 for ci in self.c):
            raise ValueError("all backstepping gains must be positive")
        if np.any(np.asarray(self.gamma) <= 0):
            raise ValueError("adaptation gains must be positive")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")

    @property
    def order(self) -> int:
        return len(self.c)


@dataclass(frozen=True)
class TransformedState:
    z1: np.ndarray      # transformed edge errors S
    W: np.ndarray       # positive diagonal entries of the interaction gain
    D: np.ndarray       # envelope-coupling offset
    S_dot: np.ndarray


def assemble_transformed(E: np.ndarray, s: np.ndarray, W: np.ndarray,
                         D: np.ndarray, x2: np.ndarray) -> TransformedState:
    """First-stage dynamics: S_dot = W * (E^T x2) + D, entries stacked per edge."""
    return TransformedState(z1=s, W=W, D=D, S_dot=W * (E.T @ x2) + D)


def incidence_for_control(topo_class: TopologyClass, E: np.ndarray,
                          E_in: np.ndarray) -> np.ndarray:
    """Matrix carrying z1 feedback to agents: in-incidence when directed."""
    if topo_class in (TopologyClass.DIRECTED_SPANNING_TREE, TopologyClass.DIRECTED_CYCLE):
        return E_in
    if topo_class is TopologyClass.CONNECTED_UNDIRECTED:
        return E
    raise GraphError("unsupported topology for control")


def alpha1(topo_class: TopologyClass, E: np.ndarray, E_in: np.ndarray,
           W: np.ndarray, z1: np.ndarray, c1: float) -> np.ndarray:
    return -c1 * incidence_for_control(topo_class, E, E_in) @ (W * z1)


def alpha1_dot(topo_class: TopologyClass, E: np.ndarray, E_in: np.ndarray,
               W: np.ndarray, W_dot: np.ndarray, z1: np.ndarray,
               z1_dot: np.ndarray, c1: float) -> np.ndarray:
    """Analytic time derivative of alpha1, product rule over W and z1."""
    B = incidence_for_control(topo_class, E, E_in)
    return -c1 * B @ (W_dot * z1 + W * z1_dot)


def alpha2(z2: np.ndarray, a1_dot: np.ndarray, c2: float) -> np.ndarray:
    # no -z1 term by design: the stage-1/stage-2 cross term is absorbed in
    # the gain conditions rather than cancelled
    return -c2 * z2 + a1_dot


def alpha_q(zq: np.ndarray, zqm1: np.ndarray, aprev_dot: np.ndarray,
            cq: float) -> np.ndarray:
    return -cq * zq - zqm1 + aprev_dot


def control_u(zn: np.ndarray, znm1: np.ndarray | None, aprev_dot: np.ndarray,
              phi: np.ndarray, theta_hat: np.ndarray, cn: float) -> np.ndarray:
    """Final-stage control: stabilizing feedback plus regressor cancellation.

    znm1 may be None when the final stage is stage 2, whose cross coupling with
    the edge stage is absorbed by the gain conditions instead of cancelled.
    """
    u = -cn * zn + aprev_dot - (phi * theta_hat).sum(axis=1)
    if znm1 is not None:
        u -= znm1
    return u


def adaptive_rate(gamma: np.ndarray, phi: np.ndarray, zn: np.ndarray) -> np.ndarray:
    """Estimate rate Gamma * phi * zn, per agent (and per axis when present)."""
    gamma = np.asarray(gamma, dtype=float)
    shape = (phi.shape[0],) + (1,) * (phi.ndim - 1)
    return gamma.reshape(shape) * phi * zn[:, None]


@dataclass(frozen=True)
class GainDiagnostics:
    vartheta: float
    epsilon: float
    c1_prime: float
    c1_dprime: float
    c2_prime: float
    lam_min_Les: float
    lam_max_EtEt: float
    lam_min_W2: float
    lam_max_J2: float

    @property
    def passed(self) -> bool:
        return self.c1_dprime > 0.0 and self.c2_prime > 0.0


def gain_diagnostics(topo_class: TopologyClass, lap: LaplacianSet,
                     part: TreePartition, W: np.ndarray, J: np.ndarray,
                     c1: float, c2: float, vartheta: float | None = None,
                     epsilon: float = 1e-3) -> GainDiagnostics:
    """Instantaneous stability-margin check for the sampled W, J diagonals.

    Advisory: the margins vary along the trajectory, so a failure here flags a
    gain choice, it does not invalidate a run.
    """
    EtEt = part.E_t.T @ part.E_t
    lam_EtEt = np.linalg.eigvalsh(EtEt)
    lam_max_EtEt = float(lam_EtEt[-1])
    W = np.asarray(W, dtype=float)
    J = np.asarray(J, dtype=float)

    if topo_class is TopologyClass.DIRECTED_SPANNING_TREE:
        lam_min_small = float(np.linalg.eigvalsh(lap.L_e_sym)[0])
        lam_min_W2 = float(W.min() ** 2)
        lam_max_J2 = float(J.max() ** 2)
        if vartheta is None:
            vartheta = c1 * lam_min_small / lam_max_EtEt
        c1_prime = (c1 * lam_min_small - 0.5 * vartheta * lam_max_EtEt) * lam_min_W2
    elif topo_class in (TopologyClass.DIRECTED_CYCLE, TopologyClass.CONNECTED_UNDIRECTED):
        lam_min_small = float(lam_EtEt[0])
        R = part.R
        M = R @ np.diag(W) @ R.T
        lam_min_W2 = float(np.linalg.eigvalsh(M)[0] ** 2)
        lam_max_J2 = float(np.linalg.eigvalsh(R @ np.diag(J * J) @ R.T)[-1])
        if vartheta is None:
            # halve the stability budget between the quadratic and cross terms
            scale = 0.5 if topo_class is TopologyClass.DIRECTED_CYCLE else 1.0
            vartheta = scale * c1 * lam_min_small / lam_max_EtEt
        if topo_class is TopologyClass.DIRECTED_CYCLE:
            c1_prime = 0.5 * (c1 * lam_min_small - vartheta * lam_max_EtEt) * lam_min_W2
        else:
            c1_prime = (c1 * lam_min_small - 0.5 * vartheta * lam_max_EtEt) * lam_min_W2
    else:
        raise GraphError("unsupported topology for gain diagnostics")

    c1_dprime = c1_prime - 0.5 * epsilon * lam_max_J2
    c2_prime = c2 - 1.0 / (2.0 * vartheta)
    return GainDiagnostics(vartheta=float(vartheta), epsilon=float(epsilon),
                           c1_prime=float(c1_prime), c1_dprime=float(c1_dprime),
                           c2_prime=float(c2_prime), lam_min_Les=lam_min_small,
                           lam_max_EtEt=lam_max_EtEt, lam_min_W2=lam_min_W2,
                           lam_max_J2=lam_max_J2)


def lyapunov_sample(z_stages: list[np.ndarray], theta_tilde: np.ndarray,
                    gamma: np.ndarray) -> float:
    """Quadratic energy of all stage errors plus weighted estimate error."""
    v = sum(0.5 * float(np.sum(z * z)) for z in z_stages)
    gamma = np.asarray(gamma, dtype=float)
    shape = (theta_tilde.shape[0],) + (1,) * (theta_tilde.ndim - 1)
    v += 0.5 * float(np.sum(theta_tilde * theta_tilde / gamma.reshape(shape)))
    return v
