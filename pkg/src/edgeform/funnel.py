"""Prescribed-performance machinery: envelope, error mappings and jacobians.

A performance function maps the bounded funnel coordinate into unbounded error
space; its inverse normalizes each relative error, the decaying envelope
modulates it, and a rational map blows up near the funnel edges so that keeping
the transformed error bounded enforces the funnel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum


class FunnelViolation(Exception):
    """Modulated error left its admissible open interval."""

    def __init__(self, zeta: float, delta_lo: float, delta_hi: float,
                 edge: int | None = None, axis: int | None = None, t: float | None = None):
        self.zeta = zeta
        self.delta_lo = delta_lo
        self.delta_hi = delta_hi
        self.edge = edge
        self.axis = axis
        self.t = t
        where = "" if edge is None else f" (edge {edge}, axis {axis}, t={t})"
        super().__init__(
            f"modulated error {zeta:.6g} outside (-{delta_lo:.4g}, {delta_hi:.4g}){where}")


class FunctionFamily(Enum):
    RATIONAL = "rational"   # y / sqrt(1 - y^2), domain (-1, 1)
    TANGENT = "tangent"     # tan(y), domain (-pi/2, pi/2)


@dataclass(frozen=True)
class UnifiedPerformanceFunction:
    family: FunctionFamily = FunctionFamily.RATIONAL

    @property
    def iota(self) -> float:
        return 1.0 if self.family is FunctionFamily.RATIONAL else math.pi / 2

    def eval(self, y: float) -> float:
        if abs(y) >= self.iota:
            raise ValueError(f"argument {y} outside (-{self.iota}, {self.iota})")
        if self.family is FunctionFamily.RATIONAL:
            return y / math.sqrt(1.0 - y * y)
        return math.tan(y)

    def inverse(self, e: float) -> float:
        if self.family is FunctionFamily.RATIONAL:
            return e / math.sqrt(1.0 + e * e)
        return math.atan(e)

    def inverse_deriv(self, e: float) -> float:
        # d(inverse)/de, strictly positive
        if self.family is FunctionFamily.RATIONAL:
            return (1.0 + e * e) ** -1.5
        return 1.0 / (1.0 + e * e)

    def inverse_deriv2(self, e: float) -> float:
        # second derivative of the inverse, used for the virtual-control rate
        if self.family is FunctionFamily.RATIONAL:
            return -3.0 * e * (1.0 + e * e) ** -2.5
        return -2.0 * e / (1.0 + e * e) ** 2


class ConstraintMode(Enum):
    GLOBAL = "global"
    LOWER_ONE_SIDED = "lower_one_sided"
    UPPER_ONE_SIDED = "upper_one_sided"
    ASYMMETRIC = "asymmetric"


@dataclass(frozen=True)
class PerformanceSpec:
    """Per-edge funnel parameters.

    delta_lo/delta_hi shape the admissible band of the modulated error, beta0
    -> betaf with rate lam shape the shrinking envelope.
    """

    delta_lo: float
    delta_hi: float
    beta0: float
    betaf: float
    lam: float
    upf: UnifiedPerformanceFunction = UnifiedPerformanceFunction()

    def __post_init__(self):
        iota = self.upf.iota
        if not (0.0 < self.delta_lo <= 1.0 and 0.0 < self.delta_hi <= 1.0):
            raise ValueError("delta_lo and delta_hi must lie in (0, 1]")
        if not (0.0 < self.betaf < self.beta0 <= iota):
            raise ValueError(f"need 0 < betaf < beta0 <= {iota:.6g}")
        if self.lam <= 0.0:
            raise ValueError("lam must be positive")

    def envelope(self, t: float) -> tuple[float, float]:
        """Return (beta, beta_dot) at time t >= 0."""
        decay = (self.beta0 - self.betaf) * math.exp(-self.lam * t)
        return decay + self.betaf, -self.lam * decay


@dataclass(frozen=True)
class ModeReport:
    mode: ConstraintMode
    eps_lo: float  # magnitude of the lower initial bound, inf if unconstrained
    eps_hi: float


@dataclass(frozen=True)
class MappedError:
    e_tilde: float
    eta: float
    zeta: float
    s: float


@dataclass(frozen=True)
class MappingJacobians:
    xi: float
    mu: float
    J: float
    W_entry: float
    D_entry: float
    beta: float
    beta_dot: float


_BOUNDARY_TOL = 1e-12


def classify_mode(spec: PerformanceSpec) -> ModeReport:
    iota = spec.upf.iota
    lo_global = abs(spec.delta_lo * spec.beta0 - iota) <= _BOUNDARY_TOL
    hi_global = abs(spec.delta_hi * spec.beta0 - iota) <= _BOUNDARY_TOL
    eps_lo = math.inf if lo_global else -spec.upf.eval(-spec.delta_lo * spec.beta0)
    eps_hi = math.inf if hi_global else spec.upf.eval(spec.delta_hi * spec.beta0)
    if lo_global and hi_global:
        mode = ConstraintMode.GLOBAL
    elif hi_global:
        mode = ConstraintMode.LOWER_ONE_SIDED
    elif lo_global:
        mode = ConstraintMode.UPPER_ONE_SIDED
    else:
        mode = ConstraintMode.ASYMMETRIC
    return ModeReport(mode=mode, eps_lo=eps_lo, eps_hi=eps_hi)


def transform(spec: PerformanceSpec, zeta: float) -> float:
    """Map the modulated error onto the unbounded transformed coordinate."""
    return zeta / ((spec.delta_lo + zeta) * (spec.delta_hi - zeta))


def map_error(spec: PerformanceSpec, e_tilde: float, t: float) -> MappedError:
    eta = spec.upf.inverse(e_tilde)
    beta, _ = spec.envelope(t)
    zeta = eta / beta
    if not (-spec.delta_lo < zeta < spec.delta_hi):
        raise FunnelViolation(zeta, spec.delta_lo, spec.delta_hi, t=t)
    return MappedError(e_tilde=e_tilde, eta=eta, zeta=zeta, s=transform(spec, zeta))


def mu_of_zeta(spec: PerformanceSpec, zeta: float) -> float:
    num = spec.delta_lo * spec.delta_hi + zeta * zeta
    den = ((spec.delta_lo + zeta) * (spec.delta_hi - zeta)) ** 2
    return num / den


def dmu_dzeta(spec: PerformanceSpec, zeta: float) -> float:
    """Closed-form derivative of mu, quotient rule on its defining ratio."""
    dlo, dhi = spec.delta_lo, spec.delta_hi
    a = dlo + zeta
    b = dhi - zeta
    num = dlo * dhi + zeta * zeta
    den = (a * b) ** 2
    dden = 2.0 * a * b * (b - a)
    return (2.0 * zeta * den - num * dden) / den ** 2


def map_jacobians(spec: PerformanceSpec, e_tilde: float, t: float) -> MappingJacobians:
    mapped = map_error(spec, e_tilde, t)
    beta, beta_dot = spec.envelope(t)
    xi = spec.upf.inverse_deriv(e_tilde)
    mu = mu_of_zeta(spec, mapped.zeta)
    J = mu / beta
    return MappingJacobians(xi=xi, mu=mu, J=J, W_entry=J * xi,
                            D_entry=-J * beta_dot * mapped.zeta,
                            beta=beta, beta_dot=beta_dot)


def bounds_at(spec: PerformanceSpec, t: float) -> tuple[float, float]:
    """Funnel bounds on the raw error at time t; +-inf where unconstrained."""
    beta, _ = spec.envelope(t)
    iota = spec.upf.iota
    ylo = spec.delta_lo * beta
    yhi = spec.delta_hi * beta
    lower = -math.inf if ylo >= iota - _BOUNDARY_TOL else spec.upf.eval(-ylo)
    upper = math.inf if yhi >= iota - _BOUNDARY_TOL else spec.upf.eval(yhi)
    return lower, upper


# --- vectorized counterpart used by the simulation loop -----------------------

import numpy as np  # noqa: E402  (kept below the scalar API it mirrors)


@dataclass(frozen=True)
class MappedArrays:
    """Per-edge, per-axis mapping quantities, all shaped (m, d)."""

    eta: np.ndarray
    zeta: np.ndarray
    s: np.ndarray
    xi: np.ndarray
    mu: np.ndarray
    J: np.ndarray
    W: np.ndarray
    D: np.ndarray
    beta: np.ndarray
    beta_dot: np.ndarray
    # cached factors of the rational map, reused by the rate computation
    a: np.ndarray
    b: np.ndarray
    ab2: np.ndarray


class FunnelArray:
    """Vectorized funnel mappings over m edges and d axes.

    Takes specs[axis][edge]; all specs must share one function family. The
    closed forms match the scalar API above, which serves as its oracle.
    """

    def __init__(self, specs: list[list[PerformanceSpec]]):
        families = {s.upf.family for row in specs for s in row}
        if len(families) != 1:
            raise ValueError("all specs must share one function family")
        self.family = families.pop()
        self.iota = UnifiedPerformanceFunction(self.family).iota
        self.num_axes = len(specs)
        self.num_edges = len(specs[0])
        self.specs = specs
        # (m, d) parameter arrays: edge index first, axis second
        def grid(attr):
            return np.array([[getattr(s, attr) for s in row] for row in specs]).T
        self.dlo = grid("delta_lo")
        self.dhi = grid("delta_hi")
        self.beta0 = grid("beta0")
        self.betaf = grid("betaf")
        self.lam = grid("lam")

    def envelope(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        decay = (self.beta0 - self.betaf) * np.exp(-self.lam * t)
        return decay + self.betaf, -self.lam * decay

    def _inverse(self, e: np.ndarray) -> np.ndarray:
        if self.family is FunctionFamily.RATIONAL:
            return e / np.sqrt(1.0 + e * e)
        return np.arctan(e)

    def _xi(self, e: np.ndarray) -> np.ndarray:
        if self.family is FunctionFamily.RATIONAL:
            return (1.0 + e * e) ** -1.5
        return 1.0 / (1.0 + e * e)

    def _xi_dot(self, e: np.ndarray, e_dot: np.ndarray) -> np.ndarray:
        if self.family is FunctionFamily.RATIONAL:
            return -3.0 * e * e_dot * (1.0 + e * e) ** -2.5
        return -2.0 * e * e_dot / (1.0 + e * e) ** 2

    def check(self, zeta: np.ndarray, t: float) -> None:
        # ~(inside) rather than (outside) so NaN also trips the check
        bad = ~((zeta > -self.dlo) & (zeta < self.dhi))
        if bad.any():
            k, a = map(int, np.argwhere(bad)[0])
            raise FunnelViolation(float(zeta[k, a]), float(self.dlo[k, a]),
                                  float(self.dhi[k, a]), edge=k, axis=a, t=t)

    def map(self, e: np.ndarray, t: float) -> MappedArrays:
        """Full mapping at raw errors e (m, d); raises FunnelViolation."""
        beta, beta_dot = self.envelope(t)
        eta = self._inverse(e)
        zeta = eta / beta
        self.check(zeta, t)
        a = self.dlo + zeta
        b = self.dhi - zeta
        ab = a * b
        ab2 = ab * ab
        s = zeta / ab
        mu = (self.dlo * self.dhi + zeta * zeta) / ab2
        xi = self._xi(e)
        J = mu / beta
        return MappedArrays(eta=eta, zeta=zeta, s=s, xi=xi, mu=mu, J=J,
                            W=J * xi, D=-J * beta_dot * zeta,
                            beta=beta, beta_dot=beta_dot, a=a, b=b, ab2=ab2)

    def rates(self, e: np.ndarray, e_dot: np.ndarray, mapped: MappedArrays
              ) -> tuple[np.ndarray, np.ndarray]:
        """Time derivatives (W_dot, s_dot) along e_dot, shapes (m, d)."""
        zeta, beta, beta_dot = mapped.zeta, mapped.beta, mapped.beta_dot
        inner = mapped.xi * e_dot - beta_dot * zeta
        zeta_dot = inner / beta
        a, b, den = mapped.a, mapped.b, mapped.ab2
        num = mapped.mu * den
        dden = 2.0 * a * b * (b - a)
        mu_dot = (2.0 * zeta * den - num * dden) / (den * den) * zeta_dot
        J_dot = (mu_dot - mapped.J * beta_dot) / beta
        W_dot = J_dot * mapped.xi + mapped.J * self._xi_dot(e, e_dot)
        s_dot = mapped.J * inner
        return W_dot, s_dot

    def bounds(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Raw-error funnel bounds (lower, upper), +-inf where unconstrained."""
        beta, _ = self.envelope(t)
        ylo = self.dlo * beta
        yhi = self.dhi * beta
        with np.errstate(divide="ignore", invalid="ignore"):
            if self.family is FunctionFamily.RATIONAL:
                lower = -ylo / np.sqrt(1.0 - ylo * ylo)
                upper = yhi / np.sqrt(1.0 - yhi * yhi)
            else:
                lower = -np.tan(ylo)
                upper = np.tan(yhi)
        lower = np.where(ylo >= self.iota - _BOUNDARY_TOL, -np.inf, lower)
        upper = np.where(yhi >= self.iota - _BOUNDARY_TOL, np.inf, upper)
        return lower, upper
