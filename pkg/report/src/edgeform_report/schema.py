"""Parsing and validation of the simulator's CSV log schema.

The column layout is fixed by the simulator: time, per-agent planar states,
per-edge raw errors, shared funnel bounds per axis, per-edge transformed
errors, per-agent controls and parameter estimates, then the Lyapunov sample
and the stability-margin diagnostic. Agent and edge counts are inferred from
the header and the full header is then checked column by column.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np


class SchemaError(ValueError):
    pass


@dataclass(frozen=True)
class RunTable:
    """One parsed run log; arrays indexed by sample."""

    name: str
    t: np.ndarray             # (T,)
    positions: np.ndarray     # (T, N, 2)
    velocities: np.ndarray    # (T, N, 2)
    errors: np.ndarray        # (T, m, 2)
    bounds_lo: np.ndarray     # (T, 2)
    bounds_hi: np.ndarray     # (T, 2)
    s: np.ndarray             # (T, m, 2)
    u: np.ndarray             # (T, N, 2)
    theta_hat: np.ndarray     # (T, N, 2)
    V: np.ndarray             # (T,)
    c1dp: np.ndarray          # (T,)

    @property
    def num_agents(self) -> int:
        return self.positions.shape[1]

    @property
    def num_edges(self) -> int:
        return self.errors.shape[1]


def expected_header(num_agents: int, num_edges: int) -> list[str]:
    cols = ["t"]
    for i in range(1, num_agents + 1):
        cols += [f"agent{i}_x", f"agent{i}_y", f"agent{i}_vx", f"agent{i}_vy"]
    for k in range(1, num_edges + 1):
        cols += [f"edge{k}_ex", f"edge{k}_ey"]
    cols += ["bound_lo_x", "bound_hi_x", "bound_lo_y", "bound_hi_y"]
    for k in range(1, num_edges + 1):
        cols += [f"edge{k}_sx", f"edge{k}_sy"]
    for i in range(1, num_agents + 1):
        cols += [f"u{i}_x", f"u{i}_y"]
    for i in range(1, num_agents + 1):
        cols += [f"thetahat{i}_1", f"thetahat{i}_2"]
    cols += ["V", "c1dp"]
    return cols


def _infer_counts(header: list[str]) -> tuple[int, int]:
    num_agents = sum(1 for c in header if c.startswith("agent") and c.endswith("_x"))
    num_edges = sum(1 for c in header if c.startswith("edge") and c.endswith("_ex"))
    if num_agents < 2 or num_edges < 1:
        raise SchemaError("header does not look like a simulator log: "
                          f"found {num_agents} agents, {num_edges} edges")
    return num_agents, num_edges


def validate_header(header: list[str]) -> tuple[int, int]:
    """Return (num_agents, num_edges) or raise naming the offending column."""
    num_agents, num_edges = _infer_counts(header)
    expected = expected_header(num_agents, num_edges)
    if len(header) != len(expected):
        raise SchemaError(f"expected {len(expected)} columns for "
                          f"{num_agents} agents / {num_edges} edges, "
                          f"got {len(header)}")
    for j, (got, want) in enumerate(zip(header, expected)):
        if got != want:
            raise SchemaError(f"column {j + 1}: expected {want!r}, got {got!r}")
    return num_agents, num_edges


def parse_csv(path: str | Path) -> RunTable:
    path = Path(path)
    with path.open(newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path.name}: empty file") from None
        N, m = validate_header([c.strip() for c in header])
        try:
            data = np.array([[float(v) for v in row] for row in reader if row])
        except ValueError as exc:
            raise SchemaError(f"{path.name}: non-numeric cell: {exc}") from None
    if data.size == 0:
        raise SchemaError(f"{path.name}: no samples")

    cols = iter(range(data.shape[1]))

    def take(n: int) -> np.ndarray:
        idx = [next(cols) for _ in range(n)]
        return data[:, idx]

    t = take(1)[:, 0]
    agents = take(4 * N).reshape(-1, N, 4)
    errors = take(2 * m).reshape(-1, m, 2)
    b = take(4)
    s = take(2 * m).reshape(-1, m, 2)
    u = take(2 * N).reshape(-1, N, 2)
    theta = take(2 * N).reshape(-1, N, 2)
    V = take(1)[:, 0]
    c1dp = take(1)[:, 0]
    return RunTable(name=path.stem, t=t,
                    positions=agents[:, :, 0:2], velocities=agents[:, :, 2:4],
                    errors=errors,
                    bounds_lo=b[:, (0, 2)], bounds_hi=b[:, (1, 3)],
                    s=s, u=u, theta_hat=theta, V=V, c1dp=c1dp)


def envelope_violations(table: RunTable) -> list[tuple[int, int, float]]:
    """(edge, axis, t) for every sample where an error leaves its envelope.

    Infinite bounds are unconstraining by construction, so the comparisons
    below are naturally satisfied there.
    """
    out = []
    lo = table.bounds_lo[:, None, :]
    hi = table.bounds_hi[:, None, :]
    bad = (table.errors <= lo) | (table.errors >= hi)
    for j, k, a in np.argwhere(bad):
        out.append((int(k), int(a), float(table.t[j])))
    return out
