"""Scenario file parsing, validation and serialization.

A scenario is one JSON document with sections {topology, performance, gains,
plant, sim}; bundled study scenarios ship with the package.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from . import plant as plant_mod
from .controller import ControllerGains
from .funnel import FunctionFamily, FunnelArray, PerformanceSpec, UnifiedPerformanceFunction
from .graphs import (IncidenceSet, Topology, TopologyClass, build_incidence,
                     classify_topology)


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class ScenarioConfig:
    name: str
    topology: Topology
    specs: list[list[PerformanceSpec]]   # [axis][edge]
    gains: ControllerGains
    theta: np.ndarray                    # true parameters (N, nu, d)
    friction: plant_mod.FrictionModel
    initial_state: np.ndarray            # (N, n, d)
    target: plant_mod.FormationTarget
    dt: float
    horizon: float
    seed: int
    log_stride: int

    @property
    def order(self) -> int:
        return self.initial_state.shape[1]

    @property
    def num_axes(self) -> int:
        return self.initial_state.shape[2]

    def incidence(self) -> IncidenceSet:
        return build_incidence(self.topology)

    def funnel(self) -> FunnelArray:
        return FunnelArray(self.specs)


def _require_keys(section: dict, allowed: set[str], required: set[str], where: str):
    unknown = set(section) - allowed
    if unknown:
        raise ScenarioError(f"unknown key(s) {sorted(unknown)} in section '{where}'")
    missing = required - set(section)
    if missing:
        raise ScenarioError(f"missing key(s) {sorted(missing)} in section '{where}'")


def _perf_spec(d: dict, where: str) -> PerformanceSpec:
    _require_keys(d, {"family", "delta_lo", "delta_hi", "beta0", "betaf", "lambda"},
                  {"delta_lo", "delta_hi", "beta0", "betaf", "lambda"}, where)
    family = FunctionFamily(d.get("family", "rational"))
    try:
        return PerformanceSpec(delta_lo=float(d["delta_lo"]), delta_hi=float(d["delta_hi"]),
                               beta0=float(d["beta0"]), betaf=float(d["betaf"]),
                               lam=float(d["lambda"]),
                               upf=UnifiedPerformanceFunction(family))
    except ValueError as exc:
        raise ScenarioError(f"invalid performance spec in '{where}': {exc}") from exc


def parse_scenario(data: dict, name: str = "scenario") -> ScenarioConfig:
    _require_keys(data, {"topology", "performance", "gains", "plant", "sim"},
                  {"topology", "performance", "gains", "plant", "sim"}, "<root>")

    t = data["topology"]
    _require_keys(t, {"num_nodes", "edges", "directed"}, {"num_nodes", "edges"}, "topology")
    topology = Topology(num_nodes=int(t["num_nodes"]),
                        edges=tuple(tuple(e) for e in t["edges"]),
                        directed=bool(t.get("directed", True)))
    if classify_topology(topology) is TopologyClass.UNSUPPORTED:
        raise ScenarioError("topology must be a directed spanning tree, a directed "
                            "cycle, or a connected undirected graph")
    inc = build_incidence(topology)
    m = topology.num_edges

    p = data["plant"]
    _require_keys(p, {"order", "axes", "theta", "friction", "initial_positions",
                      "initial_velocities", "targets"},
                  {"order", "axes", "theta", "initial_positions", "targets"}, "plant")
    n = int(p["order"])
    d = int(p["axes"])
    if n not in (1, 2):
        raise ScenarioError("end-to-end simulation supports order 1 or 2")

    fr = p.get("friction", {"kind": "tanh_pair", "coeffs": [10.0, 100.0]})
    _require_keys(fr, {"kind", "coeffs"}, {"kind"}, "plant.friction")
    friction = plant_mod.FrictionModel(kind=fr["kind"],
                                       coeffs=tuple(fr.get("coeffs", (10.0, 100.0))))

    theta = np.asarray(p["theta"], dtype=float)
    if friction.num_params == 0:
        theta = np.zeros((topology.num_nodes, 0, d))
    else:
        if theta.shape == (topology.num_nodes, d):
            theta = theta[:, None, :]
        if theta.shape != (topology.num_nodes, friction.num_params, d):
            raise ScenarioError(f"theta must have shape (N, {friction.num_params}, axes) "
                                f"or (N, axes); got {theta.shape}")

    x0 = np.zeros((topology.num_nodes, n, d))
    pos = np.asarray(p["initial_positions"], dtype=float)
    if pos.shape != (topology.num_nodes, d):
        raise ScenarioError(f"initial_positions must be (N, axes); got {pos.shape}")
    x0[:, 0] = pos
    if n >= 2:
        vel = np.asarray(p.get("initial_velocities",
                               np.zeros((topology.num_nodes, d))), dtype=float)
        if vel.shape != (topology.num_nodes, d):
            raise ScenarioError(f"initial_velocities must be (N, axes); got {vel.shape}")
        x0[:, 1] = vel

    tg = p["targets"]
    _require_keys(tg, {"kind", "desired_positions", "desired_offsets"}, {"kind"},
                  "plant.targets")
    if tg["kind"] == "pentagon":
        target = plant_mod.pentagon_targets(inc.E)
    elif tg["kind"] == "positions":
        target = plant_mod.offsets_from_positions(
            np.asarray(tg["desired_positions"], dtype=float), inc.E)
    elif tg["kind"] == "offsets":
        offsets = np.asarray(tg["desired_offsets"], dtype=float)
        if offsets.shape != (m, d):
            raise ScenarioError(f"desired_offsets must be (m, axes); got {offsets.shape}")
        target = plant_mod.FormationTarget(offsets=offsets)
    else:
        raise ScenarioError(f"unknown target kind {tg['kind']!r}")
    plant_mod.check_admissible(target.offsets, inc.E)

    perf = data["performance"]
    if "per_axis" in perf:
        _require_keys(perf, {"per_axis"}, {"per_axis"}, "performance")
        axis_dicts = perf["per_axis"]
        if len(axis_dicts) != d:
            raise ScenarioError(f"performance.per_axis must list {d} specs")
    else:
        axis_dicts = [perf] * d
    specs = [[_perf_spec(ad, "performance")] * m for ad in axis_dicts]

    g = data["gains"]
    _require_keys(g, {"c", "gamma", "vartheta", "epsilon"}, {"c"}, "gains")
    c = tuple(float(v) for v in g["c"])
    if len(c) != n:
        raise ScenarioError(f"gains.c must list {n} gains for an order-{n} plant")
    gamma_raw = g.get("gamma", 1.0)
    gamma = (np.full(topology.num_nodes, float(gamma_raw))
             if np.isscalar(gamma_raw) else np.asarray(gamma_raw, dtype=float))
    if gamma.shape != (topology.num_nodes,):
        raise ScenarioError("gains.gamma must be scalar or one value per agent")
    vartheta = g.get("vartheta")
    try:
        gains = ControllerGains(c=c, gamma=gamma,
                                vartheta=None if vartheta is None else float(vartheta),
                                epsilon=float(g.get("epsilon", 1e-3)))
    except ValueError as exc:
        raise ScenarioError(str(exc)) from exc

    s = data["sim"]
    _require_keys(s, {"dt", "horizon", "seed", "log_stride"}, {"dt", "horizon"}, "sim")
    dt = float(s["dt"])
    horizon = float(s["horizon"])
    if dt <= 0:
        raise ScenarioError("dt must be positive")
    if horizon <= 0:
        raise ScenarioError("horizon must be positive")
    stride = int(s.get("log_stride", 10))
    if stride < 1:
        raise ScenarioError("log_stride must be >= 1")

    return ScenarioConfig(name=name, topology=topology, specs=specs, gains=gains,
                          theta=theta, friction=friction, initial_state=x0,
                          target=target, dt=dt, horizon=horizon,
                          seed=int(s.get("seed", 0)), log_stride=stride)


def serialize_scenario(cfg: ScenarioConfig) -> dict:
    spec0 = cfg.specs[0][0]
    per_axis_needed = any(row[0] != cfg.specs[0][0] for row in cfg.specs)

    def spec_dict(sp: PerformanceSpec) -> dict:
        return {"family": sp.upf.family.value, "delta_lo": sp.delta_lo,
                "delta_hi": sp.delta_hi, "beta0": sp.beta0, "betaf": sp.betaf,
                "lambda": sp.lam}

    performance = ({"per_axis": [spec_dict(row[0]) for row in cfg.specs]}
                   if per_axis_needed else spec_dict(spec0))
    if cfg.target.desired_positions is not None:
        targets = {"kind": "positions",
                   "desired_positions": cfg.target.desired_positions.tolist()}
    else:
        targets = {"kind": "offsets", "desired_offsets": cfg.target.offsets.tolist()}
    return {
        "topology": {"num_nodes": cfg.topology.num_nodes,
                     "edges": [list(e) for e in cfg.topology.edges],
                     "directed": cfg.topology.directed},
        "performance": performance,
        "gains": {"c": list(cfg.gains.c), "gamma": cfg.gains.gamma.tolist(),
                  "vartheta": cfg.gains.vartheta, "epsilon": cfg.gains.epsilon},
        "plant": {"order": cfg.order, "axes": cfg.num_axes,
                  "theta": cfg.theta[:, 0].tolist() if cfg.theta.shape[1] else [],
                  "friction": {"kind": cfg.friction.kind,
                               "coeffs": list(cfg.friction.coeffs)},
                  "initial_positions": cfg.initial_state[:, 0].tolist(),
                  "initial_velocities": (cfg.initial_state[:, 1].tolist()
                                         if cfg.order >= 2 else
                                         np.zeros_like(cfg.initial_state[:, 0]).tolist()),
                  "targets": targets},
        "sim": {"dt": cfg.dt, "horizon": cfg.horizon, "seed": cfg.seed,
                "log_stride": cfg.log_stride},
    }


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply 'section.key=json_value' overrides to a raw scenario dict."""
    for item in overrides:
        if "=" not in item:
            raise ScenarioError(f"override {item!r} is not of the form key=value")
        path, raw = item.split("=", 1)
        keys = path.split(".")
        node = data
        for key in keys[:-1]:
            if not isinstance(node, dict) or key not in node:
                raise ScenarioError(f"override path {path!r} does not exist")
            node = node[key]
        if not isinstance(node, dict) or keys[-1] not in node:
            raise ScenarioError(f"override path {path!r} does not exist")
        try:
            node[keys[-1]] = json.loads(raw)
        except json.JSONDecodeError:
            node[keys[-1]] = raw
    return data


def bundled_scenario_names() -> list[str]:
    pkg = resources.files("edgeform") / "scenarios"
    return sorted(p.stem for p in pkg.iterdir() if p.name.endswith(".json"))


def load_scenario(source: str | Path, overrides: list[str] | None = None) -> ScenarioConfig:
    """Load from a file path or a bundled scenario name."""
    path = Path(source)
    if path.exists():
        name = path.stem
        text = path.read_text()
    else:
        pkg = resources.files("edgeform") / "scenarios" / f"{source}.json"
        if not pkg.is_file():
            raise FileNotFoundError(
                f"no scenario file {source!r}; bundled names: {bundled_scenario_names()}")
        name = str(source)
        text = pkg.read_text()
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"scenario {name}: invalid JSON at line {exc.lineno}, "
                            f"column {exc.colno}: {exc.msg}") from exc
    if overrides:
        data = apply_overrides(data, list(overrides))
    return parse_scenario(data, name=name)
