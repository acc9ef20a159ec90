"""Command-line front end: run scenarios, check initial constraints, certify
topologies, and sweep scenario batches.

Exit codes: 0 success, 1 usage or I/O error, 2 initial-constraint violation,
3 runtime funnel violation.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

from .engine import InitialConstraintViolation, TrajectoryLog, check_initial, run_scenario
from .graphs import GraphError, lemma1_certificate
from .scenario import ScenarioConfig, ScenarioError, load_scenario, serialize_scenario

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_INITIAL = 2
EXIT_RUNTIME = 3


def csv_header(num_agents: int, num_edges: int) -> list[str]:
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


def _fmt(v: float) -> str:
    return f"{v:.9g}"


def write_csv(path: Path, cfg: ScenarioConfig, log: TrajectoryLog) -> None:
    if cfg.num_axes != 2 or cfg.order != 2:
        raise ScenarioError("CSV schema is defined for planar order-2 scenarios")
    N, m = cfg.topology.num_nodes, cfg.topology.num_edges
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(csv_header(N, m))
        for j in range(log.t.size):
            row = [log.t[j]]
            for i in range(N):
                row += [log.x[j, i, 0, 0], log.x[j, i, 0, 1],
                        log.x[j, i, 1, 0], log.x[j, i, 1, 1]]
            for k in range(m):
                row += [log.e[j, k, 0], log.e[j, k, 1]]
            row += [log.bounds_lo[j, 0], log.bounds_hi[j, 0],
                    log.bounds_lo[j, 1], log.bounds_hi[j, 1]]
            for k in range(m):
                row += [log.s[j, k, 0], log.s[j, k, 1]]
            for i in range(N):
                row += [log.u[j, i, 0], log.u[j, i, 1]]
            for i in range(N):
                if log.theta_hat.shape[2]:
                    row += [log.theta_hat[j, i, 0, 0], log.theta_hat[j, i, 0, 1]]
                else:
                    row += [0.0, 0.0]
            row += [log.V[j], log.c1_dprime[j]]
            w.writerow(_fmt(v) for v in row)


def _run_one(source: str, out_dir: Path, overrides: list[str]) -> int:
    cfg = load_scenario(source, overrides)
    out_dir.mkdir(parents=True, exist_ok=True)
    csv_path = out_dir / f"{cfg.name}.csv"
    metrics_path = out_dir / f"{cfg.name}_metrics.json"
    try:
        log, metrics = run_scenario(cfg)
    except InitialConstraintViolation as exc:
        print(f"{cfg.name}: {exc}", file=sys.stderr)
        metrics_path.write_text(json.dumps(
            {"completed": False, "initial_violations": exc.violations}, indent=2))
        csv_path.write_text(",".join(csv_header(cfg.topology.num_nodes,
                                                cfg.topology.num_edges)) + "\r\n")
        return EXIT_INITIAL
    write_csv(csv_path, cfg, log)
    metrics_path.write_text(json.dumps(metrics.as_dict(), indent=2))
    if not metrics.completed:
        k, a, t = log.violations[0]
        print(f"{cfg.name}: funnel violation on edge {k+1}, axis {a}, t={t:.4g}; "
              f"partial log written", file=sys.stderr)
        return EXIT_RUNTIME
    print(f"{cfg.name}: ok; max final error {metrics.max_final_error:.3e}; "
          f"log -> {csv_path}")
    return EXIT_OK


def cmd_run(args) -> int:
    return _run_one(args.scenario, Path(args.out), args.override)


def cmd_check(args) -> int:
    cfg = load_scenario(args.scenario, args.override)
    violations = check_initial(cfg)
    if not violations:
        print(f"{cfg.name}: all initial relative errors inside the funnel")
        return EXIT_OK
    for k, a, z in violations:
        print(f"{cfg.name}: edge {k+1}, axis {'xy'[a] if a < 2 else a}: "
              f"zeta(0) = {z:.6g} outside band", file=sys.stderr)
    return EXIT_INITIAL


def cmd_lemma1(args) -> int:
    cfg = load_scenario(args.scenario)
    cert = lemma1_certificate(cfg.topology)
    print(f"topology: {cert.topology_class.value}")
    print(f"matrix:   {cert.matrix_name}")
    print(f"lam_min:  {cert.lam_min:.9g}")
    print(f"lam_max:  {cert.lam_max:.9g}")
    print(f"result:   {'pass' if cert.passed else 'FAIL'}")
    return EXIT_OK if cert.passed else EXIT_USAGE


def cmd_sweep(args) -> int:
    out_dir = Path(args.out)
    with ThreadPoolExecutor(max_workers=args.jobs) as pool:
        codes = list(pool.map(lambda s: _run_one(s, out_dir, []), args.scenarios))
    return max(codes) if codes else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="edgeform",
        description="Edge-based adaptive formation control simulator")
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="integrate one scenario and write CSV + metrics")
    run_p.add_argument("scenario", help="scenario file path or bundled name")
    run_p.add_argument("--out", default="out", help="output directory")
    run_p.add_argument("--override", action="append", default=[],
                       metavar="KEY=VALUE", help="override a scenario key, e.g. sim.dt=0.0005")
    run_p.set_defaults(func=cmd_run)

    check_p = sub.add_parser("check", help="initial-constraint check only")
    check_p.add_argument("scenario")
    check_p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    check_p.set_defaults(func=cmd_check)

    lem_p = sub.add_parser("lemma1", help="spectral certificate for a topology")
    lem_p.add_argument("scenario", help="scenario file carrying the topology")
    lem_p.set_defaults(func=cmd_lemma1)

    sweep_p = sub.add_parser("sweep", help="run several scenarios concurrently")
    sweep_p.add_argument("scenarios", nargs="+")
    sweep_p.add_argument("--out", default="out")
    sweep_p.add_argument("--jobs", type=int, default=4)
    sweep_p.set_defaults(func=cmd_sweep)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ScenarioError, GraphError, FileNotFoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
