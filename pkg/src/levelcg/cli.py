"""Batch command-line front-end: simulate, converge, duality, coefficients, acceptance.

Every output file embeds the schema version and the full configuration in its
header, so a result is reproducible from the file alone. Commands are
deterministic for a fixed config, independent of --threads.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import replace

import numpy as np

from .config import SCHEMA_VERSION, RunConfig, load_config
from .errors import LevelcgError
from .graphdyn import GraphSdeConfig, gluing_weights, simulate_graph_ensemble, solve_graph_fp
from .duality import FamilySpec, inequality_chain_report, make_test_family
from .hamiltonian import PhasePoint, Potential
from .levelset import (GridSpec, build_coefficients, build_graph,
                       coefficients_to_csv, graph_to_json)
from .measures import GraphMeasure, histogram, pushforward, sup_w1_over_time, w1_tree
from .sde import SdeConfig, emit_figure_data, integrate_path, simulate_ensemble

__all__ = ["main"]


def _threads(args) -> int:
    if args.threads is not None:
        return args.threads
    env = os.environ.get("LEVELCG_THREADS")
    return int(env) if env else 1


def _csv_header(name: str, cfg: RunConfig) -> str:
    return f"# schema: {SCHEMA_VERSION}/{name}\n# config: {cfg.to_json()}\n"


def _write_csv(out_dir: str, name: str, body: str, cfg: RunConfig) -> str:
    path = os.path.join(out_dir, name)
    with open(path, "w") as fh:
        fh.write(_csv_header(name, cfg))
        fh.write(body)
    return path


def _write_json(out_dir: str, name: str, doc: dict, cfg: RunConfig) -> str:
    path = os.path.join(out_dir, name)
    payload = {"schema": f"{SCHEMA_VERSION}/{name}", "config": json.loads(cfg.to_json())}
    payload.update(doc)
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, allow_nan=True)
        fh.write("\n")
    return path


def _setup(cfg: RunConfig):
    V = Potential(cfg.potential.coefficients)
    G = build_graph(V)
    tables = build_coefficients(V, G, GridSpec(
        points_per_edge=cfg.tables.points_per_edge,
        delta_sing=cfg.tables.delta_sing,
        h_table_max=cfg.tables.h_table_max))
    return V, G, tables


def _snapshots(cfg: RunConfig) -> np.ndarray:
    k = int(round(cfg.sde.t_final / cfg.sde.snapshot_dt))
    return np.arange(k + 1) * cfg.sde.snapshot_dt


def cmd_simulate(cfg: RunConfig, out_dir: str, threads: int) -> list:
    """Single trajectory at the smallest epsilon plus its graph projection."""
    V = Potential(cfg.potential.coefficients)
    G = build_graph(V)
    eps = min(cfg.sde.epsilons)
    sde_cfg = SdeConfig(epsilon=eps, dt=cfg.sde.dt, t_final=cfg.sde.t_final,
                        x0=PhasePoint(*cfg.sde.x0), base_seed=cfg.sde.seed)
    times, states = integrate_path(V, sde_cfg)
    rows = ["t,q,p\n"]
    rows += [f"{t:.17g},{s[0]:.17g},{s[1]:.17g}\n" for t, s in zip(times, states)]
    paths = [_write_csv(out_dir, "trajectory.csv", "".join(rows), cfg)]
    paths.append(_write_csv(out_dir, "projection.csv",
                            emit_figure_data((times, states), G, V), cfg))
    return paths


def cmd_coefficients(cfg: RunConfig, out_dir: str, threads: int) -> list:
    """Graph topology, action/period tables, and the vertex gluing weights."""
    V, G, tables = _setup(cfg)
    paths = [_write_csv(out_dir, "coefficients.csv", coefficients_to_csv(tables), cfg)]
    path = os.path.join(out_dir, "graph.json")
    with open(path, "w") as fh:
        fh.write(graph_to_json(G))
    paths.append(path)
    paths.append(_write_json(out_dir, "gluing.json", gluing_weights(tables), cfg))
    return paths


def _limit_path(cfg: RunConfig, V, G, tables, snapshots, initial=None):
    if initial is None:
        q0, p0 = cfg.sde.x0
        from .levelset import project
        gp = project(G, V, PhasePoint(q0, p0))
        initial = GraphMeasure.dirac(tuple(e.id for e in G.edges), gp.edge, gp.h)
    return solve_graph_fp(tables, G, initial, cfg.sde.t_final, snapshots,
                          cells_per_edge=cfg.fp.cells_per_edge, h_max=cfg.fp.h_max)


def cmd_converge(cfg: RunConfig, out_dir: str, threads: int) -> list:
    """Per-epsilon W1 distance between the projected ensemble and the limit law."""
    V, G, tables = _setup(cfg)
    snapshots = _snapshots(cfg)
    fp = _limit_path(cfg, V, G, tables, snapshots)
    fp_path = fp.to_measure_path()
    rows = []
    for eps in cfg.sde.epsilons:
        sde_cfg = SdeConfig(epsilon=eps, dt=cfg.sde.dt, t_final=cfg.sde.t_final,
                            x0=PhasePoint(*cfg.sde.x0), base_seed=cfg.sde.seed,
                            n=cfg.sde.n)
        ens = simulate_ensemble(V, sde_cfg, snapshots, threads=threads)
        pushed = pushforward(ens, G, V)
        terminal = w1_tree(pushed.measures[-1], fp_path.measures[-1], G)
        rows.append({
            "epsilon": eps,
            "sup_w1": sup_w1_over_time(pushed, fp_path, G),
            "terminal_w1": terminal,
            "left_mass": pushed.measures[-1].edge_mass("left_well"),
            "right_mass": pushed.measures[-1].edge_mass("right_well"),
        })
    return [_write_json(out_dir, "converge.json", {"rows": rows}, cfg)]


def cmd_duality(cfg: RunConfig, out_dir: str, threads: int) -> list:
    """Family suprema of the dual functionals over the epsilon sweep."""
    V, G, tables = _setup(cfg)
    snapshots = _snapshots(cfg)
    family = make_test_family(G, FamilySpec(size=cfg.duality.family_size,
                                            h_max=cfg.binning.h_max))
    ensembles = {}
    for eps in cfg.sde.epsilons:
        sde_cfg = SdeConfig(epsilon=eps, dt=cfg.sde.dt, t_final=cfg.sde.t_final,
                            x0=PhasePoint(*cfg.sde.x0), base_seed=cfg.sde.seed,
                            n=cfg.duality.n)
        ensembles[eps] = simulate_ensemble(V, sde_cfg, snapshots, threads=threads)
    limit = _limit_path(cfg, V, G, tables, snapshots)
    report = inequality_chain_report(ensembles, limit, tables, family,
                                     cfg.sde.epsilons, V, G)
    return [_write_json(out_dir, "duality.json", json.loads(report.to_json()), cfg)]


def cmd_acceptance(cfg: RunConfig, out_dir: str, threads: int) -> list:
    """Run the full acceptance suite and write a per-criterion report."""
    from . import acceptance
    reports = acceptance.run_all(threads=threads)
    for rep in reports:
        print(acceptance.format_line(rep))
    paths = [_write_json(out_dir, "acceptance.json", {"criteria": reports}, cfg)]
    if not all(r["passed"] for r in reports):
        raise SystemExit(1)
    return paths


_COMMANDS = {
    "simulate": cmd_simulate,
    "converge": cmd_converge,
    "duality": cmd_duality,
    "coefficients": cmd_coefficients,
    "acceptance": cmd_acceptance,
}


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="levelcg",
        description="Level-set coarse-graining of the noisy double-well "
                    "Hamiltonian system: simulation, limit dynamics, duality checks.")
    parser.add_argument("command", choices=sorted(_COMMANDS))
    parser.add_argument("--config", default=None, help="TOML configuration file")
    parser.add_argument("--out", default=".", help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="override sde.seed")
    parser.add_argument("--threads", type=int, default=None,
                        help="worker threads (default: LEVELCG_THREADS or 1); "
                             "does not change results")
    args = parser.parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(cfg, sde=replace(cfg.sde, seed=args.seed))
        os.makedirs(args.out, exist_ok=True)
        written = _COMMANDS[args.command](cfg, args.out, _threads(args))
        for p in written:
            print(p)
    except LevelcgError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
