"""The limit process on the graph: biased diffusion Monte Carlo and a
conservative finite-volume Fokker-Planck solver with Kirchhoff vertex gluing.

On every edge the energy performs dh = dt + sqrt(a(h)) dW with a(h) = 2 S/T.
At the interior vertex the probability flux is apportioned by the gluing
weights beta_i = 2 S_i(h*), the vertex limit of a_i T_i.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import CFLViolation, ConfigError, MassLoss, Unstable
from .levelset import ABOVE, LEFT, RIGHT, EdgeCoefficients, GraphPoint, LevelGraph
from .measures import GraphMeasure, GraphMeasurePath

__all__ = [
    "GraphSdeConfig",
    "GraphEnsemblePath",
    "GraphDensityPath",
    "gluing_weights",
    "simulate_graph_ensemble",
    "solve_graph_fp",
    "density_path_to_csv",
    "graph_ensemble_to_csv",
]

_MASK32 = (1 << 32) - 1


def gluing_weights(coefficients: dict[str, EdgeCoefficients]) -> dict:
    """Vertex gluing weights beta_i = 2 S_i at the saddle-side table edge.

    Returns betas and the normalized re-entry probabilities p_i = beta_i / sum.
    """
    beta = {}
    for eid, tab in coefficients.items():
        h_vertex = tab.h_hi if eid in (LEFT, RIGHT) else tab.h_lo
        beta[eid] = 2.0 * float(tab.S_of(h_vertex))
    tot = sum(beta.values())
    return {"beta": beta, "p": {k: v / tot for k, v in beta.items()}}


@dataclass(frozen=True)
class GraphSdeConfig:
    coefficients: dict
    t_final: float
    start: GraphPoint
    dt_h: float = 2.5e-6
    vertex_shell: float = 0.005
    base_seed: int = 0
    n: int = 1
    h_escape: float = 1e3
    crossing_band: float = 0.0  # >0 enables hysteresis branch-entry counting
    #: extra horizon used to close well episodes still open at t_final
    crossing_resolve_time: float = 4.0
    #: also record direct well-to-well confirmations (non-alternating count)
    count_well_to_well: bool = False

    def validate(self, G: LevelGraph) -> None:
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        if not self.t_final > 0:
            raise ConfigError(f"t_final must be > 0, got {self.t_final}")
        if not self.dt_h > 0:
            raise ConfigError(f"dt_h must be > 0, got {self.dt_h}")
        if G.is_single_well:
            return
        h_star = G.h_star
        delta_sing = h_star - self.coefficients[LEFT].h_hi
        if not self.vertex_shell > delta_sing:
            raise ConfigError(
                f"vertex_shell {self.vertex_shell} must exceed the table "
                f"exclusion band {delta_sing:.3g}"
            )
        # shell resolution: near-shell steps must not jump across the shell
        dv = self.vertex_shell
        a_shell = 0.0
        for eid, tab in self.coefficients.items():
            lo = h_star - 2 * dv if eid in (LEFT, RIGHT) else h_star
            hi = h_star if eid in (LEFT, RIGHT) else h_star + 2 * dv
            hs = np.linspace(max(lo, tab.h_lo), min(hi, tab.h_hi), 64)
            a_shell = max(a_shell, float(np.max(tab.a_of(hs))))
        if math.sqrt(a_shell * self.dt_h) >= dv / 4.0:
            raise ConfigError(
                f"dt_h {self.dt_h} too coarse for vertex_shell {dv}: "
                f"sqrt(a_max*dt_h) = {math.sqrt(a_shell * self.dt_h):.3g} >= shell/4"
            )


@dataclass(frozen=True)
class GraphEnsemblePath:
    """Graph-valued ensemble: atoms (edge index, h) at snapshot times."""

    times: np.ndarray
    edge_idx: np.ndarray  # (n_times, n) int8, indices into edge_order
    h: np.ndarray  # (n_times, n)
    edge_order: tuple[str, ...]
    branch_entries: dict | None = None

    @property
    def n(self) -> int:
        return self.h.shape[1]

    def to_measure_path(self) -> GraphMeasurePath:
        measures = tuple(
            GraphMeasure.from_atoms(self.edge_order, self.edge_idx[k].astype(np.int64), self.h[k])
            for k in range(len(self.times))
        )
        return GraphMeasurePath(times=np.asarray(self.times), measures=measures)


def _edge_code(edge_order: tuple[str, ...], edge_id: str) -> int:
    codes = {LEFT: 0, RIGHT: 1, ABOVE: 2, "single": 2}
    if edge_id not in codes:
        raise ConfigError(f"unknown edge id {edge_id}")
    return codes[edge_id]


def simulate_graph_ensemble(cfg: GraphSdeConfig, G: LevelGraph, snapshot_times,
                            chunk: int = 4096) -> GraphEnsemblePath:
    """Euler-Maruyama atoms on the graph with shell-and-redraw vertex gluing.

    Deterministic for fixed cfg: atoms are split into fixed-size blocks, each
    with its own seeded stream, independent of execution order.
    """
    cfg.validate(G)
    tabs = cfg.coefficients
    steps = int(round(cfg.t_final / cfg.dt_h))
    st = np.asarray(snapshot_times, dtype=float)
    snap_at = np.rint(st / cfg.dt_h).astype(np.int64)
    if np.any(np.abs(st / cfg.dt_h - snap_at) > 1e-6) or np.any(snap_at > steps):
        raise ConfigError("snapshot_times must lie on the dt_h grid")

    single = G.is_single_well
    if single:
        tab = next(iter(tabs.values()))
        fineA = tab.fine_tables()
        fineL = fineR = fineA
        h_star = math.inf
        pL = pR_cum = 0.0
        betas = None
        leafL = leafR = tab.h_lo
    else:
        fineL = tabs[LEFT].fine_tables()
        fineR = tabs[RIGHT].fine_tables()
        fineA = tabs[ABOVE].fine_tables()
        h_star = G.h_star
        gw = gluing_weights(tabs)
        pL = gw["p"][LEFT]
        pR_cum = pL + gw["p"][RIGHT]
        leafL = G.edge(LEFT).h_lo
        leafR = G.edge(RIGHT).h_lo

    def a_table(fine):
        h, S, T = fine
        return float(h[0]), float(h[1] - h[0]), np.ascontiguousarray(np.sqrt(2.0 * S / T))

    loL, stL, aL = a_table(fineL)
    loR, stR, aR = a_table(fineR)
    loA, stA, aA = a_table(fineA)

    start_code = _edge_code(tuple(e.id for e in G.edges), cfg.start.edge) if not single else 2

    n = cfg.n
    nsnap = len(snap_at)
    out_h = np.empty((nsnap, n))
    out_edge = np.empty((nsnap, n), dtype=np.int8)
    counts = np.zeros(3, dtype=np.int64)
    for b, lo_i in enumerate(range(0, n, chunk)):
        hi_i = min(lo_i + chunk, n)
        nb = hi_i - lo_i
        h = np.full(nb, cfg.start.h)
        edge = np.full(nb, start_code, dtype=np.int8)
        conf = edge.copy()
        block_seed = (cfg.base_seed * 1_000_003 + b) & _MASK32
        bh = np.empty((nsnap, nb))
        be = np.empty((nsnap, nb), dtype=np.int8)
        bad = _kernels.gmc_block(
            h, edge, conf, steps, cfg.dt_h, h_star, cfg.vertex_shell, pL, pR_cum,
            loL, stL, aL, loR, stR, aR, loA, stA, aA,
            leafL, leafR, cfg.h_escape, block_seed, cfg.crossing_band, counts,
            not single, snap_at, bh, be,
            int(round(cfg.crossing_resolve_time / cfg.dt_h)) if cfg.crossing_band > 0 else 0,
            cfg.count_well_to_well)
        if bad >= 0:
            raise Unstable(f"graph atom {lo_i + bad} exceeded h_escape={cfg.h_escape}")
        out_h[:, lo_i:hi_i] = bh
        out_edge[:, lo_i:hi_i] = be
    entries = None
    if cfg.crossing_band > 0:
        total = int(counts.sum())
        entries = {
            "counts": {LEFT: int(counts[0]), RIGHT: int(counts[1]), ABOVE: int(counts[2])},
            "total": total,
            "fractions": {LEFT: counts[0] / total, RIGHT: counts[1] / total,
                          ABOVE: counts[2] / total} if total else {},
        }
    edge_order = tuple(e.id for e in G.edges)
    return GraphEnsemblePath(times=st, edge_idx=out_edge, h=out_h,
                             edge_order=edge_order, branch_entries=entries)


@dataclass(frozen=True)
class GraphDensityPath:
    """Finite-volume solution: per-edge cell masses at snapshot times."""

    times: np.ndarray
    grids: dict  # edge id -> bin edges
    masses: dict  # edge id -> (n_times, n_cells) cell masses
    beta: dict | None
    edge_order: tuple[str, ...]

    def slice_measure(self, k: int) -> GraphMeasure:
        bins = {eid: (self.grids[eid], self.masses[eid][k]) for eid in self.edge_order}
        return GraphMeasure(self.edge_order, bins=bins)

    def to_measure_path(self) -> GraphMeasurePath:
        return GraphMeasurePath(
            times=np.asarray(self.times),
            measures=tuple(self.slice_measure(k) for k in range(len(self.times))),
        )

    def total_mass(self, k: int) -> float:
        return sum(float(self.masses[eid][k].sum()) for eid in self.edge_order)


def _initial_cell_masses(initial: GraphMeasure, grid: np.ndarray, edge_id: str) -> np.ndarray:
    pos, w = initial.edge_atoms(edge_id)
    if len(pos) == 0:
        return np.zeros(len(grid) - 1)
    idx = np.clip(np.searchsorted(grid, pos, side="left") - 1, 0, len(grid) - 2)
    return np.bincount(idx, weights=w, minlength=len(grid) - 1)


def solve_graph_fp(coefficients: dict, G: LevelGraph, initial: GraphMeasure,
                   t_final: float, snapshot_times, cells_per_edge: int = 512,
                   h_max: float = 8.0, dt: float | None = None, cfl: float = 0.4,
                   mass_tol: float = 1e-6, cells_above: int | None = None) -> GraphDensityPath:
    """Explicit conservative solve of d_t mu = -d_h(mu) + d_hh(a mu / 2) on the graph.

    Upwind advection, centered diffusion, CFL-limited step. The vertex couples
    the three edges through a shared state with fluxes apportioned by the
    gluing weights; leaves and the far boundary are zero-flux.
    """
    single = G.is_single_well
    edge_order = tuple(e.id for e in G.edges)
    if cells_above is None:
        cells_above = cells_per_edge
    grids = {}
    acc = {}
    for e in G.edges:
        if single or e.side == ABOVE:
            grids[e.id] = np.linspace(e.h_lo if single else G.h_star, h_max, cells_above + 1)
        else:
            grids[e.id] = np.linspace(e.h_lo, G.h_star, cells_per_edge + 1)
        centers = 0.5 * (grids[e.id][:-1] + grids[e.id][1:])
        acc[e.id] = np.asarray(coefficients[e.id].a_of(centers), dtype=float)

    # stability bound over all edges
    dt_stab = math.inf
    for eid in edge_order:
        d = grids[eid][1] - grids[eid][0]
        amax = float(np.max(acc[eid]))
        dt_stab = min(dt_stab, d / 1.0, d * d / max(amax, 1e-300))
    dt_stab *= cfl
    if dt is None:
        dt = dt_stab
    elif dt > dt_stab:
        raise CFLViolation(f"dt={dt} exceeds the stability bound {dt_stab:.3e}")
    nsteps = int(math.ceil(t_final / dt))
    dt = t_final / nsteps

    st = np.asarray(snapshot_times, dtype=float)
    snap_at = np.rint(st / dt).astype(np.int64)
    snap_at = np.clip(snap_at, 0, nsteps)

    if single:
        eid = edge_order[0]
        d = grids[eid][1] - grids[eid][0]
        muA = _initial_cell_masses(initial, grids[eid], eid) / d
        muL = np.zeros(1)
        muR = np.zeros(1)
        aL = np.zeros(1)
        aR = np.zeros(1)
        outL = np.empty((len(snap_at), 1))
        outR = np.empty((len(snap_at), 1))
        outA = np.empty((len(snap_at), len(muA)))
        _kernels.fp_run(muL, muR, muA, aL, aR, acc[eid], 1.0, 1.0, d,
                        0.0, 0.0, 0.0, 1.0, False, dt, nsteps, snap_at,
                        outL, outR, outA)
        masses = {eid: outA * d}
        beta = None
    else:
        gw = gluing_weights(coefficients)
        beta = gw["beta"]
        dL = grids[LEFT][1] - grids[LEFT][0]
        dR = grids[RIGHT][1] - grids[RIGHT][0]
        dA = grids[ABOVE][1] - grids[ABOVE][0]
        muL = _initial_cell_masses(initial, grids[LEFT], LEFT) / dL
        muR = _initial_cell_masses(initial, grids[RIGHT], RIGHT) / dR
        muA = _initial_cell_masses(initial, grids[ABOVE], ABOVE) / dA
        a_vertexA = float(coefficients[ABOVE].a_of(G.h_star))
        outL = np.empty((len(snap_at), len(muL)))
        outR = np.empty((len(snap_at), len(muR)))
        outA = np.empty((len(snap_at), len(muA)))
        _kernels.fp_run(muL, muR, muA, acc[LEFT], acc[RIGHT], acc[ABOVE],
                        dL, dR, dA, beta[LEFT], beta[RIGHT], beta[ABOVE],
                        a_vertexA, True, dt, nsteps, snap_at, outL, outR, outA)
        masses = {LEFT: outL * dL, RIGHT: outR * dR, ABOVE: outA * dA}

    path = GraphDensityPath(times=st, grids=grids, masses=masses,
                            beta=beta, edge_order=edge_order)
    for k in range(len(snap_at)):
        tot = path.total_mass(k)
        if abs(tot - 1.0) > mass_tol:
            raise MassLoss(f"total mass {tot} at t={path.times[k]:.6g} drifted beyond {mass_tol}")
    return path


def density_path_to_csv(path: GraphDensityPath) -> str:
    """CSV rows (t, edge_id, h_cell_center, mass)."""
    buf = io.StringIO()
    buf.write("t,edge_id,h_cell_center,mass\n")
    for k, t in enumerate(path.times):
        for eid in path.edge_order:
            centers = 0.5 * (path.grids[eid][:-1] + path.grids[eid][1:])
            for c, m in zip(centers, path.masses[eid][k]):
                buf.write(f"{t:.17g},{eid},{c:.17g},{m:.17g}\n")
    return buf.getvalue()


def graph_ensemble_to_csv(path: GraphEnsemblePath) -> str:
    """CSV rows (t, trajectory_index, edge_id, h)."""
    buf = io.StringIO()
    buf.write("t,trajectory_index,edge_id,h\n")
    for k, t in enumerate(path.times):
        for i in range(path.n):
            eid = path.edge_order[min(path.edge_idx[k, i], len(path.edge_order) - 1)]
            buf.write(f"{t:.17g},{i},{eid},{path.h[k, i]:.17g}\n")
    return buf.getvalue()
