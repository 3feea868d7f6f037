import math

import numpy as np
import pytest

from levelcg.errors import CFLViolation, ConfigError
from levelcg.levelset import (ABOVE, LEFT, RIGHT, EdgeCoefficients, GraphPoint)
from levelcg.graphdyn import (GraphSdeConfig, gluing_weights,
                              simulate_graph_ensemble, solve_graph_fp,
                              density_path_to_csv, graph_ensemble_to_csv)
from levelcg.measures import GraphMeasure


def _dirac(G, edge, h):
    return GraphMeasure.dirac(tuple(e.id for e in G.edges), edge, h)


def test_gluing_weights_quartic(tables):
    # beta_i = 2 S_i(h*): the separatrix actions are (4/3, 4/3, 8/3),
    # so beta = (8/3, 8/3, 16/3) and p = (1/4, 1/4, 1/2)
    gw = gluing_weights(tables)
    assert abs(gw["beta"][LEFT] - 8.0 / 3.0) < 2e-3
    assert abs(gw["beta"][RIGHT] - 8.0 / 3.0) < 2e-3
    assert abs(gw["beta"][ABOVE] - 16.0 / 3.0) < 4e-3
    assert abs(gw["p"][LEFT] - 0.25) < 1e-3
    assert abs(gw["p"][RIGHT] - 0.25) < 1e-3
    assert abs(gw["p"][ABOVE] - 0.5) < 1e-3
    assert abs(sum(gw["p"].values()) - 1.0) < 1e-14


def test_config_validation(tables, G):
    with pytest.raises(ConfigError):
        GraphSdeConfig(tables, t_final=1.0, start=GraphPoint(ABOVE, 1.0),
                       n=0).validate(G)
    with pytest.raises(ConfigError):
        # shell smaller than the table exclusion band
        GraphSdeConfig(tables, t_final=1.0, start=GraphPoint(ABOVE, 1.0),
                       vertex_shell=1e-6).validate(G)
    with pytest.raises(ConfigError):
        # step too coarse for the shell
        GraphSdeConfig(tables, t_final=1.0, start=GraphPoint(ABOVE, 1.0),
                       dt_h=1e-3, vertex_shell=0.005).validate(G)


def _advection_tables(edge_id="single"):
    # S tiny, T = 1: a = 2 S/T ~ 0, pure unit-speed advection
    grid = np.linspace(0.0, 12.0, 64)
    S = np.full(64, 1e-200)
    T = np.ones(64)
    return {edge_id: EdgeCoefficients.from_tables(edge_id, grid, S, T)}


def test_fp_pure_advection_mean(harmonic_graph):
    # with a = 0 the solver is upwind advection at unit speed; the mean
    # advances exactly by t and mass is conserved
    tabs = _advection_tables()
    init = GraphMeasure.dirac(("single",), "single", 2.0)
    path = solve_graph_fp(tabs, harmonic_graph, init, 1.0, [0.0, 0.5, 1.0],
                          cells_per_edge=256, h_max=12.0)
    for k, t in enumerate(path.times):
        m = path.slice_measure(k)
        assert abs(path.total_mass(k) - 1.0) < 1e-12
        assert abs(m.mean_h() - (2.0 + t)) < 0.05  # within one cell + placement


def test_fp_single_well_energy_drift(harmonic_graph, harmonic_tables):
    # harmonic well: E[h_t] = h_0 + t for the limit diffusion
    init = GraphMeasure.dirac(("single",), "single", 2.0)
    path = solve_graph_fp(harmonic_tables, harmonic_graph, init, 1.0,
                          [0.0, 1.0], cells_per_edge=512, h_max=12.0)
    assert abs(path.slice_measure(1).mean_h() - 3.0) < 0.02


def test_fp_mass_conservation_double_well(tables, G):
    init = _dirac(G, ABOVE, 0.5)
    path = solve_graph_fp(tables, G, init, 0.2, [0.0, 0.2],
                          cells_per_edge=128, h_max=8.0)
    for k in range(2):
        assert abs(path.total_mass(k) - 1.0) < 1e-12


def test_fp_cfl_guard(tables, G):
    with pytest.raises(CFLViolation):
        solve_graph_fp(tables, G, _dirac(G, ABOVE, 0.5), 0.1, [0.0, 0.1],
                       cells_per_edge=128, dt=0.1)


def test_graph_mc_single_well_energy_drift(harmonic_graph, harmonic_tables):
    cfg = GraphSdeConfig(harmonic_tables, t_final=1.0,
                         start=GraphPoint("single", 1.0), n=4000,
                         dt_h=1e-4, base_seed=11)
    out = simulate_graph_ensemble(cfg, harmonic_graph, [0.0, 1.0])
    mean = float(np.mean(out.h[-1]))
    se = float(np.std(out.h[-1], ddof=1) / math.sqrt(out.n))
    assert abs(mean - 2.0) < 3 * se + 1e-3


def test_graph_mc_deterministic_and_chunk_invariant(tables, G):
    cfg = GraphSdeConfig(tables, t_final=0.02, start=GraphPoint(ABOVE, 1.0),
                         n=300, dt_h=1e-5, vertex_shell=0.01, base_seed=3)
    a = simulate_graph_ensemble(cfg, G, [0.0, 0.02])
    b = simulate_graph_ensemble(cfg, G, [0.0, 0.02])
    assert np.array_equal(a.h, b.h) and np.array_equal(a.edge_idx, b.edge_idx)


def test_graph_mc_left_right_symmetry(tables, G):
    # starting above the saddle, the two wells receive equal mass on average
    cfg = GraphSdeConfig(tables, t_final=0.5, start=GraphPoint(ABOVE, 0.5),
                         n=2000, dt_h=1e-5, vertex_shell=0.01, base_seed=17)
    out = simulate_graph_ensemble(cfg, G, [0.0, 0.5])
    nL = int(np.sum(out.edge_idx[-1] == 0))
    nR = int(np.sum(out.edge_idx[-1] == 1))
    tot = nL + nR
    assert tot > 100
    assert abs(nL - nR) < 4 * math.sqrt(tot)


def test_graph_mc_inclusive_crossing_fractions(tables, G):
    # independent check of the gluing probabilities: with well-to-well
    # confirmations included, the embedded entry chain has transition
    # probabilities above->well 1/2 each, well->above 2/3, well->other 1/3,
    # whose stationary law over recorded entries is (0.3, 0.3, 0.4)
    cfg = GraphSdeConfig(tables, t_final=1.0, start=GraphPoint(ABOVE, 2.0),
                         n=4000, dt_h=1e-5, vertex_shell=0.01, base_seed=21,
                         crossing_band=0.05, count_well_to_well=True)
    out = simulate_graph_ensemble(cfg, G, [0.0, 1.0])
    be = out.branch_entries
    n = be["total"]
    assert n > 3000
    for eid, target in ((LEFT, 0.3), (RIGHT, 0.3), (ABOVE, 0.4)):
        sigma = math.sqrt(target * (1 - target) / n)
        assert abs(be["fractions"][eid] - target) < 3.5 * sigma


def test_csv_emitters(tables, G, harmonic_graph, harmonic_tables):
    init = GraphMeasure.dirac(("single",), "single", 1.0)
    path = solve_graph_fp(harmonic_tables, harmonic_graph, init, 0.05,
                          [0.0, 0.05], cells_per_edge=32, h_max=12.0)
    lines = density_path_to_csv(path).strip().split("\n")
    assert lines[0] == "t,edge_id,h_cell_center,mass"
    assert len(lines) == 1 + 2 * 32
    cfg = GraphSdeConfig(tables, t_final=0.01, start=GraphPoint(ABOVE, 1.0),
                         n=5, dt_h=1e-5, vertex_shell=0.01, base_seed=1)
    out = simulate_graph_ensemble(cfg, G, [0.0, 0.01])
    lines = graph_ensemble_to_csv(out).strip().split("\n")
    assert lines[0] == "t,trajectory_index,edge_id,h"
    assert len(lines) == 1 + 2 * 5
