import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levelcg.errors import TimeGridMismatch, UnboundedSupport
from levelcg.hamiltonian import Potential
from levelcg.levelset import ABOVE, LEFT, RIGHT, build_graph
from levelcg.measures import (BinSpec, GraphMeasure, GraphMeasurePath,
                              conditional_p2, histogram, measure_to_csv,
                              pushforward, sup_w1_over_time, w1_tree)
from levelcg.sde import SdeConfig, simulate_ensemble


def _dirac(G, edge, h):
    return GraphMeasure.dirac(tuple(e.id for e in G.edges), edge, h)


def test_w1_dirac_same_edge(G):
    assert abs(w1_tree(_dirac(G, RIGHT, 0.05), _dirac(G, RIGHT, 0.2), G) - 0.15) < 1e-14


def test_w1_dirac_across_wells(G):
    # path runs through the vertex at h* = 0.25: (0.25-0.1) + (0.25-0.1)
    assert abs(w1_tree(_dirac(G, LEFT, 0.1), _dirac(G, RIGHT, 0.1), G) - 0.3) < 1e-14


def test_w1_dirac_well_to_above(G):
    assert abs(w1_tree(_dirac(G, LEFT, 0.1), _dirac(G, ABOVE, 0.5), G) - 0.4) < 1e-14


def test_w1_identity_and_symmetry(G):
    order = tuple(e.id for e in G.edges)
    mu = GraphMeasure.from_atoms(order, np.array([0, 2, 2]),
                                 np.array([0.1, 0.3, 1.0]),
                                 np.array([0.5, 0.25, 0.25]))
    nu = _dirac(G, RIGHT, 0.2)
    assert w1_tree(mu, mu, G) < 1e-15
    assert abs(w1_tree(mu, nu, G) - w1_tree(nu, mu, G)) < 1e-14


@settings(max_examples=20, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_w1_matches_lp_transport(seed):
    # independent oracle: brute-force LP on the tree path metric
    from levelcg.acceptance import _lp_w1, random_measure_pair
    V = Potential((0.25, 0.0, -0.5, 0.0, 0.25))
    G = build_graph(V)
    rng = np.random.default_rng(seed)
    mu, nu = random_measure_pair(rng, G)
    assert abs(w1_tree(mu, nu, G) - _lp_w1(mu, nu, G)) < 1e-10


@settings(max_examples=15, deadline=None)
@given(seed=st.integers(0, 10_000))
def test_w1_triangle_inequality(seed):
    from levelcg.acceptance import random_measure_pair
    V = Potential((0.25, 0.0, -0.5, 0.0, 0.25))
    G = build_graph(V)
    rng = np.random.default_rng(seed)
    mu, nu = random_measure_pair(rng, G)
    rho, _ = random_measure_pair(rng, G)
    assert w1_tree(mu, nu, G) <= w1_tree(mu, rho, G) + w1_tree(rho, nu, G) + 1e-12


def test_pushforward_is_probability(V, G):
    cfg = SdeConfig(epsilon=0.5, dt=1e-3, t_final=0.05, base_seed=2, n=50)
    ens = simulate_ensemble(V, cfg, [0.0, 0.05])
    path = pushforward(ens, G, V)
    for m in path.measures:
        assert abs(sum(m.edge_mass(e) for e in m.edge_order) - 1.0) < 1e-12
        assert len(m.atom_h) == 50


def test_histogram_preserves_mass_and_mean(G):
    order = tuple(e.id for e in G.edges)
    rng = np.random.default_rng(0)
    h = rng.uniform(0.3, 5.0, size=500)
    mu = GraphMeasure.from_atoms(order, np.full(500, 2), h)
    hist = histogram(mu, G, BinSpec(bins_well=32, bins_above=512))
    assert abs(sum(hist.bins[e][1].sum() for e in order) - 1.0) < 1e-12
    assert abs(hist.mean_h() - mu.mean_h()) < 0.02


def test_w1_unbounded_support_guard(G):
    mu = _dirac(G, ABOVE, 9.5)
    with pytest.raises(UnboundedSupport):
        w1_tree(mu, _dirac(G, ABOVE, 0.5), G, h_max=8.0)


def test_sup_w1_requires_common_grid(G):
    mu = _dirac(G, ABOVE, 0.5)
    a = GraphMeasurePath(times=np.array([0.0, 1.0]), measures=(mu, mu))
    b = GraphMeasurePath(times=np.array([0.0, 0.5]), measures=(mu, mu))
    with pytest.raises(TimeGridMismatch):
        sup_w1_over_time(a, b, G)


def test_conditional_p2_on_synthetic_atoms(G, V):
    # place atoms on the upper edge with known momenta: h = p^2/2 + V(q)
    rng = np.random.default_rng(1)
    q = rng.uniform(-0.2, 0.2, size=2000)
    p = rng.choice([-1.5, 1.5], size=2000)
    out = conditional_p2(q, p, G, V, BinSpec(bins_well=8, bins_above=16))
    d = out[ABOVE]
    sel = d["count"] > 0
    assert np.allclose(d["mean_p2"][sel], 2.25)
    assert d["count"].sum() == 2000
    assert out[LEFT]["count"].sum() == 0


def test_measure_to_csv_shape(G):
    mu = _dirac(G, RIGHT, 0.1)
    spec = BinSpec(bins_well=8, bins_above=16)
    lines = measure_to_csv(mu, G, spec).strip().split("\n")
    assert lines[0] == "edge_id,h_bin_center,mass"
    assert len(lines) == 1 + 8 + 8 + 16
