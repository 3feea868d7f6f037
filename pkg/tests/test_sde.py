import math

import numpy as np
import pytest

from levelcg.errors import ConfigError, Unstable
from levelcg.hamiltonian import PhasePoint
from levelcg.sde import (SdeConfig, count_branch_entries, emit_figure_data,
                         ensemble_to_csv, integrate_path, simulate_ensemble)


def _energy(V, states):
    return 0.5 * states[:, 1] ** 2 + V.value(states[:, 0])


def test_noise_off_conserves_energy(V):
    # with the noise switched off the splitting is a pure symplectic
    # integrator of H at speed 1/eps; energy drift must stay below 1e-6
    for eps in (0.5, 0.05):
        cfg = SdeConfig(epsilon=eps, dt=1e-3, t_final=1.0, x0=PhasePoint(1.2, 0.3))
        _, states = integrate_path(V, cfg, noise_on=False)
        h = _energy(V, states)
        assert np.max(np.abs(h - h[0])) < 1e-6


def test_energy_drift_is_unit_rate(V):
    # E[H_t] = H_0 + t exactly; z-test on a fixed-seed ensemble
    cfg = SdeConfig(epsilon=0.5, dt=1e-3, t_final=0.5, x0=PhasePoint(1.2, 0.0),
                    base_seed=42, n=400)
    ens = simulate_ensemble(V, cfg, [0.0, 0.25, 0.5])
    h0 = 0.5 * 0.0 + float(V.value(1.2))
    for k, t in enumerate(ens.times):
        if t == 0.0:
            continue
        q, p = ens.slice(k)
        d = 0.5 * p * p + V.value(q) - h0 - t
        z = abs(np.mean(d)) / (np.std(d, ddof=1) / math.sqrt(len(d)))
        assert z < 4.0


def test_threads_and_chunking_do_not_change_results(V):
    cfg = SdeConfig(epsilon=0.2, dt=1e-3, t_final=0.1, base_seed=9, n=300)
    snaps = [0.0, 0.05, 0.1]
    ref = simulate_ensemble(V, cfg, snaps, threads=1, chunk=1024)
    for threads, chunk in ((3, 64), (1, 17), (2, 300)):
        out = simulate_ensemble(V, cfg, snaps, threads=threads, chunk=chunk)
        assert np.array_equal(ref.states, out.states)


def test_single_path_matches_ensemble_member(V):
    cfg = SdeConfig(epsilon=0.2, dt=1e-3, t_final=0.1, base_seed=5, n=3)
    times, states = integrate_path(V, cfg, trajectory_index=1)
    ens = simulate_ensemble(V, cfg, [0.0, 0.1])
    assert np.array_equal(states[-1], ens.states[-1, 1])


def test_snapshot_grid_validation(V):
    cfg = SdeConfig(epsilon=0.5, dt=1e-3, t_final=0.1)
    with pytest.raises(ConfigError):
        simulate_ensemble(V, cfg, [0.0, 0.0505])
    with pytest.raises(ConfigError):
        simulate_ensemble(V, cfg, [0.0, 0.2])  # beyond t_final


def test_config_validation():
    with pytest.raises(ConfigError):
        SdeConfig(epsilon=-0.1)
    with pytest.raises(ConfigError):
        SdeConfig(epsilon=0.5, dt=1.0, inner_substeps=1)  # stability bound
    with pytest.raises(ConfigError):
        SdeConfig(epsilon=0.5, n=0)


def test_escape_raises(V):
    cfg = SdeConfig(epsilon=0.1, dt=1e-3, t_final=1.0, x0=PhasePoint(1.2, 2.0),
                    escape_bound=1.5)
    with pytest.raises(Unstable):
        integrate_path(V, cfg)


def test_branch_entry_counter_rejects_well_start(V, G):
    cfg = SdeConfig(epsilon=0.2, dt=1e-3, t_final=0.1, x0=PhasePoint(1.0, 0.1))
    with pytest.raises(ConfigError):
        count_branch_entries(V, cfg, G)


def test_csv_emitters(V, G):
    cfg = SdeConfig(epsilon=0.5, dt=1e-3, t_final=0.01, base_seed=1, n=4)
    times, states = integrate_path(V, cfg)
    fig = emit_figure_data((times, states), G, V)
    lines = fig.strip().split("\n")
    assert lines[0] == "t,q,p,h,edge"
    assert len(lines) == 1 + len(times)
    ens = simulate_ensemble(V, cfg, [0.0, 0.01])
    csv = ensemble_to_csv(ens)
    lines = csv.strip().split("\n")
    assert lines[0] == "t,trajectory_index,q,p"
    assert len(lines) == 1 + 2 * 4
