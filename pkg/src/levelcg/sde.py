"""Fast-slow SDE simulation: dQ = P/eps dt, dP = -V'(Q)/eps dt + sqrt(2) dW.

The integrator is a Strang splitting: half-step Gaussian kick on p, an inner
symplectic leapfrog of the Hamiltonian flow at speed 1/eps, and a second
half-step kick. Ensembles are i.i.d. with one reproducible RNG stream per
trajectory, so results are independent of chunking and thread count.
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, replace
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .errors import ConfigError, Unstable
from .hamiltonian import PhasePoint, Potential
from .levelset import ABOVE, LEFT, RIGHT, LevelGraph, project_arrays

__all__ = [
    "SdeConfig",
    "EnsemblePath",
    "integrate_path",
    "simulate_ensemble",
    "emit_figure_data",
    "ensemble_to_csv",
    "count_branch_entries",
]

_MASK64 = (1 << 64) - 1

#: inner leapfrog sub-step, measured in units of the fast time t/eps
_INNER_TAU_MAX = 1.0 / 1024.0


@dataclass(frozen=True)
class SdeConfig:
    epsilon: float
    dt: float = 1e-3
    t_final: float = 1.0
    x0: PhasePoint = PhasePoint(1.2, 0.0)
    base_seed: int = 0
    n: int = 1
    inner_substeps: int | None = None  # None: chosen from the sub-step bound
    escape_bound: float = 1e3

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ConfigError(f"epsilon must be > 0, got {self.epsilon}")
        if not self.dt > 0:
            raise ConfigError(f"dt must be > 0, got {self.dt}")
        if not self.t_final > 0:
            raise ConfigError(f"t_final must be > 0, got {self.t_final}")
        if self.n < 1:
            raise ConfigError(f"n must be >= 1, got {self.n}")
        m = self.substeps
        if m < 1:
            raise ConfigError(f"inner_substeps must be >= 1, got {m}")
        # hard stability: inner leapfrog step must stay well below the fast period
        if self.dt / (self.epsilon * m) > 0.125:
            raise ConfigError(
                "dt/(epsilon*inner_substeps) exceeds the 1/8 stability bound; "
                "decrease dt or increase inner_substeps"
            )

    @property
    def substeps(self) -> int:
        if self.inner_substeps is not None:
            return self.inner_substeps
        return max(1, math.ceil(self.dt / (self.epsilon * _INNER_TAU_MAX)))

    @property
    def n_steps(self) -> int:
        return int(round(self.t_final / self.dt))


@dataclass(frozen=True)
class EnsemblePath:
    """Empirical-measure curve: atoms of 1/n sum delta_{X_t^i} at snapshot times."""

    times: np.ndarray  # (n_times,)
    states: np.ndarray  # (n_times, n, 2) with columns (q, p)
    provenance: SdeConfig

    @property
    def n(self) -> int:
        return self.states.shape[1]

    def slice(self, k: int):
        return self.states[k, :, 0], self.states[k, :, 1]


def _trajectory_rng(base_seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([base_seed & _MASK64, index & _MASK64]))


def _integrate_block(V: Potential, cfg: SdeConfig, indices, snapshot_steps,
                     noise_on: bool = True, step_hook=None):
    """Advance a block of trajectories; returns states at the snapshot steps.

    ``step_hook(k, q, p)`` is called after every outer step with the live
    arrays (read-only use). Raising from the hook aborts the block.
    """
    steps = cfg.n_steps
    m = cfg.substeps
    tau = cfg.dt / (cfg.epsilon * m)
    half = 0.5 * tau
    sd = math.sqrt(cfg.dt)
    nb = len(indices)
    der = np.polynomial.polynomial.polyder(V.coefficients)

    q = np.full(nb, cfg.x0.q, dtype=float)
    p = np.full(nb, cfg.x0.p, dtype=float)
    if noise_on:
        noise = np.empty((nb, steps, 2))
        for j, idx in enumerate(indices):
            noise[j] = _trajectory_rng(cfg.base_seed, int(idx)).standard_normal((steps, 2))
    snapset = {int(s): i for i, s in enumerate(snapshot_steps)}
    out = np.empty((len(snapshot_steps), nb, 2))
    if 0 in snapset:
        out[snapset[0], :, 0] = q
        out[snapset[0], :, 1] = p
    polyval = np.polynomial.polynomial.polyval
    for k in range(steps):
        if noise_on:
            p += sd * noise[:, k, 0]
        for _ in range(m):
            q += half * p
            p -= tau * polyval(q, der)
            q += half * p
        if noise_on:
            p += sd * noise[:, k, 1]
        if np.any(np.abs(q) > cfg.escape_bound):
            j = int(np.argmax(np.abs(q) > cfg.escape_bound))
            raise Unstable(
                f"trajectory {int(indices[j])} escaped |q| > {cfg.escape_bound} "
                f"at t={(k + 1) * cfg.dt:.6g} (epsilon={cfg.epsilon}, dt={cfg.dt})"
            )
        if step_hook is not None:
            step_hook(k, q, p)
        if (k + 1) in snapset:
            out[snapset[k + 1], :, 0] = q
            out[snapset[k + 1], :, 1] = p
    return out


def integrate_path(V: Potential, cfg: SdeConfig, trajectory_index: int = 0,
                   noise_on: bool = True):
    """Single trajectory recorded at every outer step: (times, states (steps+1, 2))."""
    steps = cfg.n_steps
    snaps = np.arange(steps + 1)
    out = _integrate_block(V, cfg, [trajectory_index], snaps, noise_on=noise_on)
    return snaps * cfg.dt, out[:, 0, :]


def _snapshot_steps(cfg: SdeConfig, snapshot_times) -> np.ndarray:
    st = np.asarray(snapshot_times, dtype=float)
    steps = st / cfg.dt
    rounded = np.rint(steps)
    if np.any(np.abs(steps - rounded) > 1e-6) or np.any(rounded < 0) or np.any(rounded > cfg.n_steps):
        raise ConfigError("snapshot_times must lie on the outer time grid")
    return rounded.astype(int)


def simulate_ensemble(V: Potential, cfg: SdeConfig, snapshot_times,
                      threads: int = 1, chunk: int = 1024) -> EnsemblePath:
    """n i.i.d. trajectories, atoms recorded at the snapshot times.

    Deterministic for fixed (V, cfg): per-trajectory RNG streams and an
    index-ordered reduction make the result independent of threads and chunking.
    """
    snap_steps = _snapshot_steps(cfg, snapshot_times)
    blocks = [np.arange(s, min(s + chunk, cfg.n)) for s in range(0, cfg.n, chunk)]
    states = np.empty((len(snap_steps), cfg.n, 2))

    def work(b):
        return _integrate_block(V, cfg, b, snap_steps)

    if threads > 1 and len(blocks) > 1:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            results = list(ex.map(work, blocks))
    else:
        results = [work(b) for b in blocks]
    for b, r in zip(blocks, results):
        states[:, b[0]:b[-1] + 1, :] = r
    times = snap_steps * cfg.dt
    return EnsemblePath(times=times, states=states, provenance=cfg)


def emit_figure_data(trajectory, G: LevelGraph, V: Potential) -> str:
    """CSV rows (t, q, p, h, edge): phase-plane panel plus its graph projection."""
    times, states = trajectory
    q = states[:, 0]
    p = states[:, 1]
    eidx, h = project_arrays(G, V, q, p)
    names = [e.id for e in G.edges]
    buf = io.StringIO()
    buf.write("t,q,p,h,edge\n")
    for k in range(len(times)):
        buf.write(f"{times[k]:.17g},{q[k]:.17g},{p[k]:.17g},{h[k]:.17g},{names[eidx[k]]}\n")
    return buf.getvalue()


def ensemble_to_csv(path: EnsemblePath) -> str:
    """CSV rows (t, trajectory_index, q, p) for every snapshot atom."""
    buf = io.StringIO()
    buf.write("t,trajectory_index,q,p\n")
    for k, t in enumerate(path.times):
        for i in range(path.n):
            buf.write(f"{t:.17g},{i},{path.states[k, i, 0]:.17g},{path.states[k, i, 1]:.17g}\n")
    return buf.getvalue()


def count_branch_entries(V: Potential, cfg: SdeConfig, G: LevelGraph,
                         band: float = 0.05, resolve_pending: bool = True,
                         max_extra_time: float = 4.0, chunk: int = 1024) -> dict:
    """Count edge entries of the projected process with a hysteresis band.

    An entry is recorded when a trajectory confirmed on one side of the saddle
    energy (|h - h*| > band) is next confirmed on a different edge. Trajectories
    still inside a well when the main window ends are integrated further (their
    drift points upward) so that every well episode is closed by an above entry;
    this removes the truncation bias of an open last excursion.
    """
    h_star = G.h_star
    der = np.polynomial.polynomial.polyder(V.coefficients)
    polyval = np.polynomial.polynomial.polyval
    counts = {LEFT: 0, RIGHT: 0, ABOVE: 0}
    q_sad = G.edge(LEFT).q_inner_hi

    steps = cfg.n_steps
    m = cfg.substeps
    tau = cfg.dt / (cfg.epsilon * m)
    half = 0.5 * tau
    sd = math.sqrt(cfg.dt)

    h0 = 0.5 * cfg.x0.p ** 2 + float(V.value(cfg.x0.q))
    if h0 <= h_star + band:
        raise ConfigError("x0 must start confirmed above the saddle band")

    coeffs = np.array(V.coefficients)
    extra = int(round(max_extra_time / cfg.dt)) if resolve_pending else 0
    for start in range(0, cfg.n, chunk):
        idxs = np.arange(start, min(start + chunk, cfg.n))
        nb = len(idxs)
        rngs = [_trajectory_rng(cfg.base_seed, int(i)) for i in idxs]
        noise = np.empty((nb, steps, 2))
        for j, r in enumerate(rngs):
            noise[j] = r.standard_normal((steps, 2))
        q = np.full(nb, cfg.x0.q)
        p = np.full(nb, cfg.x0.p)
        edge = np.full(nb, 2, dtype=np.int8)  # 0=left, 1=right, 2=above
        active = np.ones(nb, dtype=bool)  # frozen once resolved in the extra phase

        def outer_step(xi1, xi2):
            nonlocal q, p
            p += sd * xi1
            for _ in range(m):
                q += half * p
                p -= tau * polyval(q, der)
                q += half * p
            p += sd * xi2
            if np.any(np.abs(q) > cfg.escape_bound):
                raise Unstable(f"escape during crossing count (epsilon={cfg.epsilon})")

        def record(counting_down: bool):
            h = 0.5 * p * p + polyval(q, coeffs)
            if counting_down:
                down = active & (edge == 2) & (h < h_star - band)
                counts[LEFT] += int(np.count_nonzero(down & (q < q_sad)))
                counts[RIGHT] += int(np.count_nonzero(down & (q >= q_sad)))
                edge[down & (q < q_sad)] = 0
                edge[down & (q >= q_sad)] = 1
            up = active & (edge != 2) & (h > h_star + band)
            counts[ABOVE] += int(np.count_nonzero(up))
            edge[up] = 2
            if not counting_down:
                active[edge == 2] = False

        for k in range(steps):
            outer_step(noise[:, k, 0], noise[:, k, 1])
            record(counting_down=True)
        if resolve_pending:
            active[:] = edge != 2
            for k in range(extra):
                if not active.any():
                    break
                xi = np.stack([r.standard_normal(2) for r in rngs])
                outer_step(xi[:, 0], xi[:, 1])
                record(counting_down=False)
            # drift points upward: any unresolved episode closes above a.s.
            counts[ABOVE] += int(np.count_nonzero(active))
    total = sum(counts.values())
    return {"counts": counts, "total": total,
            "fractions": {k: v / total for k, v in counts.items()} if total else {}}
