"""Dual functionals on measure paths and the inequality chain between them.

J is the empirical-measure rate dual with a linear Dynkin part and a quadratic
carre-du-champ part; for composed test functions f = g(edge, H) the generator
collapses to g''(h) p^2 + g'(h) (the fast Hamiltonian transport cancels), and
replacing p^2 by its microcanonical average S/T yields the coarse-grained
functional evaluated on graph measure paths. The report compares family
suprema across an epsilon sweep against the limit path.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import CubicSpline

from .errors import ConfigError, OutOfDomain
from .hamiltonian import PhasePoint, Potential
from .levelset import ABOVE, LEFT, RIGHT, LevelGraph, project_arrays
from .measures import GraphMeasurePath, pushforward

__all__ = [
    "GraphTestFunction",
    "FamilySpec",
    "DualityReport",
    "apply_generator_composed",
    "j_full",
    "j_full_custom",
    "j_hat_eps",
    "j_hat_zero",
    "make_test_family",
    "inequality_chain_report",
]

_VERTEX_TOL = 1e-12


@dataclass(frozen=True)
class GraphTestFunction:
    """Edgewise cubic-spline test function g on the graph, continuous at the vertex.

    Each edge carries a spline over a knot grid in h; beyond the last knot the
    function continues with its end value and zero derivatives (the splines are
    built with clamped ends), so the non-constant part has compact support.
    Evaluation past ``domain_max`` raises OutOfDomain when it is finite.
    """

    name: str
    graph: LevelGraph
    knots: dict  # edge id -> knot grid
    values: dict  # edge id -> g at the knots
    domain_max: float = math.inf
    _splines: dict = field(repr=False, default=None, compare=False)

    def __post_init__(self):
        splines = {}
        for eid, kn in self.knots.items():
            splines[eid] = CubicSpline(kn, self.values[eid], bc_type="clamped")
        object.__setattr__(self, "_splines", splines)
        if not self.graph.is_single_well:
            h_star = self.graph.h_star
            vals = [float(splines[eid](min(max(h_star, self.knots[eid][0]),
                                           self.knots[eid][-1])))
                    for eid in (LEFT, RIGHT, ABOVE)]
            if max(vals) - min(vals) > _VERTEX_TOL:
                raise ConfigError(
                    f"test function {self.name!r} discontinuous at the vertex: {vals}"
                )

    def _eval(self, edge_id: str, h, nu: int):
        h = np.asarray(h, dtype=float)
        if math.isfinite(self.domain_max) and np.any(h > self.domain_max):
            raise OutOfDomain(
                f"test function {self.name!r}: h beyond domain_max={self.domain_max}"
            )
        kn = self._splines[edge_id].x
        hc = np.clip(h, kn[0], kn[-1])
        out = self._splines[edge_id](hc, nu=nu)
        if nu > 0:
            out = np.where((h < kn[0]) | (h > kn[-1]), 0.0, out)
        return out

    def value(self, edge_id: str, h):
        return self._eval(edge_id, h, 0)

    def deriv(self, edge_id: str, h):
        return self._eval(edge_id, h, 1)

    def deriv2(self, edge_id: str, h):
        return self._eval(edge_id, h, 2)

    def scaled(self, s: float) -> "GraphTestFunction":
        return GraphTestFunction(
            name=f"{self.name}*{s:g}", graph=self.graph, knots=self.knots,
            values={eid: s * np.asarray(v) for eid, v in self.values.items()},
            domain_max=self.domain_max)


def apply_generator_composed(V: Potential, g: GraphTestFunction, x: PhasePoint,
                             epsilon: float) -> float:
    """A^eps (g o Pi) at a phase point: g''(h) p^2 + g'(h).

    The 1/eps transport terms cancel exactly because g o Pi is constant on
    orbits, so the value is independent of epsilon.
    """
    idx, h = project_arrays(g.graph, V, np.array([x.q]), np.array([x.p]))
    eid = g.graph.edges[int(idx[0])].id
    return float(g.deriv2(eid, h[0]) * x.p ** 2 + g.deriv(eid, h[0]))


def _trapezoid_weights(times: np.ndarray) -> np.ndarray:
    t = np.asarray(times, dtype=float)
    w = np.zeros(len(t))
    w[:-1] += 0.5 * np.diff(t)
    w[1:] += 0.5 * np.diff(t)
    return w


def _edge_ids(G: LevelGraph):
    return [e.id for e in G.edges]


def j_full(ensemble, g: GraphTestFunction, V: Potential, epsilon: float):
    """Monte Carlo estimate (value, standard error) of J(rho, g o Pi).

    J = <f, rho_T> - <f, rho_0> - int <A f, rho_t> dt - int <(d_p f)^2, rho_t> dt
    with f = g o Pi, A f = g''(h) p^2 + g'(h) and (d_p f)^2 = g'(h)^2 p^2,
    evaluated per trajectory (trapezoid in t) and averaged.
    """
    G = g.graph
    times = np.asarray(ensemble.times, dtype=float)
    w = _trapezoid_weights(times)
    n = ensemble.n
    per_traj = np.zeros(n)
    names = _edge_ids(G)
    for k in range(len(times)):
        q, p = ensemble.slice(k)
        idx, h = project_arrays(G, V, q, p)
        g0 = np.empty(n)
        g1 = np.empty(n)
        g2 = np.empty(n)
        for i, eid in enumerate(names):
            sel = idx == i
            if not np.any(sel):
                continue
            g0[sel] = g.value(eid, h[sel])
            g1[sel] = g.deriv(eid, h[sel])
            g2[sel] = g.deriv2(eid, h[sel])
        p2 = p * p
        per_traj -= w[k] * (g2 * p2 + g1 + g1 * g1 * p2)
        if k == 0:
            per_traj -= g0
        if k == len(times) - 1:
            per_traj += g0
    value = float(np.mean(per_traj))
    se = float(np.std(per_traj, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return value, se


def j_full_custom(ensemble, V: Potential, epsilon: float, f, Af, dpf):
    """J for an arbitrary phase-space test function given callables f(q,p),
    (A^eps f)(q,p) and (d_p f)(q,p); used to probe non-composed directions."""
    times = np.asarray(ensemble.times, dtype=float)
    w = _trapezoid_weights(times)
    n = ensemble.n
    per_traj = np.zeros(n)
    for k in range(len(times)):
        q, p = ensemble.slice(k)
        per_traj -= w[k] * (np.asarray(Af(q, p), dtype=float)
                            + np.asarray(dpf(q, p), dtype=float) ** 2)
        if k == 0:
            per_traj -= np.asarray(f(q, p), dtype=float)
        if k == len(times) - 1:
            per_traj += np.asarray(f(q, p), dtype=float)
    value = float(np.mean(per_traj))
    se = float(np.std(per_traj, ddof=1) / math.sqrt(n)) if n > 1 else 0.0
    return value, se


def _j_hat(path: GraphMeasurePath, coefficients: dict, g: GraphTestFunction) -> float:
    times = np.asarray(path.times, dtype=float)
    w = _trapezoid_weights(times)
    total = 0.0
    for k, mu in enumerate(path.measures):
        inner = 0.0
        boundary = 0.0
        for eid in mu.edge_order:
            pos, wt = mu.edge_atoms(eid)
            if len(pos) == 0:
                continue
            p2 = np.asarray(coefficients[eid].p2_of(pos), dtype=float)
            g1 = g.deriv(eid, pos)
            inner += float(np.dot(wt, g.deriv2(eid, pos) * p2 + g1 + g1 * g1 * p2))
            boundary += float(np.dot(wt, g.value(eid, pos)))
        total -= w[k] * inner
        if k == 0:
            total -= boundary
        if k == len(times) - 1:
            total += boundary
    return total


def j_hat_eps(graph_path: GraphMeasurePath, coefficients: dict,
              g: GraphTestFunction) -> float:
    """Coarse-grained dual on a pushed-forward path: p^2 replaced by S/T."""
    return _j_hat(graph_path, coefficients, g)


def j_hat_zero(mu_path, coefficients: dict, g: GraphTestFunction) -> float:
    """The limit functional; same formula, applied to a limit path (graph FP
    density paths are accepted directly)."""
    if hasattr(mu_path, "to_measure_path"):
        mu_path = mu_path.to_measure_path()
    return _j_hat(mu_path, coefficients, g)


@dataclass(frozen=True)
class FamilySpec:
    """Deterministic test-function family: constant + smooth bumps in h (global,
    per-edge, and a vertex tent), each repeated at the given scalings."""

    size: int = 64
    scales: tuple = (1.0, 0.1, 0.01)
    h_max: float = 8.0
    knots_well: int = 25
    knots_above: int = 49
    domain_max: float = math.inf


def _bump(h, center, width):
    """C-infinity bump exp(1 - 1/(1-u^2)) on |u| < 1, u = (h-center)/width."""
    u = (np.asarray(h, dtype=float) - center) / width
    out = np.zeros_like(u)
    inside = np.abs(u) < 1.0
    ui = u[inside]
    out[inside] = np.exp(1.0 - 1.0 / (1.0 - ui * ui))
    return out


def make_test_family(G: LevelGraph, spec: FamilySpec = FamilySpec()) -> list:
    """Deterministic family of vertex-continuous test functions (default 64)."""
    if G.is_single_well:
        e = G.edges[0]
        knots = {e.id: np.linspace(e.h_lo, spec.h_max, spec.knots_above)}
        edge_ids = [e.id]
        h_star = None
    else:
        h_star = G.h_star
        knots = {
            LEFT: np.linspace(G.edge(LEFT).h_lo, h_star, spec.knots_well),
            RIGHT: np.linspace(G.edge(RIGHT).h_lo, h_star, spec.knots_well),
            ABOVE: np.linspace(h_star, spec.h_max, spec.knots_above),
        }
        edge_ids = [LEFT, RIGHT, ABOVE]

    def from_h_function(name, fn):
        return GraphTestFunction(
            name=name, graph=G, knots=knots,
            values={eid: np.asarray(fn(kn), dtype=float) for eid, kn in knots.items()},
            domain_max=spec.domain_max)

    base = [from_h_function("const", lambda h: np.ones_like(np.asarray(h, dtype=float)))]
    lo = min(float(k[0]) for k in knots.values())
    span = spec.h_max - lo
    # global bumps in h at staggered centers and two widths
    for width_frac in (0.35, 0.15):
        width = width_frac * span
        n_centers = 8 if width_frac == 0.35 else 10
        for c in np.linspace(lo + 0.05 * span, lo + 0.95 * span, n_centers):
            base.append(from_h_function(
                f"bump_h[{c:.3f},{width:.3f}]",
                lambda h, c=c, w=width: _bump(h, c, w)))
    if h_star is not None:
        # vertex tent: 1 at h*, decaying along all three edges
        tent_w = 0.3 * span
        base.append(from_h_function(
            "vertex_tent", lambda h: _bump(h, h_star, tent_w)))
        # per-edge bumps, zero at the vertex (hence continuous)
        for eid in (LEFT, RIGHT):
            e = G.edge(eid)
            mid = 0.5 * (e.h_lo + h_star)
            wdt = 0.45 * (h_star - e.h_lo)
            vals = {k: np.zeros(len(v)) for k, v in knots.items()}
            vals[eid] = _bump(knots[eid], mid, wdt)
            base.append(GraphTestFunction(name=f"bump_{eid}", graph=G, knots=knots,
                                          values=vals, domain_max=spec.domain_max))
        above_kn = knots[ABOVE]
        mid = h_star + 0.3 * (spec.h_max - h_star)
        vals = {k: np.zeros(len(v)) for k, v in knots.items()}
        vals[ABOVE] = _bump(above_kn, mid, 0.28 * (spec.h_max - h_star))
        base.append(GraphTestFunction(name="bump_above", graph=G, knots=knots,
                                      values=vals, domain_max=spec.domain_max))

    family = []
    for g in base:
        for s in spec.scales:
            family.append(g if s == 1.0 else g.scaled(s))
            if len(family) >= spec.size:
                return family
    return family


@dataclass(frozen=True)
class DualityReport:
    """Per-epsilon family suprema of the dual functionals plus the limit-path
    supremum and the local-equilibrium substitution-error table."""

    per_epsilon: dict  # eps -> {"sup_j_full", "sup_j_hat_eps", "substitution_error", "rows"}
    sup_j_hat_zero: float
    j_hat_zero_rows: list
    warnings: tuple = ()

    def to_json(self) -> str:
        doc = {
            "per_epsilon": [
                {"epsilon": eps, **vals} for eps, vals in sorted(
                    self.per_epsilon.items(), reverse=True)
            ],
            "sup_j_hat_zero": self.sup_j_hat_zero,
            "j_hat_zero_rows": self.j_hat_zero_rows,
            "warnings": list(self.warnings),
        }
        return json.dumps(doc, indent=2, allow_nan=True)


_NEG_INF = float("-inf")


def inequality_chain_report(ensembles: dict, limit_path, coefficients: dict,
                            family: list, epsilons, V: Potential,
                            G: LevelGraph) -> DualityReport:
    """Family suprema of J (full), J-hat (pushed-forward) per epsilon, and of the
    limit functional on the limit path; the substitution error per epsilon is
    max_g |j_full - j_hat_eps| on the same ensemble."""
    warnings = []
    if not family:
        warnings.append("empty test-function family: suprema reported as -inf")
        return DualityReport(per_epsilon={float(e): {
            "sup_j_full": _NEG_INF, "sup_j_hat_eps": _NEG_INF,
            "substitution_error": 0.0, "rows": []} for e in epsilons},
            sup_j_hat_zero=_NEG_INF, j_hat_zero_rows=[], warnings=tuple(warnings))
    per_eps = {}
    for eps in epsilons:
        ens = ensembles[eps]
        pushed = pushforward(ens, G, V)
        rows = []
        for g in family:
            jf, se = j_full(ens, g, V, eps)
            jh = j_hat_eps(pushed, coefficients, g)
            rows.append({"g": g.name, "j_full": jf, "j_full_se": se,
                         "j_hat_eps": jh, "gap": abs(jf - jh)})
        per_eps[float(eps)] = {
            "sup_j_full": max(r["j_full"] for r in rows),
            "sup_j_hat_eps": max(r["j_hat_eps"] for r in rows),
            "substitution_error": max(r["gap"] for r in rows),
            "rows": rows,
        }
    zrows = []
    for g in family:
        zrows.append({"g": g.name, "j_hat_zero": j_hat_zero(limit_path, coefficients, g)})
    return DualityReport(per_epsilon=per_eps,
                         sup_j_hat_zero=max(r["j_hat_zero"] for r in zrows),
                         j_hat_zero_rows=zrows, warnings=tuple(warnings))
