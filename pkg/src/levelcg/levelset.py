"""The level-set graph of H, the projection onto it, and action/period tables.

The graph of a double-well Hamiltonian is a three-edge tree: two well edges
below the saddle energy and one edge above it. Orbit action S(h) and period
T(h) are computed by singular quadrature and tabulated per edge; their ratio
S/T is the microcanonical average of p^2 on the level set and drives the
limiting diffusion on the graph.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad
from scipy.interpolate import PchipInterpolator
from scipy.optimize import brentq

from .errors import AtSaddlePoint, NearSaddle, OutOfRange, UnsupportedTopology
from .hamiltonian import CriticalKind, PhasePoint, Potential, critical_points, hamiltonian

__all__ = [
    "Edge",
    "LevelGraph",
    "GraphPoint",
    "EdgeCoefficients",
    "GridSpec",
    "LEFT",
    "RIGHT",
    "ABOVE",
    "build_graph",
    "project",
    "project_arrays",
    "turning_points",
    "action",
    "period",
    "build_coefficients",
    "coefficients_to_csv",
    "graph_to_json",
]

LEFT = "left_well"
RIGHT = "right_well"
ABOVE = "above_saddle"


@dataclass(frozen=True)
class Edge:
    id: str
    h_lo: float
    h_hi: float  # math.inf on the upper edge
    side: str
    #: positions strictly inside every orbit of this branch (potential minima)
    q_bracket: tuple[float, float]
    #: saddle position bounding the branch toward the vertex, None if unbounded
    q_inner_lo: float | None = None
    q_inner_hi: float | None = None


@dataclass(frozen=True)
class LevelGraph:
    edges: tuple[Edge, ...]
    #: (h_star, incident edge ids); None for the single-well test graph
    interior_vertex: tuple[float, tuple[str, ...]] | None
    #: (edge id, h at the well minimum)
    leaf_vertices: tuple[tuple[str, float], ...]

    @property
    def h_star(self) -> float:
        if self.interior_vertex is None:
            raise UnsupportedTopology("single-well graph has no interior vertex")
        return self.interior_vertex[0]

    def edge(self, edge_id: str) -> Edge:
        for e in self.edges:
            if e.id == edge_id:
                return e
        raise KeyError(edge_id)

    @property
    def is_single_well(self) -> bool:
        return self.interior_vertex is None


@dataclass(frozen=True)
class GraphPoint:
    edge: str
    h: float


def build_graph(V: Potential, allow_single_well: bool = False, scan: tuple[float, float] = (-10.0, 10.0)) -> LevelGraph:
    """Build the level-set graph of H for a double-well potential.

    Requires the critical points of V to be (min, max, min). A single-well
    potential is rejected unless ``allow_single_well`` is set, in which case a
    one-edge graph without interior vertex is returned (test use only).
    """
    cps = critical_points(V, scan=scan)
    kinds = [c.kind for c in cps]
    if kinds == [CriticalKind.MINIMUM] and allow_single_well:
        c = cps[0]
        e = Edge(id="single", h_lo=c.value, h_hi=math.inf, side=ABOVE, q_bracket=(c.q, c.q))
        return LevelGraph(edges=(e,), interior_vertex=None, leaf_vertices=((e.id, c.value),))
    if kinds != [CriticalKind.MINIMUM, CriticalKind.MAXIMUM, CriticalKind.MINIMUM]:
        raise UnsupportedTopology(
            f"expected critical points (min, max, min), got {[k.value for k in kinds]}"
        )
    lo, sad, hi = cps
    h_star = sad.value
    if not (lo.value < h_star and hi.value < h_star):
        raise UnsupportedTopology("interior maximum does not dominate the well minima")
    left = Edge(id=LEFT, h_lo=lo.value, h_hi=h_star, side=LEFT,
                q_bracket=(lo.q, lo.q), q_inner_hi=sad.q)
    right = Edge(id=RIGHT, h_lo=hi.value, h_hi=h_star, side=RIGHT,
                 q_bracket=(hi.q, hi.q), q_inner_lo=sad.q)
    above = Edge(id=ABOVE, h_lo=h_star, h_hi=math.inf, side=ABOVE,
                 q_bracket=(lo.q, hi.q))
    return LevelGraph(
        edges=(left, right, above),
        interior_vertex=(h_star, (LEFT, RIGHT, ABOVE)),
        leaf_vertices=((LEFT, lo.value), (RIGHT, hi.value)),
    )


def project(G: LevelGraph, V: Potential, x: PhasePoint, tie_tol: float = 1e-12) -> GraphPoint:
    """Coarse-graining map: (q,p) -> (connected level-set component, H(q,p)).

    At energies below the saddle the component is decided by the sign of
    q - q_saddle; exactly on the saddle point the image is the interior vertex,
    reported on the upper edge by convention.
    """
    h = hamiltonian(V, x)
    if G.is_single_well:
        return GraphPoint(edge=G.edges[0].id, h=h)
    h_star = G.h_star
    q_sad = G.edge(LEFT).q_inner_hi
    if abs(h - h_star) < tie_tol and abs(x.q - q_sad) < tie_tol:
        raise AtSaddlePoint(f"phase point ({x.q}, {x.p}) maps to the interior vertex")
    if h > h_star:
        return GraphPoint(edge=ABOVE, h=h)
    return GraphPoint(edge=LEFT if x.q < q_sad else RIGHT, h=h)


def project_arrays(G: LevelGraph, V: Potential, q, p):
    """Vectorized projection: returns (edge index into G.edges, h) arrays.

    Saddle ties follow the above-edge convention instead of raising.
    """
    q = np.asarray(q, dtype=float)
    h = 0.5 * np.asarray(p, dtype=float) ** 2 + V.value(q)
    if G.is_single_well:
        return np.zeros(q.shape, dtype=np.int64), h
    q_sad = G.edge(LEFT).q_inner_hi
    idx = {e.id: i for i, e in enumerate(G.edges)}
    out = np.where(h > G.h_star, idx[ABOVE], np.where(q < q_sad, idx[LEFT], idx[RIGHT]))
    return out.astype(np.int64), h


def _expand_bracket(V: Potential, h: float, q0: float, direction: float) -> float:
    """Walk outward from q0 until V(q) > h; quadratic growth guarantees termination."""
    step = max(1.0, abs(q0))
    q = q0 + direction * step
    for _ in range(200):
        if V.value(q) > h:
            return q
        step *= 2.0
        q = q0 + direction * step
    raise OutOfRange(f"could not bracket turning point beyond q={q0} at h={h}")


def _root(V: Potential, h: float, a: float, b: float, tol: float = 1e-14) -> float:
    fa = float(V.value(a)) - h
    fb = float(V.value(b)) - h
    if abs(fa) < 1e-13:
        return a
    if abs(fb) < 1e-13:
        return b
    return float(brentq(lambda q: float(V.value(q)) - h, a, b, xtol=tol))


def turning_points(V: Potential, edge: Edge, h: float) -> tuple[float, float]:
    """The two solutions of V(q) = h bounding the orbit on this branch."""
    if not (edge.h_lo <= h <= edge.h_hi) or h == edge.h_lo:
        raise OutOfRange(f"h={h} outside edge {edge.id} range ({edge.h_lo}, {edge.h_hi}]")
    qa, qb = edge.q_bracket
    if edge.q_inner_lo is not None:
        q_minus = _root(V, h, edge.q_inner_lo, qa)
    else:
        q_minus = _root(V, h, _expand_bracket(V, h, qa, -1.0), qa)
    if edge.q_inner_hi is not None:
        q_plus = _root(V, h, qb, edge.q_inner_hi)
    else:
        q_plus = _root(V, h, qb, _expand_bracket(V, h, qb, +1.0))
    return q_minus, q_plus


def _orbit_quad(V: Potential, h: float, q_minus: float, q_plus: float, kind: str,
                epsabs: float) -> float:
    """Integrate over the orbit with the substitution q = mid + amp*sin(theta).

    The turning-point factor is removed exactly: dividing h - V(q) by the
    quadratic (q - q_minus)(q_plus - q) = amp^2 cos^2(theta) leaves a smooth
    strictly positive polynomial W, so h - V = W * amp^2 cos^2(theta) with no
    cancellation near the endpoints and adaptive quadrature sees C-infinity
    integrands.
    """
    mid = 0.5 * (q_minus + q_plus)
    amp = 0.5 * (q_plus - q_minus)
    pp = np.polynomial.polynomial
    num = [-c for c in V.coefficients]
    num[0] += h
    den = [-q_minus * q_plus, q_minus + q_plus, -1.0]
    quot, _rem = pp.polydiv(np.asarray(num), np.asarray(den))

    def f_action(th):
        q = mid + amp * np.sin(th)
        w = max(float(pp.polyval(q, quot)), 0.0)
        c = amp * math.cos(th)
        return 2.0 * math.sqrt(2.0 * w) * c * c

    def f_period(th):
        q = mid + amp * np.sin(th)
        w = float(pp.polyval(q, quot))
        return 2.0 / math.sqrt(2.0 * w)

    f = f_action if kind == "action" else f_period
    val, _ = quad(f, -0.5 * math.pi, 0.5 * math.pi, epsabs=epsabs, epsrel=1e-11, limit=400)
    return val


def action(V: Potential, edge: Edge, h: float) -> float:
    """S(h) = closed-orbit integral of |p| dq = 2 * int sqrt(2(h - V)) dq."""
    qm, qp = turning_points(V, edge, h)
    return _orbit_quad(V, h, qm, qp, "action", epsabs=1e-11)


def period(V: Potential, edge: Edge, h: float, delta_sing: float = 5e-5) -> float:
    """T(h) = closed-orbit integral of dq/|p|; diverges logarithmically at the saddle."""
    h_sing = edge.h_hi if edge.side in (LEFT, RIGHT) else edge.h_lo
    if math.isfinite(h_sing) and edge.id != "single" and abs(h - h_sing) < delta_sing:
        raise NearSaddle(f"h={h} within {delta_sing} of the saddle energy {h_sing}")
    qm, qp = turning_points(V, edge, h)
    return _orbit_quad(V, h, qm, qp, "period", epsabs=1e-9)


@dataclass(frozen=True)
class GridSpec:
    """Tabulation grid for the action/period tables."""

    points_per_edge: int = 256
    delta_sing: float = 5e-5  # exclusion band around the saddle energy
    delta_floor: float = 1e-6  # exclusion band around the leaf energies
    h_table_max: float = 12.0  # truncation of the upper edge table
    fine_points: int = 4096  # uniform resample used for fast interpolation


def _clustered_grid(a: float, b: float, n: int) -> np.ndarray:
    """Grid on [a,b] geometrically refined toward both endpoints."""
    t = np.linspace(0.0, 1.0, n)
    x = t * t * (3.0 - 2.0 * t)
    return a + (b - a) * x


@dataclass(frozen=True)
class EdgeCoefficients:
    """Tabulated S(h), T(h) and the microcanonical average p2 = S/T on one edge."""

    edge_id: str
    grid: np.ndarray
    S: np.ndarray
    T: np.ndarray
    _S_interp: PchipInterpolator = field(repr=False, default=None)
    _T_interp: PchipInterpolator = field(repr=False, default=None)
    _fine_h: np.ndarray = field(repr=False, default=None)
    _fine_S: np.ndarray = field(repr=False, default=None)
    _fine_T: np.ndarray = field(repr=False, default=None)

    @staticmethod
    def from_tables(edge_id: str, grid: np.ndarray, S: np.ndarray, T: np.ndarray,
                    fine_points: int = 4096) -> "EdgeCoefficients":
        si = PchipInterpolator(grid, S)
        ti = PchipInterpolator(grid, T)
        fine = np.linspace(grid[0], grid[-1], fine_points)
        return EdgeCoefficients(edge_id=edge_id, grid=np.asarray(grid), S=np.asarray(S),
                                T=np.asarray(T), _S_interp=si, _T_interp=ti,
                                _fine_h=fine, _fine_S=si(fine), _fine_T=ti(fine))

    @property
    def h_lo(self) -> float:
        return float(self.grid[0])

    @property
    def h_hi(self) -> float:
        return float(self.grid[-1])

    def _clamp(self, h):
        return np.clip(h, self.grid[0], self.grid[-1])

    def S_of(self, h):
        return self._S_interp(self._clamp(h))

    def T_of(self, h):
        return self._T_interp(self._clamp(h))

    def p2_of(self, h):
        hc = self._clamp(h)
        return self._S_interp(hc) / self._T_interp(hc)

    def a_of(self, h):
        """Edge diffusion coefficient a(h) = 2 S/T (fast linear interpolation)."""
        hc = np.clip(h, self._fine_h[0], self._fine_h[-1])
        s = np.interp(hc, self._fine_h, self._fine_S)
        t = np.interp(hc, self._fine_h, self._fine_T)
        return 2.0 * s / t

    def fine_tables(self):
        """(h, S, T) on the uniform fine grid; inputs to the compiled kernels."""
        return self._fine_h, self._fine_S, self._fine_T


def build_coefficients(V: Potential, G: LevelGraph, spec: GridSpec = GridSpec()) -> dict[str, EdgeCoefficients]:
    """Tabulate S and T on every edge, staying out of the singular bands."""
    out: dict[str, EdgeCoefficients] = {}
    for e in G.edges:
        if e.side in (LEFT, RIGHT):
            lo = e.h_lo + spec.delta_floor
            hi = e.h_hi - spec.delta_sing
        else:
            lo = e.h_lo + (spec.delta_sing if not G.is_single_well else spec.delta_floor)
            hi = spec.h_table_max
        grid = _clustered_grid(lo, hi, spec.points_per_edge)
        S = np.empty(len(grid))
        T = np.empty(len(grid))
        for i, h in enumerate(grid):
            qm, qp = turning_points(V, e, float(h))
            S[i] = _orbit_quad(V, float(h), qm, qp, "action", epsabs=1e-11)
            T[i] = _orbit_quad(V, float(h), qm, qp, "period", epsabs=1e-9)
        out[e.id] = EdgeCoefficients.from_tables(e.id, grid, S, T, spec.fine_points)
    return out


def coefficients_to_csv(tables: dict[str, EdgeCoefficients]) -> str:
    buf = io.StringIO()
    buf.write("edge_id,h,S,T,p2_avg\n")
    for edge_id in sorted(tables):
        t = tables[edge_id]
        for h, s, tt in zip(t.grid, t.S, t.T):
            buf.write(f"{edge_id},{h:.17g},{s:.17g},{tt:.17g},{s / tt:.17g}\n")
    return buf.getvalue()


def graph_to_json(G: LevelGraph) -> str:
    doc = {
        "edges": [
            {"id": e.id, "h_lo": e.h_lo, "h_hi": None if math.isinf(e.h_hi) else e.h_hi,
             "side": e.side}
            for e in G.edges
        ],
        "interior_vertex": None if G.is_single_well else
            {"h_star": G.interior_vertex[0], "incident": list(G.interior_vertex[1])},
        "leaf_vertices": [{"edge": eid, "h": h} for eid, h in G.leaf_vertices],
    }
    return json.dumps(doc, indent=2, sort_keys=True)
