"""Polynomial potentials, the Hamiltonian H(q,p) = p^2/2 + V(q), and critical points."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .errors import DegenerateCritical, NoRoots

__all__ = [
    "Potential",
    "PhasePoint",
    "CriticalKind",
    "CriticalPoint",
    "DOUBLE_WELL",
    "HARMONIC",
    "eval_potential",
    "grad_potential",
    "hamiltonian",
    "critical_points",
]


@dataclass(frozen=True)
class Potential:
    """Polynomial potential V(q) = sum_i c_i q^i, coefficients low-to-high degree.

    The leading coefficient must be positive and the degree even so that V grows
    at least quadratically in both directions.
    """

    coefficients: tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coefficients)
        object.__setattr__(self, "coefficients", coeffs)
        if len(coeffs) < 3:
            raise ValueError("potential needs degree >= 2")
        d = len(coeffs) - 1
        while d > 0 and coeffs[d] == 0.0:
            d -= 1
        if d < 2 or d % 2 != 0 or coeffs[d] <= 0.0:
            raise ValueError("potential degree must be even with positive leading coefficient")

    def value(self, q):
        return np.polynomial.polynomial.polyval(q, self.coefficients)

    def grad(self, q):
        der = np.polynomial.polynomial.polyder(self.coefficients)
        return np.polynomial.polynomial.polyval(q, der)

    def second(self, q):
        der2 = np.polynomial.polynomial.polyder(self.coefficients, 2)
        return np.polynomial.polynomial.polyval(q, der2)


@dataclass(frozen=True)
class PhasePoint:
    q: float
    p: float

    def __post_init__(self):
        if not (np.isfinite(self.q) and np.isfinite(self.p)):
            raise ValueError("phase point coordinates must be finite")


class CriticalKind(Enum):
    MINIMUM = "minimum"
    MAXIMUM = "maximum"


@dataclass(frozen=True)
class CriticalPoint:
    q: float
    value: float
    kind: CriticalKind


#: V(q) = (q^2 - 1)^2 / 4, the worked double-well example.
DOUBLE_WELL = Potential((0.25, 0.0, -0.5, 0.0, 0.25))

#: V(q) = q^2 / 2, isochronous single well used as an exactly solvable test case.
HARMONIC = Potential((0.0, 0.0, 0.5))


def eval_potential(V: Potential, q):
    """Evaluate V(q); exact polynomial arithmetic (Horner)."""
    return V.value(q)


def grad_potential(V: Potential, q):
    """Evaluate V'(q) from the exact derivative polynomial."""
    return V.grad(q)


def hamiltonian(V: Potential, x: PhasePoint) -> float:
    """H(q,p) = p^2/2 + V(q)."""
    return 0.5 * x.p * x.p + float(V.value(x.q))


def hamiltonian_qp(V: Potential, q, p):
    """Vectorized H over arrays of positions and momenta."""
    return 0.5 * np.asarray(p) ** 2 + V.value(np.asarray(q))


def critical_points(
    V: Potential,
    scan: tuple[float, float] = (-10.0, 10.0),
    cells: int = 10_000,
    root_tol: float = 1e-12,
    curvature_tol: float = 1e-8,
) -> list[CriticalPoint]:
    """All real roots of V' in the scan window, sorted and classified.

    Roots are bracketed on sign changes of V' over a uniform grid and refined by
    Brent's method. Degenerate critical points (|V''| below tolerance) are
    rejected because the graph construction assumes Morse structure.
    """
    qs = np.linspace(scan[0], scan[1], cells + 1)
    dv = V.grad(qs)
    roots: list[float] = []
    for i in range(cells):
        a, b = dv[i], dv[i + 1]
        if a == 0.0:
            roots.append(float(qs[i]))
        elif a * b < 0.0:
            roots.append(float(brentq(V.grad, qs[i], qs[i + 1], xtol=root_tol)))
    if dv[-1] == 0.0:
        roots.append(float(qs[-1]))
    # dedupe near-identical roots from adjacent brackets
    uniq: list[float] = []
    for r in sorted(roots):
        if not uniq or abs(r - uniq[-1]) > 100 * root_tol:
            uniq.append(r)
    if not uniq:
        raise NoRoots(f"V' has no real roots in scan window {scan}")
    out = []
    for r in uniq:
        curv = float(V.second(r))
        if abs(curv) < curvature_tol:
            raise DegenerateCritical(f"critical point at q={r!r} has |V''|={abs(curv):.3e}")
        kind = CriticalKind.MINIMUM if curv > 0 else CriticalKind.MAXIMUM
        out.append(CriticalPoint(q=r, value=float(V.value(r)), kind=kind))
    return out
