import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from levelcg.errors import DegenerateCritical
from levelcg.hamiltonian import (DOUBLE_WELL, HARMONIC, CriticalKind,
                                 PhasePoint, Potential, critical_points,
                                 hamiltonian)


def test_double_well_values():
    # V(q) = (q^2 - 1)^2 / 4
    assert DOUBLE_WELL.value(0.0) == 0.25
    assert DOUBLE_WELL.value(1.0) == 0.0
    assert DOUBLE_WELL.value(-1.0) == 0.0
    assert DOUBLE_WELL.value(2.0) == 9.0 / 4.0
    assert DOUBLE_WELL.grad(0.0) == 0.0
    assert DOUBLE_WELL.grad(2.0) == 2.0 ** 3 - 2.0


def test_hamiltonian_value():
    assert hamiltonian(DOUBLE_WELL, PhasePoint(0.0, 1.0)) == 0.75
    assert hamiltonian(HARMONIC, PhasePoint(3.0, 4.0)) == 8.0 + 4.5


def test_double_well_critical_points():
    cps = critical_points(DOUBLE_WELL)
    assert [c.kind for c in cps] == [CriticalKind.MINIMUM,
                                     CriticalKind.MAXIMUM,
                                     CriticalKind.MINIMUM]
    qs = [c.q for c in cps]
    assert qs == sorted(qs)
    assert abs(qs[0] + 1.0) < 1e-10 and abs(qs[1]) < 1e-10 and abs(qs[2] - 1.0) < 1e-10
    assert abs(cps[1].value - 0.25) < 1e-12


def test_potential_validation():
    with pytest.raises(ValueError):
        Potential((0.0, 1.0))  # degree < 2
    with pytest.raises(ValueError):
        Potential((0.0, 0.0, 0.0, 1.0))  # odd degree
    with pytest.raises(ValueError):
        Potential((0.0, 0.0, -1.0))  # negative leading coefficient


def test_degenerate_critical_point_rejected():
    # V = q^4 has V''(0) = 0
    with pytest.raises(DegenerateCritical):
        critical_points(Potential((0.0, 0.0, 0.0, 0.0, 1.0)))


def test_phase_point_finite():
    with pytest.raises(ValueError):
        PhasePoint(math.nan, 0.0)
    with pytest.raises(ValueError):
        PhasePoint(0.0, math.inf)


@settings(max_examples=30, deadline=None)
@given(a=st.floats(0.1, 5.0), b=st.floats(-3.0, 3.0), c=st.floats(-3.0, 3.0))
def test_critical_points_are_roots_of_gradient(a, b, c):
    V = Potential((c, b, -1.0, 0.0, a))
    try:
        cps = critical_points(V)
    except DegenerateCritical:
        return
    for cp in cps:
        assert abs(float(V.grad(cp.q))) < 1e-7
        assert abs(cp.value - float(V.value(cp.q))) < 1e-12
    qs = [cp.q for cp in cps]
    assert qs == sorted(qs)


@settings(max_examples=30, deadline=None)
@given(q=st.floats(-4.0, 4.0), p=st.floats(-4.0, 4.0))
def test_hamiltonian_even_in_p(q, p):
    assert hamiltonian(DOUBLE_WELL, PhasePoint(q, p)) == \
        hamiltonian(DOUBLE_WELL, PhasePoint(q, -p))


def test_vectorized_value_matches_scalar():
    qs = np.linspace(-2, 2, 17)
    vals = DOUBLE_WELL.value(qs)
    for q, v in zip(qs, vals):
        assert abs(v - float(DOUBLE_WELL.value(float(q)))) < 1e-15
