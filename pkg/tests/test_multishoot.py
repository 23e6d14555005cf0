import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from picardbvp.analysis import theorem_multi_gate
from picardbvp.multishoot import (
    beta1_update,
    beta_sweep,
    gamma_sweep,
    init_multi,
    make_partition,
    multi_step,
    segment_update,
    solve_multi,
)
from picardbvp.picard import SolveOptions, solve
from picardbvp.polynomial import Polynomial
from picardbvp.problem import Boundary, Unknown, polynomialize

OPTS = SolveOptions()


def line_spec(a=0.0, b=1.0, alpha=0.0, beta=1.0):
    return polynomialize(a, b, "0", Boundary(alpha, beta))


def test_partition():
    p = make_partition(0.0, 1.0, 4)
    assert p.h == 0.25
    assert p.nodes == (0.0, 0.25, 0.5, 0.75, 1.0)
    with pytest.raises(ValueError):
        make_partition(0.0, 1.0, 0)


def test_init_examples():
    segs = init_multi(line_spec(), 2)
    assert segs[1].beta_left == 0.5
    spec = polynomialize(0, 2, "-y", Boundary(1.0, 3.0))
    segs = init_multi(spec, 4)
    assert {s.gamma for s in segs} == {1.0}
    assert [s.y.basepoint for s in segs] == [0.0, 0.5, 1.0, 1.5]


def test_init_rejects_left_value_mode():
    spec = polynomialize(0, 1, "0", Boundary(1.0, 2.0), Unknown.LEFT_VALUE)
    with pytest.raises(ValueError):
        init_multi(spec, 2)


def test_segment_update_examples():
    part = make_partition(0.0, 2.0, 2)
    zero = polynomialize(0, 2, "0", Boundary(0.0, 0.0))
    seg = init_multi(zero, 2)[1]
    seg = seg.__class__(j=2, beta_left=0.7, gamma=-0.3,
                        states=(Polynomial([0.7], 1.0), Polynomial([-0.3], 1.0)))
    new = segment_update(zero, seg, part, OPTS)
    assert new.y == Polynomial([0.7, -0.3], basepoint=1.0)
    assert new.I == 0.0 and new.J == 0.0

    one = polynomialize(0, 2, "1", Boundary(0.0, 0.0))
    new = segment_update(one, init_multi(one, 2)[0], part, OPTS)
    assert new.I == pytest.approx(1.0) and new.J == pytest.approx(0.5)

    lin = polynomialize(0, 2, "-y", Boundary(0.0, 0.0))
    seg = init_multi(lin, 2)[0]
    seg = seg.__class__(j=1, beta_left=0.4, gamma=0.0, states=(Polynomial([0.4]), Polynomial([0.0])))
    new = segment_update(lin, seg, part, OPTS)
    # the new y is still the constant 0.4, so I = -0.4 h
    assert new.I == pytest.approx(-0.4)


def _one_step(spec, n):
    part = make_partition(spec.a, spec.b, n)
    segs = [segment_update(spec, s, part, OPTS) for s in init_multi(spec, n)]
    return part, segs


def test_sweep_examples_constant_forcing():
    spec = polynomialize(0, 2, "1", Boundary(0.0, 0.0))
    part, segs = _one_step(spec, 2)
    assert [s.I for s in segs] == pytest.approx([1.0, 1.0])
    assert [s.J for s in segs] == pytest.approx([0.5, 0.5])
    b1 = beta1_update(segs, spec, part)
    assert b1 == pytest.approx(-0.5)
    assert gamma_sweep(segs, spec, part, b1) == pytest.approx([-1.0, 0.0])
    assert beta_sweep(segs, spec, part, [-1.0, 0.0]) == []


def test_beta_sweep_n3_instantiation():
    spec = polynomialize(0, 3, "1", Boundary(0.0, 0.0))
    part, segs = _one_step(spec, 3)
    b1 = beta1_update(segs, spec, part)
    gammas = gamma_sweep(segs, spec, part, b1)
    (beta2,) = beta_sweep(segs, spec, part, gammas)
    assert beta2 == pytest.approx(0 - gammas[2] - 0.5)


def test_straight_line_data():
    spec = line_spec(0, 1, 1.0, 4.0)
    for n in (2, 3, 5):
        part, segs = _one_step(spec, n)
        b1 = beta1_update(segs, spec, part)
        assert b1 == pytest.approx((4.0 + (n - 1) * 1.0) / n)
        gammas = gamma_sweep(segs, spec, part, b1)
        assert gammas == pytest.approx([3.0] * n)
        inner = beta_sweep(segs, spec, part, gammas)
        assert inner == pytest.approx([1.0 + 3.0 * j / n for j in range(2, n)])


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_straight_line_exact_after_one_iteration(n):
    spec = line_spec(0, 2, 1.0, -3.0)
    sol = solve_multi(spec, n, SolveOptions(max_iterations=1, gamma_tol=0, state_tol=0))
    t = np.linspace(0, 2, 101)
    np.testing.assert_allclose(sol.evaluate(t), 1.0 - 2.0 * t, atol=1e-14)
    for c in sol.continuity_report:
        assert c.value_jump <= 1e-14 and c.slope_jump <= 1e-14


def test_straight_line_converges():
    sol = solve_multi(line_spec(), 4)
    assert sol.converged
    assert all(c.value_jump == 0.0 and c.slope_jump == 0.0 for c in sol.continuity_report)


def test_harmonic_pi4_two_segments():
    spec = polynomialize(0, math.pi / 4, "-y", Boundary(1.0, math.sqrt(2)))
    sol = solve_multi(spec, 2)
    assert sol.converged
    for c in sol.continuity_report:
        assert c.value_jump < 1e-6 and c.slope_jump < 1e-6
    t = np.linspace(0, math.pi / 4, 201)
    assert np.max(np.abs(sol.evaluate(t) - (np.cos(t) + np.sin(t)))) < 1e-4


def test_nonpolynomial_rhs_on_segments():
    spec = polynomialize(0, 1.2, "-exp(-2*y)", Boundary(0.0, math.log(math.cos(1.2))))
    sol = solve_multi(spec, 3, SolveOptions(max_iterations=200))
    assert sol.converged
    t = np.linspace(0, 1.2, 201)
    assert np.max(np.abs(sol.evaluate(t) - np.log(np.cos(t)))) < 1e-6


def test_single_segment_matches_picard():
    spec = polynomialize(0, math.pi / 8, "-y", Boundary(1.0, 1.3))
    multi = solve_multi(spec, 1)
    single = solve(spec)
    assert multi.iterations_used == single.iterations_used
    for p, q in zip(multi.segments[0].states, single.final_states):
        assert p == q


def test_endpoints_pinned_every_iteration():
    spec = polynomialize(0, 1, "-y + t", Boundary(0.5, 2.0))
    sol = solve_multi(spec, 3, SolveOptions(max_iterations=10, gamma_tol=0, state_tol=0))
    for segs in sol.history:
        assert segs[0].beta_left == 0.5
        assert segs[0].y(0.0) == 0.5


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 6), st.floats(-1, 1), st.floats(-1, 1), st.sampled_from(["-y", "t*u - y^2", "exp(y)"]))
def test_telescoping_identity(n, alpha, beta, rhs):
    spec = polynomialize(0, 1, rhs, Boundary(alpha, beta))
    part = make_partition(0, 1, n)
    segs = init_multi(spec, n)
    for k in range(1, 6):
        segs, _ = multi_step(spec, segs, part, OPTS, k)
        gammas = [s.gamma for s in segs]
        I = [s.I for s in segs]
        for j in range(n):
            assert abs(gammas[j] - gammas[0] - sum(I[:j])) <= 1e-12 * max(1.0, abs(gammas[0]))


def test_contraction_under_multi_gate():
    # f = -L y + L/2 u has sum-norm Lipschitz constant 1.5 L
    L = 0.05
    spec = polynomialize(0, 1, f"-{L}*y + {L / 2}*u", Boundary(1.0, 2.0))
    gate = theorem_multi_gate(1.5 * L, 0, 1, 3)
    assert gate.passed
    sol = solve_multi(spec, 3, SolveOptions(max_iterations=30))
    assert sol.converged
    d = sol.deltas
    for prev, cur in zip(d[2:], d[3:]):
        assert cur / prev <= gate.lhs + 0.05
