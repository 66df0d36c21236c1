import numpy as np
import pytest
from hypothesis import given, settings
import hypothesis.strategies as st

from truncrd.constraints import DistortionBall, check_ball, check_membership
from truncrd.errors import LayoutMismatchError
from truncrd.extended import INFINITE
from truncrd.objective import evaluate
from truncrd.pmf import AlphabetLayout, ExtendedDistortionVector, JointPmf
from truncrd.scenarios import (
    build_dsbs,
    build_erasure_distortion,
    build_hamming_distortion,
    conditional_problem,
    lift_distortion,
    shannon_problem,
    wyner_ziv_problem,
)
from truncrd.solvers import (
    SolverOptions,
    Status,
    blahut_arimoto_rd,
    conditional_rd,
    solve,
    solve_psi,
    solve_psi_limit,
    wyner_ziv_rd,
)
from truncrd.truncation import make_truncated

from conftest import h2

UNIFORM = JointPmf(AlphabetLayout.of(X=2), [0.5, 0.5])
HAM = np.array([[0.0, 1.0], [1.0, 0.0]])


def wz_dsbs_hamming(p, D, grid=20001):
    """Lower convex envelope of h(p*D) - h(D) on [0, p) with the point (p, 0)."""
    if D >= p:
        return 0.0
    g = lambda t: float(h2(p * (1 - t) + (1 - p) * t) - h2(t))  # noqa: E731
    best = g(D)
    for dc in np.linspace(0, D, grid)[:-1]:
        best = min(best, (p - D) / (p - dc) * g(dc))
    return best


# Blahut-Arimoto

@given(st.floats(min_value=0.0, max_value=0.6))
def test_ba_binary_hamming_closed_form(D):
    r = blahut_arimoto_rd(UNIFORM, HAM, D)
    want = 1 - float(h2(D)) if D < 0.5 else 0.0
    assert r.status is Status.OPTIMAL
    assert r.value == pytest.approx(want, abs=1e-6)


@given(st.floats(min_value=0.05, max_value=0.95), st.floats(min_value=0.0, max_value=0.5))
def test_ba_biased_source(q, D):
    # R(D) = h(q) - h(D) for D < min(q, 1 - q)
    r = blahut_arimoto_rd(JointPmf(AlphabetLayout.of(X=2), [q, 1 - q]), HAM, D)
    want = max(float(h2(q) - h2(D)), 0.0) if D < min(q, 1 - q) else 0.0
    assert r.value == pytest.approx(want, abs=1e-6)


def test_ba_argmin_meets_distortion():
    r = blahut_arimoto_rd(UNIFORM, HAM, 0.2)
    t = r.argmin.table
    assert float(np.sum(t * HAM)) <= 0.2 + 1e-8
    np.testing.assert_allclose(t.sum(axis=1), [0.5, 0.5], atol=1e-12)


def test_ba_infeasible_and_bad_input():
    d = np.array([[1.0, 2.0], [2.0, 1.0]])
    assert blahut_arimoto_rd(UNIFORM, d, 0.5).status is Status.INFEASIBLE
    with pytest.raises(LayoutMismatchError):
        blahut_arimoto_rd(build_dsbs(0.1), HAM, 0.1)


@pytest.mark.parametrize("M", [2.0, 4.0, 16.0])
def test_truncated_erasure_below_limit(M):
    d = np.array([[0.0, M, 1.0], [M, 0.0, 1.0]])
    r = blahut_arimoto_rd(UNIFORM, d, 0.25)
    assert r.value <= 0.75 + 1e-9


def test_conditional_rd_dsbs_hamming():
    # R_{X|Y}(D) = h(p) - h(D) for D <= p
    src = build_dsbs(0.25)
    d = np.broadcast_to(HAM[:, None, :], (2, 2, 2))
    for D in (0.05, 0.1, 0.2):
        r = conditional_rd(src, d, D)
        assert r.value == pytest.approx(float(h2(0.25) - h2(D)), abs=1e-6)


def test_conditional_with_constant_side_info_is_shannon():
    rng = np.random.default_rng(1)
    px = rng.dirichlet(np.ones(3))
    d = rng.uniform(0, 1, (3, 3))
    pxy = JointPmf(AlphabetLayout.of(X=3, Y=1), px)
    for D in (0.1, 0.3):
        a = blahut_arimoto_rd(JointPmf(AlphabetLayout.of(X=3), px), d, D)
        b = conditional_rd(pxy, d[:, None, :], D)
        assert a.status == b.status
        if a.feasible:
            assert a.value == pytest.approx(b.value, abs=1e-7)


# Wyner-Ziv

@pytest.mark.parametrize("D", [0.05, 0.1, 0.2, 0.3])
def test_wz_dsbs_hamming_envelope(D):
    r = wyner_ziv_rd(build_dsbs(0.25), HAM, D, 3, SolverOptions(restarts=8))
    assert r.value == pytest.approx(wz_dsbs_hamming(0.25, D), abs=1e-4)


def test_wz_erasure_limit_value():
    # with erasure distortion U must reveal X or erase it, so the limit is (1 - D) h(p)
    r = wyner_ziv_rd(build_dsbs(0.25), build_erasure_distortion(2), 0.25, 3, SolverOptions(restarts=8))
    assert r.value == pytest.approx(0.75 * float(h2(0.25)), abs=1e-6)


def test_wz_infeasible_below_min_distortion():
    d = np.array([[0.5, 1.0], [1.0, 0.5]])
    r = wyner_ziv_rd(build_dsbs(0.1), d, 0.2, 3)
    assert r.status is Status.INFEASIBLE


def test_wz_seed_determinism():
    opts = SolverOptions(restarts=6, seed=11)
    a = wyner_ziv_rd(build_dsbs(0.2), HAM, 0.1, 3, opts)
    b = wyner_ziv_rd(build_dsbs(0.2), HAM, 0.1, 3, opts)
    assert a.value == b.value
    np.testing.assert_array_equal(a.argmin.mass, b.argmin.mass)


# generic penalty solver against the specialized ones

@pytest.mark.parametrize("D", [0.0, 0.1, 0.3])
def test_generic_matches_ba(D):
    pr = shannon_problem(UNIFORM, 2)
    d = lift_distortion(build_hamming_distortion(2), pr.layout)
    g = solve_psi(pr, DistortionBall(d, D), SolverOptions(restarts=4))
    assert g.status is Status.LOCAL
    assert g.value == pytest.approx(1 - float(h2(D)), abs=1e-5)


def test_generic_erasure_limit_by_support_restriction():
    pr = shannon_problem(UNIFORM, 3)
    d = lift_distortion(build_erasure_distortion(2), pr.layout)
    r = solve_psi_limit(pr, d, 0.25, SolverOptions(restarts=4, method="generic"))
    assert r.value == pytest.approx(0.75, abs=1e-6)
    assert r.diagnostics["solver"] == "generic"
    assert np.all(r.argmin.mass[d.infinite] == 0.0)


def test_generic_conditional_matches_slope_solver():
    src = build_dsbs(0.25)
    pr = conditional_problem(src, 2)
    d = lift_distortion(build_hamming_distortion(2), pr.layout)
    ball = DistortionBall(d, 0.1)
    a = solve(pr, ball, SolverOptions(restarts=4))
    b = solve(pr, ball, SolverOptions(restarts=4, method="generic"))
    assert a.diagnostics["solver"] == "conditional"
    assert b.value == pytest.approx(a.value, abs=1e-4)


@pytest.mark.slow
def test_generic_wz_encoding_agrees_with_deterministic_decoder():
    # the chain X - (U,Y) - Xh in the joint layout and the deterministic-decoder form give the same value
    pr = wyner_ziv_problem(build_dsbs(0.25), 3, 3)
    d = lift_distortion(build_erasure_distortion(2), pr.layout)
    ball = DistortionBall(make_truncated(d, 16), 0.25)
    spec = solve(pr, ball, SolverOptions(restarts=8))
    gen = solve(pr, ball, SolverOptions(restarts=8, method="generic"))
    assert spec.diagnostics["solver"] == "wyner-ziv"
    assert gen.value == pytest.approx(spec.value, abs=2e-3)
    assert check_membership(gen.argmin, pr.constraints, eps_markov=1e-6).feasible


def test_generic_results_are_verified_feasible():
    pr = shannon_problem(JointPmf(AlphabetLayout.of(X=3), [0.2, 0.3, 0.5]), 3)
    rng = np.random.default_rng(4)
    d = ExtendedDistortionVector(pr.layout, rng.uniform(0, 1, 9))
    ball = DistortionBall(d, 0.3)
    r = solve_psi(pr, ball, SolverOptions(restarts=4))
    if r.feasible:
        assert check_ball(r.argmin, ball, tol=1e-8).feasible
        assert check_membership(r.argmin, pr.constraints).feasible
        assert evaluate(pr.objective, r.argmin) == pytest.approx(r.value, abs=1e-12)


def test_generic_workers_do_not_change_result():
    pr = shannon_problem(UNIFORM, 3)
    d = lift_distortion(build_erasure_distortion(2), pr.layout)
    ball = DistortionBall(make_truncated(d, 4.0), 0.25)
    a = solve_psi(pr, ball, SolverOptions(restarts=6, seed=5))
    b = solve_psi(pr, ball, SolverOptions(restarts=6, seed=5, workers=3))
    assert a.value == b.value
    np.testing.assert_array_equal(a.argmin.mass, b.argmin.mass)


def test_solve_psi_rejects_infinite_costs():
    pr = shannon_problem(UNIFORM, 3)
    d = lift_distortion(build_erasure_distortion(2), pr.layout)
    with pytest.raises(ValueError):
        solve_psi(pr, DistortionBall(d, 0.25))


def test_limit_infeasible_when_D_below_min():
    pr = shannon_problem(UNIFORM, 3)
    d = ExtendedDistortionVector(pr.layout, [0.5, INFINITE, 1.0, INFINITE, 0.5, 1.0])
    r = solve_psi_limit(pr, d, 0.25)
    assert r.status is Status.INFEASIBLE


# further worked cases and solver-level properties

def test_conditional_rd_side_info_equal_to_source():
    pxy = JointPmf(AlphabetLayout.of(X=2, Y=2), [0.3, 0.0, 0.0, 0.7])
    d = np.broadcast_to(HAM[:, None, :], (2, 2, 2))
    assert conditional_rd(pxy, d, 0.0).value == pytest.approx(0.0, abs=1e-9)


def test_conditional_rd_matches_grid_oracle():
    from truncrd.solvers import oracle_grid

    pr = conditional_problem(build_dsbs(0.25), 2)
    d = lift_distortion(build_hamming_distortion(2), pr.layout)
    ball = DistortionBall(d, 0.1)
    br = oracle_grid(pr, ball, 32)
    assert br.contains(solve(pr, ball).value, tol=1e-6)


def test_wz_matches_channel_grid_oracle():
    from truncrd.solvers import oracle_grid

    pr = wyner_ziv_problem(build_dsbs(0.25), 2, 3)
    d = lift_distortion(build_hamming_distortion(2), pr.layout)
    ball = DistortionBall(d, 0.1)
    br = oracle_grid(pr, ball, 64)
    v = solve(pr, ball, SolverOptions(restarts=8)).value
    assert br.contains(v, tol=1e-6)
    assert br.upper - v < 0.01


def test_wz_zero_when_constant_u_suffices():
    r = wyner_ziv_rd(build_dsbs(0.1), HAM, 0.3, 3)
    assert r.value == 0.0


def test_generic_independence_feasible_gives_zero():
    from truncrd.constraints import ConsistencySpec, ConstraintSystem
    from truncrd.objective import ObjectiveSpec
    from truncrd.solvers import ProblemSpec

    src = build_dsbs(0.2)
    lay = AlphabetLayout.of(X=2, Y=2, Xh=2)
    pr = ProblemSpec(lay, ObjectiveSpec.single("X", "Xh"), ConstraintSystem(lay, (ConsistencySpec(src),)))
    d = lift_distortion(build_hamming_distortion(2), lay)
    r = solve_psi(pr, DistortionBall(d, 1.0), SolverOptions(restarts=4))
    assert r.value == pytest.approx(0.0, abs=1e-9)


def test_limit_with_finite_costs_is_truncated_solve():
    pr = shannon_problem(JointPmf(AlphabetLayout.of(X=2), [0.3, 0.7]), 2)
    d = lift_distortion(build_hamming_distortion(2), pr.layout)
    opts = SolverOptions(restarts=4, method="generic")
    a = solve_psi_limit(pr, d, 0.1, opts)
    b = solve_psi(pr, DistortionBall(d, 0.1), opts)
    assert a.value == b.value


@settings(max_examples=25)
@given(st.floats(0.05, 0.95), st.lists(st.floats(0.0, 2.0), min_size=4, max_size=4),
       st.floats(0.0, 1.0), st.floats(0.0, 1.0))
def test_value_monotone_in_D(q, cost, D1, D2):
    px = JointPmf(AlphabetLayout.of(X=2), [q, 1 - q])
    c = np.asarray(cost).reshape(2, 2)
    lo, hi = sorted((D1, D2))
    a, b = blahut_arimoto_rd(px, c, lo), blahut_arimoto_rd(px, c, hi)
    if a.feasible:
        assert b.feasible and a.value >= b.value - 1e-6


@settings(max_examples=25)
@given(st.floats(0.05, 0.95), st.lists(st.floats(0.0, 2.0), min_size=4, max_size=4),
       st.lists(st.floats(0.0, 1.0), min_size=4, max_size=4), st.floats(0.0, 1.5))
def test_value_monotone_in_distortion(q, cost, extra, D):
    px = JointPmf(AlphabetLayout.of(X=2), [q, 1 - q])
    c = np.asarray(cost).reshape(2, 2)
    c2 = c + np.asarray(extra).reshape(2, 2)
    a, b = blahut_arimoto_rd(px, c, D), blahut_arimoto_rd(px, c2, D)
    if b.feasible:
        assert a.feasible and a.value <= b.value + 1e-6


# truncated erasure of a uniform bit, from a direct search over the symmetric
# channel (erase w.p. a, flip w.p. b, D = a + M b); frozen at 7 decimals
_SYM_ERASURE = {
    3: (0.5861831, 0.3499776, 0.1735606),
    4: (0.6627099, 0.4395732, 0.2197867),
    5: (0.7100829, 0.4733887, 0.2366943),
    8: (0.7456438, 0.4970959, 0.2485479),
}


@pytest.mark.parametrize("M", sorted(_SYM_ERASURE))
def test_ba_truncated_erasure_straight_segment(M):
    # R(D) has a straight piece ending at (1, 0); a stalled slope search once overshot it
    px = JointPmf(AlphabetLayout.of(X=2), [0.5, 0.5])
    c = np.array([[0.0, M, 1.0], [M, 0.0, 1.0]])
    for D, ref in zip((0.25, 0.5, 0.75), _SYM_ERASURE[M]):
        r = blahut_arimoto_rd(px, c, D)
        assert r.status is Status.OPTIMAL
        assert r.diagnostics["certificate_gap"] <= 1e-6
        assert r.value == pytest.approx(ref, abs=2e-6)
        assert r.value <= 1.0 - D + 1e-9
