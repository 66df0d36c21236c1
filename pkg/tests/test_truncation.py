import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from truncrd.constraints import DistortionBall, check_ball
from truncrd.errors import InfeasibleError
from truncrd.extended import INFINITE
from truncrd.pmf import AlphabetLayout, ExtendedDistortionVector, JointPmf
from truncrd.scenarios import build_erasure_distortion, build_hamming_distortion, lift_distortion, shannon_problem
from truncrd.solvers import SolverOptions
from truncrd.truncation import TruncationSchedule, converge_sweep, make_truncated

UNIFORM = JointPmf(AlphabetLayout.of(X=2), [0.5, 0.5])
LAY = AlphabetLayout.of(X=2, Xh=3)

costs = st.lists(st.one_of(st.just(INFINITE), st.floats(0.0, 50.0)), min_size=6, max_size=6).filter(
    lambda v: any(x is not INFINITE for x in v))


@given(costs, st.floats(0.1, 100.0))
def test_truncation_is_min_with_cap(vals, M):
    d = ExtendedDistortionVector(LAY, vals)
    dt = make_truncated(d, M)
    assert dt.all_finite
    assert dt <= d
    for v, t in zip(vals, dt.to_list()):
        assert t == (M if v is INFINITE else min(v, M))


@given(costs, st.lists(st.floats(0.5, 1e4), min_size=2, max_size=6, unique=True))
def test_truncations_increase_with_cap(vals, caps):
    d = ExtendedDistortionVector(LAY, vals)
    sched = TruncationSchedule(d, tuple(sorted(caps)))
    for n in range(1, len(sched)):
        assert sched.truncated(n) <= sched.truncated(n + 1)


@given(costs, st.lists(st.floats(0, 1), min_size=6, max_size=6), st.floats(0.01, 1.0),
       st.floats(0.0, 5.0))
def test_nested_balls(vals, w, M, D):
    # feasibility under the larger cap implies feasibility under the smaller one
    d = ExtendedDistortionVector(LAY, vals)
    m = np.asarray(w) + 1e-3
    p = JointPmf(LAY, m / m.sum())
    lo, hi = make_truncated(d, M), make_truncated(d, 2 * M)
    if check_ball(p, DistortionBall(hi, D)).feasible:
        assert check_ball(p, DistortionBall(lo, D)).feasible
    if check_ball(p, DistortionBall(d, D)).feasible:
        assert check_ball(p, DistortionBall(hi, D)).feasible


def test_schedule_validation():
    d = build_erasure_distortion(2)
    with pytest.raises(ValueError, match="caps must be strictly increasing"):
        TruncationSchedule(d, (4.0, 2.0))
    with pytest.raises(ValueError):
        TruncationSchedule(d, (0.0, 1.0))
    assert TruncationSchedule.geometric(d, 3).caps == (2.0, 4.0, 8.0)
    assert TruncationSchedule.arithmetic(d, 3, 0.5).caps == (0.5, 1.0, 1.5)
    with pytest.raises(ValueError):
        make_truncated(d, float("inf"))


def test_erasure_sweep_converges_monotonically():
    pr = shannon_problem(UNIFORM, 3)
    d = lift_distortion(build_erasure_distortion(2), pr.layout)
    rep = converge_sweep(pr, TruncationSchedule.geometric(d, 8), 0.25, tol=1e-6)
    assert rep.ok
    assert rep.psi_inf == pytest.approx(0.75, abs=1e-9)
    v = rep.values
    assert all(b >= a - 1e-9 for a, b in zip(v, v[1:]))
    assert rep.first_within_tol is not None and rep.first_within_tol <= 5
    assert "psi_inf" in rep.summary()


def test_sweep_finite_distortion_truncation_inactive():
    pr = shannon_problem(UNIFORM, 2)
    d = lift_distortion(build_hamming_distortion(2), pr.layout)
    rep = converge_sweep(pr, TruncationSchedule.geometric(d, 4), 0.1)
    assert max(abs(g) for g in rep.gaps) <= 1e-6


def test_sweep_raises_on_infeasible_limit():
    pr = shannon_problem(UNIFORM, 3)
    d = ExtendedDistortionVector(pr.layout, [0.5, INFINITE, 1.0, INFINITE, 0.5, 1.0])
    with pytest.raises(InfeasibleError):
        converge_sweep(pr, TruncationSchedule.geometric(d, 3), 0.1, opts=SolverOptions(restarts=2))


def test_make_truncated_examples():
    lay = AlphabetLayout.of(X=3)
    assert make_truncated(ExtendedDistortionVector(lay, [0.0, 1.0, INFINITE]), 10).to_list() == [0.0, 1.0, 10.0]
    d = build_hamming_distortion(2)
    assert make_truncated(d, 5.0) == d
    er = make_truncated(build_erasure_distortion(2), 4.0).to_list()
    assert er == [0.0, 4.0, 1.0, 4.0, 0.0, 1.0]


def test_always_erase_at_D_one():
    pr = shannon_problem(UNIFORM, 3)
    d = lift_distortion(build_erasure_distortion(2), pr.layout)
    rep = converge_sweep(pr, TruncationSchedule.geometric(d, 5), 1.0)
    assert rep.psi_inf == 0.0
    assert all(v == pytest.approx(0.0, abs=1e-12) for v in rep.values)


def test_gap_sequence_nonincreasing():
    pr = shannon_problem(UNIFORM, 3)
    d = lift_distortion(build_erasure_distortion(2), pr.layout)
    for D in (0.1, 0.5, 0.75):
        g = converge_sweep(pr, TruncationSchedule.geometric(d, 8), D).gaps
        assert all(b <= a + 1e-6 for a, b in zip(g, g[1:]))
        assert min(g) >= -1e-6
