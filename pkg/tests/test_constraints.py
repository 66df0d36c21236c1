import numpy as np
import pytest
from hypothesis import given
import hypothesis.strategies as st

from truncrd.constraints import (
    ConsistencySpec,
    ConstraintSystem,
    DistortionBall,
    MarkovChainSpec,
    check_ball,
    check_membership,
    restrict_support,
)
from truncrd.errors import InfeasibleError, LayoutMismatchError
from truncrd.extended import INFINITE
from truncrd.pmf import AlphabetLayout, ExtendedDistortionVector, JointPmf
from truncrd.scenarios import build_dsbs, build_erasure_distortion

from conftest import pmf_arrays

LAY = AlphabetLayout.of(X=2, Y=2, U=3)


def markov_pmf(pxy, w):
    """p(x,y) W(u|x): satisfies U - X - Y by construction."""
    return JointPmf(LAY, (pxy[:, :, None] * w[:, None, :]).ravel())


def test_markov_parse_and_residual():
    ch = MarkovChainSpec.parse("U - X - Y")
    assert (ch.a, ch.b, ch.c) == (("U",), ("X",), ("Y",))
    ch2 = MarkovChainSpec.parse("X - U,Y - Xh")
    assert ch2.b == ("Y", "U")
    with pytest.raises(ValueError):
        MarkovChainSpec.parse("X - Y")
    with pytest.raises(ValueError):
        MarkovChainSpec(("X",), ("X",), ("Y",))


@given(pmf_arrays(3), pmf_arrays(3), st.floats(min_value=0.0, max_value=0.5))
def test_constructed_markov_pmf_is_member(w0, w1, eps):
    src = build_dsbs(eps)
    p = markov_pmf(src.table, np.stack([w0, w1]))
    sys = ConstraintSystem(LAY, (ConsistencySpec(src),), (MarkovChainSpec.parse("U - X - Y"),))
    v = check_membership(p, sys)
    assert v.feasible
    assert v.max_residual <= 1e-9


def test_membership_detects_violations():
    src = build_dsbs(0.1)
    sys = ConstraintSystem(LAY, (ConsistencySpec(src),), (MarkovChainSpec.parse("U - X - Y"),))
    # U copies Y: marginal is right but the chain fails
    t = np.zeros((2, 2, 3))
    for x in range(2):
        for y in range(2):
            t[x, y, y] = src.table[x, y]
    v = check_membership(JointPmf(LAY, t.ravel()), sys)
    assert not v.feasible and v.markov_residuals[0] > 0.1
    # wrong marginal
    u = JointPmf.uniform(LAY)
    v = check_membership(u, sys)
    assert not v.feasible and v.marginal_residuals[0] > 0.1


def test_membership_layout_mismatch():
    sys = ConstraintSystem(LAY)
    with pytest.raises(LayoutMismatchError):
        check_membership(JointPmf.uniform(AlphabetLayout.of(X=2)), sys)


def test_ball_validation_and_extended_feasibility():
    d = build_erasure_distortion(2)
    for bad in (-0.1, float("nan"), float("inf")):
        with pytest.raises(ValueError, match="D must be a finite nonnegative real"):
            DistortionBall(d, bad)
    lay = d.layout
    ok = JointPmf(lay, [0.4, 0.0, 0.1, 0.0, 0.5, 0.0])
    assert check_ball(ok, DistortionBall(d, 0.1)).feasible
    assert not check_ball(ok, DistortionBall(d, 0.09)).feasible
    bad = JointPmf(lay, [0.4, 0.1, 0.0, 0.0, 0.5, 0.0])
    v = check_ball(bad, DistortionBall(d, 100.0))
    assert not v.feasible and v.distortion is INFINITE


@given(pmf_arrays(6), st.floats(min_value=0.0, max_value=2.0))
def test_support_restriction_equivalence(m, D):
    # finite distortion under d_inf  <=>  mass only on the mask and masked inner product <= D
    d = build_erasure_distortion(2)
    sr = restrict_support(d.layout, d)
    m = np.where(d.infinite & (m < 0.2), 0.0, m)
    p = JointPmf(d.layout, m / m.sum())
    on_mask = not np.any(p.mass[~sr.mask] > 0)
    direct = check_ball(p, DistortionBall(d, D)).feasible
    assert direct == (on_mask and sr.masked_inner(p) <= D)


def test_restrict_support_all_infinite():
    lay = AlphabetLayout.of(X=2)
    d = ExtendedDistortionVector._raw(lay, np.zeros(2), np.ones(2, bool))
    with pytest.raises(InfeasibleError):
        restrict_support(lay, d)
