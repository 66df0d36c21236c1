import math

import numpy as np
import pytest
import hypothesis.strategies as st
from hypothesis import given

from truncrd.errors import LayoutMismatchError
from truncrd.extended import INFINITE, ext_add, ext_mul, ext_sum, to_extended
from truncrd.pmf import (
    AlphabetLayout,
    ExtendedDistortionVector,
    JointPmf,
    as_factors,
    cmi_gradient,
    conditional_mutual_information,
    expected_distortion,
    marginalize,
)

from conftest import h2, pmf_arrays

LAY = AlphabetLayout.of(X=2, Y=3, U=2)
ext_values = st.one_of(st.just(INFINITE), st.floats(min_value=0.0, max_value=1e6))


# extended reals

@given(ext_values, ext_values, ext_values)
def test_ext_add_commutative_associative(a, b, c):
    assert ext_add(a, b) == ext_add(b, a)
    left, right = ext_add(ext_add(a, b), c), ext_add(a, ext_add(b, c))
    if left is INFINITE or right is INFINITE:
        assert left is right
    else:
        assert left == pytest.approx(right, rel=1e-12)


@given(ext_values)
def test_zero_annihilates_and_infinite_absorbs(a):
    assert ext_mul(0.0, a) == 0.0
    assert ext_mul(a, 0.0) == 0.0
    assert ext_add(INFINITE, a) is INFINITE


def test_infinite_is_singleton_and_ordered():
    import copy
    import pickle

    assert copy.deepcopy(INFINITE) is INFINITE
    assert pickle.loads(pickle.dumps(INFINITE)) is INFINITE
    assert INFINITE > 1e308 and not INFINITE < 5
    assert float(INFINITE) == math.inf
    assert ext_mul(2.0, INFINITE) is INFINITE
    assert ext_sum([1.0, 2.0, INFINITE]) is INFINITE
    assert ext_sum([1.0, 2.5]) == 3.5


@pytest.mark.parametrize("bad", [-1.0, float("nan"), float("-inf")])
def test_to_extended_rejects(bad):
    with pytest.raises(ValueError):
        to_extended(bad)


def test_to_extended_accepts_inf_spellings():
    assert to_extended("inf") is INFINITE
    assert to_extended(float("inf")) is INFINITE
    assert to_extended(3) == 3.0


# layouts and pmfs

def test_layout_canonical_order_and_lookup():
    lay = AlphabetLayout.of(Xh=3, X=2)
    assert lay.factors == ("X", "Xh") and lay.shape == (2, 3)
    assert lay.k == 6
    assert lay.axes("xhat") == (1,)
    assert lay.coord(lay.index((1, 2))) == (1, 2)
    with pytest.raises(LayoutMismatchError):
        lay.axes("U")
    with pytest.raises(ValueError):
        AlphabetLayout(("Xh", "X"), (3, 2))
    assert as_factors("U, X") == ("X", "U")


def test_pmf_validation():
    lay = AlphabetLayout.of(X=2)
    with pytest.raises(ValueError):
        JointPmf(lay, [0.5, 0.6])
    with pytest.raises(ValueError):
        JointPmf(lay, [1.5, -0.5])
    with pytest.raises(LayoutMismatchError):
        JointPmf(lay, [1.0])
    p = JointPmf(lay, [0.25, 0.75])
    with pytest.raises(ValueError):
        p.mass[0] = 1.0


def test_distortion_vector_rejects_all_infinite():
    lay = AlphabetLayout.of(X=2)
    with pytest.raises(ValueError, match="at least one finite distortion entry required"):
        ExtendedDistortionVector(lay, [INFINITE, INFINITE])
    d = ExtendedDistortionVector(lay, ["inf", 1.0])
    assert d[0] is INFINITE and d[1] == 1.0
    assert d <= ExtendedDistortionVector(lay, [INFINITE, 2.0])
    assert not ExtendedDistortionVector(lay, [INFINITE, 2.0]) <= d


# information measures

@given(pmf_arrays(12))
def test_cmi_nonnegative_and_symmetric(m):
    p = JointPmf(LAY, m)
    a = conditional_mutual_information(p, "X", "Y", "U")
    b = conditional_mutual_information(p, "Y", "X", "U")
    assert a >= 0
    assert a == pytest.approx(b, abs=1e-12)


@given(pmf_arrays(12))
def test_chain_rule(m):
    p = JointPmf(LAY, m)
    lhs = conditional_mutual_information(p, "X", ("Y", "U"))
    rhs = conditional_mutual_information(p, "X", "U") + conditional_mutual_information(p, "X", "Y", "U")
    assert lhs == pytest.approx(rhs, abs=1e-10)


@given(pmf_arrays(2), pmf_arrays(3), pmf_arrays(2))
def test_cmi_zero_on_product(px, py, pu):
    p = JointPmf(LAY, np.einsum("i,j,k->ijk", px, py, pu).ravel())
    assert conditional_mutual_information(p, "X", "Y", "U") == pytest.approx(0.0, abs=1e-12)
    assert conditional_mutual_information(p, "X", ("Y", "U")) == pytest.approx(0.0, abs=1e-12)


@given(st.floats(min_value=0.0, max_value=0.5))
def test_bsc_mutual_information(eps):
    lay = AlphabetLayout.of(X=2, Y=2)
    p = JointPmf(lay, [(1 - eps) / 2, eps / 2, eps / 2, (1 - eps) / 2])
    assert conditional_mutual_information(p, "X", "Y") == pytest.approx(1 - float(h2(eps)), abs=1e-12)


def test_cmi_gradient_matches_finite_differences():
    rng = np.random.default_rng(3)
    t = rng.dirichlet(np.ones(12)).reshape(LAY.shape)
    val, g = cmi_gradient(t, (0,), (1,), (2,))
    h = 1e-7
    for idx in [(0, 0, 0), (1, 2, 1), (0, 1, 1)]:
        tp = t.copy()
        tp[idx] += h
        vp, _ = cmi_gradient(tp, (0,), (1,), (2,))
        assert (vp - val) / h == pytest.approx(g[idx], rel=1e-4, abs=1e-6)


@given(pmf_arrays(12))
def test_marginalize_sums(m):
    p = JointPmf(LAY, m)
    q = marginalize(p, "X,U")
    assert q.layout.factors == ("X", "U")
    np.testing.assert_allclose(q.table, p.table.sum(axis=1), atol=1e-14)


def test_expected_distortion_zero_times_infinite():
    lay = AlphabetLayout.of(X=2, Xh=2)
    d = ExtendedDistortionVector(lay, [0.0, INFINITE, 1.0, 0.0])
    assert expected_distortion(JointPmf(lay, [0.5, 0.0, 0.25, 0.25]), d) == pytest.approx(0.25)
    assert expected_distortion(JointPmf(lay, [0.5, 1e-300, 0.25, 0.25 - 1e-300]), d) is INFINITE
