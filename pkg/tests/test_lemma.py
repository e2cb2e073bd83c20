import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hypcert.errors import CombinatorialLimit, NotFound, ValidationError
from hypcert.lemma import (LemmaInstance, brute_force_i, check_ii, check_iii, find_p1,
                           lemma_sum, p_analytic)

HALF = [[0, 0.5], [0.5, 0]]


def random_strict(rng, n=3, nx=3):
    """Instance with (iii) holding strictly at every node."""
    b = rng.uniform(-1, 1, size=(n, n, nx))
    idx = np.arange(n)
    absb = np.abs(b)
    off = absb.sum(axis=1) - absb[idx, idx, :]
    a = off - b[idx, idx, :] + rng.uniform(0.2, 1.0, size=(n, nx))
    return LemmaInstance(a, b)


def test_check_iii_trivial():
    r = check_iii(LemmaInstance(np.ones(2), np.zeros((2, 2))))
    assert r.holds and np.all(r.margins == 1.0)


def test_check_iii_half_coupling():
    r = check_iii(LemmaInstance([1.0, 1.0], HALF))
    assert r.holds and np.allclose(r.margins, 0.5)


def test_check_iii_fails_on_first_row():
    r = check_iii(LemmaInstance([0.4, 1.0], HALF))
    assert not r.holds
    assert r.margins[0, 0] < 0 < r.margins[1, 0]


def test_check_ii_tolerates_equality():
    inst = LemmaInstance([0.5, 0.5], HALF)
    assert check_ii(inst).holds and not check_iii(inst).holds


def test_instance_validation():
    with pytest.raises(ValidationError):
        LemmaInstance(np.ones(2), np.zeros((3, 3)))
    with pytest.raises(ValidationError):
        LemmaInstance([1.0, np.nan], HALF)


@pytest.mark.parametrize("p", [1, 3, 16])
def test_scalar_minimum(p):
    r = brute_force_i(LemmaInstance([1.0], [[-0.5]]), p)
    assert r.minimum == pytest.approx(0.5)
    assert abs(r.y[0]) == 1.0


def test_strict_positive_at_p8():
    r = brute_force_i(LemmaInstance([1.0, 1.0], HALF), 8, 201)
    assert r.minimum > 0


def test_violation_negative_at_p32():
    inst = LemmaInstance([1.0, 1.0], [[0, 1.5], [1.5, 0]])
    assert not check_ii(inst).holds
    r = brute_force_i(inst, 32, 201)
    assert r.minimum < 0 and r.exact_negative
    # the minimizer pairs a unit coordinate with an opposite-signed one near 1;
    # here the symmetric choice y = (1, -1) gives 2 - 3 = -1
    big, small = np.sort(np.abs(r.y))[::-1]
    assert big == 1.0 and small >= 0.9
    assert r.minimum == pytest.approx(-1.0)
    # the witness pattern from the necessity argument is also negative
    m = 20
    assert lemma_sum(inst, 32, [1.0, -m / (m + 1)], 0) < 0
    assert np.sign(r.y[0]) != np.sign(r.y[1])
    assert lemma_sum(inst, 32, r.y, r.node) == pytest.approx(r.minimum, rel=1e-9)


def test_minimum_is_sampled_value():
    inst = random_strict(np.random.default_rng(3))
    r = brute_force_i(inst, 4, 41)
    assert lemma_sum(inst, 4, r.y, r.node) == pytest.approx(r.minimum, rel=1e-9, abs=1e-15)


def test_cost_guard():
    inst = LemmaInstance(np.ones(7), np.zeros((7, 7)))
    with pytest.raises(CombinatorialLimit):
        brute_force_i(inst, 2)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([[1, 0, 2], [2, 1, 0], [0, 2, 1]]))
def test_permutation_invariance(seed, perm):
    inst = random_strict(np.random.default_rng(seed), nx=2)
    pa = np.array(perm)
    swapped = LemmaInstance(inst.a[pa], inst.b[np.ix_(pa, pa)])
    r1 = brute_force_i(inst, 2, 21)
    r2 = brute_force_i(swapped, 2, 21)
    assert r1.minimum == pytest.approx(r2.minimum, rel=1e-12, abs=1e-15)


def test_p_analytic_hand_value():
    assert p_analytic(LemmaInstance([1.0, 1.0], HALF)) == 1


def test_find_p1_trivial():
    r = find_p1(LemmaInstance(np.ones(3), np.zeros((3, 3))), resolution=21)
    assert r.p == 1


def test_find_p1_half_coupling():
    r = find_p1(LemmaInstance([1.0, 1.0], HALF))
    assert r.p <= r.p_analytic == 1


@pytest.mark.parametrize("seed", range(50))
def test_find_p1_within_analytic_bound(seed):
    inst = random_strict(np.random.default_rng(seed), nx=2)
    r = find_p1(inst, resolution=41)
    assert r.p <= r.p_analytic
    # monotone beyond the found exponent
    for q in (2 * r.p, 4 * r.p):
        assert brute_force_i(inst, q, 41).minimum > 0


def test_find_p1_not_found():
    inst = LemmaInstance([1.0, 1.0], [[0, 1.5], [1.5, 0]])
    with pytest.raises((NotFound, ValueError)):
        find_p1(inst, p_max=8, resolution=21)
