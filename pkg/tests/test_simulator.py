import numpy as np
import pytest
from conftest import bump, make_spec

from hypcert.errors import CflViolation, CompatibilityError, NonFinite
from hypcert.model import GridFunction
from hypcert.simulator import TrajectoryState, cfl_dt, derived_ut, run, step

HALF = [[0, 0.5], [0.5, 0]]


def two_way(nx, K=HALF):
    return make_spec([1.0, -1.0], K=K, L=1.0, nx=nx)


def initial(x):
    return np.array([bump(x, 0.1, 0.5), -0.7 * bump(x, 0.4, 0.9)])


def characteristics(x, t, k12=0.5, k21=0.5):
    """Exact solution of the Lambda = (1, -1), L = 1 loop with u1(0) = k12 u2(0),
    u2(1) = k21 u1(1), traced back along characteristics."""
    def u1(t, x):
        if x >= t:
            return initial(np.array([x - t]))[0, 0]
        return k12 * u2(t - x, 0.0)

    def u2(t, x):
        if x + t <= 1.0:
            return initial(np.array([x + t]))[1, 0]
        return k21 * u1(t - (1.0 - x), 1.0)

    return np.array([[u1(t, xi) for xi in x], [u2(t, xi) for xi in x]])


def test_zero_stays_zero():
    spec = two_way(101)
    snaps = run(spec, np.zeros((2, 101)), 1.0, cadence=0.25)
    assert all(np.all(s.u.values == 0) for s in snaps)


def test_t_end_zero():
    spec = two_way(101)
    u0 = initial(spec.x)
    snaps = run(spec, u0, 0.0)
    assert len(snaps) == 1 and np.array_equal(snaps[0].u.values, u0)


def test_transport_out():
    spec = make_spec([1.0], L=1.0, nx=1001)
    w = 0.2
    u0 = bump(spec.x, 0.5 - w / 2, 0.5 + w / 2)[None, :]
    snaps = run(spec, u0, 0.5 + w)
    assert np.max(np.abs(snaps[-1].u.values)) <= 1e-2 * np.max(np.abs(u0))


def test_decay_against_characteristics():
    spec = two_way(2001)
    snaps = run(spec, initial(spec.x), 2.0, cadence=0.1)
    assert len(snaps) == 21
    assert [s.t for s in snaps] == pytest.approx(np.linspace(0, 2, 21))
    exact = characteristics(spec.x, 2.0)
    err = np.max(np.abs(snaps[-1].u.values - exact))
    assert err <= 0.1 * np.max(np.abs(exact))
    # the envelope halves per unit time
    sup = [np.max(np.abs(s.u.values)) for s in snaps]
    for t0 in (0, 10):
        assert sup[t0 + 10] / sup[t0] == pytest.approx(0.5, rel=0.1)


def test_first_order_convergence():
    errs = []
    for nx in (401, 801, 1601):
        spec = two_way(nx)
        u = run(spec, initial(spec.x), 1.5)[-1].u.values
        errs.append(np.max(np.abs(u - characteristics(spec.x, 1.5))))
    for coarse, fine in zip(errs, errs[1:]):
        assert 0.3 <= fine / coarse <= 0.7


def test_outflow_monotone():
    spec = two_way(501, K=np.zeros((2, 2)))
    snaps = run(spec, initial(spec.x), 1.2, cadence=0.02)
    sup = np.array([np.max(np.abs(s.u.values)) for s in snaps])
    assert np.all(np.diff(sup) <= 1e-12)


def test_permutation_feedback_conserves_sup():
    spec = two_way(2001, K=[[0, 1], [1, 0]])
    snaps = run(spec, initial(spec.x), 2.0)
    s0, s1 = (np.max(np.abs(s.u.values)) for s in snaps)
    assert abs(s1 / s0 - 1) <= 0.02


def test_deterministic():
    spec = two_way(301)
    a = run(spec, initial(spec.x), 0.7, cadence=0.1)
    b = run(spec, initial(spec.x), 0.7, cadence=0.1)
    assert all(np.array_equal(p.u.values, q.u.values) for p, q in zip(a, b))


def test_derived_ut_sine():
    errs = []
    for nx in (101, 201):
        spec = make_spec([1.0], L=2.0, nx=nx)
        ut = derived_ut(spec, np.sin(np.pi * spec.x / 2.0)[None, :]).values[0]
        errs.append(np.max(np.abs(ut + np.pi / 2.0 * np.cos(np.pi * spec.x / 2.0))))
    assert errs[1] / errs[0] == pytest.approx(0.25, abs=0.05)
    assert errs[1] < 1e-3


def test_derived_ut_equilibrium():
    c = 0.8
    spec = make_spec([2.0], M=[[c]], nx=201)
    u = np.exp(-c * spec.x / 2.0)[None, :]  # 2 u' + c u = 0
    assert np.max(np.abs(derived_ut(spec, u).values)) < 1e-4
    assert np.all(derived_ut(spec, np.zeros((1, 201))).values == 0)


def test_step_matches_run():
    spec = two_way(201)
    u0 = initial(spec.x)
    dt = cfl_dt(spec, 0.9)
    s = TrajectoryState(0.0, GridFunction(u0, spec.L), dt, 0.9)
    for _ in range(10):
        s = step(spec, s)
    ref = run(spec, u0, 10 * dt)[-1]
    assert s.t == pytest.approx(10 * dt)
    assert np.allclose(s.u.values, ref.u.values, atol=1e-14)


def test_step_boundary_feedback():
    spec = two_way(101)
    u0 = initial(spec.x)
    s = step(spec, TrajectoryState(0.0, GridFunction(u0, spec.L), cfl_dt(spec, 0.5), 0.5))
    v = s.u.values
    assert v[0, 0] == 0.5 * v[1, 0] and v[1, -1] == 0.5 * v[0, -1]


def test_cfl_violation():
    spec = two_way(101)
    u0 = GridFunction(initial(spec.x), spec.L)
    with pytest.raises(CflViolation):
        step(spec, TrajectoryState(0.0, u0, 2 * cfl_dt(spec, 1.0), 1.0))
    with pytest.raises(CflViolation):
        run(spec, u0, 1.0, cfl=1.5)


def test_non_finite():
    spec = make_spec([1.0], M=[[-1e300]], nx=11)
    u0 = GridFunction(np.full((1, 11), 1e10), 1.0)
    with pytest.raises(NonFinite):
        step(spec, TrajectoryState(0.0, u0, cfl_dt(spec, 0.5), 0.5))


def test_incompatible_data_rejected():
    spec = two_way(101)
    with pytest.raises(CompatibilityError):
        run(spec, np.ones((2, 101)), 0.5)


def test_nonlinear_feedback_evaluator():
    spec = two_way(401)
    u0 = initial(spec.x)
    lin = run(spec, u0, 1.5)[-1].u.values
    via = run(spec, u0, 1.5, g_eval=lambda v: np.asarray(HALF) @ v)[-1].u.values
    assert np.array_equal(lin, via)
