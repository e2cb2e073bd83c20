"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v``; the verdict lines are
printed even when output capture is on.
"""

import math
import time

import numpy as np
import pytest
from conftest import bump, make_spec

from hypcert.boundary import perron_root, rho_inf
from hypcert.counterexample import BumpSpec, dv_dt_at_zero, min_n1, psi0_eval, y_minus
from hypcert.interior import WeightProfile, integrate_weights
from hypcert.lemma import LemmaInstance, brute_force_i, check_ii, check_iii, p_analytic
from hypcert.lyapunov import build_series, fit_gamma, v_c1, verify_decrease, w1p, w2p
from hypcert.model import check_compat_order0, check_compat_order1
from hypcert.report import certify_spec
from hypcert.simulator import run


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\ncriterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
        assert ok, detail
    return emit


def scaled_matrix(rng, n, target):
    K = rng.uniform(-1, 1, size=(n, n))
    return K * target / np.max(np.abs(np.linalg.eigvals(np.abs(K))))


def test_criterion_1_rho_oracle(verdict):
    rng = np.random.default_rng(0)
    t0 = time.perf_counter()
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(2, 7))
        K = rng.uniform(-1, 1, size=(n, n))
        value, _ = rho_inf(K)
        oracle, _, _ = perron_root(np.abs(K), iters=200)
        worst = max(worst, abs(value - oracle))
    elapsed = time.perf_counter() - t0
    verdict(1, worst <= 1e-6 and elapsed < 5,
            f"max |rho_inf - rho(|K|)| = {worst:.2e} over 100 matrices in {elapsed:.2f} s")


def test_criterion_2_source_free(verdict):
    rng = np.random.default_rng(1)
    agree, cases = 0, 0
    for seed in range(20):
        n = int(rng.integers(2, 4))
        m_pos = int(rng.integers(1, n + 1))
        lam = np.concatenate([rng.uniform(0.5, 2, m_pos), -rng.uniform(0.5, 2, n - m_pos)])
        good = make_spec(lam, K=scaled_matrix(rng, n, rng.uniform(0.3, 0.95)), nx=101)
        bad = make_spec(lam, K=scaled_matrix(rng, n, rng.uniform(1.05, 1.5)), nx=101)
        v_good = certify_spec(good, "", seed=seed).verdict
        v_bad = certify_spec(bad, "", seed=seed, constant_weights=True).verdict
        agree += (v_good == "certified") + (v_bad == "boundary-failed")
        cases += 2
    verdict(2, agree == cases, f"{agree}/{cases} verdicts agree with rho_inf (20 seeds)")


def test_criterion_3_interior_closed_form(verdict):
    worst = 0.0
    for c in (-2.0, -0.5, 0.5, 2.0):
        spec = make_spec([1.0], M=[[c]], L=1.0, nx=201)
        f = integrate_weights(spec, [1.7]).f[0]
        worst = max(worst, float(np.max(np.abs(f / (1.7 * np.exp(2 * c * spec.x)) - 1))))
    verdict(3, worst <= 1e-8, f"max relative error {worst:.2e} against f0 e^(2cx)")


def strict_instance(rng, nx=3):
    b = rng.uniform(-1, 1, size=(3, 3, nx))
    idx = np.arange(3)
    absb = np.abs(b)
    off = absb.sum(axis=1) - absb[idx, idx, :]
    return LemmaInstance(off - b[idx, idx, :] + rng.uniform(0.1, 1.0, size=(3, nx)), b)


def violating_instance(rng, nx=3):
    b = rng.uniform(-1, 1, size=(3, 3, nx))
    idx = np.arange(3)
    absb = np.abs(b)
    off = absb.sum(axis=1) - absb[idx, idx, :]
    margin = rng.uniform(0.1, 1.0, size=(3, nx))
    i0, j0 = int(rng.integers(3)), int(rng.integers(nx))
    off_i0 = off[i0, j0]
    # row i0 at node j0 falls short of its coupling by a fixed fraction
    b[i0, np.arange(3) != i0, j0] *= 1.0 + 0.5 / max(off_i0, 1e-3)
    absb = np.abs(b)
    off = absb.sum(axis=1) - absb[idx, idx, :]
    a = off - b[idx, idx, :] + margin
    a[i0, j0] = off_i0 - b[i0, i0, j0] - 0.3
    return LemmaInstance(a, b)


def test_criterion_4_lemma_round_trip(verdict):
    rng = np.random.default_rng(4)
    t0 = time.perf_counter()
    strict_ok = 0
    for _ in range(50):
        inst = strict_instance(rng)
        assert check_iii(inst).holds
        strict_ok += brute_force_i(inst, p_analytic(inst)).minimum > 0
    viol_ok = 0
    for _ in range(20):
        inst = violating_instance(rng)
        assert not check_ii(inst).holds
        viol_ok += brute_force_i(inst, 64).minimum < 0
    elapsed = time.perf_counter() - t0
    verdict(4, strict_ok == 50 and viol_ok == 20 and elapsed < 60,
            f"strict {strict_ok}/50 positive at p_analytic, violating {viol_ok}/20 negative "
            f"at p=64, {elapsed:.1f} s")


def test_criterion_5_decay_rate(verdict):
    spec = make_spec([1.0, -1.0], K=[[0, 0.5], [0.5, 0]], L=1.0, nx=2001)
    u0 = np.array([bump(spec.x, 0.1, 0.5), -0.7 * bump(spec.x, 0.4, 0.9)])
    t0 = time.perf_counter()
    snaps = run(spec, u0, 8.0, cfl=0.9, cadence=0.1)
    series = build_series(spec, WeightProfile.constant(spec), snaps)
    gamma, _ = fit_gamma(series, (2.0, 8.0))
    dec = verify_decrease(series, 1e-3)
    elapsed = time.perf_counter() - t0
    ok = 0.9 * math.log(2) <= gamma <= 1.1 * math.log(2) and dec.ok and elapsed < 30
    verdict(5, ok, f"gamma_fit = {gamma:.4f} (ln 2 = {math.log(2):.4f}), decrease ok = "
                   f"{dec.ok} (worst {dec.worst:.2e}), {elapsed:.1f} s")


def test_criterion_6_sup_norm_limit(verdict):
    spec = make_spec([1.0, -1.0], M=[[0.2, 0.5], [-0.3, 0.1]], L=1.0, nx=2001)
    prof = WeightProfile(np.array([1.0 + spec.x, 2.0 - 0.5 * spec.x]))
    rng = np.random.default_rng(6)
    ratios = []
    for _ in range(10):
        u = np.zeros((2, spec.nx))
        for i in range(2):
            for _ in range(3):
                a = rng.uniform(0.0, 0.7)
                u[i] += rng.uniform(-1, 1) * bump(spec.x, a, a + rng.uniform(0.1, 0.3))
        target = v_c1(spec, prof, u)
        gap = {p: abs(w1p(spec, prof, u, p) + w2p(spec, prof, u, p) - target)
               for p in (32, 256)}
        ratios.append(gap[256] / gap[32])
    verdict(6, max(ratios) <= 0.25,
            f"gap(p=256)/gap(p=32) at most {max(ratios):.3f} over 10 states")


def test_criterion_7_counterexample(verdict):
    spec = make_spec([1.0, -1.0], M=[[0, 5], [0, 0]], L=1.0, nx=201)
    prof = WeightProfile.constant(spec)
    t0 = time.perf_counter()
    est = {m: dv_dt_at_zero(spec, prof, BumpSpec.default(0.5, m=m)) for m in (200, 400)}
    elapsed = time.perf_counter() - t0
    ok = all(e.positive for e in est.values()) and elapsed < 60
    verdict(7, ok, "slopes " + ", ".join(f"m={m}: {e.slope:.4e} (noise {e.noise:.1e})"
                                         for m, e in est.items()) + f", {elapsed:.1f} s")


def test_criterion_8_psi0(verdict):
    n1 = min_n1()
    y = np.linspace(-1.0, 1.0, 100_001)
    p, p1, _ = psi0_eval(n1, y)
    g = np.abs(p - p1) * np.exp(-y)
    ym = y_minus(n1)
    near = int(np.argmin(np.abs(y - ym)))
    h = np.abs(p) * np.exp(-y)
    y_top = float(y[np.argmax(h)])
    ok = (n1 == 24 and abs(g.max() - 1) <= 1e-6 and abs(g[near] - g.max()) <= 1e-6
          and abs(y[near] - ym) <= 1e-3 and abs(y_top + 1 / 48) <= 1e-3)
    verdict(8, ok, f"n1 = {n1}, max |psi0 - psi0'| e^-y = {g.max():.9f} "
                   f"(value at y_- {g[near]:.9f}), argmax |psi0| e^-y = {y_top:.5f}")


def test_criterion_9_compatibility(verdict):
    spec = make_spec([1.0, -1.0], K=[[0, 0.5], [0.5, 0]], nx=201)
    zero = np.zeros((2, spec.nx))
    bumps = np.array([bump(spec.x, 0.2, 0.6), bump(spec.x, 0.3, 0.8)])
    exact = all(c(spec, u).residual == 0.0 for u in (zero, bumps)
                for c in (check_compat_order0, check_compat_order1))
    hand = make_spec([1.0, -1.0], nx=201)
    r = check_compat_order1(hand, np.array([hand.x, np.zeros(hand.nx)])).residual
    verdict(9, exact and abs(r - 1) <= 1e-10,
            f"zero/bump residuals exactly 0: {exact}; hand case residual {r:.12f}")
