"""Numerical exercise of the polynomial-positivity lemma.

For coefficient fields a_i(x), b_ij(x) the lemma links

    (i)   sum_i ( a_i y_i^{2p} + sum_j b_ij y_i^{2p-1} y_j ) > 0  for all y != 0, large p
    (ii)  a_i >= sum_{j != i} |b_ij| - b_ii
    (iii) a_i >  sum_{j != i} |b_ij| - b_ii

with (i) => (ii) and (iii) => (i). Negative brute-force minima are exact
certificates that (i) fails at that p; positive minima hold only up to the
grid resolution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import CombinatorialLimit, NotFound, ValidationError

TINY = 1e-300


@dataclass(frozen=True, eq=False)
class LemmaInstance:
    a: np.ndarray  # (n, nx)
    b: np.ndarray  # (n, n, nx)

    def __post_init__(self):
        a = np.array(self.a, dtype=float)
        b = np.array(self.b, dtype=float)
        if a.ndim == 1:
            a = a[:, None]
        if b.ndim == 2:
            b = np.repeat(b[:, :, None], a.shape[1], axis=2)
        if b.shape != (a.shape[0], a.shape[0], a.shape[1]):
            raise ValidationError(f"b: shape {b.shape} incompatible with a: {a.shape}")
        if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
            raise ValidationError("a, b: non-finite entry")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @property
    def n(self):
        return self.a.shape[0]

    @property
    def nx(self):
        return self.a.shape[1]


@dataclass(frozen=True)
class MarginReport:
    holds: bool
    margins: np.ndarray


@dataclass(frozen=True)
class BruteForceResult:
    minimum: float
    node: int
    y: np.ndarray
    dropped_bound: float
    exact_negative: bool


def _margins(inst):
    idx = np.arange(inst.n)
    absb = np.abs(inst.b)
    off = absb.sum(axis=1) - absb[idx, idx, :]
    return inst.a - off + inst.b[idx, idx, :]


def check_iii(inst: LemmaInstance) -> MarginReport:
    m = _margins(inst)
    return MarginReport(bool(np.all(m > 0)), m)


def check_ii(inst: LemmaInstance, tol=1e-12) -> MarginReport:
    m = _margins(inst)
    return MarginReport(bool(np.all(m >= -tol)), m)


def lemma_sum(inst, p, y, node):
    """Direct evaluation of the degree-2p form at one node (test helper)."""
    y = np.asarray(y, dtype=float)
    a, b = inst.a[:, node], inst.b[:, :, node]
    return float(np.sum(a * y ** (2 * p) + y ** (2 * p - 1) * (b @ y)))


def brute_force_i(inst: LemmaInstance, p: int, resolution: int = 201,
                  max_points: int = 5_000_000) -> BruteForceResult:
    """Global minimum of the form over {max_i |y_i| = 1} and all nodes.

    The form is homogeneous of even degree, so S(-y) = S(y): fixing the
    maximal coordinate to +1 covers both signs. The other n - 1 coordinates
    run over a uniform grid of [-1, 1].
    """
    if p < 1 or resolution < 3:
        raise ValueError("need p >= 1 and resolution >= 3")
    n = inst.n
    if n > 6 or resolution ** max(n - 1, 0) * n > max_points:
        raise CombinatorialLimit(f"n={n} at resolution {resolution} exceeds the cost guard")
    q = 2 * p - 1
    grid = np.linspace(-1.0, 1.0, resolution)
    free = (np.stack(np.meshgrid(*([grid] * (n - 1)), indexing="ij"), axis=-1)
            .reshape(-1, n - 1) if n > 1 else np.zeros((1, 0)))
    best = (np.inf, 0, None)
    dropped = 0.0
    bmax = np.abs(inst.b).sum(axis=1).max(axis=1)  # per-row sup_x sum_j |b_ij|
    for i1 in range(n):
        Y = np.insert(free, i1, 1.0, axis=1)           # (P, n)
        with np.errstate(under="ignore"):
            yq = np.sign(Y) * np.abs(Y) ** q
        small = (np.abs(yq) < TINY) & (Y != 0)
        yq[small] = 0.0
        if np.any(small):
            dropped = max(dropped, float(np.sum((np.abs(inst.a).max(axis=1) + bmax))) * TINY)
        for j in range(inst.nx):
            a, b = inst.a[:, j], inst.b[:, :, j]
            vals = (yq * (a * Y + Y @ b.T)).sum(axis=1)
            k = int(np.argmin(vals))
            if vals[k] < best[0]:
                best = (float(vals[k]), j, Y[k].copy())
    val, node, y = best
    return BruteForceResult(minimum=val, node=node, y=y, dropped_bound=dropped,
                            exact_negative=val < -dropped)


def p_analytic(inst: LemmaInstance) -> int:
    """Sufficient exponent from the constructive (iii) => (i) estimate.

    After folding b_ii into a_i, d_i = a_i - sum_{k != i} |b_ik| and
    p = ceil( sum_{i,k} sup|b_ik| / (2 min_i min_x d_i) ).
    """
    idx = np.arange(inst.n)
    absb = np.abs(inst.b).copy()
    absb[idx, idx, :] = 0.0
    d = inst.a + inst.b[idx, idx, :] - absb.sum(axis=1)
    dmin = float(np.min(d))
    if dmin <= 0:
        raise ValueError("(iii) does not hold strictly")
    total = float(absb.max(axis=2).sum())
    return max(1, math.ceil(total / (2.0 * dmin)))


@dataclass(frozen=True)
class P1Result:
    p: int
    p_analytic: int
    minimum: float


def find_p1(inst: LemmaInstance, p_max: int = 1024, resolution: int = 201) -> P1Result:
    """Smallest p in {1, 2, 4, ...} with a positive brute-force minimum."""
    pa = p_analytic(inst)
    p = 1
    while p <= p_max:
        r = brute_force_i(inst, p, resolution)
        if r.minimum > 0:
            return P1Result(p, pa, r.minimum)
        p *= 2
    raise NotFound(f"no p <= {p_max} gives a positive minimum")
