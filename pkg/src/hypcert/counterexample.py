"""Necessity counterexample: sharp bump initial data with dV/dt(0) > 0.

When the interior inequality fails at some x0 for row i*, initial data built
from the normalized bump psi_0 make the basic C^1 functional V increase at
t = 0, so V cannot be a Lyapunov function with those weights.

psi_0 = chi * exp(-n1 y^2) / d, with chi the smoothstep cutoff (1 on
|y| <= 1/2, 0 on |y| >= 1) and d = max_y |psi_1 - psi_1'| e^{-y}.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .errors import InconclusiveError, PreconditionError, ResolutionError, SupportError
from .interior import WeightProfile, check_strict_interior
from .lyapunov import v_c1
from .model import GridFunction, as_values, resample, resample_values
from .simulator import derived_ut, run


def _choixn(n1):
    return math.exp(-n1 / 4.0 + 1.0) * (1 + 2 * n1)


def min_n1(limit=10_000) -> int:
    """Smallest positive integer with e^{1 - n1/4}(1 + 2 n1) <= 1/3."""
    prev = None
    for n1 in range(1, limit):
        h = _choixn(n1)
        # h is decreasing from n1 = 4 on (d/dn log h = -1/4 + 2/(1+2n) < 0)
        if n1 > 4 and prev is not None and h >= prev:
            raise RuntimeError("scan left the decreasing branch")
        if h <= 1.0 / 3.0:
            return n1
        prev = h
    raise RuntimeError("no admissible n1 below the scan limit")


def y_minus(n1):
    return (-1.0 - math.sqrt(2.0 * n1)) / (2.0 * n1)


def y_plus(n1):
    return (-1.0 + math.sqrt(2.0 * n1)) / (2.0 * n1)


def y2(n1):
    return -1.0 / (2.0 * n1)


def d_norm(n1):
    """max_y |psi_1 - psi_1'| e^{-y}, attained on the plateau at y_-.

    On |y| <= 1/2 the quantity is |1 + 2 n1 y| e^{-n1 y^2 - y}; both critical
    points y_+- give sqrt(2 n1) e^{(1 - 2 n1)/(4 n1)}.
    """
    return math.sqrt(2.0 * n1) * math.exp((1.0 - 2.0 * n1) / (4.0 * n1))


def _chi(y):
    a = np.abs(y)
    s = np.sign(y)
    t = np.clip(2.0 * (a - 0.5), 0.0, 1.0)
    flank = (a > 0.5) & (a < 1.0)
    c0 = np.where(a <= 0.5, 1.0, np.where(flank, 1.0 - 3 * t**2 + 2 * t**3, 0.0))
    c1 = np.where(flank, 2.0 * s * (-6 * t + 6 * t**2), 0.0)
    c2 = np.where(flank, 4.0 * (-6.0 + 12.0 * t), 0.0)
    return c0, c1, c2


def psi0_eval(n1: int, y):
    """(psi_0, psi_0', psi_0'') at y, all analytic."""
    y = np.asarray(y, dtype=float)
    g = np.exp(-n1 * y**2)
    g1 = -2.0 * n1 * y * g
    g2 = (4.0 * n1**2 * y**2 - 2.0 * n1) * g
    c0, c1, c2 = _chi(y)
    d = d_norm(n1)
    return (c0 * g) / d, (c1 * g + c0 * g1) / d, (c2 * g + 2 * c1 * g1 + c0 * g2) / d


@dataclass(frozen=True)
class BumpSpec:
    n1: int
    y1: float
    d_norm: float
    m: int
    u1_0: float
    k: int
    x0: float
    i_star: Optional[int] = None

    def __post_init__(self):
        if _choixn(self.n1) > 1.0 / 3.0:
            raise ValueError(f"n1={self.n1} violates e^(1-n1/4)(1+2 n1) <= 1/3")
        if not -0.5 < self.y1 < 0.5:
            raise ValueError("y1 must lie in (-1/2, 1/2)")
        if self.m < 1 or self.k < 1 or self.u1_0 <= 0 or self.d_norm <= 0:
            raise ValueError("m, k, u1_0 and d_norm must be positive")

    @classmethod
    def default(cls, x0, m=200, k=10, u1_0=1e-3, i_star=None):
        n1 = min_n1()
        return cls(n1=n1, y1=y_minus(n1), d_norm=d_norm(n1), m=int(m), u1_0=float(u1_0),
                   k=int(k), x0=float(x0), i_star=i_star)

    @property
    def half_width(self):
        return (1.0 + abs(self.y1)) / self.m


def _violation_margins(spec, profile, x0):
    """Left side of the violated interior inequality at x0, one entry per row.

    Equals half the interior margin; negative entries are violations.
    """
    margins = 0.5 * check_strict_interior(spec, profile)
    return np.array([np.interp(x0, spec.x, row) for row in margins])


def resolve_i_star(spec, profile, bump, tol=None):
    """Violated row at x0, or PreconditionError if the inequality holds there."""
    lhs = _violation_margins(spec, profile, bump.x0)
    if tol is None:
        tol = 1e-8 * (1.0 + float(np.max(np.abs(spec.source))))
    if bump.i_star is not None:
        i = int(bump.i_star)
        if lhs[i] >= -tol:
            raise PreconditionError(f"row {i} satisfies the interior inequality at "
                                    f"x0={bump.x0} (margin {lhs[i]:.3e})")
        return i, lhs
    i = int(np.argmin(lhs))
    if lhs[i] >= -tol:
        raise PreconditionError(f"no interior violation at x0={bump.x0}: "
                                f"margins {np.array2string(lhs, precision=4)}")
    return i, lhs


def amplitudes(spec, bump, i_star):
    """u_i^0 = -u^0 (1 - 1/k) sgn(M_{i* i}(x0)) for i != i*, u_{i*}^0 = u^0.

    If the two smallest |lambda_i(x0)| tie and both differ from i*, the
    lower of the two indices is rescaled with k_2 = 2k so that a single
    component dominates |u_i^0 / lambda_i|.
    """
    lam, M = spec.coefficients_at(bump.x0)
    amp = -bump.u1_0 * (1 - 1.0 / bump.k) * np.sign(M[i_star])
    amp[i_star] = bump.u1_0
    if spec.n >= 2:
        order = np.argsort(np.abs(lam), kind="stable")
        a, b = order[0], order[1]
        tied = abs(abs(lam[a]) - abs(lam[b])) <= 1e-12 * abs(lam[a])
        if tied and i_star not in (a, b):
            i0 = min(a, b)
            amp[i0] = -bump.u1_0 * (1 - 1.0 / (2 * bump.k)) * np.sign(M[i_star, i0])
    return amp


def build_initial_data(spec, profile, bump: BumpSpec, i_star=None) -> GridFunction:
    """Sampled u_i(0, x) = (u_i^0/m) chi(x) e^{-z}/(lambda_i(x) sqrt(f_i(x))).

    z = s m (x - x0) + y1 with s = sgn(lambda_{i*}) and chi(x) = psi_0(z); for
    s = -1 this is the mirror image of the s = +1 construction.
    """
    if spec.dx > 1.0 / (10 * bump.m) * (1 + 1e-12):
        raise ResolutionError(f"dx={spec.dx:.3e} exceeds 1/(10 m)={1 / (10 * bump.m):.3e}")
    if bump.x0 - bump.half_width <= 0 or bump.x0 + bump.half_width >= spec.L:
        raise SupportError(f"bump support around x0={bump.x0} leaves (0, {spec.L})")
    if i_star is None:
        i_star = 0 if bump.i_star is None else int(bump.i_star)
    f = np.asarray(profile.f if hasattr(profile, "f") else profile, dtype=float)
    s = spec.signs[i_star]
    z = s * bump.m * (spec.x - bump.x0) + bump.y1
    chi = psi0_eval(bump.n1, z)[0]
    shape = np.where(chi != 0.0, chi * np.exp(-np.clip(z, -50, 50)), 0.0)
    amp = amplitudes(spec, bump, i_star)
    u = (amp[:, None] / bump.m) * shape[None, :] / (spec.lam * np.sqrt(f))
    return GridFunction(u, spec.L)


@dataclass
class SlopeEstimate:
    slope: float
    slope_half: float
    noise: float
    positive: bool
    times: np.ndarray
    V: np.ndarray
    i_star: int
    nx: int
    terms: dict = field(default_factory=dict)
    predicted: float = float("nan")

    def to_dict(self):
        """Report form; component indices are shifted to 1-based."""
        terms = dict(self.terms)
        for key in ("row_ut", "row_u"):
            if key in terms:
                terms[key] += 1
        return dict(slope=self.slope, slope_half=self.slope_half, noise=self.noise,
                    positive=self.positive, times=[float(t) for t in self.times],
                    V=[float(v) for v in self.V], i_star=self.i_star + 1, nx=self.nx,
                    analytic_terms=terms, predicted_leading=self.predicted)


def _richardson(V, h):
    """One-sided derivative at t=0 from 5 equally spaced samples.

    Richardson extrapolation of forward differences to fourth order.
    """
    return float((-25 * V[0] + 48 * V[1] - 36 * V[2] + 16 * V[3] - 3 * V[4]) / (12 * h))


def _v_samples(spec, profile, u0, span, cfl):
    snaps = run(spec, u0, span, cfl=cfl, cadence=span / 4, check_compat=False)
    return (np.array([s.t for s in snaps]),
            np.array([v_c1(spec, profile, s.u, tilt=True) for s in snaps]))


def dv_dt_at_zero(spec, profile, bump: BumpSpec, cfl=1.0, refine=8, horizon=0.02):
    """Short-horizon estimate of dV/dt(0) for the bump initial data.

    The system is resampled so that dx = delta / refine with delta = horizon/m,
    then simulated over [0, delta] and [0, delta/2]. Each run yields V at five
    equally spaced times and a Richardson slope; the difference of the two
    slopes is the noise estimate, and the verdict is positive iff
    slope > 10 * noise. Opposite signs raise InconclusiveError.
    """
    i_star, _ = resolve_i_star(spec, profile, bump)
    bump = replace(bump, i_star=i_star)
    delta = horizon / bump.m
    nx = int(math.ceil(spec.L * refine / delta)) + 1
    fine = resample(spec, nx) if nx > spec.nx else spec
    fvals = np.asarray(profile.f if hasattr(profile, "f") else profile, dtype=float)
    fine_f = WeightProfile(resample_values(fvals, spec.L, fine.nx),
                           mu=getattr(profile, "mu", 0.0))
    u0 = build_initial_data(fine, fine_f, bump, i_star)
    t, V = _v_samples(fine, fine_f, u0, delta, cfl)
    th, Vh = _v_samples(fine, fine_f, u0, delta / 2, cfl)
    s_full = _richardson(V, delta / 4)
    s_half = _richardson(Vh, delta / 8)
    noise = abs(s_full - s_half)
    if np.sign(s_full) != np.sign(s_half):
        raise InconclusiveError(f"slope signs disagree: {s_full:.4e} vs {s_half:.4e}",
                                slopes=(s_full, s_half))
    return SlopeEstimate(slope=s_full, slope_half=s_half, noise=noise,
                         positive=bool(s_full > 10 * noise), times=t, V=V,
                         i_star=i_star, nx=fine.nx,
                         terms=dvdt_terms(fine, fine_f, u0, i_star),
                         predicted=float(predicted_rate(fine, fine_f, bump, i_star)))


def dvdt_terms(spec, profile, u0, i_star):
    """Analytic decomposition of dV/dt(0) at the sup-norm maximizers.

    Returns a dict with the u_t-sup term sgn(u_t)(x_1) sqrt(f)(x_1) u_tt(x_1),
    the u-sup term sgn(u)(x_a) sqrt(f)(x_a) u_t(x_a), their sum, the
    maximizing nodes, and the row attaining the u_t sup.
    """
    f = np.asarray(profile.f if hasattr(profile, "f") else profile, dtype=float)
    v = as_values(u0, spec)
    ut = derived_ut(spec, v).values
    utt = derived_ut(spec, ut).values  # the system is linear and autonomous
    sq = np.sqrt(f)
    i1, j1 = np.unravel_index(np.argmax(sq * np.abs(ut)), ut.shape)
    ia, ja = np.unravel_index(np.argmax(sq * np.abs(v)), v.shape)
    term_ut = float(np.sign(ut[i1, j1]) * sq[i1, j1] * utt[i1, j1])
    term_u = float(np.sign(v[ia, ja]) * sq[ia, ja] * ut[ia, ja])
    return dict(term_ut=term_ut, term_u=term_u, total=term_ut + term_u,
                row_ut=int(i1), x1=float(spec.x[j1]), row_u=int(ia), xa=float(spec.x[ja]),
                row_ut_is_i_star=bool(i1 == i_star))


def predicted_rate(spec, profile, bump, i_star):
    """Leading-order dV/dt(0) as m -> infinity.

    u^0 [ lambda f' / (2 f) - M_ii + sum_{j != i, M_ij != 0} |M_ij| (1 - 1/k) sqrt(f_i/f_j) ]
    for i = i*, evaluated at x0.
    """
    f = np.asarray(profile.f if hasattr(profile, "f") else profile, dtype=float)
    fp = getattr(profile, "fprime", None)
    if fp is None:
        fp = np.gradient(f, spec.dx, axis=1, edge_order=2)
    at = lambda a: np.array([np.interp(bump.x0, spec.x, r) for r in a])  # noqa: E731
    fx, fpx = at(f), at(fp)
    lam, M = spec.coefficients_at(bump.x0)
    i = i_star
    coupling = sum(abs(M[i, j]) * (1 - 1.0 / bump.k) * math.sqrt(fx[i] / fx[j])
                   for j in range(spec.n) if j != i)
    return bump.u1_0 * (lam[i] * fpx[i] / (2 * fx[i]) - M[i, i] + coupling)
