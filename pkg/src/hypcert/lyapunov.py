"""Weighted functionals along trajectories.

    W_{1,p} = ( int sum_i f_i^p u_i^{2p} e^{-2 p mu s_i x} dx )^{1/2p}
    W_{2,p} = same with u replaced by u_t = -Lambda u_x - M u
    V       = sup_{i,x} sqrt(f_i)|u_i| e^{-mu s_i x} + sup_{i,x} sqrt(f_i)|u_t,i| e^{-mu s_i x}

As p grows, W_{1,p} + W_{2,p} tends to V (the sum of the two sup-norms).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.stats import linregress

from .errors import DecayedToZero
from .model import as_values
from .simulator import derived_ut

DEFAULT_P = 64
ZERO_REL = 1e-13
COLUMNS = ("t", "V", "W1p", "W2p", "sup_u", "sup_ut")


def _weights(profile):
    return np.asarray(profile.f if hasattr(profile, "f") else profile, dtype=float)


def _tilt(spec, mu):
    return -mu * spec.signs[:, None] * spec.x[None, :]


def _wp(spec, f, v, p, mu):
    if p < 1:
        raise ValueError("p must be >= 1")
    av = np.abs(v)
    if not np.any(av):
        return 0.0
    # log of f^p u^{2p} e^{-2p mu s x}, scaled by 1/(2p): log(sqrt f |u| e^{-mu s x})
    with np.errstate(divide="ignore"):
        lg = 0.5 * np.log(f) + np.log(av) + _tilt(spec, mu)
    top = float(np.max(lg))
    integrand = np.exp(2 * p * (lg - top)).sum(axis=0)
    integral = float(np.trapezoid(integrand, dx=spec.dx))
    return float(np.exp(top) * integral ** (1.0 / (2 * p)))


def w1p(spec, profile, u, p: int) -> float:
    """W_{1,p} by trapezoidal quadrature, accumulated relative to the integrand max."""
    mu = getattr(profile, "mu", 0.0)
    return _wp(spec, _weights(profile), as_values(u, spec), p, mu)


def w2p(spec, profile, u, p: int) -> float:
    """W_{2,p}: the same functional evaluated on u_t."""
    mu = getattr(profile, "mu", 0.0)
    return _wp(spec, _weights(profile), derived_ut(spec, u).values, p, mu)


def _weighted_sup(spec, f, v, mu):
    return float(np.max(np.sqrt(f) * np.abs(v) * np.exp(_tilt(spec, mu))))


def v_c1(spec, profile, u, tilt=False) -> float:
    """Basic C^1 functional: weighted sup of u plus weighted sup of u_t.

    The exponential tilt e^{-mu s_i x} is applied only when ``tilt`` is set.
    """
    f = _weights(profile)
    mu = getattr(profile, "mu", 0.0) if tilt else 0.0
    v = as_values(u, spec)
    return (_weighted_sup(spec, f, v, mu)
            + _weighted_sup(spec, f, derived_ut(spec, v).values, mu))


def equivalence_constant(spec, profile, tilt=False):
    """c with (sup|u| + sup|u_t|)/c <= V <= c (sup|u| + sup|u_t|)."""
    f = _weights(profile)
    mu = abs(getattr(profile, "mu", 0.0)) if tilt else 0.0
    return max(np.sqrt(f.max()), 1.0 / np.sqrt(f.min())) * np.exp(mu * spec.L)


@dataclass(eq=False)
class LyapunovSeries:
    times: np.ndarray
    V: np.ndarray
    W1p: np.ndarray
    W2p: np.ndarray
    sup_u: np.ndarray
    sup_ut: np.ndarray
    gamma_fit: float = np.nan
    r_squared: float = np.nan
    p_used: int = DEFAULT_P
    window: tuple = field(default=None)

    def __post_init__(self):
        for name in COLUMNS[1:] + ("times",):
            setattr(self, name, np.asarray(getattr(self, name), dtype=float))
        n = len(self.times)
        if any(len(getattr(self, c)) != n for c in COLUMNS[1:]):
            raise ValueError("series columns must have equal length")

    def __len__(self):
        return len(self.times)

    def summary(self):
        out = dict(n_samples=len(self), p_used=int(self.p_used),
                   V_first=float(self.V[0]) if len(self) else None,
                   V_last=float(self.V[-1]) if len(self) else None)
        if np.isfinite(self.gamma_fit):
            out.update(gamma_fit=float(self.gamma_fit), r_squared=float(self.r_squared),
                       window=[float(w) for w in self.window])
        return out


def build_series(spec, profile, snapshots, p=DEFAULT_P, tilt=False) -> LyapunovSeries:
    """Evaluate every functional on a list of simulator snapshots."""
    rows = []
    for s in snapshots:
        v = as_values(s.u, spec)
        ut = derived_ut(spec, v).values
        rows.append((s.t, v_c1(spec, profile, v, tilt=tilt), w1p(spec, profile, v, p),
                     w2p(spec, profile, v, p), float(np.max(np.abs(v))),
                     float(np.max(np.abs(ut)))))
    cols = np.array(rows, dtype=float).reshape(-1, 6).T
    return LyapunovSeries(*cols, p_used=p)


def fit_gamma(series: LyapunovSeries, window):
    """Least-squares decay rate of log V on [t_a, t_b]; returns (gamma, r^2).

    The series is updated in place with the fit.
    """
    ta, tb = window
    t, V = series.times, series.V
    sel = (t >= ta - 1e-12) & (t <= tb + 1e-12)
    if np.count_nonzero(sel) < 2:
        raise ValueError(f"window [{ta}, {tb}] holds fewer than two samples")
    ref = float(np.max(V)) if len(V) else 0.0
    if ref <= 0 or np.any(V[sel] <= ZERO_REL * ref):
        raise DecayedToZero(f"V vanishes on the window [{ta}, {tb}]")
    fit = linregress(t[sel], np.log(V[sel]))
    gamma, r2 = -float(fit.slope), float(fit.rvalue ** 2)
    series.gamma_fit, series.r_squared, series.window = gamma, r2, (float(ta), float(tb))
    return gamma, r2


@dataclass(frozen=True)
class DecreaseVerdict:
    ok: bool
    worst: float        # max_k V_{k+1}/V_k - 1
    worst_time: float

    def __bool__(self):
        return self.ok


def verify_decrease(series: LyapunovSeries, tol_growth=1e-3) -> DecreaseVerdict:
    V, t = series.V, series.times
    if len(V) < 2:
        return DecreaseVerdict(True, -np.inf, np.nan)
    prev, nxt = V[:-1], V[1:]
    with np.errstate(divide="ignore", invalid="ignore"):
        growth = np.where(prev > 0, nxt / prev - 1.0, np.where(nxt > 0, np.inf, -1.0))
    k = int(np.argmax(growth))
    worst = float(growth[k])
    return DecreaseVerdict(worst <= tol_growth, worst, float(t[k + 1]))


def write_series_csv(series: LyapunovSeries, path):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COLUMNS)
        for row in zip(series.times, series.V, series.W1p, series.W2p,
                       series.sup_u, series.sup_ut):
            w.writerow([repr(float(x)) for x in row])


def read_series_csv(path, p_used=DEFAULT_P) -> LyapunovSeries:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    cols = {c: [float(r[c]) for r in rows] for c in COLUMNS}
    return LyapunovSeries(times=cols["t"], V=cols["V"], W1p=cols["W1p"], W2p=cols["W2p"],
                          sup_u=cols["sup_u"], sup_ut=cols["sup_ut"], p_used=p_used)
