"""Boundary condition: scaled feedback gain against the endpoint weight ratio.

For positive diagonal Delta = diag(e^delta) the scaled gain is

    theta(K, Delta) = max_i sum_j |K_ij| Delta_i / Delta_j,

and the boundary inequality asks for

    theta < min_i f_i(d_i) / Delta_i^2  /  max_i f_i(L - d_i) / Delta_i^2.

In log coordinates both sides are convex, so the search minimizes

    J(delta) = log theta - log min_i f_i(d_i) e^{-2 delta_i}
                         + log max_i f_i(L - d_i) e^{-2 delta_i}

by normalized subgradient descent.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, OracleMismatch

TOL_BOUNDARY = 1e-9


@dataclass(eq=False)
class BoundaryCertificate:
    delta: np.ndarray
    theta: float
    ratio: float
    margin: float
    satisfied: bool
    objective: float = np.nan

    def __eq__(self, other):
        return (isinstance(other, BoundaryCertificate)
                and np.array_equal(self.delta, other.delta)
                and self.theta == other.theta and self.ratio == other.ratio
                and self.margin == other.margin and self.satisfied == other.satisfied)

    __hash__ = None


def theta(K, delta):
    """max_i sum_j |K_ij| delta_i / delta_j."""
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0) or not np.all(np.isfinite(delta)):
        raise DomainError(f"delta must be finite and positive, got {delta}")
    A = np.abs(np.asarray(K, dtype=float))
    return float(np.max((A * np.outer(delta, 1.0 / delta)).sum(axis=1)))


def scaled_norm(K, delta, p=np.inf):
    """||Delta K Delta^{-1}||_p (induced matrix norm) at a fixed scaling."""
    delta = np.asarray(delta, dtype=float)
    if np.any(delta <= 0):
        raise DomainError("delta must be positive")
    S = np.asarray(K, dtype=float) * np.outer(delta, 1.0 / delta)
    return float(np.linalg.norm(S, ord=p))


def perron_root(A, iters=200, shift=None):
    """Perron root of a nonnegative matrix by shifted power iteration.

    Returns (estimate, lower, upper) where lower/upper are the Collatz-Wielandt
    bounds min_i (Ax)_i/x_i and max_i (Ax)_i/x_i at the final iterate.
    """
    A = np.abs(np.asarray(A, dtype=float))
    n = A.shape[0]
    if not np.any(A):
        return 0.0, 0.0, 0.0
    # shift breaks periodicity (eigenvalues of equal modulus on the circle)
    s = 0.5 * float(np.max(A.sum(axis=1))) if shift is None else shift
    B = A + s * np.eye(n)
    x = np.ones(n)
    for _ in range(iters):
        y = B @ x
        x = y / np.max(y)
    r = (A @ x) / x
    lo, hi = float(np.min(r)), float(np.max(r))
    return 0.5 * (lo + hi), lo, hi


def _perron_vector(A):
    """Right Perron vector via a dense eigensolver (independent of perron_root)."""
    w, V = np.linalg.eig(A)
    k = int(np.argmax(w.real))
    v = np.abs(V[:, k].real)
    v = v / np.max(v)
    return np.maximum(v, 1e-12)


def _log_theta_and_grad(A, z):
    S = A * np.exp(z[:, None] - z[None, :])
    rows = S.sum(axis=1)
    i = int(np.argmax(rows))
    th = rows[i]
    g = -S[i].copy()
    g[i] += th
    return np.log(th), g / th


def rho_inf(K, iters=500, step=1.0, check=True):
    """inf over positive diagonal Delta of ||Delta K Delta^{-1}||_inf.

    Returns (value, delta). Starts from Delta_i = 1/v_i for the Perron vector v
    of |K| and refines by subgradient descent on log theta. When ``check`` is
    set the result is compared with the Collatz-Wielandt bracket of
    ``perron_root`` and OracleMismatch is raised on disagreement.
    """
    A = np.abs(np.asarray(K, dtype=float))
    n = A.shape[0]
    if not np.any(A):
        return 0.0, np.ones(n)
    z = -np.log(_perron_vector(A))
    z -= z[0]
    best_val, best_z = _log_theta_and_grad(A, z)[0], z.copy()
    for k in range(iters):
        val, g = _log_theta_and_grad(A, z)
        if val < best_val:
            best_val, best_z = val, z.copy()
        gn = np.linalg.norm(g)
        if gn == 0:
            break
        z = z - step / (1.0 + k) * g / gn
        z -= z[0]
    value = float(np.exp(best_val))
    if check:
        _, lo, hi = perron_root(A)
        if value < lo - 1e-5 or value > hi + 1e-5:
            raise OracleMismatch(f"rho_inf optimizer {value:.12g} outside power-iteration "
                                 f"bracket [{lo:.12g}, {hi:.12g}]")
    return value, np.exp(best_z)


def endpoint_values(spec, profile):
    """(f_i(d_i), f_i(L - d_i)) node values of a weight profile."""
    f = np.asarray(profile.f if hasattr(profile, "f") else profile, dtype=float)
    i = np.arange(spec.n)
    return f[i, spec.d_index], f[i, spec.other_index]


def boundary_ratio(a, b, delta):
    """min_i a_i/Delta_i^2 divided by max_i b_i/Delta_i^2."""
    d2 = np.asarray(delta, dtype=float) ** 2
    return float(np.min(a / d2) / np.max(b / d2))


def _objective(A, la, lb, z):
    lt, gt = _log_theta_and_grad(A, z)
    u = la - 2 * z          # log f_i(d_i) - 2 delta_i, we need -min
    i = int(np.argmin(u))
    v = lb - 2 * z          # log f_i(L-d_i) - 2 delta_i, we need +max
    k = int(np.argmax(v))
    g = gt.copy()
    g[i] += 2.0
    g[k] -= 2.0
    return lt - u[i] + v[k], g


def check_boundary(spec, profile, budget=500, seed=0, n_random=4, step=1.0):
    """Search for Delta satisfying the boundary inequality for ``profile``."""
    a, b = endpoint_values(spec, profile)
    A = np.abs(spec.K)
    n = spec.n
    if not np.any(A):
        delta = np.sqrt(a)
        ratio = boundary_ratio(a, b, delta)
        return BoundaryCertificate(delta=delta / delta[0], theta=0.0, ratio=ratio,
                                   margin=ratio, satisfied=ratio > 0,
                                   objective=-np.inf)
    la, lb = np.log(a), np.log(b)
    rng = np.random.default_rng(seed)
    starts = [-np.log(_perron_vector(A)), 0.5 * la, 0.5 * lb, np.zeros(n)]
    starts += [rng.uniform(-3, 3, size=n) for _ in range(n_random)]
    best = (np.inf, None)
    for z in starts:
        z = np.array(z, dtype=float) - z[0]
        for k in range(int(budget)):
            val, g = _objective(A, la, lb, z)
            if val < best[0]:
                best = (val, z.copy())
            gn = np.linalg.norm(g[1:])
            if gn == 0:
                break
            g[0] = 0.0  # gauge: delta_1 = 0
            z = z - step / (1.0 + k) * g / gn
        val, _ = _objective(A, la, lb, z)
        if val < best[0]:
            best = (val, z.copy())
    J, z = best
    delta = np.exp(z)
    th = theta(spec.K, delta)
    ratio = boundary_ratio(a, b, delta)
    margin = ratio - th
    return BoundaryCertificate(delta=delta, theta=th, ratio=ratio, margin=margin,
                               satisfied=bool(margin > TOL_BOUNDARY * ratio),
                               objective=float(J))


def grid_search_boundary(spec, profile, lo=-8.0, hi=8.0, step=0.05):
    """Dense log-grid minimum of J over (delta_1, delta_2) in [lo, hi]^2 (n = 2 oracle)."""
    if spec.n != 2:
        raise DomainError("grid oracle implemented for n = 2 only")
    a, b = endpoint_values(spec, profile)
    zs = np.arange(lo, hi + step / 2, step)
    z1, z2 = np.meshgrid(zs, zs, indexing="ij")
    A = np.abs(spec.K)
    r12, r21 = np.exp(z1 - z2), np.exp(z2 - z1)
    th = np.maximum(A[0, 0] + A[0, 1] * r12, A[1, 1] + A[1, 0] * r21)
    with np.errstate(divide="ignore"):
        num = np.minimum(a[0] * np.exp(-2 * z1), a[1] * np.exp(-2 * z2))
        den = np.maximum(b[0] * np.exp(-2 * z1), b[1] * np.exp(-2 * z2))
        J = np.log(th) - np.log(num) + np.log(den)
    return float(np.min(J))
