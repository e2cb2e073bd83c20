"""Domain types, spec-file ingestion and compatibility checks.

A system is the linearized balance law

    u_t + Lambda(x) u_x + M(x) u = 0,   x in [0, L],

with characteristic speeds ordered so that the first ``m_pos`` are positive,
and the boundary feedback

    (u_+(t, 0), u_-(t, L)) = K (u_+(t, L), u_-(t, 0)).

All x-dependent data live on the uniform node grid x_j = j L / (nx - 1).
Indices are 0-based here; reports shift them to 1-based.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, ValidationError

__all__ = [
    "SystemSpec",
    "GridFunction",
    "CompatResult",
    "load_spec",
    "save_spec",
    "spec_from_dict",
    "spec_to_dict",
    "dump_canonical",
    "node_derivative",
    "resample",
    "check_compat_order0",
    "check_compat_order1",
]


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class SystemSpec:
    """Grid-sampled linearized system.

    Parameters
    ----------
    n, m_pos : int
        State dimension and number of positive speeds.
    L : float
        Domain length.
    nx : int
        Number of grid nodes (at least 3).
    lam : ndarray, shape (n, nx)
        Characteristic speeds Lambda_i(x_j).
    source : ndarray, shape (n, n, nx)
        Linearized source M_ij(x_j).
    K : ndarray, shape (n, n)
        Boundary gain G'(0).
    mu : float
        Optional exponential tilt carried through to weight profiles.
    """

    n: int
    m_pos: int
    L: float
    nx: int
    lam: np.ndarray
    source: np.ndarray
    K: np.ndarray
    mu: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "lam", _frozen(self.lam))
        object.__setattr__(self, "source", _frozen(self.source))
        object.__setattr__(self, "K", _frozen(self.K))
        _validate(self)

    @property
    def x(self):
        return np.linspace(0.0, self.L, self.nx)

    @property
    def dx(self):
        return self.L / (self.nx - 1)

    @property
    def signs(self):
        """s_i = +1 for positive speeds, -1 otherwise."""
        s = -np.ones(self.n)
        s[: self.m_pos] = 1.0
        return s

    @property
    def d(self):
        """Endpoint selector d_i: L for positive speeds, 0 otherwise."""
        d = np.zeros(self.n)
        d[: self.m_pos] = self.L
        return d

    @property
    def d_index(self):
        """Node index of d_i."""
        return np.where(np.arange(self.n) < self.m_pos, self.nx - 1, 0)

    @property
    def other_index(self):
        """Node index of L - d_i."""
        return np.where(np.arange(self.n) < self.m_pos, 0, self.nx - 1)

    @property
    def max_speed(self):
        return float(np.max(np.abs(self.lam)))

    def coefficients_at(self, x):
        """Linearly interpolated (Lambda(x), M(x)) at a single abscissa."""
        t = min(max(x / self.dx, 0.0), self.nx - 1.0)
        j = min(int(t), self.nx - 2)
        w = t - j
        lam = (1.0 - w) * self.lam[:, j] + w * self.lam[:, j + 1]
        M = (1.0 - w) * self.source[:, :, j] + w * self.source[:, :, j + 1]
        return lam, M

    def replace(self, **changes):
        d = dict(n=self.n, m_pos=self.m_pos, L=self.L, nx=self.nx, lam=self.lam,
                 source=self.source, K=self.K, mu=self.mu)
        d.update(changes)
        return SystemSpec(**d)

    def __eq__(self, other):
        if not isinstance(other, SystemSpec):
            return NotImplemented
        return (self.n == other.n and self.m_pos == other.m_pos and self.L == other.L
                and self.nx == other.nx and self.mu == other.mu
                and np.array_equal(self.lam, other.lam)
                and np.array_equal(self.source, other.source)
                and np.array_equal(self.K, other.K))

    __hash__ = None


def _validate(spec):
    n, nx = spec.n, spec.nx
    if not isinstance(n, (int, np.integer)) or n < 1:
        raise ValidationError(f"n: must be a positive integer, got {n!r}")
    if not isinstance(nx, (int, np.integer)) or nx < 3:
        raise ValidationError(f"nx: need at least 3 nodes, got {nx!r}")
    if not 0 <= spec.m_pos <= n:
        raise ValidationError(f"m_pos: must lie in [0, {n}], got {spec.m_pos}")
    if not (math.isfinite(spec.L) and spec.L > 0):
        raise ValidationError(f"L: must be positive and finite, got {spec.L}")
    if not (math.isfinite(spec.mu) and spec.mu >= 0):
        raise ValidationError(f"mu: must be nonnegative, got {spec.mu}")
    for name, arr, shape in (("lambda", spec.lam, (n, nx)),
                             ("source", spec.source, (n, n, nx)),
                             ("K", spec.K, (n, n))):
        if arr.shape != shape:
            raise ValidationError(f"{name}: expected shape {shape}, got {arr.shape}")
        bad = np.argwhere(~np.isfinite(arr))
        if bad.size:
            idx = tuple(int(k) for k in bad[0])
            where = f" at node {idx[-1]}" if name != "K" else ""
            raise ValidationError(f"{name}: non-finite entry {idx}{where}")
    for i in range(n):
        row = spec.lam[i]
        zero = np.flatnonzero(row == 0)
        if zero.size:
            raise ValidationError(
                f"lambda[{i}]: non-vanishing eigenvalues required, zero at node {zero[0]}")
        want = 1.0 if i < spec.m_pos else -1.0
        wrong = np.flatnonzero(np.sign(row) != want)
        if wrong.size:
            if np.any(np.sign(row) != np.sign(row[0])):
                raise ValidationError(
                    f"lambda[{i}]: non-vanishing eigenvalues required, "
                    f"sign changes at node {wrong[0]}")
            raise ValidationError(
                f"lambda[{i}]: sign {'+' if want < 0 else '-'} at node {wrong[0]} "
                f"contradicts m_pos={spec.m_pos}")


@dataclass(frozen=True, eq=False)
class GridFunction:
    """An n x nx array of node values on [0, L]."""

    values: np.ndarray
    L: float = 1.0

    def __post_init__(self):
        v = _frozen(self.values)
        if v.ndim != 2:
            raise ValidationError(f"values: expected a 2-D array, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            raise ValidationError("values: non-finite entry")
        object.__setattr__(self, "values", v)

    @property
    def nx(self):
        return self.values.shape[1]

    @property
    def n(self):
        return self.values.shape[0]


def as_values(u, spec=None):
    """Return the raw (n, nx) array of a GridFunction or array-like."""
    v = u.values if isinstance(u, GridFunction) else np.asarray(u, dtype=float)
    if spec is not None and v.shape != (spec.n, spec.nx):
        raise ValidationError(f"grid function shape {v.shape} does not match "
                              f"spec ({spec.n}, {spec.nx})")
    return v


def node_derivative(values, dx):
    """d/dx along the last axis; central inside, one-sided 2nd order at the ends."""
    return np.gradient(values, dx, axis=-1, edge_order=2)


# ---------------------------------------------------------------- file I/O

def _expand_lambda(raw, n, nx):
    a = np.asarray(raw, dtype=float)
    if a.shape == (n,):
        return np.repeat(a[:, None], nx, axis=1)
    return a


def _expand_source(raw, n, nx):
    a = np.asarray(raw, dtype=float)
    if a.shape == (n, n):
        return np.repeat(a[:, :, None], nx, axis=2)
    return a


def spec_from_dict(d):
    for key in ("n", "m_pos", "L", "nx", "lambda", "source", "K"):
        if key not in d:
            raise ParseError(f"missing key {key!r}")
    try:
        n, nx, m_pos = int(d["n"]), int(d["nx"]), int(d["m_pos"])
        lam = _expand_lambda(d["lambda"], n, nx)
        source = _expand_source(d["source"], n, nx)
        K = np.asarray(d["K"], dtype=float)
        L = float(d["L"])
        mu = float(d.get("mu", 0.0))
    except (TypeError, ValueError) as exc:
        raise ParseError(f"malformed field: {exc}") from exc
    if any(int(d[k]) != d[k] for k in ("n", "nx", "m_pos")):
        raise ParseError("n, nx and m_pos must be integers")
    return SystemSpec(n=n, m_pos=m_pos, L=L, nx=nx, lam=lam, source=source, K=K, mu=mu)


def spec_to_dict(spec):
    return {
        "n": spec.n,
        "m_pos": spec.m_pos,
        "L": spec.L,
        "nx": spec.nx,
        "lambda": spec.lam.tolist(),
        "source": spec.source.tolist(),
        "K": spec.K.tolist(),
        "mu": spec.mu,
    }


def dump_canonical(obj):
    """Canonical JSON text: sorted keys, shortest round-trip float repr."""
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False) + "\n"


def read_json(path):
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: {exc}") from exc


def load_spec(path):
    d = read_json(path)
    if not isinstance(d, dict):
        raise ParseError(f"{path}: top level must be a JSON object")
    return spec_from_dict(d)


def save_spec(spec, path):
    Path(path).write_text(dump_canonical(spec_to_dict(spec)))


def resample(spec, nx):
    """Same system on a finer or coarser uniform grid (linear interpolation)."""
    xs, xn = spec.x, np.linspace(0.0, spec.L, nx)
    lam = np.array([np.interp(xn, xs, row) for row in spec.lam])
    src = np.empty((spec.n, spec.n, nx))
    for i in range(spec.n):
        for k in range(spec.n):
            src[i, k] = np.interp(xn, xs, spec.source[i, k])
    return spec.replace(nx=nx, lam=lam, source=src)


def resample_values(values, L, nx):
    values = np.asarray(values, dtype=float)
    xs = np.linspace(0.0, L, values.shape[-1])
    xn = np.linspace(0.0, L, nx)
    return np.array([np.interp(xn, xs, row) for row in values])


# ---------------------------------------------------------------- compatibility

@dataclass(frozen=True)
class CompatResult:
    ok: bool
    residual: float
    tol: float = field(default=0.0)

    def __bool__(self):
        return self.ok


def _compat_tol(values):
    return 1e-8 * (1.0 + float(np.max(np.abs(values), initial=0.0)))


def _split_traces(spec, w0, wL):
    """(incoming, outgoing) trace vectors from values at x=0 and x=L."""
    m = spec.m_pos
    incoming = np.concatenate([w0[:m], wL[m:]])
    outgoing = np.concatenate([wL[:m], w0[m:]])
    return incoming, outgoing


def check_compat_order0(spec, u0, g_eval=None, tol=None):
    """Zeroth-order compatibility: incoming traces equal G(outgoing traces).

    ``g_eval`` maps the outgoing trace vector to the incoming one; it defaults
    to the linear map v -> K v.
    """
    v = as_values(u0, spec)
    g = g_eval if g_eval is not None else (lambda w: spec.K @ w)
    incoming, outgoing = _split_traces(spec, v[:, 0], v[:, -1])
    residual = float(np.max(np.abs(incoming - np.asarray(g(outgoing), dtype=float)),
                            initial=0.0))
    tol = _compat_tol(v) if tol is None else tol
    return CompatResult(residual <= tol, residual, tol)


def check_compat_order1(spec, u0, K=None, tol=None):
    """First-order compatibility for the linear system (A = Lambda, B = M u).

    The time derivative traces w = Lambda u_x + M u must satisfy the same
    boundary relation with G' = K.
    """
    v = as_values(u0, spec)
    K = spec.K if K is None else np.asarray(K, dtype=float)
    ux0 = node_derivative(v, spec.dx)
    w = spec.lam * ux0 + np.einsum("ikj,kj->ij", spec.source, v)
    incoming, outgoing = _split_traces(spec, w[:, 0], w[:, -1])
    residual = float(np.max(np.abs(incoming - K @ outgoing), initial=0.0))
    tol = _compat_tol(v) if tol is None else tol
    return CompatResult(residual <= tol, residual, tol)
