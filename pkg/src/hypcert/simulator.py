"""First-order upwind simulation of u_t + Lambda(x) u_x + M(x) u = 0.

Explicit Euler in time, one-sided differences against the characteristic
direction, then the inflow traces are overwritten from the freshly updated
outgoing traces through the boundary map.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import CflViolation, CompatibilityError, NonFinite
from .model import (GridFunction, SystemSpec, as_values, check_compat_order0,
                    check_compat_order1, node_derivative)


@dataclass(frozen=True, eq=False)
class TrajectoryState:
    t: float
    u: GridFunction
    dt: float
    cfl: float


def cfl_dt(spec: SystemSpec, cfl: float) -> float:
    return cfl * spec.dx / spec.max_speed


def _has_source(spec):
    return bool(np.any(spec.source))


def _advance(spec, v, dt, g_eval):
    lam, dx, m = spec.lam, spec.dx, spec.m_pos
    new = v.copy()
    if m:
        new[:m, 1:] -= dt / dx * lam[:m, 1:] * (v[:m, 1:] - v[:m, :-1])
    if m < spec.n:
        new[m:, :-1] -= dt / dx * lam[m:, :-1] * (v[m:, 1:] - v[m:, :-1])
    if _has_source(spec):
        new -= dt * np.einsum("ikj,kj->ij", spec.source, v)
    outgoing = np.concatenate([new[:m, -1], new[m:, 0]])
    incoming = g_eval(outgoing) if g_eval is not None else spec.K @ outgoing
    new[:m, 0] = incoming[:m]
    new[m:, -1] = incoming[m:]
    return new


def step(spec: SystemSpec, state: TrajectoryState, g_eval=None) -> TrajectoryState:
    bound = cfl_dt(spec, 1.0) * state.cfl
    if state.dt > bound * (1 + 1e-12) or state.cfl > 1.0:
        raise CflViolation(f"dt={state.dt:.3e} exceeds {bound:.3e}")
    with np.errstate(over="ignore", invalid="ignore"):
        new = _advance(spec, as_values(state.u, spec), state.dt, g_eval)
    if not np.all(np.isfinite(new)):
        raise NonFinite(f"non-finite values at t={state.t + state.dt:.6g}")
    return TrajectoryState(state.t + state.dt, GridFunction(new, spec.L), state.dt, state.cfl)


def derived_ut(spec: SystemSpec, u) -> GridFunction:
    """u_t = -Lambda u_x - M u from the state alone."""
    v = as_values(u, spec)
    ut = -spec.lam * node_derivative(v, spec.dx)
    if _has_source(spec):
        ut -= np.einsum("ikj,kj->ij", spec.source, v)
    return GridFunction(ut, spec.L)


def run(spec: SystemSpec, u0, t_end: float, cfl: float = 0.9, cadence=None,
        g_eval=None, check_compat=True):
    """Snapshots at t = 0, cadence, 2 cadence, ... (and t_end).

    dt is the CFL step shrunk so that every snapshot falls on a step.
    """
    v = np.array(as_values(u0, spec), dtype=float)
    if not 0 < cfl <= 1:
        raise CflViolation(f"cfl must lie in (0, 1], got {cfl}")
    if check_compat:
        c0 = check_compat_order0(spec, v, g_eval)
        if not c0.ok:
            raise CompatibilityError(f"order-0 compatibility residual {c0.residual:.3e}")
        if g_eval is None:
            c1 = check_compat_order1(spec, v)
            if not c1.ok:
                warnings.warn(f"order-1 compatibility residual {c1.residual:.3e}",
                              stacklevel=2)
    snaps = [TrajectoryState(0.0, GridFunction(v, spec.L), 0.0, cfl)]
    if t_end <= 0:
        return snaps
    cadence = t_end if cadence is None or cadence <= 0 else min(cadence, t_end)
    dt_max = cfl_dt(spec, cfl)
    times = list(np.arange(1, math.floor(t_end / cadence + 1e-9) + 1) * cadence)
    if not times or t_end - times[-1] > 1e-9 * t_end:
        times.append(t_end)
    t = 0.0
    for target in times:
        span = target - t
        k = max(1, math.ceil(span / dt_max - 1e-9))
        dt = span / k
        with np.errstate(over="ignore", invalid="ignore"):
            for _ in range(k):
                v = _advance(spec, v, dt, g_eval)
        if not np.all(np.isfinite(v)):
            raise NonFinite(f"non-finite values before t={target:.6g}")
        t = float(target)
        snaps.append(TrajectoryState(t, GridFunction(v, spec.L), dt, cfl))
    return snaps
