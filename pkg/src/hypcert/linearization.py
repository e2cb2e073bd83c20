"""Physical system (F, D, Y*) to diagonal characteristic form.

For Y_t + F(Y) Y_x + D(Y) = 0 and a steady state Y*(x), the change of
variables u = N(x)(Y - Y*) with N F(Y*) N^{-1} = Lambda gives
u_t + A(u, x) u_x + B(u, x) = 0 where

    B(u, x) = N (F(Y) (Y*_x + (N^{-1})' u) + D(Y)),   Y = N^{-1} u + Y*.

Only the linearization at u = 0 is produced: Lambda(x) and
M(x) = dB/du(0, x), sampled on the node grid.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import EigenFailure, OrderingBreak, SteadyStateViolation, ValidationError
from .model import SystemSpec, node_derivative


@dataclass(frozen=True)
class PhysicalSystem:
    F: Callable[[np.ndarray], np.ndarray]
    D: Callable[[np.ndarray], np.ndarray]
    ystar: np.ndarray
    L: float

    @property
    def nx(self):
        return np.shape(self.ystar)[1]

    @property
    def n(self):
        return np.shape(self.ystar)[0]

    @property
    def dx(self):
        return self.L / (self.nx - 1)


@dataclass(frozen=True)
class Diagonalization:
    """Per-node eigen-decomposition; N[j] @ F(Y*(x_j)) @ Ninv[j] = diag(lam[:, j])."""

    N: np.ndarray      # (nx, n, n)
    Ninv: np.ndarray   # (nx, n, n)
    lam: np.ndarray    # (n, nx)

    @property
    def m_pos(self):
        return int(np.sum(self.lam[:, 0] > 0))


def _order(w):
    # positive speeds first, each group by descending magnitude
    pos = [i for i in np.argsort(-np.abs(w)) if w[i] > 0]
    neg = [i for i in np.argsort(-np.abs(w)) if w[i] < 0]
    return np.array(pos + neg, dtype=int)


def diagonalize(phys: PhysicalSystem, rel_tol=1e-10) -> Diagonalization:
    n, nx = phys.n, phys.nx
    ystar = np.asarray(phys.ystar, dtype=float)
    R_all = np.empty((nx, n, n))
    lam = np.empty((n, nx))
    m_ref = None
    for j in range(nx):
        Fj = np.asarray(phys.F(ystar[:, j]), dtype=float).reshape(n, n)
        w, R = np.linalg.eig(Fj)
        scale = max(float(np.max(np.abs(w))), np.finfo(float).tiny)
        if np.max(np.abs(w.imag)) > rel_tol * scale:
            raise EigenFailure(f"complex eigenvalues at node {j}: {w}")
        w, R = w.real, R.real
        if np.min(np.abs(w)) <= rel_tol * scale:
            raise EigenFailure(f"vanishing eigenvalue at node {j}: {w}")
        if n > 1 and np.min(np.diff(np.sort(w))) <= rel_tol * scale:
            raise EigenFailure(f"repeated eigenvalues at node {j}: {w}")
        idx = _order(w)
        w, R = w[idx], R[:, idx]
        m = int(np.sum(w > 0))
        if m_ref is None:
            m_ref = m
        elif m != m_ref:
            raise OrderingBreak(f"number of positive speeds changes from {m_ref} to {m} "
                                f"at node {j}")
        # unit max-entry columns
        R = R / np.max(np.abs(R), axis=0)
        if j == 0:
            piv = np.argmax(np.abs(R), axis=0)
            R = R * np.sign(R[piv, np.arange(n)])
        else:
            R = R * np.where(np.sum(R * R_all[j - 1], axis=0) < 0, -1.0, 1.0)
        R_all[j] = R
        lam[:, j] = w
    Ninv = R_all
    N = np.linalg.inv(R_all)
    return Diagonalization(N=N, Ninv=Ninv, lam=lam)


def _B(phys, diag, Ninv_x, ystar_x, j, u):
    ystar = np.asarray(phys.ystar, dtype=float)
    Y = diag.Ninv[j] @ u + ystar[:, j]
    F = np.asarray(phys.F(Y), dtype=float).reshape(phys.n, phys.n)
    D = np.asarray(phys.D(Y), dtype=float).reshape(phys.n)
    return diag.N[j] @ (F @ (ystar_x[:, j] + Ninv_x[j] @ u) + D)


def linearized_source(phys: PhysicalSystem, diag: Diagonalization, tol_steady=None,
                      step_scale=1e-6):
    """M(0, x_j) = dB/du(0, x_j) by central differences, shape (n, n, nx).

    Raises SteadyStateViolation if |B(0, x_j)| exceeds ``tol_steady`` anywhere.
    """
    n, nx = phys.n, phys.nx
    ystar = np.asarray(phys.ystar, dtype=float)
    ystar_x = node_derivative(ystar, phys.dx)
    Ninv_x = node_derivative(np.moveaxis(diag.Ninv, 0, -1), phys.dx)
    Ninv_x = np.moveaxis(Ninv_x, -1, 0)
    if tol_steady is None:
        dmax = max(float(np.max(np.abs(np.asarray(phys.D(ystar[:, j]), dtype=float))))
                   for j in range(nx))
        tol_steady = 1e-6 * (1.0 + dmax)
    M = np.empty((n, n, nx))
    zero = np.zeros(n)
    for j in range(nx):
        b0 = _B(phys, diag, Ninv_x, ystar_x, j, zero)
        res = float(np.max(np.abs(b0)))
        if res > tol_steady:
            raise SteadyStateViolation(f"|B(0, x)| = {res:.3e} exceeds {tol_steady:.3e} "
                                       f"at node {j}")
        h = step_scale * (1.0 + float(np.max(np.abs(ystar[:, j]))))
        for k in range(n):
            e = np.zeros(n)
            e[k] = h
            M[:, k, j] = (_B(phys, diag, Ninv_x, ystar_x, j, e)
                          - _B(phys, diag, Ninv_x, ystar_x, j, -e)) / (2 * h)
    return M


def linearize(phys: PhysicalSystem, K, mu=0.0, tol_steady=None) -> SystemSpec:
    """Diagonalize, linearize the source and package the result as a SystemSpec."""
    diag = diagonalize(phys)
    M = linearized_source(phys, diag, tol_steady=tol_steady)
    K = np.asarray(K, dtype=float)
    if K.shape != (phys.n, phys.n):
        raise ValidationError(f"K: expected shape {(phys.n, phys.n)}, got {K.shape}")
    return SystemSpec(n=phys.n, m_pos=diag.m_pos, L=float(phys.L), nx=phys.nx,
                      lam=diag.lam, source=M, K=K, mu=mu)
