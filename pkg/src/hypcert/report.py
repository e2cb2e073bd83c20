"""Combined certification pipeline and report (de)serialization."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .boundary import (BoundaryCertificate, boundary_ratio, check_boundary, endpoint_values,
                       rho_inf, theta)
from .errors import (DecayedToZero, HypcertError, IntegrationFailure, NonFinite,
                     OracleMismatch, ParseError, ValidationError)
from .interior import (InteriorCertificate, WeightProfile, certificate_from_profile,
                       check_strict_interior, integrate_weights, search_feasible)
from .lyapunov import build_series, fit_gamma, verify_decrease
from .model import dump_canonical, resample, resample_values, spec_from_dict
from .simulator import run

log = logging.getLogger(__name__)

SCHEMA_VERSION = __version__
VERDICTS = ("certified", "interior-failed", "boundary-failed", "inconclusive")
EXIT_CODES = {"certified": 0, "interior-failed": 3, "boundary-failed": 3,
              "inconclusive": 4, "invalid": 2}
THETA_RTOL = 1e-12
RECHECK_RTOL = 1e-6


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


@dataclass(eq=False)
class Certificate:
    interior: InteriorCertificate
    boundary: Optional[BoundaryCertificate]
    verdict: str
    input_digest: str
    simulated: Optional[dict] = None
    version: str = __version__
    settings: dict = field(default_factory=dict)
    verification: Optional[dict] = None

    def __post_init__(self):
        if self.verdict not in VERDICTS:
            raise ValueError(f"unknown verdict {self.verdict!r}")

    @property
    def exit_code(self):
        return EXIT_CODES[self.verdict]

    def to_dict(self):
        return dict(schema_version=SCHEMA_VERSION, toolkit_version=self.version,
                    input_digest=self.input_digest, verdict=self.verdict,
                    interior=_interior_to_dict(self.interior),
                    boundary=_boundary_to_dict(self.boundary),
                    simulated=self.simulated, settings=self.settings)

    def __eq__(self, other):
        return isinstance(other, Certificate) and self.to_dict() == other.to_dict()

    __hash__ = None


def _floats(a):
    return None if a is None else np.asarray(a, dtype=float).tolist()


def _finite_or_none(x):
    x = float(x)
    return x if np.isfinite(x) else None


def _interior_to_dict(c: InteriorCertificate):
    p = c.profile
    return dict(feasible=bool(c.feasible), min_f=float(c.min_f),
                min_margin=_finite_or_none(c.min_margin), f0=_floats(c.f0),
                best_reach=float(c.best_reach), starts_tried=int(c.starts_tried),
                evaluations=int(c.evaluations), notes=list(c.notes),
                weights=None if p is None else _floats(p.f),
                mu=None if p is None else float(p.mu),
                sigma=None if p is None else float(p.sigma))


def _interior_from_dict(d):
    prof = None
    if d.get("weights") is not None:
        prof = WeightProfile(np.array(d["weights"]), mu=d["mu"], sigma=d["sigma"])
    mm = d.get("min_margin")
    return InteriorCertificate(profile=prof, margins=None, feasible=d["feasible"],
                               min_f=d["min_f"], min_margin=-np.inf if mm is None else mm,
                               f0=None if d.get("f0") is None else np.array(d["f0"]),
                               best_reach=d["best_reach"], starts_tried=d["starts_tried"],
                               evaluations=d["evaluations"], notes=list(d.get("notes", [])))


def _boundary_to_dict(b: Optional[BoundaryCertificate]):
    if b is None:
        return None
    return dict(delta=_floats(b.delta), theta=float(b.theta), ratio=float(b.ratio),
                margin=float(b.margin), satisfied=bool(b.satisfied),
                objective=_finite_or_none(b.objective))


def _boundary_from_dict(d):
    if d is None:
        return None
    obj = d.get("objective")
    return BoundaryCertificate(delta=np.array(d["delta"]), theta=d["theta"],
                               ratio=d["ratio"], margin=d["margin"],
                               satisfied=d["satisfied"],
                               objective=-np.inf if obj is None else obj)


def report_write(cert: Certificate, path):
    Path(path).write_text(dump_canonical(cert.to_dict()) + "\n")


def report_read(path, verify=False, spec_path=None) -> Certificate:
    """Read a report; with ``verify`` recompute both sub-certificates.

    The verification dict (digest, interior and boundary checks) is attached
    to ``cert.verification``.
    """
    d = json.loads(Path(path).read_text())
    if d.get("schema_version") != SCHEMA_VERSION:
        raise ParseError(f"schema version {d.get('schema_version')!r} != {SCHEMA_VERSION}")
    cert = Certificate(interior=_interior_from_dict(d["interior"]),
                       boundary=_boundary_from_dict(d["boundary"]),
                       verdict=d["verdict"], input_digest=d["input_digest"],
                       simulated=d.get("simulated"), version=d["toolkit_version"],
                       settings=d.get("settings", {}))
    if verify:
        if spec_path is None:
            spec_path = cert.settings.get("spec_path")
        cert.verification = verify_certificate(cert, spec_path)
    return cert


def verify_certificate(cert: Certificate, spec_path) -> dict:
    """Independent recomputation of the certificate against the spec file."""
    out = dict(digest_ok=False, interior_ok=False, boundary_ok=False, ok=False)
    try:
        raw = Path(spec_path).read_bytes()
    except (OSError, TypeError) as exc:
        out["error"] = str(exc)
        return out
    out["digest_ok"] = sha256_bytes(raw) == cert.input_digest
    try:
        spec = spec_from_dict(json.loads(raw))
    except (ValueError, HypcertError) as exc:
        out["error"] = str(exc)
        return out
    ok_i, ok_b = _recheck(spec, cert.interior, cert.boundary,
                          strict=cert.settings.get("strict_interior", True))
    out.update(interior_ok=ok_i, boundary_ok=ok_b)
    out["ok"] = bool(out["digest_ok"] and ok_i and ok_b)
    return out


def _recheck(spec, interior, boundary, strict=True):
    prof = interior.profile
    if prof is None or prof.f.shape != (spec.n, spec.nx):
        return False, False
    if strict:
        # re-integrate from the stored f(0) and sigma; the stored weights must
        # reproduce, and the fresh profile must satisfy the strict inequality
        try:
            fresh = integrate_weights(spec, prof.f[:, 0], prof.sigma)
        except IntegrationFailure:
            return False, False
        same_f = np.allclose(fresh.f, prof.f, rtol=RECHECK_RTOL, atol=0.0)
        ok_i = bool(same_f and np.min(check_strict_interior(spec, fresh)) > 0)
    else:
        margins = check_strict_interior(spec, prof)
        ok_i = bool(np.min(margins) >= -1e-8 * (1.0 + float(np.max(np.abs(spec.source)))))
    if boundary is None:
        return ok_i, False
    th = theta(spec.K, boundary.delta) if np.any(spec.K) else 0.0
    a, b = endpoint_values(spec, prof)
    ratio = boundary_ratio(a, b, boundary.delta)
    same = abs(th - boundary.theta) <= THETA_RTOL * max(1.0, abs(th))
    return ok_i, bool(same and th < ratio)


def random_initial_data(spec, rng, n_bumps=1):
    """Seeded smooth data with compact support in (0.1 L, 0.9 L).

    Every component vanishes with its derivatives at both ends, so the
    compatibility conditions hold exactly.
    """
    x = spec.x
    u = np.zeros((spec.n, spec.nx))
    for i in range(spec.n):
        for _ in range(n_bumps):
            a = rng.uniform(0.1, 0.5) * spec.L
            w = rng.uniform(0.15, 0.4) * spec.L
            b = min(a + w, 0.9 * spec.L)
            s = (x - a) / (b - a)
            inside = (s > 0) & (s < 1)
            u[i] += rng.uniform(-1.0, 1.0) * np.where(inside, np.sin(np.pi * s) ** 4, 0.0)
    return u


def simulate_summary(spec, profile, seed=0, min_nx=1001, periods=6, cfl=0.9,
                     tol_growth=1e-3, p=64):
    """Randomized-initial-data run; returns the summary dict stored in reports."""
    rng = np.random.default_rng(seed)
    sim = resample(spec, min_nx) if spec.nx < min_nx else spec
    prof = WeightProfile(resample_values(profile.f, spec.L, sim.nx), mu=0.0)
    u0 = random_initial_data(sim, rng)
    T = sim.L / float(np.min(np.abs(sim.lam)))
    snaps = run(sim, u0, periods * T, cfl=cfl, cadence=T / 10)
    series = build_series(sim, prof, snaps, p=p)
    verdict = verify_decrease(series, tol_growth)
    out = dict(seed=int(seed), nx=int(sim.nx), t_end=float(periods * T), cfl=cfl,
               decrease_ok=bool(verdict.ok), worst_growth=float(verdict.worst),
               worst_time=_finite_or_none(verdict.worst_time), tol_growth=tol_growth)
    try:
        g, r2 = fit_gamma(series, (T, periods * T))
        out.update(gamma_fit=g, r_squared=r2, window=[T, periods * T], decayed_to_zero=False)
    except DecayedToZero:
        out.update(gamma_fit=None, r_squared=None, window=[T, periods * T],
                   decayed_to_zero=True)
    return out, series


def _boundary_objective(spec, budget, seed):
    def obj(profile):
        return check_boundary(spec, profile, budget=budget, seed=seed, n_random=0).objective
    return obj


def certify_spec(spec, digest, budget_interior=200, budget_boundary=500, seed=0,
                 simulate=False, rounds=3, constant_weights=False, spec_path=None):
    """Interior search, boundary search, penalty retries and recomputation."""
    settings = dict(budget_interior=int(budget_interior), budget_boundary=int(budget_boundary),
                    seed=int(seed), rounds=int(rounds), constant_weights=bool(constant_weights),
                    strict_interior=not constant_weights, simulate=bool(simulate),
                    spec_path=None if spec_path is None else str(spec_path))
    try:
        if constant_weights:
            _, d = rho_inf(spec.K) if np.any(spec.K) else (0.0, np.ones(spec.n))
            interior = certificate_from_profile(spec, WeightProfile.constant(spec, d**2))
        else:
            interior = search_feasible(spec, budget=budget_interior, seed=seed)
        if not interior.feasible:
            return Certificate(interior, None, "interior-failed", digest, settings=settings)
        bnd = check_boundary(spec, interior.profile, budget=budget_boundary, seed=seed)
        if not bnd.satisfied and not constant_weights:
            for r in range(rounds):
                starts = [bnd.delta ** 2]
                if np.any(spec.K):
                    starts.insert(0, rho_inf(spec.K)[1] ** 2)
                cand = search_feasible(spec, budget=budget_interior, seed=seed + r + 1,
                                       starts=starts,
                                       objective=_boundary_objective(spec, 100, seed),
                                       target=-1e-6)
                if not cand.feasible:
                    continue
                cand.notes.append(f"boundary retry round {r + 1}")
                cb = check_boundary(spec, cand.profile, budget=budget_boundary, seed=seed)
                if cb.margin > bnd.margin:
                    interior, bnd = cand, cb
                if bnd.satisfied:
                    break
        if not bnd.satisfied:
            return Certificate(interior, bnd, "boundary-failed", digest, settings=settings)
        ok_i, ok_b = _recheck(spec, interior, bnd, strict=not constant_weights)
        if not (ok_i and ok_b):
            interior.notes.append(f"independent recomputation failed: interior={ok_i}, "
                                  f"boundary={ok_b}")
            return Certificate(interior, bnd, "inconclusive", digest, settings=settings)
        cert = Certificate(interior, bnd, "certified", digest, settings=settings)
        if simulate:
            cert.simulated, _ = simulate_summary(spec, interior.profile, seed=seed)
        return cert
    except (IntegrationFailure, NonFinite, OracleMismatch, FloatingPointError) as exc:
        log.warning("numerical failure: %s", exc)
        interior = InteriorCertificate(profile=None, margins=None, feasible=False,
                                       min_f=0.0, min_margin=-np.inf)
        interior.notes.append(f"numerical failure: {exc}")
        return Certificate(interior, None, "inconclusive", digest, settings=settings)


def certify(spec_path, **kwargs):
    """Certify the spec file at ``spec_path``; returns (Certificate, exit code).

    Unreadable or invalid input raises ParseError / ValidationError, which the
    command line maps to exit code 2.
    """
    try:
        raw = Path(spec_path).read_bytes()
    except OSError as exc:
        raise ParseError(f"{spec_path}: {exc}") from exc
    try:
        d = json.loads(raw)
    except ValueError as exc:
        raise ParseError(f"{spec_path}: invalid JSON ({exc})") from exc
    if not isinstance(d, dict):
        raise ValidationError(f"{spec_path}: top level must be a JSON object")
    spec = spec_from_dict(d)
    cert = certify_spec(spec, sha256_bytes(raw), spec_path=spec_path, **kwargs)
    return cert, cert.exit_code
