"""Certified constants, bound checks, eps -> 0 extrapolation and convergence verdicts."""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .background import BackgroundGeodesic, seed_family_data
from .core import BackgroundParams, SeedData, State5, flip_null, quad_form, validate_seed
from .errors import CertificateViolation, NumericalFailure, PreconditionError
from .fitting import is_monotone_decreasing, loglog_slope, power_law_limit
from .integrator import (IntegrationConfig, Perturbation, ZoneSegment, _Field, integrate_global,
                         integrate_through_wave)
from .profiles import _bump

INF = math.inf
LIMIT_RESIDUAL_MAX = 1e-3


def _ratio(num, den):
    """``num/den`` with the +inf convention for vanishing denominators."""
    return INF if den == 0 else num / den


# --------------------------------------------------------------------------- certificate

@dataclass(frozen=True)
class Certificate:
    C1: float
    C2: float
    eta: float
    eps0_prime: float
    eps0: float
    u0: float
    norms_used: dict
    eta_terms: tuple
    eps0_terms: tuple
    closeness_cap: float | None = None

    def to_dict(self) -> dict:
        return {"C1": self.C1, "C2": self.C2, "eta": self.eta, "eps0_prime": self.eps0_prime,
                "eps0": self.eps0, "u0": self.u0, "norms_used": dict(self.norms_used),
                "eta_terms": list(self.eta_terms), "eps0_terms": list(self.eps0_terms),
                "closeness_cap": self.closeness_cap}


def _seed_limits(seed_limits):
    if isinstance(seed_limits, SeedData):
        return seed_limits.U0dot, np.asarray(seed_limits.Z0), np.asarray(seed_limits.Z0dot)
    u0, z0, zd0 = seed_limits
    return float(u0), np.asarray(z0, dtype=float), np.asarray(zd0, dtype=float)


def _closeness_ok(state: State5, u0, z0, zd0, C1, C2) -> bool:
    return (abs(state.vel[0] - u0) <= 1 / 8
            and np.max(np.abs(state.pos[2:] - z0)) <= C1 / 8
            and np.max(np.abs(state.vel[2:] - zd0)) <= min(C1 / 16, C2 / 6))


def certificate(seed_limits, profile, moll, bg: BackgroundParams, C1: float = 1.0,
                seed_family=None, max_halvings: int = 60) -> Certificate:
    """Explicit constants guaranteeing the local solution and the zone exit.

    ``seed_limits`` is ``SeedData`` or ``(u0, z0, zdot0)``. ``seed_family``,
    if given, maps eps to the entry state at ``alpha_eps``; eps0 is then the
    largest ``eps0' 2^-k`` at which the data-closeness conditions hold.
    """
    u0, z0, zd0 = _seed_limits(seed_limits)
    if not C1 > 0:
        raise ValueError("C1 must be positive")
    if not u0 > 0:
        raise ValueError("U0dot must be positive")
    a2 = bg.a2
    r, rp = moll.sup_rho, moll.sup_rho_prime
    nH, nDH = profile.ball_norms(z0, C1)
    R = float(np.linalg.norm(z0)) + C1
    zd = float(np.linalg.norm(zd0))

    C2 = 1.0 + max(81 / 2 * nDH * r * u0,
                   12 * R / a2,
                   54 * R / a2 * (3 / 2 * u0 * nDH * r * R + 3 / 2 * u0 * nH * rp
                                  + 2 * nDH * r + 3 * u0 * nH * r))
    eta_terms = (
        1.0,
        a2 / (4 * (1 + 9 * u0)),
        6 * C1 / (25 + 9 * u0),
        _ratio(C1, 16 * zd),
        _ratio(C1, 54 * nDH * r * u0),
        C1 * a2 / (16 * R),
        _ratio(C1 * a2 / (24 * R), 9 / 2 * u0 * nDH * r * R + 9 / 2 * u0 * nH * rp
               + 6 * nDH * (zd + C2) * r + 9 / 2 * u0 * nH * r),
    )
    eta = min(eta_terms)
    t2 = _ratio(1.0, 12 * a2 * u0 * (r * (3 / 2 * nDH * R + 2 * nDH * (zd + C2) + 3 / 2 * nH)
                                     + 3 / 2 * nH * rp))
    eps0_terms = (1 / 12, t2, eta, C1 / 16, C2 / 6, 1.0 / (zd + C2), eta * u0 / 6)
    eps0_prime = min(eps0_terms)

    eps0, cap = eps0_prime, None
    if seed_family is not None:
        for k in range(max_halvings + 1):
            trial = eps0_prime * 2.0 ** -k
            if _closeness_ok(seed_family(trial), u0, z0, zd0, C1, C2):
                eps0 = cap = trial
                break
        else:
            raise CertificateViolation("seed family never meets the data-closeness conditions")
    norms = {"normH": nH, "normDH": nDH, "sup_rho": r, "sup_rho_prime": rp}
    return Certificate(C1, C2, eta, eps0_prime, eps0, u0, norms, eta_terms, eps0_terms, cap)


def seed_certificate(seed: SeedData, profile, moll, bg, C1: float = 1.0) -> Certificate:
    """Certificate with eps0 capped by the seed geodesic's own entry data."""
    geo = BackgroundGeodesic.from_seed(seed, bg)
    return certificate(seed, profile, moll, bg, C1, seed_family=lambda e: seed_family_data(geo, e))


# --------------------------------------------------------------------------- bound checks

@dataclass
class LemmaReport:
    inv_N_max: float
    inv_N_bound: float
    diameters: list
    diameter_bounds: list
    exit_margins: list
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def raise_for_failure(self):
        if self.violations:
            raise CertificateViolation("bound check failed: " + "; ".join(self.violations))

    def to_dict(self) -> dict:
        return {"inv_N_max": self.inv_N_max, "inv_N_bound": self.inv_N_bound,
                "diameters": self.diameters, "diameter_bounds": self.diameter_bounds,
                "exit_margins": self.exit_margins, "violations": list(self.violations),
                "passed": self.passed}


def denominator_along(seg: ZoneSegment, eps, profile, moll, bg, points_per_step: int = 8):
    """``sigma a^2 - U^2 H delta_eps(U)`` on a dense sampling of a zone segment."""
    st = seg.step_times
    t = (st[:-1, None] + np.diff(st)[:, None] * (np.arange(points_per_step) / points_per_step)).ravel()
    t = np.append(t, st[-1])
    pos, _ = seg.evaluate(t)
    u = pos[:, 0]
    return bg.sigma * bg.a2 - u * u * profile.H(pos[:, 2:]) * moll.delta(u, eps)


def lemma_bound_checks(trajectory, cert: Certificate, moll, profile, diameter_slack: float = 1.25,
                       ) -> LemmaReport:
    """Pointwise denominator bound, crossing-diameter bound and the exit-window check."""
    bg, eps = trajectory.bg, trajectory.eps
    nH = cert.norms_used["normH"]
    if nH > 0 and eps > bg.a2 / (2 * moll.sup_rho * nH):
        raise PreconditionError(
            f"eps={eps:.3e} exceeds a^2/(2 sup_rho normH)={bg.a2 / (2 * moll.sup_rho * nH):.3e}")
    inv_bound = 2.0 / bg.a2
    inv_max = 1.0 / bg.a2
    for seg in trajectory.zone_segments():
        n = denominator_along(seg, eps, profile, moll, bg)
        inv_max = max(inv_max, float(np.max(1.0 / np.abs(n))))
    rep = LemmaReport(inv_max, inv_bound, [], [], [])
    if inv_max > inv_bound:
        rep.violations.append(f"denominator bound: max 1/|N| = {inv_max:.6g} > 2/a^2")
    for rec in trajectory.crossings:
        if not rec.crossed:
            continue
        diam = rec.beta - rec.alpha
        bound = 4.0 * eps / cert.u0
        rep.diameters.append(diam)
        rep.diameter_bounds.append(bound)
        rep.exit_margins.append(rec.alpha + cert.eta - rec.beta)
        if diam > diameter_slack * bound:
            rep.violations.append(f"crossing diameter {diam:.6g} > {diameter_slack} * 4 eps/u0 "
                                  f"(crossing {rec.index})")
        if rec.beta > rec.alpha + cert.eta:
            rep.violations.append(f"no exit by alpha + eta at crossing {rec.index}")
    return rep


# --------------------------------------------------------------------------- jump data

OBSERVABLES = ("A2", "A3", "A4", "B", "C", "Udot", "Z2", "Z3", "Z4", "beta", "exit_norm")
JUMP_KEYS = ("A2", "A3", "A4", "B", "C")


def workers_from_env(default: int = 1) -> int:
    raw = os.environ.get("IMPGEOD_WORKERS")
    if raw is None:
        return default
    try:
        return max(1, int(raw))
    except ValueError:
        return default


def map_rungs(fn, items, workers: int = 1) -> list:
    """Order-preserving map, optionally over a process pool."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ProcessPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(fn, items))


def exit_observables(rec, bg) -> dict:
    x = rec.exit_state
    vel = x.vel
    return {"A2": vel[2], "A3": vel[3], "A4": vel[4], "B": x.pos[1], "C": vel[1],
            "Udot": vel[0], "Z2": x.pos[2], "Z3": x.pos[3], "Z4": x.pos[4],
            "beta": rec.beta, "exit_norm": float(quad_form(vel, bg.sigma))}


@dataclass(frozen=True)
class _RungJob:
    seed: SeedData
    eps: float
    profile: object
    moll: object
    bg: BackgroundParams
    cfg: IntegrationConfig

    def __call__(self, _=None):
        return _single_crossing(self)


def _single_crossing(job: _RungJob) -> dict:
    geo = BackgroundGeodesic.from_seed(job.seed, job.bg)
    entry = seed_family_data(geo, job.eps)
    _, rec = integrate_through_wave(entry, job.eps, job.profile, job.moll, job.bg,
                                    job.seed.e, job.cfg)
    if not rec.crossed:
        raise NumericalFailure(f"geodesic bounced off the wave zone at eps={job.eps:.3e}")
    obs = exit_observables(rec, job.bg)
    obs["eps"] = job.eps
    obs["alpha"] = rec.alpha
    obs["n_steps"] = rec.n_steps
    return obs


def _call(job):
    return job()


def ladder_observables(seed, profile, moll, bg, cfg, eps_ladder, workers: int = 1) -> list:
    jobs = [_RungJob(seed, float(e), profile, moll, bg, cfg) for e in eps_ladder]
    return map_rungs(_call, jobs, workers)


def geometric_ladder(eps0: float, ratio: float = 0.5, count: int = 5) -> np.ndarray:
    if count < 1:
        raise ValueError("ladder must have at least one rung")
    if not (eps0 > 0 and 0 < ratio < 1):
        raise ValueError("ladder needs eps0 > 0 and 0 < ratio < 1")
    return eps0 * ratio ** np.arange(count)


@dataclass
class JumpData:
    A: np.ndarray
    B: float
    C: float
    values: dict
    fits: dict
    rungs: list
    eps_ladder: list
    confident: bool
    notes: list = field(default_factory=list)
    values_alt: dict | None = None
    spread: dict | None = None
    mollifier_spread: float | None = None
    fits_alt: dict | None = None

    @property
    def rates(self) -> dict:
        return {k: f.rate for k, f in self.fits.items()}

    @property
    def residuals(self) -> dict:
        return {k: f.residual for k, f in self.fits.items()}

    @property
    def value_scale(self) -> float:
        return max(1.0, max(abs(self.values[k]) for k in JUMP_KEYS))

    def to_dict(self) -> dict:
        return {"A": self.A.tolist(), "B": self.B, "C": self.C, "values": dict(self.values),
                "fits": {k: f.to_dict() for k, f in self.fits.items()},
                "rungs": self.rungs, "eps_ladder": list(self.eps_ladder),
                "confident": self.confident, "notes": list(self.notes),
                "values_alt": self.values_alt, "spread": self.spread,
                "mollifier_spread": self.mollifier_spread}


def extrapolate_rungs(rungs: list, n_fit: int = 4, keys=OBSERVABLES):
    """Fit every observable; returns ``(values, fits, confident, notes)``."""
    eps = np.array([r["eps"] for r in rungs])
    values, fits, notes = {}, {}, []
    confident = True
    if len(rungs) < 5:
        confident = False
        notes.append(f"short ladder ({len(rungs)} rungs; at least 5 recommended)")
    for key in keys:
        vals = np.array([r[key] for r in rungs])
        fit = power_law_limit(eps, vals, n_last=min(n_fit, len(rungs)))
        values[key], fits[key] = fit.limit, fit
        dev = np.abs(vals[np.argsort(-eps)] - fit.limit)
        floor = 1e-11 * max(1.0, abs(fit.limit))
        dev = dev[dev > floor]
        if dev.size > 1 and not is_monotone_decreasing(dev):
            confident = False
            notes.append(f"{key}: residuals not monotone along the ladder")
    return values, fits, confident, notes


def jump_extrapolate(seed: SeedData, profile, moll, bg, cfg=None, eps_ladder=None,
                     moll_alt=None, n_fit: int = 4, workers: int = 1) -> JumpData:
    """Exit data of one crossing on an eps ladder, extrapolated to eps -> 0."""
    cfg = cfg or IntegrationConfig()
    eps_ladder = geometric_ladder(1e-2, 0.5, 5) if eps_ladder is None else np.asarray(eps_ladder)
    if len(eps_ladder) < 3:
        raise ValueError("jump extrapolation needs at least 3 rungs")
    validate_seed(seed, bg).raise_for_failure()
    rungs = ladder_observables(seed, profile, moll, bg, cfg, eps_ladder, workers)
    values, fits, confident, notes = extrapolate_rungs(rungs, n_fit)
    jd = JumpData(np.array([values["A2"], values["A3"], values["A4"]]), values["B"], values["C"],
                  values, fits, rungs, [float(e) for e in eps_ladder], confident, notes)
    if moll_alt is not None:
        alt = ladder_observables(seed, profile, moll_alt, bg, cfg, eps_ladder, workers)
        v_alt, f_alt, _, _ = extrapolate_rungs(alt, n_fit)
        jd.values_alt = v_alt
        jd.spread = {k: abs(values[k] - v_alt[k]) for k in OBSERVABLES}
        jd.mollifier_spread = max(jd.spread[k] for k in JUMP_KEYS)
        jd.notes.append(f"second mollifier: {moll_alt.name}")
        jd.fits_alt = f_alt
    return jd


def mollifier_independence(jd: JumpData) -> dict:
    """Spread between mollifiers against ``max(10 * residual, 1e-3 * scale)`` per key."""
    if jd.spread is None:
        raise ValueError("jump data carry no second-mollifier values")
    out = {}
    for k in JUMP_KEYS:
        res = max(jd.fits[k].residual, jd.fits_alt[k].residual)
        tol = max(10.0 * res, 1e-3 * jd.value_scale)
        out[k] = {"spread": jd.spread[k], "tol": tol, "passed": jd.spread[k] <= tol}
    return out


# --------------------------------------------------------------------------- limiting geodesic

@dataclass(eq=False)
class LimitingGeodesic:
    seed: SeedData
    minus: BackgroundGeodesic
    plus: BackgroundGeodesic
    plus_seed: SeedData
    raw_plus_seed: SeedData
    residuals: dict
    projection: dict

    def evaluate(self, t):
        t = np.atleast_1d(np.asarray(t, dtype=float))
        pm, vm = self.minus.evaluate(t)
        pp, vp = self.plus.evaluate(t)
        left = (t <= 0)[:, None]
        return np.where(left, pm, pp), np.where(left, vm, vp)

    def one_sided(self, t, side: int):
        return (self.minus if side < 0 else self.plus).evaluate(t)

    def to_dict(self) -> dict:
        return {"plus_seed": self.plus_seed.to_dict(), "raw_plus_seed": self.raw_plus_seed.to_dict(),
                "residuals": dict(self.residuals), "projection": dict(self.projection)}


def limiting_geodesic(seed: SeedData, jump: JumpData, bg: BackgroundParams,
                      max_residual: float = LIMIT_RESIDUAL_MAX) -> LimitingGeodesic:
    """Background geodesics matched at U = 0 with the extrapolated jump data."""
    s = np.array([1.0, 1.0, bg.sigma])
    A, B, C = np.asarray(jump.A, dtype=float), float(jump.B), float(jump.C)
    u0, z0 = seed.U0dot, np.asarray(seed.Z0)
    res = {"constraint_2": float(np.sum(s * z0 * A) - B * u0),
           "normalization": float(-2 * u0 * C + np.sum(s * A * A) - seed.e)}
    if max(abs(v) for v in res.values()) > max_residual:
        raise NumericalFailure(f"plus-branch data off-shell (residuals {res}); "
                               "extrapolation unreliable")
    raw = SeedData(B, z0, u0, C, A, seed.e)
    B_p = float(np.sum(s * z0 * A)) / u0
    C_p = (float(np.sum(s * A * A)) - seed.e) / (2 * u0)
    plus_seed = SeedData(B_p, z0, u0, C_p, A, seed.e)
    return LimitingGeodesic(seed, BackgroundGeodesic.from_seed(seed, bg),
                            BackgroundGeodesic.from_seed(plus_seed, bg), plus_seed, raw, res,
                            {"dB": B_p - B, "dC": C_p - C})


# --------------------------------------------------------------------------- association

DEFAULT_TEST_FUNCTIONS = ((0.0, 0.3), (0.05, 0.2), (-0.1, 0.4))


def bump_test_function(center: float, width: float):
    return lambda t: _bump((np.asarray(t, dtype=float) - center) / width)


def _gauss_pieces(breaks, per_piece, order=24):
    x, w = np.polynomial.legendre.leggauss(order)
    nodes, weights = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi <= lo:
            continue
        edges = np.linspace(lo, hi, per_piece + 1)
        for a, b in zip(edges[:-1], edges[1:]):
            nodes.append(0.5 * (b - a) * x + 0.5 * (a + b))
            weights.append(0.5 * (b - a) * w)
    return np.concatenate(nodes), np.concatenate(weights)


@dataclass
class AssociationReport:
    eps: list
    distances: dict
    rates: dict
    monotone: dict
    pairings: list
    vdot_witness: list
    jump_magnitude: float
    verdicts: dict

    def to_dict(self) -> dict:
        return {"eps": self.eps, "distances": self.distances, "rates": self.rates,
                "monotone": self.monotone, "pairings": self.pairings,
                "vdot_witness": self.vdot_witness, "jump_magnitude": self.jump_magnitude,
                "verdicts": self.verdicts}


def _association_rung(args):
    seed, eps, profile, moll, bg, cfg, lim, window, tests = args
    traj = integrate_global(seed, eps, profile, moll, bg, cfg, t_span=window)
    t = traj.sample_times((window[1] - window[0]) / 4000, zone_points=8)
    pos, vel = traj.evaluate(t)
    lp, lv = lim.evaluate(t)
    d_u = float(np.max(np.maximum(np.abs(pos[:, 0] - lp[:, 0]), np.abs(vel[:, 0] - lv[:, 0]))))
    d_z = float(np.max(np.abs(pos[:, 2:] - lp[:, 2:])))
    zone = [c for c in traj.crossings if c.alpha <= 0 <= c.beta or c.index == 0]
    alpha, beta = (zone[0].alpha, zone[0].beta) if zone else (-eps, eps)
    breaks = sorted({window[0], min(alpha, 0.0), 0.0, max(beta, 0.0), window[1]})
    # fine pieces inside the zone, coarse ones outside
    nodes, weights = [], []
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        inside = lo >= alpha - 1e-15 and hi <= beta + 1e-15
        n, w = _gauss_pieces([lo, hi], 16 if inside else 64)
        nodes.append(n)
        weights.append(w)
    nodes, weights = np.concatenate(nodes), np.concatenate(weights)
    vp, _ = traj.evaluate(nodes)
    lpv, _ = lim.evaluate(nodes)
    dv = vp[:, 1] - lpv[:, 1]
    pairings = [float(np.sum(weights * dv * bump_test_function(c, w)(nodes))) for c, w in tests]
    # V' near t = 0: compare the continuous V'_eps(0) with both one-sided limits
    _, v0 = traj.evaluate(np.array([0.0]))
    left = lim.one_sided(np.array([0.0]), -1)[1][0, 1]
    right = lim.one_sided(np.array([0.0]), +1)[1][0, 1]
    tz = np.linspace(alpha, beta, 401)
    _, vz = traj.evaluate(tz)
    _, lvz = lim.evaluate(tz)
    sup_vdot = max(float(np.max(np.abs(vz[:, 1] - lvz[:, 1]))),
                   abs(v0[0, 1] - left), abs(v0[0, 1] - right))
    return {"eps": eps, "U_C1": d_u, "Z_C0": d_z, "pairings": pairings, "Vdot_sup": sup_vdot}


def association_verdict(seed: SeedData, profile, moll, bg, lim: LimitingGeodesic, cfg=None,
                        eps_ladder=None, test_functions=DEFAULT_TEST_FUNCTIONS,
                        window=(-0.5, 0.5), workers: int = 1) -> AssociationReport:
    """C^1 convergence of U, C^0 of Z and weak convergence of V to the limiting geodesic."""
    cfg = cfg or IntegrationConfig()
    eps_ladder = geometric_ladder(1e-2, 0.5, 5) if eps_ladder is None else np.asarray(eps_ladder)
    jobs = [(seed, float(e), profile, moll, bg, cfg, lim, tuple(window), tuple(test_functions))
            for e in eps_ladder]
    rows = map_rungs(_association_rung, jobs, workers)
    eps = [r["eps"] for r in rows]
    dist = {"U_C1": [r["U_C1"] for r in rows], "Z_C0": [r["Z_C0"] for r in rows]}
    pair = [r["pairings"] for r in rows]
    for j in range(len(test_functions)):
        dist[f"V_weak_{j}"] = [abs(p[j]) for p in pair]
    floor = 1e-14
    rates = {k: loglog_slope(eps, v, floor) for k, v in dist.items()}
    monotone = {k: is_monotone_decreasing(v) for k, v in dist.items()}
    jump = abs(lim.plus_seed.V0dot - seed.V0dot)
    witness = [r["Vdot_sup"] for r in rows]
    verdicts = {
        "U_C1": monotone["U_C1"] and rates["U_C1"] > 0,
        "Z_C0": monotone["Z_C0"] and rates["Z_C0"] > 0,
        "V_weak": all(rates[f"V_weak_{j}"] > 0 for j in range(len(test_functions))),
        "Vdot_not_uniform": all(w >= 0.5 * jump for w in witness) if jump > 0 else None,
    }
    return AssociationReport(eps, dist, rates, monotone, pair, witness, jump, verdicts)


# --------------------------------------------------------------------------- continuous dependence

def _shift_seed(seed: SeedData, delta: dict, scale: float = 1.0) -> SeedData:
    d = {k: np.asarray(v, dtype=float) * scale for k, v in delta.items()}
    return SeedData(seed.V0 + d.get("V0", 0.0), np.asarray(seed.Z0) + d.get("Z0", 0.0),
                    seed.U0dot + d.get("U0dot", 0.0), seed.V0dot + d.get("V0dot", 0.0),
                    np.asarray(seed.Z0dot) + d.get("Z0dot", 0.0), seed.e)


def continuous_dependence_check(seed: SeedData, delta: dict, bg: BackgroundParams,
                                window=None, n: int = 4001) -> dict:
    """Amplification of a data perturbation by the background flow over ``[t1, a pi]``.

    ``delta`` maps seed field names to increments. Constraint violations of
    the perturbed data are irrelevant here: the background field is linear.
    """
    if seed.e * bg.sigma <= 0:
        raise PreconditionError("continuous dependence bound is stated for sigma e > 0")
    t1, t2 = (0.0, math.pi * bg.a) if window is None else window
    t = np.linspace(t1, t2, n)
    ref = BackgroundGeodesic.from_seed(seed, bg)

    def sup_diff(scale):
        pert = BackgroundGeodesic.from_seed(_shift_seed(seed, delta, scale), bg)
        pr, vr = ref.evaluate(t)
        pp, vp = pert.evaluate(t)
        diff = np.max(np.abs(np.concatenate([pp - pr, vp - vr], axis=1)), axis=1)
        return float(np.max(diff)), float(diff[0])

    full, init = sup_diff(1.0)
    half, _ = sup_diff(0.5)
    kappa = seed.e * bg.sigma / bg.a2
    L = max(1.0, abs(kappa))  # infinity norm of the Jacobian of (x, v) -> (v, -kappa x)
    pr, _ = ref.evaluate(t)
    hull_bound = abs(seed.e) / bg.a2 * (1.0 + float(np.max(np.abs(pr))))
    factor = math.exp(math.pi * bg.a * L)
    ratio = half / full if full > 0 else None
    return {"sup_diff": full, "initial_diff": init, "L": L, "L_hull_bound": hull_bound,
            "amplification_bound": factor, "amplification": full / init if init > 0 else None,
            "passed": full <= init * factor * (1 + 1e-12) if init > 0 else full == 0.0,
            "halving_ratio": ratio,
            "linear": ratio is None or abs(ratio - 0.5) <= 0.005}


# --------------------------------------------------------------------------- scaling proxies

def _zone_derivatives(seg: ZoneSegment, fld, n: int = 4001):
    """Samples of the first three derivatives of (U, Z) and V' across a zone segment."""
    t = np.linspace(seg.t0, seg.t1, n)
    pos, vel = seg.evaluate(t)
    # the field is even under time reversal, so original-time states suffice
    acc = np.array([fld(t[i], np.concatenate([pos[i], vel[i]]))[0] for i in range(n)])
    ddot = acc[:, 5:]
    jerk = np.gradient(ddot, t, axis=0, edge_order=2)
    return t, pos, vel, ddot, jerk


def moderateness_scan(seed: SeedData, profile, moll, bg, cfg=None, eps_ladder=None,
                      window=(-1.0, 1.0)) -> dict:
    """Sup norms of the curve and its derivatives per rung, with log-log slopes against eps."""
    cfg = cfg or IntegrationConfig()
    eps_ladder = geometric_ladder(1e-2, 0.5, 5) if eps_ladder is None else np.asarray(eps_ladder)
    rows = []
    for eps in eps_ladder:
        traj = integrate_global(seed, float(eps), profile, moll, bg, cfg, t_span=window)
        t = traj.sample_times((window[1] - window[0]) / 2000)
        pos, vel = traj.evaluate(t)
        row = {"eps": float(eps), "U": np.max(np.abs(pos[:, 0])), "Z": np.max(np.abs(pos[:, 2:])),
               "Udot": np.max(np.abs(vel[:, 0])), "Zdot": np.max(np.abs(vel[:, 2:])),
               "Vdot": np.max(np.abs(vel[:, 1])), "Uddot": 0.0, "Zddot": 0.0,
               "Udddot": 0.0, "Zdddot": 0.0}
        fld = _Field(eps, profile, moll, bg, seed.e)
        for seg in traj.zone_segments():
            _, _, v, dd, jj = _zone_derivatives(seg, fld)
            row["Vdot"] = max(row["Vdot"], np.max(np.abs(v[:, 1])))
            row["Uddot"] = max(row["Uddot"], np.max(np.abs(dd[:, 0])))
            row["Zddot"] = max(row["Zddot"], np.max(np.abs(dd[:, 2:])))
            row["Udddot"] = max(row["Udddot"], np.max(np.abs(jj[:, 0])))
            row["Zdddot"] = max(row["Zdddot"], np.max(np.abs(jj[:, 2:])))
        rows.append({k: float(v) for k, v in row.items()})
    eps = [r["eps"] for r in rows]
    slopes = {k: loglog_slope(eps, [r[k] for r in rows], 1e-300) for k in rows[0] if k != "eps"}
    return {"rungs": rows, "slopes": slopes}


def stability_scan(seed: SeedData, profile, moll, bg, channel: str, ps=(1e-4, 1e-5, 1e-6),
                   eps_values=(1e-2, 1e-3), cfg=None, direction=None) -> dict:
    """Exit-state sensitivity ``|delta exit| / p`` for one perturbation channel.

    Perturbed runs replay the reference step sizes so that adaptive step
    selection does not add noise to the differences.
    """
    cfg = cfg or IntegrationConfig()
    geo = BackgroundGeodesic.from_seed(seed, bg)
    vec = np.ones(3) / math.sqrt(3.0) if direction is None else np.asarray(direction, dtype=float)
    out = {"channel": channel, "ps": list(ps), "eps": list(eps_values), "C": {}}
    for eps in eps_values:
        entry = seed_family_data(geo, eps)
        seg, ref = integrate_through_wave(entry, eps, profile, moll, bg, seed.e, cfg)
        steps = seg.step_sizes
        ref_exit = _exit_vector(ref)
        cs = []
        for p in ps:
            pert = _make_perturbation(channel, p, vec)
            _, rec = integrate_through_wave(entry, eps, profile, moll, bg, seed.e, cfg,
                                            perturbation=pert, fixed_steps=steps)
            cs.append(float(np.max(np.abs(_exit_vector(rec) - ref_exit))) / p)
        out["C"][repr(float(eps))] = cs
    all_c = [c for cs in out["C"].values() for c in cs]
    out["ratio"] = max(all_c) / min(all_c) if min(all_c) > 0 else INF
    out["stable"] = out["ratio"] <= 2.0
    return out


def _make_perturbation(channel, p, vec):
    if channel == "d":
        return Perturbation(d=p)
    if channel == "f":
        return Perturbation(f=tuple(p * vec))
    if channel == "h":
        return Perturbation(h=tuple(p * vec))
    if channel == "a":
        return Perturbation(a=(p,))
    if channel == "c":
        return Perturbation(c=(tuple(p * vec),))
    raise ValueError(f"unknown perturbation channel {channel!r}")


def _exit_vector(rec) -> np.ndarray:
    return np.concatenate([[rec.beta], rec.exit_state.pos[1:], rec.exit_state.vel])


# --------------------------------------------------------------------------- multi crossing

def crossing_ladder(seed, profile, moll, bg, cfg, eps_ladder, crossings: int, t_span=None,
                    workers: int = 1) -> list:
    """Per-rung CrossingRecords of the first ``crossings`` forward zone passes."""
    cfg = IntegrationConfig(**{**cfg.__dict__, "max_crossings": crossings})
    t_span = t_span or (-0.5, (crossings - 0.5) * math.pi * bg.a + 0.5)
    jobs = [(seed, float(e), profile, moll, bg, cfg, t_span) for e in eps_ladder]
    return map_rungs(_crossing_rung, jobs, workers)


def _crossing_rung(args):
    seed, eps, profile, moll, bg, cfg, t_span = args
    traj = integrate_global(seed, eps, profile, moll, bg, cfg, t_span=t_span)
    return [c for c in traj.crossings if c.index >= 0]


def crossing_time_fits(records_per_rung: list, eps_ladder, bg) -> list:
    """For crossing k: deviation of alpha_k from k a pi with power-law fit against eps."""
    out = []
    n = min(len(r) for r in records_per_rung)
    eps = np.asarray(eps_ladder, dtype=float)
    for k in range(n):
        devs = np.array([abs(r[k].alpha - k * math.pi * bg.a) for r in records_per_rung])
        slope = loglog_slope(eps, devs, 1e-300)
        out.append({"k": k, "deviation": devs.tolist(), "rate": slope,
                    "C": float(np.max(devs / eps))})
    return out


def second_crossing_check(seed, profile, moll, bg, cfg, eps_ladder, lim: LimitingGeodesic,
                          workers: int = 1) -> dict:
    """Exit data of the second crossing versus a fresh-seed extrapolation at t = a pi.

    The plus branch returns to U = 0 with U' < 0; the null flip
    ``(U, V) -> (-U, -V)`` together with the mirrored mollifier turns it
    into a standard seed.
    """
    per_rung = crossing_ladder(seed, profile, moll, bg, cfg, eps_ladder, 2, workers=workers)
    rungs = []
    for eps, recs in zip(eps_ladder, per_rung):
        obs = exit_observables(recs[1], bg)
        obs["eps"] = float(eps)
        rungs.append(obs)
    cont, cont_fits, _, _ = extrapolate_rungs(rungs, keys=JUMP_KEYS)
    t_hit = math.pi * bg.a
    pos, vel = lim.plus.evaluate(t_hit)
    fresh = flip_null(SeedData(pos[1], pos[2:], vel[0], vel[1], vel[2:], seed.e))
    jd = jump_extrapolate(fresh, profile, moll.reflected(), bg, cfg, eps_ladder, workers=workers)
    mapped = {"A2": jd.values["A2"], "A3": jd.values["A3"], "A4": jd.values["A4"],
              "B": -jd.values["B"], "C": -jd.values["C"]}
    rows = {}
    for k in JUMP_KEYS:
        tol = 10.0 * (cont_fits[k].residual + jd.fits[k].residual) + 1e-5 * max(1.0, abs(mapped[k]))
        rows[k] = {"continued": cont[k], "fresh": mapped[k], "diff": abs(cont[k] - mapped[k]),
                   "tol": tol}
    return {"keys": rows, "passed": all(r["diff"] <= r["tol"] for r in rows.values()),
            "fresh_seed": fresh.to_dict()}
