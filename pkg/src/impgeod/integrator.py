"""Geodesics of the regularized wave spacetime.

Outside the strip ``|U| <= eps`` the regularized metric is the background,
so trajectories are stitched from closed-form background arcs and numeric
Dormand-Prince segments inside the strip. Backward-in-time pieces are
produced by integrating the time-reflected curve forward.
"""

from __future__ import annotations

import csv
import logging
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize

from . import kernels
from .background import BackgroundGeodesic, crossing_times, seed_family_data
from .core import (BackgroundParams, SeedData, State5, constraint_F, constraint_rate,
                   metric_norm, validate_seed)
from .errors import (CertificateViolation, ConfigError, DenominatorGuardError,
                     NumericalFailure, StepUnderflowError)

log = logging.getLogger(__name__)

CSV_COLUMNS = ["t", "U", "V", "Z2", "Z3", "Z4", "dU", "dV", "dZ2", "dZ3", "dZ4",
               "F_residual", "norm_residual", "segment_tag"]

BOUNDARY_RTOL = 1e-9


@dataclass(frozen=True)
class IntegrationConfig:
    rel_tol: float = 1e-12
    abs_tol: float = 1e-14
    max_step_in_zone: float = 1.0 / 20.0
    zone_margin: float = 1.0
    project_onto_hyperboloid: bool = False
    max_crossings: int = 8
    max_steps: int = 200_000

    def __post_init__(self):
        if not (self.rel_tol > 0 and self.abs_tol > 0):
            raise ConfigError("integration tolerances must be positive")
        if not 0 < self.max_step_in_zone <= 0.25:
            raise ConfigError("max_step_in_zone must lie in (0, 1/4]")
        if not self.zone_margin >= 1.0:
            raise ConfigError("zone_margin must be >= 1")
        if self.max_crossings < 0 or self.max_steps < 16:
            raise ConfigError("max_crossings must be >= 0 and max_steps >= 16")


@dataclass(frozen=True)
class Perturbation:
    """Forcing and data shifts for the perturbed (u, z) model system.

    ``a`` and ``c`` are polynomial coefficients in ``t - alpha`` (lowest
    order first) for the forcing of the U and Z equations; ``c`` has shape
    ``(m, 3)``. ``d``, ``f``, ``h`` shift the entry data of ``U'``, ``Z`` and
    ``Z'``.
    """

    a: tuple = ()
    c: tuple = ()
    d: float = 0.0
    f: tuple = (0.0, 0.0, 0.0)
    h: tuple = (0.0, 0.0, 0.0)

    def forcing_arrays(self):
        fa = np.asarray(self.a, dtype=float).reshape(-1)
        fc = np.asarray(self.c, dtype=float).reshape(-1, 3)
        return fa, fc


class _Field:
    """Packed kernel arguments for one (eps, profile, mollifier, background, e)."""

    def __init__(self, eps, profile, moll, bg, e, perturbation=None, t_force0=0.0, guard=True):
        if not eps > 0:
            raise ValueError("eps must be positive")
        if not hasattr(profile, "kind") or not hasattr(moll, "kind"):
            raise ConfigError("profiles and mollifiers must come from the catalogs")
        self.eps = float(eps)
        fa, fc = (perturbation or Perturbation()).forcing_arrays()
        self.fp = np.array([eps, bg.sigma, bg.a2, float(e), float(t_force0)])
        self.ip = np.array([profile.kind, moll.kind, 1 if guard else 0], dtype=np.int64)
        self.pp = np.ascontiguousarray(profile.kernel_params, dtype=float)
        self.mp = np.ascontiguousarray(moll.kernel_params, dtype=float)
        self.fa = np.ascontiguousarray(fa)
        self.fc = np.ascontiguousarray(fc)

    @property
    def args(self):
        return self.fp, self.ip, self.pp, self.mp, self.fa, self.fc

    def __call__(self, t, y):
        out = np.empty(10)
        ok = kernels.rhs_kernel(float(t), np.ascontiguousarray(y, dtype=float), out, *self.args)
        return out, ok


def rhs(state: State5, eps, profile, moll, bg: BackgroundParams, e) -> np.ndarray:
    """Time derivative of ``(pos, vel)`` under the regularized geodesic equations."""
    out, ok = _Field(eps, profile, moll, bg, e)(state.t, state.vector())
    if not ok:
        raise DenominatorGuardError(
            f"denominator guard violated at U={state.U:.3e} (eps={eps:.3e} too large)")
    return out


# --------------------------------------------------------------------------- segments

@dataclass(eq=False)
class Segment:
    kind: str  # "background", "wave_zone" or "impulse_surface"
    t0: float
    t1: float
    reflected: bool = False

    def _local(self, tau):
        raise NotImplementedError

    def evaluate(self, t):
        t = np.asarray(t, dtype=float)
        if self.reflected:
            pos, vel = self._local(-t)
            return pos, -vel
        return self._local(t)


@dataclass(eq=False)
class BackgroundSegment(Segment):
    geo: BackgroundGeodesic = None

    def _local(self, tau):
        return self.geo.evaluate(tau)


@dataclass(eq=False)
class ZoneSegment(Segment):
    ts: np.ndarray = None
    ys: np.ndarray = None
    Ks: np.ndarray = None
    field_args: tuple = ()

    def _local(self, tau):
        tau = np.ascontiguousarray(np.atleast_1d(tau), dtype=float)
        y = kernels.dense_eval(self.ts, self.ys, self.Ks, tau, *self.field_args)
        return y[:, :5], y[:, 5:]

    @property
    def step_times(self) -> np.ndarray:
        return -self.ts[::-1] if self.reflected else self.ts.copy()

    @property
    def step_sizes(self) -> np.ndarray:
        return np.diff(self.ts)


@dataclass
class CrossingRecord:
    alpha: float
    beta: float
    entry_state: State5
    exit_state: State5
    index: int
    direction: int = 1  # +1: U increases through the zone
    crossed: bool = True
    n_steps: int = 0


@dataclass(eq=False)
class Trajectory:
    eps: float
    segments: list
    crossings: list
    bg: BackgroundParams
    e: int
    profile: object
    moll: object
    flags: list = field(default_factory=list)

    @property
    def t_range(self):
        return self.segments[0].t0, self.segments[-1].t1

    def evaluate(self, t):
        """Positions and velocities at the given times, ``(n, 5)`` each."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        starts = np.array([s.t0 for s in self.segments])
        which = np.clip(np.searchsorted(starts, t, side="right") - 1, 0, len(self.segments) - 1)
        pos = np.empty((t.size, 5))
        vel = np.empty((t.size, 5))
        for k in np.unique(which):
            m = which == k
            p, v = self.segments[k].evaluate(t[m])
            pos[m], vel[m] = p, v
        return pos, vel

    def segment_tags(self, t) -> list:
        starts = np.array([s.t0 for s in self.segments])
        which = np.clip(np.searchsorted(starts, np.atleast_1d(t), side="right") - 1,
                        0, len(self.segments) - 1)
        return [self.segments[k].kind for k in which]

    def sample(self, times) -> list:
        pos, vel = self.evaluate(times)
        return [State5(t, p, v) for t, p, v in zip(np.atleast_1d(times), pos, vel)]

    def sample_times(self, dt: float, zone_points: int = 4) -> np.ndarray:
        """Uniform grid with spacing ``dt`` plus every zone step (subdivided)."""
        t0, t1 = self.t_range
        parts = [np.arange(t0, t1, dt), [t1]]
        for seg in self.segments:
            parts.append([seg.t0, seg.t1])
            if isinstance(seg, ZoneSegment):
                st = seg.step_times
                sub = st[:-1, None] + np.diff(st)[:, None] * (np.arange(zone_points) / zone_points)
                parts.append(sub.ravel())
        return np.unique(np.concatenate([np.asarray(p, dtype=float) for p in parts]))

    def zone_segments(self) -> list:
        return [s for s in self.segments if isinstance(s, ZoneSegment)]

    def diagnostics(self, times):
        pos, vel = self.evaluate(times)
        f = constraint_F(pos, self.bg)
        df = constraint_rate(pos, self.bg, vel)
        nr = metric_norm(pos, self.eps, self.profile, self.moll, self.bg, vel=vel) - self.e
        return pos, vel, f, df, nr


def write_trajectory_csv(traj: Trajectory, path, times=None, dt: float = 0.01) -> None:
    times = traj.sample_times(dt) if times is None else np.asarray(times, dtype=float)
    pos, vel, f, df, nr = traj.diagnostics(times)
    tags = traj.segment_tags(times)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(CSV_COLUMNS)
        for i, t in enumerate(times):
            row = [t, *pos[i], *vel[i], f[i], nr[i]]
            w.writerow([f"{x:.17g}" for x in row] + [tags[i]])


# --------------------------------------------------------------------------- wave zone

def _raise_for_status(status, t, eps):
    if status == kernels.STATUS_GUARD:
        raise DenominatorGuardError(
            f"denominator guard violated near t={t:.6g}: eps={eps:.3e} is too large for this profile")
    if status == kernels.STATUS_UNDERFLOW:
        raise StepUnderflowError(f"step size underflow near t={t:.6g}")


def _run_zone(t0, y0, side, width, fld, cfg, t_limit, fixed_h):
    h_max = cfg.max_step_in_zone * fld.eps
    cap = min(4096, cfg.max_steps)
    fixed = np.ascontiguousarray(fixed_h if fixed_h is not None else np.empty(0), dtype=float)
    while True:
        status, n, ts, ys, Ks = kernels.zone_kernel(
            float(t0), np.ascontiguousarray(y0, dtype=float), float(side), float(width),
            0.1 * h_max, h_max, float(t_limit), cfg.rel_tol, cfg.abs_tol,
            *fld.args, fixed, bool(cfg.project_onto_hyperboloid), int(cap))
        if status != kernels.STATUS_CAPACITY or cap >= cfg.max_steps:
            break
        cap = min(2 * cap, cfg.max_steps)
    t_last = ts[n] if n else t0
    _raise_for_status(status, t_last, fld.eps)
    if status == kernels.STATUS_CAPACITY:
        raise NumericalFailure(f"no exit from the wave zone within {cfg.max_steps} steps")
    return status, ts[: n + 1].copy(), ys[: n + 1].copy(), Ks[:n].copy()


def _refine_surface(ts, ys, Ks, target_u, fld, cfg):
    """Shorten the last step so that it ends exactly on ``U = target_u``."""
    t_prev, y_prev = ts[-2], np.ascontiguousarray(ys[-2])
    k1 = np.ascontiguousarray(Ks[-1, 0])
    K = np.empty((7, 10))
    y_new = np.empty(10)

    def step(h):
        kernels.dopri_step(t_prev, y_prev, h, k1, K, y_new, cfg.rel_tol, cfg.abs_tol, *fld.args)
        return y_new

    def g(h):
        return step(h)[0] - target_u

    h_full = ts[-1] - t_prev
    g0, g1 = y_prev[0] - target_u, g(h_full)
    if g0 == 0.0:
        h_star = 0.0
    elif g1 == 0.0 or g0 * g1 > 0:
        h_star = h_full
    else:
        h_star = optimize.brentq(g, 0.0, h_full, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=200)
    if h_star <= 0.0:
        return ts[:-1], ys[:-1], Ks[:-1]
    y_end = step(h_star).copy()
    ts[-1] = t_prev + h_star
    ys[-1] = y_end
    Ks[-1] = K
    return ts, ys, Ks


def _zone_setup(y, width):
    u, du = y[0], y[5]
    if abs(u) >= width * (1.0 - BOUNDARY_RTOL):
        return -1.0 if u > 0 else 1.0
    return 1.0 if du >= 0 else -1.0


def _integrate_zone(t0, y0, fld, cfg, *, t_limit=math.inf, fixed_h=None, reflected=False, eta=None):
    width = cfg.zone_margin * fld.eps
    side = _zone_setup(y0, width)
    status, ts, ys, Ks = _run_zone(t0, y0, side, width, fld, cfg, t_limit, fixed_h)
    if status == kernels.STATUS_TIME_LIMIT:
        if eta is not None:
            raise CertificateViolation(
                f"geodesic did not leave the wave zone within the certified window eta={eta:.6g}")
        raise NumericalFailure("integration time limit reached inside the wave zone")
    crossed = status == kernels.STATUS_EXIT
    target = side * width if crossed else -side * width
    ts, ys, Ks = _refine_surface(ts, ys, Ks, target, fld, cfg)
    kind = "wave_zone"
    if reflected:
        seg = ZoneSegment(kind, -ts[-1], -ts[0], True, ts, ys, Ks, fld.args)
    else:
        seg = ZoneSegment(kind, ts[0], ts[-1], False, ts, ys, Ks, fld.args)
    return seg, int(side), crossed


def integrate_through_wave(entry: State5, eps, profile, moll, bg: BackgroundParams, e,
                           cfg: IntegrationConfig | None = None, *, certificate=None,
                           perturbation: Perturbation | None = None, fixed_steps=None,
                           index: int = 0):
    """Integrate from a state on (or inside) the strip until it leaves the strip.

    Returns ``(segment, record)``. With a certificate the integration is cut
    off at ``entry.t + eta`` and a missing exit raises ``CertificateViolation``.
    ``fixed_steps`` replays a given step-size sequence with error control off.
    """
    cfg = cfg or IntegrationConfig()
    y0 = entry.vector()
    if perturbation is not None:
        y0[5] += perturbation.d
        y0[2:5] += np.asarray(perturbation.f, dtype=float)
        y0[7:10] += np.asarray(perturbation.h, dtype=float)
    fld = _Field(eps, profile, moll, bg, e, perturbation, t_force0=entry.t)
    t_limit, eta = math.inf, None
    if certificate is not None:
        eta = certificate.eta
        t_limit = entry.t + eta
        if eps > certificate.eps0:
            warnings.warn(f"eps={eps:.3e} exceeds the certified eps0={certificate.eps0:.3e}",
                          stacklevel=2)
    seg, side, crossed = _integrate_zone(entry.t, y0, fld, cfg, t_limit=t_limit,
                                         fixed_h=fixed_steps, eta=eta)
    rec = CrossingRecord(
        alpha=entry.t, beta=float(seg.ts[-1]),
        entry_state=State5.from_vector(entry.t, seg.ys[0]),
        exit_state=State5.from_vector(seg.ts[-1], seg.ys[-1]),
        index=index, direction=side, crossed=crossed, n_steps=seg.ts.size - 1)
    return seg, rec


def integrate_perturbed_model(entry: State5, eps, profile, moll, bg, e, cfg=None,
                              perturbations: Perturbation | None = None, fixed_steps=None):
    """Wave-zone run of the perturbed (u, z) system; V is carried along unperturbed."""
    return integrate_through_wave(entry, eps, profile, moll, bg, e, cfg,
                                  perturbation=perturbations or Perturbation(),
                                  fixed_steps=fixed_steps)


# --------------------------------------------------------------------------- global runs

def _sweep(t, y, t_end, fld, cfg, bg, e, reflected, flags):
    """Alternate background arcs and zone passes forward in (local) time."""
    segments, crossings = [], []
    width = cfg.zone_margin * fld.eps
    while t < t_end:
        u, du = y[0], y[5]
        on_edge = abs(u) <= width * (1.0 + BOUNDARY_RTOL)
        inward = (u < 0 and du > 0) or (u > 0 and du < 0)
        if abs(u) < width * (1.0 - BOUNDARY_RTOL) or (on_edge and inward):
            if len(crossings) >= cfg.max_crossings:
                break
            seg, side, crossed = _integrate_zone(t, y, fld, cfg, reflected=reflected)
            segments.append(seg)
            crossings.append((seg.ts[0], seg.ts[-1], seg.ys[0], seg.ys[-1], side, crossed,
                              seg.ts.size - 1))
            if not crossed:
                flags.append(f"zone grazed without crossing at t={seg.ts[0]:.6g}")
            t, y = float(seg.ts[-1]), seg.ys[-1].copy()
            continue
        geo = BackgroundGeodesic(bg, e, t, y[:5].copy(), y[5:].copy())
        t_next = None
        for level, direction in ((width, -1), (-width, 1)):
            for ev in crossing_times(geo, level, (t, t_end)):
                if ev.direction != direction or ev.t <= t + 1e-12 * max(1.0, abs(t)):
                    continue
                if ev.tangential:
                    flags.append(f"tangential contact with the zone boundary at t={ev.t:.6g}")
                    continue
                if t_next is None or ev.t < t_next:
                    t_next = ev.t
                break
        t_stop = t_end if t_next is None else t_next
        segments.append(BackgroundSegment("background", t, t_stop, False, geo))
        if t_next is None:
            t = t_end
            break
        pos, vel = geo.evaluate(t_next)
        t, y = t_next, np.concatenate([pos, vel])
    return segments, crossings, t


def integrate_global(initial, eps, profile, moll, bg: BackgroundParams,
                     cfg: IntegrationConfig | None = None, t_span=(-math.pi, math.pi),
                     e: int | None = None) -> Trajectory:
    """Global regularized geodesic from seed data (or any on-shell state).

    For seed data the curve coincides with the seed geodesic up to the entry
    parameter ``alpha_eps`` and is continued both ways from there. Forward
    and backward runs each handle at most ``cfg.max_crossings`` zone passes;
    the trajectory ends at the next zone entry once that budget is used.
    """
    cfg = cfg or IntegrationConfig()
    t_lo, t_hi = float(t_span[0]), float(t_span[1])
    if not t_lo < t_hi:
        raise ValueError("t_span must be increasing")
    flags = []
    if isinstance(initial, SeedData):
        validate_seed(initial, bg).raise_for_failure()
        e = initial.e
        geo = BackgroundGeodesic.from_seed(initial, bg)
        if cfg.zone_margin * eps > eps:
            start = _margin_entry(geo, cfg.zone_margin * eps)
        else:
            start = seed_family_data(geo, eps)
    else:
        if e is None:
            raise ValueError("e is required when starting from a State5")
        start = initial
    fld = _Field(eps, profile, moll, bg, e)
    y0 = start.vector()

    if y0[5] == 0.0 and (y0[0] == 0.0 or e == 0):
        kind = "impulse_surface" if y0[0] == 0.0 else "background"
        geo = BackgroundGeodesic(bg, e, start.t, y0[:5], y0[5:])
        seg = BackgroundSegment(kind, t_lo, t_hi, False, geo)
        return Trajectory(eps, [seg], [], bg, e, profile, moll, flags)

    t_ref = min(max(start.t, t_lo), t_hi)
    if t_ref != start.t:
        geo = BackgroundGeodesic(bg, e, start.t, y0[:5], y0[5:])
        pos, vel = geo.evaluate(t_ref)
        y0 = np.concatenate([pos, vel])
    fwd, fwd_x, _ = _sweep(t_ref, y0, t_hi, fld, cfg, bg, e, False, flags)
    y_ref = np.concatenate([y0[:5], -y0[5:]])
    bwd, bwd_x, _ = _sweep(-t_ref, y_ref, -t_lo, fld, cfg, bg, e, True, flags)
    for seg in bwd:
        if isinstance(seg, BackgroundSegment):
            seg.reflected = True
            seg.t0, seg.t1 = -seg.t1, -seg.t0
    segments = sorted(bwd, key=lambda s: s.t0) + fwd
    crossings = []
    for k, (a, b, ya, yb, side, crossed, n) in enumerate(fwd_x):
        crossings.append(CrossingRecord(a, b, State5.from_vector(a, ya), State5.from_vector(b, yb),
                                        k, side, crossed, n))
    for k, (a, b, ya, yb, side, crossed, n) in enumerate(bwd_x):
        crossings.append(CrossingRecord(
            -b, -a, State5(-b, yb[:5], -yb[5:]), State5(-a, ya[:5], -ya[5:]),
            -(k + 1), -side, crossed, n))
    crossings.sort(key=lambda r: r.alpha)
    for msg in flags:
        log.info(msg)
    return Trajectory(eps, segments, crossings, bg, e, profile, moll, flags)


def _margin_entry(geo: BackgroundGeodesic, width: float) -> State5:
    s = seed_family_data(geo, width)
    return s
