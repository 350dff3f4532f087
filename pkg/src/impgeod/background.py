"""Closed-form geodesics of the unperturbed (anti-)de Sitter hyperboloid.

With no wave, every chart coordinate obeys ``x'' = -kappa x`` with
``kappa = e sigma / a^2``, so each geodesic is a combination of cos/sin,
cosh/sinh or linear functions depending on the sign of ``e sigma``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import BackgroundParams, SeedData, State5
from .errors import PreconditionError

TRIG, LINEAR, HYPERBOLIC = "trig", "linear", "hyperbolic"


@dataclass(frozen=True, eq=False)
class BackgroundGeodesic:
    """Background geodesic through ``(pos0, vel0)`` at parameter ``t0``."""

    bg: BackgroundParams
    e: int
    t0: float
    pos0: np.ndarray
    vel0: np.ndarray
    seed: SeedData | None = None

    @classmethod
    def from_seed(cls, seed: SeedData, bg: BackgroundParams) -> BackgroundGeodesic:
        s = seed.state()
        return cls(bg, seed.e, 0.0, s.pos, s.vel, seed)

    @classmethod
    def from_state(cls, state: State5, bg: BackgroundParams, e: int) -> BackgroundGeodesic:
        return cls(bg, e, state.t, state.pos, state.vel)

    @property
    def kappa(self) -> float:
        return self.e * self.bg.sigma / self.bg.a2

    @property
    def branch(self) -> str:
        se = self.e * self.bg.sigma
        return TRIG if se > 0 else (HYPERBOLIC if se < 0 else LINEAR)

    @property
    def omega(self) -> float:
        return math.sqrt(abs(self.kappa))

    def _basis(self, tau):
        """``(c, s, c', s')`` with ``x(t) = x0 c + v0 s``."""
        tau = np.asarray(tau, dtype=float)
        w = self.omega
        if self.branch == TRIG:
            wt = w * tau
            return np.cos(wt), np.sin(wt) / w, -w * np.sin(wt), np.cos(wt)
        if self.branch == HYPERBOLIC:
            wt = w * tau
            return np.cosh(wt), np.sinh(wt) / w, w * np.sinh(wt), np.cosh(wt)
        one = np.ones_like(tau)
        return one, tau, np.zeros_like(tau), one

    def evaluate(self, t):
        """Positions and velocities at ``t`` (scalar or array) as ``(..., 5)`` arrays."""
        c, s, dc, ds = self._basis(np.asarray(t, dtype=float) - self.t0)
        p0, v0 = np.asarray(self.pos0), np.asarray(self.vel0)
        pos = c[..., None] * p0 + s[..., None] * v0
        vel = dc[..., None] * p0 + ds[..., None] * v0
        return pos, vel

    def u_of(self, t):
        c, s, dc, ds = self._basis(np.asarray(t, dtype=float) - self.t0)
        return c * self.pos0[0] + s * self.vel0[0], dc * self.pos0[0] + ds * self.vel0[0]


def background_state(geo: BackgroundGeodesic, t: float) -> State5:
    pos, vel = geo.evaluate(float(t))
    return State5(t, pos, vel)


@dataclass(frozen=True)
class CrossingEvent:
    t: float
    direction: int  # +1 increasing, -1 decreasing
    tangential: bool = False


def _newton(geo, tau, level):
    u, du = geo.u_of(geo.t0 + tau)
    if du != 0.0:
        tau -= (float(u) - level) / float(du)
    return tau


def crossing_times(geo: BackgroundGeodesic, level: float, window) -> list[CrossingEvent]:
    """All solutions of ``U(t) = level`` in the closed window, in increasing order."""
    lo, hi = float(window[0]), float(window[1])
    if not (math.isfinite(lo) and math.isfinite(hi)) or hi < lo:
        raise ValueError("window must be a finite interval")
    u0, v0, w = float(geo.pos0[0]), float(geo.vel0[0]), geo.omega
    taus = []
    if geo.branch == LINEAR:
        if v0 != 0.0:
            taus.append((level - u0) / v0)
    elif geo.branch == TRIG:
        amp = math.hypot(u0, v0 / w)
        if amp > 0 and abs(level) <= amp * (1 + 1e-14):
            phase = math.atan2(u0, v0 / w)
            base = math.asin(max(-1.0, min(1.0, level / amp)))
            period = 2.0 * math.pi
            for theta in {base, math.pi - base}:
                k_lo = math.floor((w * (lo - geo.t0) + phase - theta) / period) - 1
                k_hi = math.ceil((w * (hi - geo.t0) + phase - theta) / period) + 1
                for k in range(k_lo, k_hi + 1):
                    taus.append((theta + k * period - phase) / w)
    else:
        # U = ((A+B) x + (A-B)/x) / 2 with x = exp(w tau)
        A, B = u0, v0 / w
        p, q = A + B, A - B
        if p == 0.0:
            if level != 0.0 and q / level > 0:
                taus.append(math.log(q / (2.0 * level)) / w)
        else:
            disc = level * level - p * q
            if disc >= 0.0:
                r = math.sqrt(disc)
                for x in ((level + r) / p, (level - r) / p):
                    if x > 0:
                        taus.append(math.log(x) / w)
    events = []
    for tau in sorted(set(taus)):
        tau = _newton(geo, _newton(geo, tau, level), level)
        t = geo.t0 + tau
        if lo - 1e-12 <= t <= hi + 1e-12:
            _, du = geo.u_of(t)
            du = float(du)
            scale = max(abs(v0), abs(u0) * max(w, 1e-300), 1e-300)
            tangential = abs(du) <= 1e-9 * scale
            events.append(CrossingEvent(t, 1 if du > 0 else -1, tangential))
    # merge duplicates produced by the two trig families at a tangency
    merged = []
    for ev in events:
        if merged and abs(ev.t - merged[-1].t) <= 1e-12 * max(1.0, abs(ev.t)):
            merged[-1] = CrossingEvent(merged[-1].t, merged[-1].direction, True)
            continue
        merged.append(ev)
    return merged


def seed_family_data(geo: BackgroundGeodesic, eps: float) -> State5:
    """State at the last parameter ``alpha < 0`` where the seed geodesic has ``U = -eps``."""
    if geo.seed is None:
        raise PreconditionError("seed_family_data needs a geodesic built from seed data")
    if not eps > 0:
        raise ValueError("eps must be positive")
    u_dot = geo.seed.U0dot
    w = geo.omega
    if geo.branch == LINEAR:
        alpha = -eps / u_dot
    elif geo.branch == HYPERBOLIC:
        alpha = -math.asinh(eps * w / u_dot) / w
    else:
        reach = u_dot / w
        if eps >= reach:
            raise PreconditionError(f"eps={eps} exceeds the largest |U|={reach} reached before t=0")
        alpha = -math.asin(eps * w / u_dot) / w
    alpha = _newton(geo, _newton(geo, alpha, -eps), -eps)
    return background_state(geo, alpha)
