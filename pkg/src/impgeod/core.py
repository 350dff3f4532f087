"""Background geometry, phase states, seed data and the constraint functionals.

Chart coordinates are ordered ``(U, V, Z2, Z3, Z4)`` throughout; a phase
point is the 10-vector ``(pos, vel)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, SeedValidationError

TOL_F = 1e-9


def _frozen(x, n):
    arr = np.array(x, dtype=float).reshape(n)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class BackgroundParams:
    lam: float
    sigma: int
    a: float

    @property
    def a2(self) -> float:
        return self.a * self.a


def make_background(lam: float) -> BackgroundParams:
    """Hyperboloid data for cosmological constant ``lam``.

    >>> make_background(3.0)
    BackgroundParams(lam=3.0, sigma=1, a=1.0)
    """
    lam = float(lam)
    if lam == 0.0 or not math.isfinite(lam):
        raise ConfigError("cosmological constant must be finite and nonzero")
    sigma = 1 if lam > 0 else -1
    return BackgroundParams(lam=lam, sigma=sigma, a=math.sqrt(3.0 / (sigma * lam)))


@dataclass(frozen=True)
class State5:
    t: float
    pos: np.ndarray
    vel: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "t", float(self.t))
        object.__setattr__(self, "pos", _frozen(self.pos, 5))
        object.__setattr__(self, "vel", _frozen(self.vel, 5))

    @classmethod
    def from_vector(cls, t, y) -> State5:
        y = np.asarray(y, dtype=float)
        return cls(t, y[:5], y[5:])

    def vector(self) -> np.ndarray:
        return np.concatenate([self.pos, self.vel])

    @property
    def U(self) -> float:
        return float(self.pos[0])

    @property
    def Udot(self) -> float:
        return float(self.vel[0])

    def on_shell(self, bg: BackgroundParams, tol: float = TOL_F) -> bool:
        return abs(constraint_F(self, bg)) <= tol and abs(constraint_rate(self, bg)) <= tol


@dataclass(frozen=True)
class SeedData:
    """Data of a background geodesic at the parameter value where it hits U = 0."""

    V0: float
    Z0: np.ndarray
    U0dot: float
    V0dot: float
    Z0dot: np.ndarray
    e: int

    def __post_init__(self):
        object.__setattr__(self, "V0", float(self.V0))
        object.__setattr__(self, "U0dot", float(self.U0dot))
        object.__setattr__(self, "V0dot", float(self.V0dot))
        object.__setattr__(self, "Z0", _frozen(self.Z0, 3))
        object.__setattr__(self, "Z0dot", _frozen(self.Z0dot, 3))
        if self.e not in (-1, 0, 1):
            raise ConfigError(f"causal character e must be -1, 0 or 1, got {self.e!r}")
        object.__setattr__(self, "e", int(self.e))

    def __eq__(self, other):
        if not isinstance(other, SeedData):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def __hash__(self):
        return hash((self.V0, tuple(self.Z0), self.U0dot, self.V0dot, tuple(self.Z0dot), self.e))

    def state(self) -> State5:
        return State5(0.0, [0.0, self.V0, *self.Z0], [self.U0dot, self.V0dot, *self.Z0dot])

    def to_dict(self) -> dict:
        return {"V0": self.V0, "Z0": self.Z0.tolist(), "U0dot": self.U0dot,
                "V0dot": self.V0dot, "Z0dot": self.Z0dot.tolist(), "e": self.e}


def _pos(x):
    return x.pos if isinstance(x, State5) else np.asarray(x, dtype=float)


def quad_form(x, sigma) -> np.ndarray:
    """Flat quadratic form ``-2 x0 x1 + x2^2 + x3^2 + sigma x4^2`` (last axis)."""
    x = np.asarray(x, dtype=float)
    return -2.0 * x[..., 0] * x[..., 1] + x[..., 2] ** 2 + x[..., 3] ** 2 + sigma * x[..., 4] ** 2


def constraint_F(state, bg: BackgroundParams):
    """``-2UV + Z2^2 + Z3^2 + sigma Z4^2 - sigma a^2``; zero on the hyperboloid."""
    return quad_form(_pos(state), bg.sigma) - bg.sigma * bg.a2


def constraint_gradient(pos, bg: BackgroundParams) -> np.ndarray:
    p = np.asarray(pos, dtype=float)
    return np.stack([-2.0 * p[..., 1], -2.0 * p[..., 0], 2.0 * p[..., 2],
                     2.0 * p[..., 3], 2.0 * bg.sigma * p[..., 4]], axis=-1)


def constraint_rate(state, bg: BackgroundParams, vel=None):
    """``dF(pos) . vel``; zero when the velocity is tangent to the hyperboloid."""
    if vel is None:
        pos, vel = state.pos, state.vel
    else:
        pos = state
    return np.sum(constraint_gradient(pos, bg) * np.asarray(vel, dtype=float), axis=-1)


def metric_norm(state, eps, profile, moll, bg: BackgroundParams, vel=None):
    """Squared length of the velocity under the regularized ambient metric."""
    if eps <= 0:
        raise ValueError("eps must be positive")
    if vel is None:
        pos, vel = state.pos, state.vel
    else:
        pos = np.asarray(state, dtype=float)
    vel = np.asarray(vel, dtype=float)
    flat = quad_form(vel, bg.sigma)
    h = profile.H(pos[..., 2:5])
    return flat + h * moll.delta(pos[..., 0], eps) * vel[..., 0] ** 2


@dataclass
class SeedReport:
    residuals: dict
    tol: float
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def raise_for_failure(self) -> None:
        if self.violations:
            detail = "; ".join(f"{name} (residual {self.residuals.get(name, float('nan')):.3e})"
                               for name in self.violations)
            raise SeedValidationError(f"seed data rejected: {detail}", self.violations)


def seed_residuals(seed: SeedData, bg: BackgroundParams) -> dict:
    s = bg.sigma
    z, zd = seed.Z0, seed.Z0dot
    return {
        "constraint_1": float(z[0] ** 2 + z[1] ** 2 + s * z[2] ** 2 - s * bg.a2),
        "constraint_2": float(z[0] * zd[0] + z[1] * zd[1] + s * z[2] * zd[2] - seed.V0 * seed.U0dot),
        "normalization": float(-2.0 * seed.U0dot * seed.V0dot
                               + zd[0] ** 2 + zd[1] ** 2 + s * zd[2] ** 2 - seed.e),
    }


def validate_seed(seed: SeedData, bg: BackgroundParams, tol: float = TOL_F) -> SeedReport:
    """Check the hyperboloid constraints, the normalization and ``U0dot > 0``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    res = seed_residuals(seed, bg)
    report = SeedReport(res, tol)
    for name, value in res.items():
        if not abs(value) <= tol:
            report.violations.append(name)
    if not seed.U0dot > 0:
        report.residuals["orientation"] = seed.U0dot
        report.violations.append("orientation")
    return report


def reflect_time(state: State5) -> State5:
    """The same curve traversed backwards: ``t -> -t``, velocity flipped."""
    return State5(-state.t, state.pos, -state.vel)


def flip_null(seed: SeedData) -> SeedData:
    """Image under ``(U, V) -> (-U, -V)``.

    This is an isometry of the background and of the regularized metric once
    the mollifier is mirrored (``Mollifier.reflected``). It turns a seed that
    meets ``U = 0`` with ``U0dot < 0`` into one with ``U0dot > 0``.
    """
    return SeedData(-seed.V0, seed.Z0, -seed.U0dot, -seed.V0dot, seed.Z0dot, seed.e)


def seed_from_state(state: State5, e: int) -> SeedData:
    """Seed data from a state with U = 0 (the parameter origin is dropped)."""
    if abs(state.U) > 1e-12:
        raise ValueError("seed states must lie on U = 0")
    p, v = state.pos, state.vel
    return SeedData(p[1], p[2:], v[0], v[1], v[2:], e)


def random_seed(bg: BackgroundParams, e: int, rng: np.random.Generator,
                udot_range=(0.5, 2.0), zdot_scale=1.0) -> SeedData:
    """A random seed satisfying both constraints and the normalization exactly."""
    a, s = bg.a, bg.sigma
    if s > 0:
        z = rng.normal(size=3)
        z *= a / np.linalg.norm(z)
    else:
        z23 = rng.normal(size=2) * a
        z = np.array([z23[0], z23[1], 0.0])
        z[2] = rng.choice([-1.0, 1.0]) * math.sqrt(a * a + z23 @ z23)
    udot = rng.uniform(*udot_range)
    zdot = rng.uniform(-zdot_scale, zdot_scale, size=3)
    sig = np.array([1.0, 1.0, s])
    v0 = float(np.sum(sig * z * zdot)) / udot
    v0dot = (float(np.sum(sig * zdot * zdot)) - e) / (2.0 * udot)
    return SeedData(v0, z, udot, v0dot, zdot, e)
