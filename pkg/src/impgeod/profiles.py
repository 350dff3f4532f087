"""Wave profiles H on R^3, mollifiers rho and the model delta nets built from them."""

from __future__ import annotations

import functools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import ConfigError
from .kernels import MOLLIFIER_KINDS, PROFILE_KINDS

BALL_INFLATION = 1.05


def _bump(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = np.abs(x) < 1.0
    out[m] = np.exp(-1.0 / (1.0 - x[m] ** 2))
    return out


def _bump_prime(x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    m = np.abs(x) < 1.0
    s = 1.0 - x[m] ** 2
    out[m] = -2.0 * x[m] * np.exp(-1.0 / s) / s ** 2
    return out


@functools.lru_cache(maxsize=None)
def _unit_mass(name: str, extra: float) -> float:
    """Normalization constant, by adaptive quadrature."""
    if name == "polynomial":
        f = lambda x: (1.0 - x * x) ** extra
    else:
        f = lambda x: math.exp(-1.0 / (1.0 - x * x)) * (1.0 + extra * x)
    mass, _ = integrate.quad(f, -1.0, 1.0, epsabs=1e-14, epsrel=1e-13, limit=200)
    return 1.0 / mass


def _sup_abs(f) -> float:
    grid = np.linspace(-1.0, 1.0, 20001)
    vals = np.abs(f(grid))
    i = int(np.argmax(vals))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, grid.size - 1)]
    res = optimize.minimize_scalar(lambda x: -abs(float(f(np.array([x]))[0])),
                                   bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-12})
    return max(float(vals[i]), -float(res.fun))


@dataclass(frozen=True, eq=False)
class Mollifier:
    """Smooth unit-mass function supported in [-1, 1]."""

    name: str
    kind: int
    kernel_params: np.ndarray  # (normalization, shape parameter)
    sup_rho: float
    sup_rho_prime: float

    def rho(self, x):
        c, k = self.kernel_params
        x = np.asarray(x, dtype=float)
        if self.kind == MOLLIFIER_KINDS["polynomial"]:
            return np.where(np.abs(x) < 1.0, c * np.clip(1.0 - x * x, 0.0, None) ** k, 0.0)
        return c * (1.0 + k * x) * _bump(x)

    def rho_prime(self, x):
        c, k = self.kernel_params
        x = np.asarray(x, dtype=float)
        if self.kind == MOLLIFIER_KINDS["polynomial"]:
            s = np.clip(1.0 - x * x, 0.0, None)
            return np.where(np.abs(x) < 1.0, -2.0 * k * x * c * s ** (k - 1.0), 0.0)
        return c * (k * _bump(x) + (1.0 + k * x) * _bump_prime(x))

    def delta(self, x, eps):
        """Model delta net ``rho(x/eps)/eps``."""
        if not eps > 0:
            raise ValueError("eps must be positive")
        return self.rho(np.asarray(x, dtype=float) / eps) / eps

    def delta_prime(self, x, eps):
        if not eps > 0:
            raise ValueError("eps must be positive")
        return self.rho_prime(np.asarray(x, dtype=float) / eps) / (eps * eps)

    @property
    def is_even(self) -> bool:
        return self.kind == MOLLIFIER_KINDS["polynomial"] or self.kernel_params[1] == 0.0

    def reflected(self) -> Mollifier:
        """The mirror image ``x -> rho(-x)``."""
        if self.is_even:
            return self
        return make_mollifier("skewed_bump", [-self.kernel_params[1]])

    def describe(self) -> dict:
        return {"name": self.name, "shape": float(self.kernel_params[1]),
                "sup_rho": self.sup_rho, "sup_rho_prime": self.sup_rho_prime}


def make_mollifier(name: str = "bump", params=()) -> Mollifier:
    """Catalog mollifiers.

    ``bump``            c exp(-1/(1-x^2))
    ``polynomial(n)``   c (1-x^2)^n, n >= 2 (C^(n-1) at the support edge; default n = 4)
    ``skewed_bump(s)``  c (1+s x) exp(-1/(1-x^2)), |s| < 1; not even
    """
    params = [float(p) for p in params]
    if name == "bump":
        if params:
            raise ConfigError("bump mollifier takes no parameters")
        extra = 0.0
    elif name == "polynomial":
        extra = params[0] if params else 4.0
        if extra < 2.0:
            raise ConfigError("polynomial mollifier needs exponent n >= 2")
    elif name == "skewed_bump":
        extra = params[0] if params else 0.5
        if not abs(extra) < 1.0:
            raise ConfigError("skewed_bump needs |s| < 1 to stay positive")
    else:
        raise ConfigError(f"unknown mollifier {name!r}; catalog: {sorted(MOLLIFIER_KINDS)}")
    c = _unit_mass(name, extra)
    proto = Mollifier(name, MOLLIFIER_KINDS[name], np.array([c, extra]), 0.0, 0.0)
    return Mollifier(name, proto.kind, proto.kernel_params,
                     _sup_abs(proto.rho), _sup_abs(proto.rho_prime))


def delta_eval(moll: Mollifier, eps: float, x):
    return moll.delta(x, eps)


def delta_prime_eval(moll: Mollifier, eps: float, x):
    return moll.delta_prime(x, eps)


def _fibonacci_sphere(n):
    i = np.arange(n) + 0.5
    phi = np.arccos(1.0 - 2.0 * i / n)
    theta = math.pi * (1.0 + math.sqrt(5.0)) * i
    return np.stack([np.cos(theta) * np.sin(phi), np.sin(theta) * np.sin(phi), np.cos(phi)], axis=-1)


def ball_norms_by_sampling(profile, center, radius, grid: int = 25):
    """Sup of |H| and |DH| on the closed ball, inflated by 5%.

    Samples a ``grid^3`` lattice clipped to the ball plus ``grid^2`` points on
    the bounding sphere (where sups of smooth profiles often sit).
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    if grid < 8:
        raise ValueError("grid must be at least 8")
    center = np.asarray(center, dtype=float).reshape(3)
    ax = np.linspace(-radius, radius, grid)
    pts = np.stack(np.meshgrid(ax, ax, ax, indexing="ij"), axis=-1).reshape(-1, 3)
    pts = pts[np.einsum("ij,ij->i", pts, pts) <= radius * radius * (1 + 1e-12)]
    pts = np.concatenate([pts, radius * _fibonacci_sphere(grid * grid)]) + center
    n_h = float(np.max(np.abs(profile.H(pts))))
    n_dh = float(np.max(np.linalg.norm(profile.DH(pts), axis=-1)))
    return BALL_INFLATION * n_h, BALL_INFLATION * n_dh


@dataclass(frozen=True, eq=False)
class WaveProfile:
    name: str
    kind: int
    kernel_params: np.ndarray

    def H(self, z):
        z = np.asarray(z, dtype=float)
        p = self.kernel_params
        if self.kind == PROFILE_KINDS["constant"]:
            return np.full(z.shape[:-1], p[0])
        if self.kind == PROFILE_KINDS["quadratic"]:
            return p[0] * z[..., 0] ** 2 + p[1] * z[..., 1] ** 2 + p[2] * z[..., 2] ** 2
        if self.kind == PROFILE_KINDS["gaussian"]:
            return p[0] * np.exp(-np.sum(z * z, axis=-1) / p[1] ** 2)
        return np.zeros(z.shape[:-1])

    def DH(self, z):
        z = np.asarray(z, dtype=float)
        p = self.kernel_params
        if self.kind == PROFILE_KINDS["quadratic"]:
            return 2.0 * p[:3] * z
        if self.kind == PROFILE_KINDS["gaussian"]:
            return (-2.0 / p[1] ** 2) * self.H(z)[..., None] * z
        return np.zeros(z.shape)

    def ball_norms(self, center, radius):
        if self.kind == PROFILE_KINDS["zero"]:
            return 0.0, 0.0
        if self.kind == PROFILE_KINDS["constant"]:
            return abs(float(self.kernel_params[0])), 0.0
        return ball_norms_by_sampling(self, center, radius)

    def describe(self) -> dict:
        n = {"zero": 0, "constant": 1, "quadratic": 3, "gaussian": 2}[self.name]
        return {"name": self.name, "params": self.kernel_params[:n].tolist()}


def profile_catalog(name: str, params=()) -> WaveProfile:
    """``zero``, ``constant(c)``, ``quadratic(c2, c3, c4)``, ``gaussian(A, w)``."""
    params = [float(p) for p in params]
    expected = {"zero": 0, "constant": 1, "quadratic": 3, "gaussian": 2}
    if name not in expected:
        raise ConfigError(f"unknown profile {name!r}; catalog: {sorted(expected)}")
    if len(params) != expected[name]:
        raise ConfigError(f"profile {name!r} takes {expected[name]} parameters, got {len(params)}")
    if name == "gaussian" and not params[1] > 0:
        raise ConfigError("gaussian width must be positive")
    kp = np.zeros(3)
    kp[: len(params)] = params
    return WaveProfile(name, PROFILE_KINDS[name], kp)
