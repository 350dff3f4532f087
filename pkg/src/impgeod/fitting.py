"""Small fitting helpers for eps -> 0 studies."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

RATE_BOUNDS = (0.05, 6.0)


@dataclass(frozen=True)
class PowerLawFit:
    """``v(eps) ~ limit + coef * eps**rate`` on the fitted points."""

    limit: float
    coef: float
    rate: float | None
    residual: float
    n_points: int
    exact: bool = False

    def predict(self, eps):
        if self.rate is None:
            return np.full_like(np.asarray(eps, dtype=float), self.limit)
        return self.limit + self.coef * np.asarray(eps, dtype=float) ** self.rate

    def to_dict(self) -> dict:
        return {"limit": self.limit, "coef": self.coef, "rate": self.rate,
                "residual": self.residual, "n_points": self.n_points, "exact": self.exact}


def _linear_fit(eps, vals, rate):
    A = np.stack([np.ones_like(eps), eps ** rate], axis=1)
    coef, *_ = np.linalg.lstsq(A, vals, rcond=None)
    res = vals - A @ coef
    return coef, float(res @ res)


def power_law_limit(eps, vals, n_last: int = 4) -> PowerLawFit:
    """Least-squares fit of ``v* + c eps^r`` to the ``n_last`` smallest eps.

    For fixed ``r`` the problem is linear in ``(v*, c)``; ``r`` is then chosen
    by a bounded scalar minimization of the residual sum of squares. The
    returned residual is the RMS misfit. Constant data give an exact fit with
    ``rate=None``.
    """
    eps = np.asarray(eps, dtype=float)
    vals = np.asarray(vals, dtype=float)
    if eps.shape != vals.shape or eps.ndim != 1:
        raise ValueError("eps and vals must be 1-d arrays of equal length")
    if n_last < 3 or eps.size < n_last:
        raise ValueError("need at least 3 points and n_last <= len(eps)")
    order = np.argsort(eps)[:n_last]
    e, v = eps[order], vals[order]
    if np.any(e <= 0):
        raise ValueError("eps values must be positive")
    spread = float(np.max(v) - np.min(v))
    if spread <= 4.0 * np.finfo(float).eps * max(1.0, float(np.max(np.abs(v)))):
        return PowerLawFit(float(np.mean(v)), 0.0, None, 0.0, n_last, exact=True)
    # rescale so the optimizer sees order-one numbers
    es = e / e.max()
    rss = lambda r: _linear_fit(es, v, r)[1]
    grid = np.linspace(*RATE_BOUNDS, 60)
    r0 = grid[int(np.argmin([rss(r) for r in grid]))]
    step = grid[1] - grid[0]
    lo, hi = max(RATE_BOUNDS[0], r0 - step), min(RATE_BOUNDS[1], r0 + step)
    res = optimize.minimize_scalar(rss, bounds=(lo, hi), method="bounded",
                                   options={"xatol": 1e-10})
    r = float(res.x) if res.fun <= rss(r0) else float(r0)
    (limit, c_scaled), sse = _linear_fit(es, v, r)
    coef = float(c_scaled) / float(e.max()) ** r
    return PowerLawFit(float(limit), coef, r, math.sqrt(sse / n_last), n_last)


def loglog_slope(x, y, floor: float = 0.0) -> float:
    """Least-squares slope of ``log y`` against ``log x``; values below ``floor`` are clipped."""
    x = np.asarray(x, dtype=float)
    y = np.maximum(np.asarray(y, dtype=float), floor)
    if x.size < 2 or np.any(x <= 0) or np.any(y <= 0):
        raise ValueError("loglog_slope needs at least two positive points")
    slope, _ = np.polyfit(np.log(x), np.log(y), 1)
    return float(slope)


def is_monotone_decreasing(vals, rtol: float = 0.0) -> bool:
    vals = np.asarray(vals, dtype=float)
    return bool(np.all(vals[1:] <= vals[:-1] * (1.0 + rtol)))
