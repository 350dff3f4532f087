"""Independent reference computations used by the tests.

Nothing here shares code with the package kernels: the geodesic oracle
differentiates the ambient metric numerically and adds a Lagrange
multiplier for the hyperboloid constraint.
"""

from __future__ import annotations

import math

import numpy as np


def ambient_metric(x, eps, H, rho, sigma):
    """Regularized 5D ambient metric at chart point ``x`` (U, V, Z2, Z3, Z4)."""
    g = np.zeros((5, 5))
    g[0, 1] = g[1, 0] = -1.0
    g[2, 2] = g[3, 3] = 1.0
    g[4, 4] = sigma
    g[0, 0] = H(x[2:]) * rho(x[0] / eps) / eps
    return g


def christoffel(x, eps, H, rho, sigma, h=1e-6):
    dg = np.zeros((5, 5, 5))  # dg[k] = d g / d x^k
    for k in range(5):
        e = np.zeros(5)
        e[k] = h
        dg[k] = (ambient_metric(x + e, eps, H, rho, sigma)
                 - ambient_metric(x - e, eps, H, rho, sigma)) / (2 * h)
    ginv = np.linalg.inv(ambient_metric(x, eps, H, rho, sigma))
    # Gamma^k_ij = 1/2 g^kl (d_i g_lj + d_j g_li - d_l g_ij)
    t = dg.transpose(1, 0, 2) + dg.transpose(1, 2, 0) - dg
    return 0.5 * np.einsum("kl,lij->kij", ginv, t), ginv


def constrained_acceleration(x, v, eps, H, rho, sigma, a2):
    """Geodesic acceleration on {F = 0} from Christoffels plus a multiplier."""
    gam, ginv = christoffel(x, eps, H, rho, sigma)
    acc0 = -np.einsum("kij,i,j->k", gam, v, v)
    grad = np.array([-2 * x[1], -2 * x[0], 2 * x[2], 2 * x[3], 2 * sigma * x[4]])
    hess = np.zeros((5, 5))
    hess[0, 1] = hess[1, 0] = -2.0
    hess[2, 2] = hess[3, 3] = 2.0
    hess[4, 4] = 2.0 * sigma
    n = ginv @ grad
    mu = -(grad @ acc0 + v @ hess @ v) / (grad @ n)
    return acc0 + mu * n


def bump_unnormalized(x):
    return math.exp(-1.0 / (1.0 - x * x)) if abs(x) < 1 else 0.0
