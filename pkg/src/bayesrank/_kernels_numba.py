"""Numba-jitted implementations of the hot kernels.

Each entry of the gram / EI outputs is computed independently with a fixed
inner summation order, so results do not depend on the number of threads.
"""

from __future__ import annotations

import math

import numpy as np
from numba import njit, prange

from . import special

erfc_scalar = njit(cache=True)(special.erfc)


@njit(cache=True)
def _normal_cdf(z: float) -> float:
    return 0.5 * erfc_scalar(-z * 0.7071067811865475244)


@njit(cache=True)
def _normal_pdf(z: float) -> float:
    return 0.3989422804014326779 * math.exp(-0.5 * z * z)


@njit(cache=True)
def erfc(x):
    out = np.empty(x.shape[0])
    for i in range(x.shape[0]):
        out[i] = erfc_scalar(x[i])
    return out


@njit(cache=True)
def normal_cdf(z):
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        out[i] = _normal_cdf(z[i])
    return out


@njit(cache=True)
def normal_pdf(z):
    out = np.empty(z.shape[0])
    for i in range(z.shape[0]):
        out[i] = _normal_pdf(z[i])
    return out


@njit(cache=True, parallel=True)
def rbf_gram(emb, bandwidth, jitter):
    n, dim = emb.shape
    inv = 1.0 / (2.0 * bandwidth * bandwidth)
    out = np.empty((n, n))
    for i in prange(n):
        out[i, i] = 1.0 + jitter
        for j in range(i + 1, n):
            acc = 0.0
            for k in range(dim):
                diff = emb[i, k] - emb[j, k]
                acc += diff * diff
            v = math.exp(-acc * inv)
            out[i, j] = v
            out[j, i] = v
    return out


@njit(cache=True, parallel=True)
def expected_improvement(mu, sigma, best):
    n = mu.shape[0]
    out = np.empty(n)
    for i in prange(n):
        s = sigma[i]
        if s < 1e-12:
            d = mu[i] - best
            out[i] = d if d > 0.0 else 0.0
        else:
            z = (mu[i] - best) / s
            v = s * (z * _normal_cdf(z) + _normal_pdf(z))
            out[i] = v if v > 0.0 else 0.0
    return out


@njit(cache=True)
def kendall_counts(a, b):
    n = a.shape[0]
    conc = 0
    disc = 0
    for i in range(n):
        for j in range(i + 1, n):
            prod = (a[i] - a[j]) * (b[i] - b[j])
            if prod > 0.0:
                conc += 1
            elif prod < 0.0:
                disc += 1
    return conc, disc
