"""Pure-numpy implementations of the hot kernels.

Mirrors the API of `_kernels_numba`; selected via BAYESRANK_BACKEND=numpy or
when numba is unavailable. The erfc here is the vectorized twin of
`special.erfc` (same Cody coefficients and regime splits).
"""

from __future__ import annotations

import numpy as np

from . import special

_A = np.asarray(special._ERF_A)
_B = np.asarray(special._ERF_B)
_C = np.asarray(special._ERF_C)
_D = np.asarray(special._ERF_D)
_P = np.asarray(special._ERF_P)
_Q = np.asarray(special._ERF_Q)


def erfc(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    y = np.abs(x)
    out = np.empty_like(y)

    # The small regime is computed on the signed argument and must not go
    # through the 2 - erfc(|x|) reflection applied to the other regimes.
    small = y <= 0.46875
    if np.any(small):
        ys = y[small]
        ysq = np.where(ys > 1.11e-16, ys * ys, 0.0)
        xnum = _A[4] * ysq
        xden = ysq.copy()
        for i in range(3):
            xnum = (xnum + _A[i]) * ysq
            xden = (xden + _B[i]) * ysq
        out[small] = 1.0 - x[small] * (xnum + _A[3]) / (xden + _B[3])

    mid = (y > 0.46875) & (y <= 4.0)
    if np.any(mid):
        ys = y[mid]
        xnum = _C[8] * ys
        xden = ys.copy()
        for i in range(7):
            xnum = (xnum + _C[i]) * ys
            xden = (xden + _D[i]) * ys
        res = (xnum + _C[7]) / (xden + _D[7])
        ysq = np.floor(ys * 16.0) / 16.0
        dely = (ys - ysq) * (ys + ysq)
        out[mid] = np.exp(-ysq * ysq) * np.exp(-dely) * res

    big = y > 4.0
    if np.any(big):
        ys = y[big]
        ysq = 1.0 / (ys * ys)
        xnum = _P[5] * ysq
        xden = ysq.copy()
        for i in range(4):
            xnum = (xnum + _P[i]) * ysq
            xden = (xden + _Q[i]) * ysq
        res = ysq * (xnum + _P[4]) / (xden + _Q[4])
        res = (special._INV_SQRT_PI - res) / ys
        ysq = np.floor(ys * 16.0) / 16.0
        dely = (ys - ysq) * (ys + ysq)
        res = np.exp(-ysq * ysq) * np.exp(-dely) * res
        out[big] = np.where(ys < special._ERFC_XBIG, res, 0.0)

    return np.where(~small & (x < 0.0), 2.0 - out, out)


def normal_cdf(z: np.ndarray) -> np.ndarray:
    return 0.5 * erfc(np.asarray(z, dtype=np.float64) * -special._INV_SQRT_2)


def normal_pdf(z: np.ndarray) -> np.ndarray:
    z = np.asarray(z, dtype=np.float64)
    return special._INV_SQRT_2PI * np.exp(-0.5 * z * z)


def rbf_gram(emb: np.ndarray, bandwidth: float, jitter: float) -> np.ndarray:
    sq = np.einsum("ij,ij->i", emb, emb)
    d2 = sq[:, None] + sq[None, :] - 2.0 * (emb @ emb.T)
    np.maximum(d2, 0.0, out=d2)
    out = np.exp(d2 * (-1.0 / (2.0 * bandwidth * bandwidth)))
    out = 0.5 * (out + out.T)
    np.fill_diagonal(out, 1.0 + jitter)
    return out


def expected_improvement(mu: np.ndarray, sigma: np.ndarray, best: float) -> np.ndarray:
    mu = np.asarray(mu, dtype=np.float64)
    sigma = np.asarray(sigma, dtype=np.float64)
    diff = mu - best
    safe = np.where(sigma >= 1e-12, sigma, 1.0)
    z = diff / safe
    ei = safe * (z * normal_cdf(z) + normal_pdf(z))
    out = np.where(sigma >= 1e-12, ei, np.maximum(diff, 0.0))
    return np.maximum(out, 0.0)


def kendall_counts(a: np.ndarray, b: np.ndarray) -> tuple[int, int]:
    da = np.sign(a[:, None] - a[None, :])
    db = np.sign(b[:, None] - b[None, :])
    prod = da * db
    iu = np.triu_indices(len(a), k=1)
    vals = prod[iu]
    return int(np.sum(vals > 0)), int(np.sum(vals < 0))
