"""Backend selection for the hot numeric kernels.

Two interchangeable implementations exist: numba-jitted loops
(`_kernels_numba`) and vectorized numpy (`_kernels_numpy`). The default is
numba when importable; set BAYESRANK_BACKEND=numpy (or =numba) to force one.
`set_backend` switches at runtime, used by tests and the backend benchmark.
"""

from __future__ import annotations

import os
from typing import Any

from . import _kernels_numpy

_IMPLS: dict[str, Any] = {"numpy": _kernels_numpy}

try:
    from . import _kernels_numba

    _IMPLS["numba"] = _kernels_numba
except ImportError:  # pragma: no cover - numba is a hard dep but stays optional at runtime
    _kernels_numba = None


def _env_default() -> str:
    name = os.environ.get("BAYESRANK_BACKEND", "auto").strip().lower()
    if name in ("", "auto"):
        return "numba" if "numba" in _IMPLS else "numpy"
    if name not in _IMPLS:
        raise ValueError(
            f"unknown BAYESRANK_BACKEND {name!r}; available: {sorted(_IMPLS)}"
        )
    return name


_active_name = _env_default()


def available_backends() -> list[str]:
    return sorted(_IMPLS)


def active_backend() -> str:
    return _active_name


def set_backend(name: str) -> None:
    global _active_name
    if name not in _IMPLS:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(_IMPLS)}")
    _active_name = name


def _impl():
    return _IMPLS[_active_name]


def rbf_gram(emb, bandwidth, jitter):
    return _impl().rbf_gram(emb, float(bandwidth), float(jitter))


def expected_improvement(mu, sigma, best):
    return _impl().expected_improvement(mu, sigma, float(best))


def normal_cdf(z):
    return _impl().normal_cdf(z)


def normal_pdf(z):
    return _impl().normal_pdf(z)


def erfc(x):
    return _impl().erfc(x)


def kendall_counts(a, b):
    return _impl().kendall_counts(a, b)
