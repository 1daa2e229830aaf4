"""Built-in density families used by the CLI, the fixtures and the tests."""

from __future__ import annotations

import math

import numpy as np

from .errors import InvalidInputError
from .model import DensityFamily

_LOG_SQRT_2PI = 0.5 * math.log(2 * math.pi)


def gaussian_mean_family(dim: int = 1, sd: float = 1.0) -> DensityFamily:
    """``X ~ N(theta, sd^2 I_N)`` with the mean vector as parameter (param_dim = N)."""

    def logpdf(pts, theta):
        z = (pts - theta) / sd
        return -0.5 * np.sum(z * z, axis=1) - dim * (_LOG_SQRT_2PI + math.log(sd))

    def pdf(pts, theta):
        return np.exp(logpdf(pts, theta))

    def sampler(rng, thetas):
        return thetas + sd * rng.standard_normal((len(thetas), dim))

    norm = (2 * math.pi * sd * sd) ** (-dim / 2)

    def pdf_matrix(pts, thetas):
        if dim == 1:
            z = np.subtract(pts, thetas[:, 0])
            z *= z
            z *= -0.5 / (sd * sd)
            np.exp(z, out=z)
            z *= norm
            return z
        z = (pts[:, None, :] - thetas[None, :, :]) / sd
        return norm * np.exp(-0.5 * np.sum(z * z, axis=2))

    return DensityFamily(pdf, dim=dim, param_dim=dim, logpdf=logpdf, sampler=sampler,
                         name="gaussian_mean", pdf_matrix=pdf_matrix)


def gaussian_fixed_family(mean=0.0, dim: int = 1, sd: float = 1.0) -> DensityFamily:
    """Completely known ``N(mean, sd^2 I_N)``; a simple hypothesis."""
    mu = np.broadcast_to(np.asarray(mean, dtype=float), (dim,))

    def logpdf(pts, theta):
        z = (pts - mu) / sd
        return -0.5 * np.sum(z * z, axis=1) - dim * (_LOG_SQRT_2PI + math.log(sd))

    def pdf(pts, theta):
        return np.exp(logpdf(pts, theta))

    def sampler(rng, thetas):
        return mu + sd * rng.standard_normal((len(thetas), dim))

    return DensityFamily(pdf, dim=dim, param_dim=0, logpdf=logpdf, sampler=sampler,
                         name="gaussian_fixed")


def discrete_table_family(rows) -> DensityFamily:
    """Finite alphabet coded ``0..M-1``; parameter ``l`` selects probability row ``l``."""
    table = np.asarray(rows, dtype=float)
    if table.ndim != 2:
        raise InvalidInputError("table must be two-dimensional (L x M)")
    if np.any(table < 0):
        r, c = np.argwhere(table < 0)[0]
        raise InvalidInputError(f"negative table entry at (row {r}, column {c})")
    sums = table.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-12):
        raise InvalidInputError(f"table rows must sum to 1, got {sums.tolist()}")
    L, M = table.shape

    def pdf(pts, theta):
        return table[int(round(theta[0])), pts[:, 0].astype(int)]

    def sampler(rng, thetas):
        rows_ = thetas[:, 0].astype(int)
        cdf = np.cumsum(table[rows_], axis=1)
        u = rng.random(len(rows_))[:, None]
        return np.minimum((u > cdf).sum(axis=1), M - 1)[:, None].astype(float)

    return DensityFamily(pdf, dim=1, param_dim=1, alphabet=np.arange(M, dtype=float),
                         sampler=sampler, name="discrete_table")
