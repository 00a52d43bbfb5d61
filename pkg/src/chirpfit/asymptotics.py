"""Asymptotic covariance of the LSE/ALSE of an elementary chirp.

For one component with amplitude ``A = A_R + i A_I`` the normalised error
``(theta_hat - theta0) D^{-1}``, ``D = diag(N^-1/2, N^-1/2, N^-5/2)``, tends to
a trivariate normal with covariance ``sigma2 * inv(Sigma)``.  Multi-component
LSEs and sequential estimators share the same per-component blocks with no
cross-component terms.  The finite-N variances are read straight off the
limit law (no higher-order corrections).

The multi-component result rests on an unproven orthogonality conjecture for
chirp sums; it is used here as stated.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Iterable, Optional

import numpy as np

from .signal import ChirpComponent, ChirpModel

PARAMETERS = ("a_re", "a_im", "beta")


def _parts(a) -> tuple[float, float, float]:
    if isinstance(a, ChirpComponent):
        ar, ai = a.a_re, a.a_im
    else:
        ar, ai = float(np.real(a)), float(np.imag(a))
    mag2 = ar * ar + ai * ai
    if mag2 == 0:
        raise ValueError("asymptotic covariance needs a non-zero amplitude")
    return ar, ai, mag2


def sigma_matrix(a) -> np.ndarray:
    """Limit of the ``D``-scaled Hessian of the residual sum of squares.

    ``a`` is a :class:`ChirpComponent` or a complex amplitude.
    """
    ar, ai, mag2 = _parts(a)
    return np.array([
        [2.0, 0.0, -2.0 * ai / 3.0],
        [0.0, 2.0, 2.0 * ar / 3.0],
        [-2.0 * ai / 3.0, 2.0 * ar / 3.0, 0.4 * mag2],
    ])


def sigma_inv_matrix(a) -> np.ndarray:
    """Closed-form inverse of :func:`sigma_matrix`, written out entry by entry."""
    ar, ai, mag2 = _parts(a)
    k = 8.0 * mag2
    return np.array([
        [0.5 + 5.0 * ai * ai / k, -5.0 * ar * ai / k, 15.0 * ai / k],
        [-5.0 * ar * ai / k, 0.5 + 5.0 * ar * ar / k, -15.0 * ar / k],
        [15.0 * ai / k, -15.0 * ar / k, 45.0 / k],
    ])


def scaling(n: int) -> np.ndarray:
    """Diagonal of ``D``."""
    if n < 1:
        raise ValueError("n must be >= 1")
    return np.array([n ** -0.5, n ** -0.5, n ** -2.5])


def finite_n_covariance(a, sigma2: float, n: int) -> np.ndarray:
    """``sigma2 * D inv(Sigma) D`` as a 3x3 matrix."""
    if not sigma2 >= 0:
        raise ValueError("sigma2 must be non-negative")
    d = scaling(n)
    return sigma2 * (d[:, None] * sigma_inv_matrix(a) * d[None, :])


def finite_n_variances(a, sigma2: float, n: int) -> np.ndarray:
    """Variances of ``(A_R, A_I, beta)``: ``sigma2 * diag(inv(Sigma)) * (1/N, 1/N, 1/N^5)``."""
    return np.diag(finite_n_covariance(a, sigma2, n)).copy()


@dataclass
class AsymptoticCovariance:
    sigma_inv: np.ndarray
    scaled: np.ndarray
    covariance: np.ndarray


def asymptotic_covariance(a, sigma2: float, n: int) -> AsymptoticCovariance:
    cov = finite_n_covariance(a, sigma2, n)
    return AsymptoticCovariance(sigma_inv_matrix(a), np.diag(cov).copy(), cov)


def multi_covariance(model: ChirpModel, sigma2: float, n: int) -> list[np.ndarray]:
    """Per-component 3x3 blocks of the block-diagonal asymptotic covariance."""
    return [finite_n_covariance(c, sigma2, n) for c in model]


def attach_covariance(fit, sigma2: Optional[float] = None):
    """Fill ``fit.covariance`` with plug-in blocks at the estimated amplitudes.

    Without ``sigma2`` the noise variance is estimated as ``RSS / N`` from the
    last entry of the fit's RSS trajectory.
    """
    if sigma2 is None:
        sigma2 = fit.rss_trajectory[-1] / fit.n
    fit.covariance = [finite_n_covariance(c, sigma2, fit.n) for c in fit.components]
    fit.extras["sigma2_plugin"] = float(sigma2)
    return fit


def variance_rows(model: ChirpModel, sigma2_values: Iterable[float], n_values: Iterable[int]):
    """Rows ``(component, parameter, n, sigma2, variance)`` for every combination."""
    rows = []
    for n in n_values:
        for s2 in sigma2_values:
            for k, block in enumerate(multi_covariance(model, s2, n), start=1):
                for j, name in enumerate(PARAMETERS):
                    rows.append({"component": k, "parameter": name, "n": int(n),
                                 "sigma2": float(s2), "variance": float(block[j, j])})
    return rows


def write_variance_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["component", "parameter", "n", "sigma2", "variance"])
        w.writeheader()
        for r in rows:
            w.writerow(r)
