"""Comparison estimators: dechirping, cubic phase function (CPF) and product CPF.

Dechirping multiplies the record by its conjugated one-sample lag, which turns
``A exp(i beta t^2)`` into the sinusoid ``|A|^2 exp(-i beta) exp(-2 i beta t)``.
The CPF ``sum_m y(t+m) y(t-m) exp(-i Omega m^2)`` peaks at ``Omega = 2 beta``.
Both work with ``2 beta`` on an integer lattice, so ``beta`` is only
identified modulo ``pi``; the fits carry the alias partner and a flag.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .estimators import FitResult, SequentialFitError, profile_amplitudes
from .optimizer import OptimResult, SimplexConfig, minimize
from .periodogram import GridSpec, ptf_value, sparse_dft
from .signal import ChirpComponent, as_signal, wrap_beta


def default_cpf_center(n: int) -> int:
    return (n + 1) // 2


def default_pcpf_times(n: int) -> list[int]:
    return [int(round(0.4 * n)), (n + 1) // 2]


def cpf_half_width(n: int, t: int) -> tuple[int, bool]:
    """Largest usable lag ``M`` at time ``t`` and whether it falls short of ``(n-1)/2``.

    For even ``n`` the bound is not an integer, so the window is always flagged.
    """
    if not 1 <= t <= n:
        raise ValueError(f"CPF time t={t} outside [1, {n}]")
    m = min((n - 1) // 2, t - 1, n - t)
    return m, m < (n - 1) / 2


def _lag_products(y: np.ndarray, t: int) -> np.ndarray:
    m, _ = cpf_half_width(y.size, t)
    lags = np.arange(m + 1)
    # y is 0-based; sample t sits at index t - 1
    return y[t - 1 + lags] * y[t - 1 - lags]


def cpf_value(y, t: int, omega: float) -> complex:
    """``CPF(t, Omega) = sum_{m=0}^{M} y(t+m) y(t-m) exp(-i Omega m^2)``.

    ``M = (N-1)//2`` clipped to ``min(t-1, N-t)`` so the window stays inside the record.
    """
    y = as_signal(y)
    w = _lag_products(y, int(t))
    m2 = np.arange(w.size, dtype=float) ** 2
    return complex(np.dot(w, np.exp(-1j * (omega * m2))))


def cpf_values(y, t: int, omegas, fft_indices=None) -> np.ndarray:
    """CPF at many ``Omega``.

    With ``fft_indices`` the values are read off one length-``2 N^2`` FFT at
    ``Omega_k = pi k / N^2`` (``omegas`` must then equal those points).
    """
    y = as_signal(y)
    w = _lag_products(y, int(t))
    lags = np.arange(w.size, dtype=np.int64)
    if fft_indices is not None:
        n = y.size
        return sparse_dft(w, lags * lags, 2 * n * n, 2 * n)[np.asarray(fft_indices)]
    omegas = np.asarray(omegas, dtype=float)
    return np.exp(-1j * np.outer(omegas, (lags * lags).astype(float))) @ w


def pcpf_log_magnitude(y, times: Sequence[int], omegas, fft_indices=None) -> np.ndarray:
    """``sum_l log|CPF(t_l, Omega)|``; zeros map to ``-inf``."""
    total = np.zeros(np.size(omegas) if fft_indices is None else np.size(fft_indices))
    with np.errstate(divide="ignore"):
        for t in times:
            total += np.log(np.abs(cpf_values(y, t, omegas, fft_indices)))
    return total


def dechirp_transform(y) -> np.ndarray:
    """``z(t) = y(t) * conj(y(t+1))`` for ``t = 1..N-1``."""
    y = as_signal(y)
    if y.size < 2:
        raise ValueError("dechirping needs at least 2 samples")
    return y[:-1] * np.conj(y[1:])


def _dechirp_sums(z: np.ndarray, betas, fft_indices=None) -> np.ndarray:
    """``sum_t z(t) exp(2 i beta t)``."""
    length = z.size
    if fft_indices is not None:
        # exp(2 i beta_k t) with beta_k = pi k / L is a length-L inverse DFT
        x = np.roll(z, 1)  # x[t mod L] = z(t)
        return (np.fft.ifft(x) * length)[np.asarray(fft_indices)]
    t = np.arange(1, length + 1, dtype=float)
    return np.exp(2j * np.outer(np.asarray(betas, dtype=float), t)) @ z


def dechirp_rss_values(y, betas, fft_indices=None) -> np.ndarray:
    """Profiled RSS ``sum |z(t) - B exp(-2 i beta t)|^2`` with ``B`` at its optimum."""
    z = dechirp_transform(y)
    s = _dechirp_sums(z, betas, fft_indices)
    rss = np.vdot(z, z).real - (s.real ** 2 + s.imag ** 2) / z.size
    return np.maximum(rss, 0.0)


def resolve_alias(y, candidates: Sequence[float]) -> float:
    """Candidate frequency rate with the largest periodogram-type value."""
    vals = [ptf_value(y, b) for b in candidates]
    return float(candidates[int(np.argmax(vals))])


@dataclass
class DechirpFit:
    """Dechirped sinusoid fit.

    ``beta`` lies in ``[0, pi)``; ``beta_alias = beta + pi`` produces the same
    dechirped frequency (only the sign of ``B`` flips).  ``alias_ambiguous`` is set when the periodogram-type
    function prefers ``beta_alias``, in which case ``beta_resolved`` holds it.
    """

    b_re: float
    b_im: float
    beta: float
    beta_alias: float
    beta_resolved: float
    alias_ambiguous: bool
    optim: Optional[OptimResult] = None


def dechirp_estimate(y, cfg: Optional[SimplexConfig] = None) -> DechirpFit:
    """Least squares fit of the dechirped sinusoid ``B exp(-2 i beta t)``.

    ``B`` is profiled out; ``beta`` starts at the best point of the Fourier grid
    ``pi k / (N-1)`` and is refined with the simplex.
    """
    y = as_signal(y)
    n = y.size
    if n < 8:
        raise ValueError("dechirp_estimate needs at least 8 samples")
    z = dechirp_transform(y)
    grid = GridSpec("fourier", n)
    ks = grid.indices()
    rss = dechirp_rss_values(y, None, fft_indices=ks)
    x0 = float(ks[int(np.argmin(rss))] * grid.step)
    length = z.size
    t = np.arange(1, length + 1, dtype=float)
    zz = np.vdot(z, z).real

    def objective(x):
        s = np.dot(z, np.exp(2j * x[0] * t))
        return zz - (s.real * s.real + s.imag * s.imag) / length

    cfg = (SimplexConfig() if cfg is None else cfg).with_step(grid.step)
    opt = minimize(objective, [x0], cfg)
    beta = math.fmod(wrap_beta(opt.argmin[0]), math.pi)
    b = np.dot(z, np.exp(2j * beta * t)) / length
    partner = beta + math.pi
    resolved = resolve_alias(y, [beta, partner])
    return DechirpFit(float(b.real), float(b.imag), beta, partner, resolved,
                      resolved != beta, opt)


@dataclass(frozen=True)
class CpfConfig:
    """CPF evaluation times; ``None`` picks ``(N+1)//2`` and ``{round(0.4N), (N+1)//2}``."""

    t_center: Optional[int] = None
    times: Optional[tuple[int, ...]] = None


@dataclass
class CpfFit:
    """CPF/PCPF estimate.

    ``omega`` is the refined peak over ``(0, pi)``, ``beta = omega / 2``.  The
    same FFT also covers ``(pi, 2 pi)``; when the peak there is higher the
    estimate is flagged ``alias_ambiguous`` and ``omega_upper`` records that
    peak, refined the same way.
    ``beta_resolved`` is the alias (``beta``, ``beta + pi`` and the upper-band
    pair) preferred by the periodogram-type function.
    """

    beta: float
    omega: float
    beta_resolved: float
    alias_ambiguous: bool
    clipped: bool
    omega_upper: Optional[float] = None
    optim: Optional[OptimResult] = None


def _cpf_fit(y: np.ndarray, times: Sequence[int], cfg: Optional[SimplexConfig]) -> CpfFit:
    n = y.size
    grid = GridSpec("cpf_half", n)
    length = 2 * n * n
    all_k = np.arange(1, length)
    logmag = pcpf_log_magnitude(y, times, None, fft_indices=all_k)
    half = n * n - 1  # k = 1..n^2-1 is the (0, pi) band
    lower, upper = logmag[:half], logmag[half + 1:]
    k0 = int(np.argmax(lower)) + 1
    x0 = k0 * grid.step

    lag_products = [_lag_products(y, t) for t in times]
    lag_sq = [np.arange(w.size, dtype=float) ** 2 for w in lag_products]

    def objective(x):
        total = 0.0
        for w, m2 in zip(lag_products, lag_sq):
            c = np.dot(w, np.exp(-1j * x[0] * m2))
            total += math.log(abs(c)) if c != 0 else -math.inf
        return -total

    cfg = (SimplexConfig() if cfg is None else cfg).with_step(grid.step)
    opt = minimize(objective, [x0], cfg)
    omega = float(opt.argmin[0])
    beta = wrap_beta(omega / 2.0)
    candidates = [beta, wrap_beta(beta + math.pi)]
    flagged = bool(upper.size and upper.max() > lower.max())
    omega_upper = None
    if flagged:
        # refine the upper-band peak too so the resolved rate is not grid-limited
        k_up = int(np.argmax(upper)) + n * n + 1
        omega_upper = float(minimize(objective, [k_up * grid.step], cfg).argmin[0])
        b_up = wrap_beta(omega_upper / 2.0)
        candidates += [b_up, wrap_beta(b_up + math.pi)]
    clipped = any(cpf_half_width(n, t)[1] for t in times)
    return CpfFit(beta, omega, resolve_alias(y, candidates), flagged, clipped, omega_upper, opt)


def cpf_estimate(y, cpf_cfg: CpfConfig = CpfConfig(), cfg: Optional[SimplexConfig] = None) -> CpfFit:
    """Frequency rate from the CPF peak at ``t_center``.

    The ``pi k / N^2`` grid initialises ``Omega`` and the simplex refines
    ``|CPF|``; ``beta = Omega / 2``.  Even ``N`` gets a clipped window (flagged).
    """
    y = as_signal(y)
    if y.size < 8:
        raise ValueError("cpf_estimate needs at least 8 samples")
    t = default_cpf_center(y.size) if cpf_cfg.t_center is None else int(cpf_cfg.t_center)
    return _cpf_fit(y, [t], cfg)


def pcpf_estimate(y, cpf_cfg: CpfConfig = CpfConfig(), cfg: Optional[SimplexConfig] = None) -> CpfFit:
    """Frequency rate from the peak of ``|prod_l CPF(t_l, Omega)|``.

    The product is handled as a sum of log-magnitudes so it cannot overflow.
    """
    y = as_signal(y)
    if y.size < 8:
        raise ValueError("pcpf_estimate needs at least 8 samples")
    times = default_pcpf_times(y.size) if cpf_cfg.times is None else [int(t) for t in cpf_cfg.times]
    return _cpf_fit(y, times, cfg)


def sequential_baseline(y, p: int, flavor: str = "pcpf", cfg: Optional[SimplexConfig] = None,
                        cpf_cfg: CpfConfig = CpfConfig()) -> FitResult:
    """Sequential extraction with a baseline rate estimator at each stage.

    Stage ``k`` estimates a rate on the current data with dechirping or PCPF,
    resolves its alias with the periodogram-type function, takes the amplitude
    from :func:`~chirpfit.estimators.profile_amplitudes` and subtracts the
    component.
    """
    if flavor not in ("dechirp", "pcpf"):
        raise ValueError(f"flavor must be 'dechirp' or 'pcpf', got {flavor!r}")
    y = as_signal(y)
    n = y.size
    if not 1 <= p < n / 4:
        raise ValueError(f"need 1 <= p < N/4, got p={p}, N={n}")
    fit = FitResult([], [], f"seq_{flavor}", n)
    current = y.copy()
    for k in range(p):
        try:
            if flavor == "dechirp":
                est = dechirp_estimate(current, cfg)
            else:
                est = pcpf_estimate(current, cpf_cfg, cfg)
            beta = est.beta_resolved
            amp = profile_amplitudes(current, [beta])[0]
        except Exception as exc:
            raise SequentialFitError(f"stage {k + 1} failed: {exc}", fit) from exc
        comp = ChirpComponent.from_complex(amp, beta)
        current = current - comp.evaluate(n)
        fit.components.append(comp)
        fit.rss_trajectory.append(float(np.vdot(current, current).real))
        fit.optim.append(est.optim)
        if est.alias_ambiguous:
            fit.warnings.append(f"stage {k + 1}: rate resolved to its alias {beta:.6g}")
    return fit
