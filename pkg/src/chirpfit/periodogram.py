"""Periodogram-type function, grid scans and peak picking.

The periodogram-type function of a signal is

    I(beta) = |sum_t y(t) exp(-i beta t^2)|^2 / N.

On the grid ``beta_k = 2 pi k / N^2`` the phase ``beta_k t^2`` only depends on
``t^2 mod N^2``, so the whole scan is one length-``N^2`` DFT of the samples
scattered to bins ``t^2 mod N^2`` (computed by :func:`sparse_dft`).  This gives the exact full-grid values at
``O(N^2 log N)`` cost instead of ``O(N^3)``.  The same trick applies to the CPF
grid (length ``2 N^2``) and to the dechirped sinusoid on the Fourier grid; those
kernels live in :mod:`chirpfit.baselines`.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import NamedTuple, Optional, Sequence

import numpy as np

from .signal import TWO_PI, as_signal, time_index

GRID_KINDS = ("ptf_full", "cpf_half", "fourier")
KERNELS = ("ptf", "cpf", "pcpf", "dechirp_rss")

# grids at most this long are evaluated directly, longer ones through the FFT
_DIRECT_MAX_POINTS = 64
_CHUNK_ELEMS = 1 << 21


def ptf_value(y, beta: float, compensated: bool = False) -> float:
    """``I(beta) = |sum_t y(t) exp(-i beta t^2)|^2 / N``.

    ``compensated=True`` accumulates with :func:`math.fsum`, worthwhile for
    records of ``10^4`` samples and more.
    """
    y = as_signal(y)
    n = y.size
    t = time_index(n)
    terms = y * np.exp(-1j * (beta * (t * t)))
    if compensated:
        s = complex(math.fsum(terms.real), math.fsum(terms.imag))
    else:
        s = terms.sum()
    return float((s.real * s.real + s.imag * s.imag) / n)


def ptf_value_expanded(y, beta: float) -> float:
    """Real-arithmetic form of :func:`ptf_value`.

    Splits ``y`` into real and imaginary parts and sums against
    ``cos(beta t^2)`` and ``sin(beta t^2)`` separately.
    """
    y = as_signal(y)
    n = y.size
    t = time_index(n)
    phase = beta * (t * t)
    c, s = np.cos(phase), np.sin(phase)
    yr, yi = y.real, y.imag
    first = np.dot(yr, c) + np.dot(yi, s)
    second = np.dot(yi, c) - np.dot(yr, s)
    return float((first * first + second * second) / n)


def chirp_sums(y: np.ndarray, betas: np.ndarray) -> np.ndarray:
    """``sum_t y(t) exp(-i beta t^2)`` for each beta (direct evaluation)."""
    n = y.size
    t2 = time_index(n) ** 2
    betas = np.asarray(betas, dtype=float).ravel()
    out = np.empty(betas.size, dtype=np.complex128)
    chunk = max(1, _CHUNK_ELEMS // n)
    for lo in range(0, betas.size, chunk):
        b = betas[lo:lo + chunk]
        out[lo:lo + chunk] = np.exp(-1j * np.outer(b, t2)) @ y
    return out


def ptf_values(y, betas) -> np.ndarray:
    """Vectorised :func:`ptf_value` over an array of frequency rates."""
    y = as_signal(y)
    s = chirp_sums(y, betas)
    return (s.real ** 2 + s.imag ** 2) / y.size


@lru_cache(maxsize=8)
def _unit_roots(length: int) -> np.ndarray:
    r = np.exp(-2j * np.pi * np.arange(length) / length)
    r.setflags(write=False)
    return r


def sparse_dft(values, positions, length: int, q: int) -> np.ndarray:
    """Full DFT of a length-``length`` vector that is zero except at ``positions``.

    Returns ``X[k] = sum_j values[j] exp(-2 pi i k positions[j] / length)`` for
    every ``k``.  ``length = p * q``; writing ``k = a + p b`` splits the
    transform into ``p`` twiddled, binned inputs of length ``q`` and one batch
    of length-``q`` FFTs.  That keeps the cost low even when ``length`` has a
    large prime factor (``N^2`` with ``N`` prime), where a direct FFT of the
    scattered vector is several times slower.
    """
    if length % q:
        raise ValueError("q must divide length")
    p = length // q
    pos = np.asarray(positions, dtype=np.int64) % length
    vals = np.asarray(values, dtype=np.complex128)
    order = np.argsort(pos % q, kind="stable")
    pos, vals = pos[order], vals[order]
    r = pos % q
    starts = np.flatnonzero(np.r_[True, r[1:] != r[:-1]])
    a = np.arange(p, dtype=np.int64)[:, None]
    twiddled = _unit_roots(length)[(a * pos[None, :]) % length] * vals[None, :]
    binned = np.zeros((p, q), dtype=np.complex128)
    binned[:, r[starts]] = np.add.reduceat(twiddled, starts, axis=1)
    return np.fft.fft(binned, axis=1).T.reshape(length)


def ptf_spectrum(y) -> np.ndarray:
    """``I(2 pi k / N^2)`` for every ``k = 0..N^2-1``."""
    y = as_signal(y)
    n = y.size
    t = np.arange(1, n + 1, dtype=np.int64)
    spec = sparse_dft(y, t * t, n * n, n)
    return (spec.real ** 2 + spec.imag ** 2) / n


@dataclass(frozen=True)
class GridSpec:
    """Search grid for a signal of length ``n``.

    ``ptf_full``: ``2 pi k / n^2``, ``k = 1..n^2-1``;
    ``cpf_half``: ``pi k / n^2``, ``k = 1..n^2-1``;
    ``fourier``: ``pi k / (n-1)``, ``k = 1..n-2``.

    ``k_min``/``k_max`` optionally restrict the scan to a window of grid
    indices (inclusive, clipped to the valid range).
    """

    kind: str
    n: int
    k_min: Optional[int] = None
    k_max: Optional[int] = None

    def __post_init__(self):
        if self.kind not in GRID_KINDS:
            raise ValueError(f"unknown grid kind {self.kind!r}")
        if self.n < 3:
            raise ValueError("grids need n >= 3")

    @property
    def step(self) -> float:
        if self.kind == "ptf_full":
            return TWO_PI / self.n ** 2
        if self.kind == "cpf_half":
            return math.pi / self.n ** 2
        return math.pi / (self.n - 1)

    @property
    def full_range(self) -> tuple[int, int]:
        if self.kind == "fourier":
            return 1, self.n - 2
        return 1, self.n ** 2 - 1

    @property
    def k_range(self) -> tuple[int, int]:
        lo, hi = self.full_range
        if self.k_min is not None:
            lo = max(lo, int(self.k_min))
        if self.k_max is not None:
            hi = min(hi, int(self.k_max))
        if lo > hi:
            raise ValueError("empty grid window")
        return lo, hi

    @property
    def size(self) -> int:
        lo, hi = self.k_range
        return hi - lo + 1

    def indices(self) -> np.ndarray:
        lo, hi = self.k_range
        return np.arange(lo, hi + 1)

    def points(self) -> np.ndarray:
        return self.indices() * self.step

    def nearest_index(self, location: float) -> int:
        lo, hi = self.full_range
        return int(min(max(round(location / self.step), lo), hi))

    def window(self, center: float, half_width: int) -> "GridSpec":
        """Sub-grid of ``2*half_width + 1`` points around ``center``."""
        k = self.nearest_index(center)
        return GridSpec(self.kind, self.n, k - half_width, k + half_width)


@dataclass
class ScanResult:
    """Kernel values over a grid (locations strictly increasing)."""

    locations: np.ndarray
    magnitudes: np.ndarray
    grid: Optional[GridSpec] = None
    kernel: str = "ptf"

    def argmax(self) -> float:
        return float(self.locations[int(np.argmax(self.magnitudes))])

    def argmin(self) -> float:
        return float(self.locations[int(np.argmin(self.magnitudes))])

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["location", "magnitude"])
            for loc, mag in zip(self.locations, self.magnitudes):
                w.writerow([repr(float(loc)), repr(float(mag))])

    @classmethod
    def from_csv(cls, path) -> "ScanResult":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        return cls(data[:, 0].copy(), data[:, 1].copy())


def scan(y, grid: GridSpec, kernel: str = "ptf", *, t_center: Optional[int] = None,
         times: Optional[Sequence[int]] = None, method: str = "auto") -> ScanResult:
    """Evaluate a kernel at every point of ``grid``.

    Kernels: ``ptf`` (periodogram-type function), ``cpf`` (``|CPF(t_center, .)|^2``),
    ``pcpf`` (``|prod_l CPF(t_l, .)|``), ``dechirp_rss`` (profiled residual sum of
    squares of the dechirped sinusoid).  ``method`` is ``"auto"``, ``"fft"`` or
    ``"direct"``; the FFT path needs the kernel's natural grid.
    """
    y = as_signal(y)
    if grid.n != y.size:
        raise ValueError(f"grid built for n={grid.n} but signal has {y.size} samples")
    if kernel not in KERNELS:
        raise ValueError(f"unknown kernel {kernel!r}")
    if method not in ("auto", "fft", "direct"):
        raise ValueError(f"unknown scan method {method!r}")
    natural = {"ptf": "ptf_full", "cpf": "cpf_half", "pcpf": "cpf_half",
               "dechirp_rss": "fourier"}[kernel]
    use_fft = method == "fft" or (method == "auto" and grid.kind == natural
                                  and grid.size > _DIRECT_MAX_POINTS)
    if use_fft and grid.kind != natural:
        raise ValueError(f"FFT scan of kernel {kernel!r} needs a {natural!r} grid")

    ks = grid.indices()
    locs = ks * grid.step
    if kernel == "ptf":
        if use_fft:
            mags = ptf_spectrum(y)[ks]
        else:
            mags = ptf_values(y, locs)
    else:
        from . import baselines

        if kernel == "dechirp_rss":
            mags = baselines.dechirp_rss_values(y, locs, fft_indices=ks if use_fft else None)
        elif kernel == "cpf":
            t = baselines.default_cpf_center(y.size) if t_center is None else int(t_center)
            vals = baselines.cpf_values(y, t, locs, fft_indices=ks if use_fft else None)
            mags = vals.real ** 2 + vals.imag ** 2
        else:
            ts = baselines.default_pcpf_times(y.size) if times is None else list(times)
            logmag = baselines.pcpf_log_magnitude(y, ts, locs, fft_indices=ks if use_fft else None)
            mags = np.exp(logmag)
    return ScanResult(locs, np.asarray(mags, dtype=float), grid, kernel)


class Peaks(NamedTuple):
    locations: list
    magnitudes: list
    shortfall: bool


def top_peaks(result: ScanResult, count: int, min_separation: Optional[float] = None) -> Peaks:
    """Pick up to ``count`` local maxima in decreasing order of magnitude.

    Candidates within ``min_separation`` of an already selected peak are
    suppressed (default: ten grid steps).  If interior maxima run out, boundary
    points are used and ``shortfall`` is set; it is also set when fewer than
    ``count`` peaks exist at all.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    loc = np.asarray(result.locations, dtype=float)
    mag = np.asarray(result.magnitudes, dtype=float)
    if min_separation is None:
        step = result.grid.step if result.grid is not None else (
            float(np.median(np.diff(loc))) if loc.size > 1 else 0.0)
        min_separation = 10.0 * step

    if mag.size >= 3:
        mid = mag[1:-1]
        interior = np.flatnonzero((mid >= mag[:-2]) & (mid > mag[2:])) + 1
    else:
        interior = np.array([], dtype=int)
    order = interior[np.argsort(-mag[interior], kind="stable")]

    chosen: list[int] = []

    def take(candidates):
        for i in candidates:
            if len(chosen) == count:
                return
            if all(abs(loc[i] - loc[j]) >= min_separation for j in chosen):
                chosen.append(int(i))

    take(order)
    shortfall = len(chosen) < count
    if shortfall and mag.size:
        ends = sorted({0, mag.size - 1}, key=lambda i: -mag[i])
        take(ends)
    return Peaks([float(loc[i]) for i in chosen], [float(mag[i]) for i in chosen], shortfall)


def orthogonality_ratio(beta1: float, beta2: float, n: int) -> float:
    """``|sum_t exp(i (beta1 - beta2) t^2)| / n`` for ``t = 1..n``."""
    t = time_index(n)
    return float(abs(np.exp(1j * ((beta1 - beta2) * (t * t))).sum()) / n)
