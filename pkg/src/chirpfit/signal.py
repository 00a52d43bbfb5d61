"""Elementary chirp signals: domain types, synthesis and noise generation.

A signal is a one-dimensional ``complex128`` numpy array whose element ``j``
holds the sample at time ``t = j + 1``.  Phases are evaluated as
``beta * t**2`` in double precision; for ``N <= 1e4`` and ``beta < 2*pi`` the
argument stays below ``2*pi*1e8`` and the trig argument error is under about
``1e-8`` rad.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_beta(beta: float) -> float:
    """Map a frequency rate onto ``[0, 2*pi)``."""
    b = math.fmod(float(beta), TWO_PI)
    if b < 0.0:
        b += TWO_PI
    # fmod of a tiny negative number can round up to exactly 2*pi
    if b >= TWO_PI:
        b = 0.0
    return b


def as_signal(y) -> np.ndarray:
    """Validate ``y`` as a non-empty, finite 1-D complex sequence."""
    arr = np.asarray(y, dtype=np.complex128)
    if arr.ndim != 1:
        raise ValueError(f"signal must be one-dimensional, got shape {arr.shape}")
    if arr.size == 0:
        raise ValueError("signal must contain at least one sample")
    if not np.all(np.isfinite(arr)):
        raise ValueError("signal contains NaN or infinite samples")
    return arr


def time_index(n: int) -> np.ndarray:
    """Sample times ``1..n`` as float64."""
    return np.arange(1, n + 1, dtype=np.float64)


def chirp_basis(beta: float, n: int) -> np.ndarray:
    """Return ``exp(i*beta*t**2)`` for ``t = 1..n``."""
    t = time_index(n)
    return np.exp(1j * (beta * (t * t)))


@dataclass(frozen=True)
class ChirpComponent:
    """One elementary chirp ``(a_re + i*a_im) * exp(i*beta*t**2)``.

    ``beta`` is stored wrapped to ``[0, 2*pi)``; the model is periodic in the
    frequency rate because ``t**2`` is an integer.
    """

    a_re: float
    a_im: float
    beta: float

    def __post_init__(self):
        for name in ("a_re", "a_im", "beta"):
            if not math.isfinite(getattr(self, name)):
                raise ValueError(f"{name} must be finite")
        object.__setattr__(self, "a_re", float(self.a_re))
        object.__setattr__(self, "a_im", float(self.a_im))
        object.__setattr__(self, "beta", wrap_beta(self.beta))

    @classmethod
    def from_complex(cls, amplitude: complex, beta: float) -> "ChirpComponent":
        return cls(float(np.real(amplitude)), float(np.imag(amplitude)), beta)

    @property
    def amplitude(self) -> complex:
        return complex(self.a_re, self.a_im)

    @property
    def magnitude(self) -> float:
        return math.hypot(self.a_re, self.a_im)

    def evaluate(self, n: int) -> np.ndarray:
        return self.amplitude * chirp_basis(self.beta, n)


@dataclass(frozen=True)
class ChirpModel:
    """Ordered collection of chirp components (``k = 1..p``)."""

    components: tuple[ChirpComponent, ...] = ()

    def __post_init__(self):
        comps = tuple(self.components)
        object.__setattr__(self, "components", comps)
        betas = [c.beta for c in comps]
        if len(set(betas)) != len(betas):
            raise ValueError("frequency rates of a chirp model must be distinct")

    @classmethod
    def from_tuples(cls, triples: Iterable[Sequence[float]]) -> "ChirpModel":
        return cls(tuple(ChirpComponent(*map(float, tr)) for tr in triples))

    @property
    def p(self) -> int:
        return len(self.components)

    @property
    def betas(self) -> np.ndarray:
        return np.array([c.beta for c in self.components])

    def __len__(self) -> int:
        return len(self.components)

    def __iter__(self):
        return iter(self.components)

    def is_dominance_ordered(self) -> bool:
        """True when magnitudes are strictly decreasing (the sequential ordering)."""
        mags = [c.magnitude for c in self.components]
        return all(a > b for a, b in zip(mags, mags[1:]))


@dataclass(frozen=True)
class NoiseSpec:
    """Additive error description.

    ``sigma2`` is the total complex variance: real and imaginary parts each get
    ``sigma2 / 2``.  For ``kind="linear_process"`` the i.i.d. innovations are
    filtered by the finite coefficient list ``coeffs``.
    """

    kind: str = "iid_gaussian"
    sigma2: float = 1.0
    coeffs: tuple[float, ...] = field(default=(1.0,))
    seed: int = 0

    def __post_init__(self):
        if self.kind not in ("iid_gaussian", "linear_process"):
            raise ValueError(f"unknown noise kind {self.kind!r}")
        if not self.sigma2 > 0:
            raise ValueError("sigma2 must be positive")
        object.__setattr__(self, "coeffs", tuple(float(c) for c in self.coeffs))
        if self.kind == "linear_process" and len(self.coeffs) == 0:
            raise ValueError("linear_process noise needs at least one coefficient")


def synthesize_clean(model: ChirpModel, n: int) -> np.ndarray:
    """Noise-free samples ``sum_k A_k exp(i beta_k t^2)`` for ``t = 1..n``."""
    if n < 1:
        raise ValueError("n must be at least 1")
    out = np.zeros(n, dtype=np.complex128)
    for comp in model:
        if comp.magnitude == 0.0:
            raise ValueError("chirp components must have non-zero amplitude")
        out += comp.evaluate(n)
    return out


def _complex_gaussian(rng: np.random.Generator, sigma2: float, n: int) -> np.ndarray:
    scale = math.sqrt(sigma2 / 2.0)
    draws = rng.standard_normal((n, 2)) * scale
    return draws[:, 0] + 1j * draws[:, 1]


def generate_noise(spec: NoiseSpec, n: int) -> np.ndarray:
    """Draw ``n`` complex error samples according to ``spec``.

    Deterministic given ``spec.seed``.  Linear-process noise discards a warm-up
    of ``len(coeffs)`` innovations so every returned sample sees the full filter.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "iid_gaussian":
        return _complex_gaussian(rng, spec.sigma2, n)
    c = np.asarray(spec.coeffs)
    warm = len(c)
    e = _complex_gaussian(rng, spec.sigma2, n + warm)
    filtered = np.convolve(e, c, mode="full")[: n + warm]
    return filtered[warm:]


def add(signal, noise) -> np.ndarray:
    a = as_signal(signal)
    b = as_signal(noise)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.size} vs {b.size}")
    return a + b


def snr_db(component: ChirpComponent, sigma2: float) -> float:
    """Per-component SNR ``10*log10(|A|^2 / sigma2)`` in dB."""
    if not sigma2 > 0:
        raise ValueError("sigma2 must be positive")
    mag2 = component.a_re ** 2 + component.a_im ** 2
    if mag2 == 0:
        raise ValueError("component amplitude must be non-zero")
    return 10.0 * math.log10(mag2 / sigma2)


def sigma2_for_snr(component: ChirpComponent, snr: float) -> float:
    """Inverse of :func:`snr_db`: the noise variance giving ``snr`` dB."""
    mag2 = component.a_re ** 2 + component.a_im ** 2
    return mag2 / (10.0 ** (snr / 10.0))
