"""Least squares and approximate least squares chirp-rate estimators.

Amplitudes enter the model linearly, so every estimator here profiles them out
and searches over frequency rates only:

* :func:`lse_one` minimises the profiled residual sum of squares ``R(beta)``;
* :func:`alse_one` maximises the periodogram-type function ``I(beta)`` and
  then regresses the amplitude on ``cos``/``sin`` of the fitted phase;
* :func:`lse_joint` minimises the ``p``-dimensional profiled RSS;
* :func:`sequential_fit` peels off one component at a time.

All searches start from the periodogram-type grid maximum and are refined
with the Nelder-Mead simplex from :mod:`chirpfit.optimizer`.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .optimizer import OptimResult, SimplexConfig, minimize
from .periodogram import GridSpec, ptf_value_expanded, scan, top_peaks
from .signal import TWO_PI, ChirpComponent, as_signal, time_index, wrap_beta

COND_LIMIT = 1e8
COLLAPSE_TOL = 1e-8


class DegenerateBasisError(ValueError):
    """Two frequency rates coincide (numerically) so amplitudes are not identifiable."""


class InitializationError(ValueError):
    """The grid scan could not supply the requested number of starting values."""


class SequentialFitError(RuntimeError):
    """A stage of a sequential fit failed; ``partial`` holds the stages that succeeded."""

    def __init__(self, message: str, partial: "FitResult"):
        super().__init__(message)
        self.partial = partial


@dataclass
class FitResult:
    """Estimated components plus bookkeeping.

    ``components`` are in estimation order.  ``rss_trajectory`` has the
    residual sum of squares after every stage (one entry for joint fits).
    ``covariance`` is filled by :func:`chirpfit.asymptotics.attach_covariance`.
    """

    components: list[ChirpComponent]
    rss_trajectory: list[float]
    method: str
    n: int
    optim: list[Optional[OptimResult]] = field(default_factory=list)
    covariance: Optional[list[np.ndarray]] = None
    warnings: list[str] = field(default_factory=list)
    extras: dict = field(default_factory=dict)

    @property
    def converged(self) -> bool:
        return all(o is None or o.converged for o in self.optim)

    @property
    def betas(self) -> np.ndarray:
        return np.array([c.beta for c in self.components])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([c.amplitude for c in self.components])

    def fitted(self, n: Optional[int] = None) -> np.ndarray:
        n = self.n if n is None else n
        out = np.zeros(n, dtype=np.complex128)
        for c in self.components:
            out += c.evaluate(n)
        return out

    def to_rows(self) -> list[dict]:
        rows = []
        for k, c in enumerate(self.components, start=1):
            rss = self.rss_trajectory[k - 1] if len(self.rss_trajectory) == len(self.components) \
                else self.rss_trajectory[-1]
            rows.append({"k": k, "a_re": c.a_re, "a_im": c.a_im, "beta": c.beta,
                         "rss_after_stage": rss})
        return rows


def _rate_config(cfg: Optional[SimplexConfig], n: int) -> SimplexConfig:
    """Default simplex settings for frequency-rate refinement: one grid cell steps."""
    cfg = SimplexConfig() if cfg is None else cfg
    return cfg.with_step(TWO_PI / n ** 2)


def _circ_dist(a: float, b: float) -> float:
    d = abs(wrap_beta(a) - wrap_beta(b))
    return min(d, TWO_PI - d)


def profile_amplitudes(y, betas: Sequence[float]) -> np.ndarray:
    """Least squares amplitudes for fixed frequency rates.

    Solves ``(Z^H Z) A = Z^H Y`` where column ``k`` of ``Z`` is
    ``exp(i beta_k t^2)``.  For a single rate this is ``sum_t y(t) exp(-i beta t^2) / N``.

    Raises
    ------
    DegenerateBasisError
        If ``Z^H Z`` has condition number above ``1e8``.
    """
    y = as_signal(y)
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    n, p = y.size, betas.size
    if p < 1 or p >= n:
        raise ValueError(f"need 1 <= p < N, got p={p}, N={n}")
    t2 = time_index(n) ** 2
    if p == 1:
        z = np.exp(1j * (betas[0] * t2))
        return np.array([np.vdot(z, y) / n])
    Z = np.exp(1j * np.outer(t2, betas))
    G = Z.conj().T @ Z
    cond = np.linalg.cond(G)
    if not cond <= COND_LIMIT:
        raise DegenerateBasisError(
            f"Z^H Z is ill-conditioned (cond={cond:.3g}) for betas {betas.tolist()}")
    return np.linalg.solve(G, Z.conj().T @ y)


def profile_rss(y, betas: Sequence[float]) -> float:
    """Residual sum of squares with amplitudes profiled out, ``Y^H (I - P_Z) Y``."""
    y = as_signal(y)
    betas = np.atleast_1d(np.asarray(betas, dtype=float))
    amps = profile_amplitudes(y, betas)
    t2 = time_index(y.size) ** 2
    r = y - np.exp(1j * np.outer(t2, betas)) @ amps
    return float(np.vdot(r, r).real)


def _grid_init(y: np.ndarray, grid: Optional[GridSpec]) -> float:
    grid = GridSpec("ptf_full", y.size) if grid is None else grid
    return scan(y, grid, "ptf").argmax()


def lse_one(y, init_beta: Optional[float] = None, cfg: Optional[SimplexConfig] = None,
            grid: Optional[GridSpec] = None) -> FitResult:
    """One-component least squares fit.

    Starts from ``init_beta`` or, by default, the maximiser of the
    periodogram-type function over ``grid`` (full ``2 pi k / N^2`` grid unless
    given), then minimises ``R(beta)`` with the simplex.
    """
    y = as_signal(y)
    n = y.size
    if n < 8:
        raise ValueError("lse_one needs at least 8 samples")
    t2 = time_index(n) ** 2
    x0 = _grid_init(y, grid) if init_beta is None else float(init_beta)

    def rss(x):
        z = np.exp(1j * (x[0] * t2))
        a = np.vdot(z, y) / n
        r = y - a * z
        return np.vdot(r, r).real

    opt = minimize(rss, [x0], _rate_config(cfg, n))
    beta = wrap_beta(opt.argmin[0])
    amp = profile_amplitudes(y, [beta])[0]
    fit = FitResult([ChirpComponent.from_complex(amp, beta)], [float(opt.value)], "lse", n, [opt])
    fit.extras["init_betas"] = [x0]
    if not opt.converged:
        fit.warnings.append("simplex did not converge; returning best point found")
    return fit


def alse_amplitude(y, beta: float) -> complex:
    """Amplitude regression on ``cos``/``sin`` of ``beta t^2`` (real arithmetic)."""
    y = as_signal(y)
    n = y.size
    phase = beta * time_index(n) ** 2
    c, s = np.cos(phase), np.sin(phase)
    yr, yi = y.real, y.imag
    a_re = (np.dot(yr, c) + np.dot(yi, s)) / n
    a_im = (np.dot(yi, c) - np.dot(yr, s)) / n
    return complex(a_re, a_im)


def alse_one(y, init_beta: Optional[float] = None, cfg: Optional[SimplexConfig] = None,
             grid: Optional[GridSpec] = None) -> FitResult:
    """One-component approximate least squares fit.

    Maximises the periodogram-type function (continuous argument) from the
    grid maximum, then computes the amplitude by :func:`alse_amplitude`.
    """
    y = as_signal(y)
    n = y.size
    if n < 8:
        raise ValueError("alse_one needs at least 8 samples")
    x0 = _grid_init(y, grid) if init_beta is None else float(init_beta)
    opt = minimize(lambda x: -ptf_value_expanded(y, x[0]), [x0], _rate_config(cfg, n))
    beta = wrap_beta(opt.argmin[0])
    amp = alse_amplitude(y, beta)
    comp = ChirpComponent.from_complex(amp, beta)
    r = y - comp.evaluate(n)
    fit = FitResult([comp], [float(np.vdot(r, r).real)], "alse", n, [opt])
    fit.extras["init_betas"] = [x0]
    if not opt.converged:
        fit.warnings.append("simplex did not converge; returning best point found")
    return fit


def lse_joint(y, p: int, init_betas: Optional[Sequence[float]] = None,
              cfg: Optional[SimplexConfig] = None) -> FitResult:
    """Simultaneous least squares fit of ``p`` components.

    Starting values default to the ``p`` highest separated peaks of the full
    periodogram-type scan.  The simplex runs over the ``p`` frequency rates of
    the profiled RSS; amplitudes solve the exact ``p x p`` normal equations.

    Raises
    ------
    InitializationError
        If the scan has fewer than ``p`` resolvable peaks; fit sequentially instead.
    DegenerateBasisError
        If two rates collapse to within ``1e-8`` during the search.
    """
    y = as_signal(y)
    n = y.size
    if not 1 <= p < n / 4:
        raise ValueError(f"need 1 <= p < N/4, got p={p}, N={n}")
    warnings = []
    grid = GridSpec("ptf_full", n)
    if init_betas is None:
        peaks = top_peaks(scan(y, grid, "ptf"), p)
        if peaks.shortfall:
            raise InitializationError(
                f"periodogram-type scan resolved only {len(peaks.locations)} of {p} peaks; "
                "use sequential_fit for unresolved frequency rates")
        init = list(peaks.locations)
    else:
        init = [float(b) for b in init_betas]
        if len(init) != p:
            raise ValueError(f"expected {p} initial rates, got {len(init)}")
    resolve = 10 * grid.step
    for i in range(p):
        for j in range(i + 1, p):
            if _circ_dist(init[i], init[j]) < resolve:
                warnings.append(
                    f"initial rates {init[i]:.6g} and {init[j]:.6g} are within ten grid cells")

    def objective(b):
        for i in range(p):
            for j in range(i + 1, p):
                if _circ_dist(b[i], b[j]) < COLLAPSE_TOL:
                    raise DegenerateBasisError(
                        f"frequency rates collapsed during the search: {b.tolist()}")
        return profile_rss(y, b)

    opt = minimize(objective, init, _rate_config(cfg, n))
    betas = [wrap_beta(b) for b in opt.argmin]
    amps = profile_amplitudes(y, betas)
    comps = [ChirpComponent.from_complex(a, b) for a, b in zip(amps, betas)]
    fit = FitResult(comps, [float(opt.value)], "lse_joint", n, [opt], warnings=warnings)
    fit.extras["init_betas"] = init
    if not opt.converged:
        fit.warnings.append("simplex did not converge; returning best point found")
    return fit


def sequential_fit(y, p: int, flavor: str = "lse", cfg: Optional[SimplexConfig] = None,
                   init_grids: Optional[Sequence[Optional[GridSpec]]] = None) -> FitResult:
    """Fit ``p`` components one at a time, subtracting each before the next.

    Every stage scans the current residual data over the full grid (or over
    ``init_grids[k]`` when given), fits one component with :func:`lse_one` or
    :func:`alse_one` and removes it.  ``rss_trajectory[k]`` is the residual sum
    of squares after stage ``k + 1``.
    """
    if flavor not in ("lse", "alse"):
        raise ValueError(f"flavor must be 'lse' or 'alse', got {flavor!r}")
    y = as_signal(y)
    n = y.size
    if not 1 <= p < n / 4:
        raise ValueError(f"need 1 <= p < N/4, got p={p}, N={n}")
    return _sequential(y, p, flavor, cfg, init_grids)


def _sequential(y: np.ndarray, p: int, flavor: str, cfg, init_grids) -> FitResult:
    n = y.size
    stage_fit = lse_one if flavor == "lse" else alse_one
    fit = FitResult([], [], f"seq_{flavor}", n)
    fit.extras["init_betas"] = []
    current = y.copy()
    for k in range(p):
        grid = init_grids[k] if init_grids is not None else None
        try:
            stage = stage_fit(current, cfg=cfg, grid=grid)
        except Exception as exc:
            raise SequentialFitError(f"stage {k + 1} failed: {exc}", fit) from exc
        comp = stage.components[0]
        current = current - comp.evaluate(n)
        fit.components.append(comp)
        fit.rss_trajectory.append(float(np.vdot(current, current).real))
        fit.optim.extend(stage.optim)
        fit.warnings.extend(f"stage {k + 1}: {w}" for w in stage.warnings)
        fit.extras["init_betas"].extend(stage.extras["init_betas"])
    return fit


def residual(y, fit: FitResult) -> np.ndarray:
    """``y`` minus every fitted component."""
    y = as_signal(y)
    return y - fit.fitted(y.size)
