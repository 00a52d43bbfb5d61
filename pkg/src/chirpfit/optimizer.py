"""Downhill simplex (Nelder-Mead) minimisation.

All grid-initialised estimates in the package are refined with this routine.
The objectives are cheap, low dimensional (usually one frequency rate) and
sharply peaked, so a plain derivative-free simplex with tight tolerances is
both robust and fast.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np


class NonFiniteObjectiveError(FloatingPointError):
    """The objective returned NaN or an infinity."""

    def __init__(self, point, value):
        self.point = np.array(point, dtype=float)
        self.value = value
        super().__init__(f"objective is not finite ({value!r}) at x = {self.point.tolist()}")


@dataclass(frozen=True)
class SimplexConfig:
    """Nelder-Mead settings.

    ``init_step`` is either a scalar used for every axis or one edge length per
    dimension; ``None`` means ``0.05 * max(|x0_i|, 1)``.  ``f_tol=None`` selects
    ``1e-10 * (1 + |f(x0)|)`` and ``max_iter=None`` selects ``500 * d``.
    """

    init_step: Optional[float | Sequence[float]] = None
    x_tol: float = 1e-10
    f_tol: Optional[float] = None
    max_iter: Optional[int] = None
    reflection: float = 1.0
    expansion: float = 2.0
    contraction: float = 0.5
    shrink: float = 0.5

    def __post_init__(self):
        if not self.reflection > 0:
            raise ValueError("reflection coefficient must be > 0")
        if not self.expansion > 1:
            raise ValueError("expansion coefficient must be > 1")
        if not 0 < self.contraction < 1:
            raise ValueError("contraction coefficient must lie in (0, 1)")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink coefficient must lie in (0, 1)")
        if not self.x_tol > 0:
            raise ValueError("x_tol must be > 0")
        if self.f_tol is not None and not self.f_tol > 0:
            raise ValueError("f_tol must be > 0")
        if self.max_iter is not None and self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")

    def with_step(self, step) -> "SimplexConfig":
        """Copy with ``init_step`` replaced unless one was set explicitly."""
        if self.init_step is not None:
            return self
        return replace(self, init_step=step)


@dataclass
class OptimResult:
    argmin: np.ndarray
    value: float
    iterations: int
    converged: bool
    evaluations: int = 0


def _steps(cfg: SimplexConfig, x0: np.ndarray) -> np.ndarray:
    d = x0.size
    if cfg.init_step is None:
        return 0.05 * np.maximum(np.abs(x0), 1.0)
    step = np.atleast_1d(np.asarray(cfg.init_step, dtype=float))
    if step.size == 1:
        step = np.full(d, step[0])
    if step.size != d:
        raise ValueError(f"init_step has {step.size} entries for a {d}-dimensional problem")
    if np.any(step == 0):
        raise ValueError("init_step entries must be non-zero")
    return step


def minimize(objective: Callable[[np.ndarray], float], x0, cfg: SimplexConfig = SimplexConfig()) -> OptimResult:
    """Minimise ``objective`` from ``x0`` with the Nelder-Mead simplex method.

    The starting simplex is ``x0`` plus one vertex displaced by ``init_step``
    along each axis.  Iteration stops once the simplex diameter (max vertex
    distance from the best vertex, infinity norm) is below ``x_tol`` *and* the
    spread of vertex values is below ``f_tol``, or after ``max_iter``
    iterations with ``converged=False``.

    Raises
    ------
    NonFiniteObjectiveError
        If any evaluated vertex gives a non-finite value.
    """
    x0 = np.atleast_1d(np.asarray(x0, dtype=float)).copy()
    if x0.ndim != 1 or x0.size == 0:
        raise ValueError("x0 must be a non-empty vector")
    d = x0.size
    max_iter = cfg.max_iter if cfg.max_iter is not None else 500 * d
    n_eval = 0

    def f(x):
        nonlocal n_eval
        n_eval += 1
        v = float(objective(x))
        if not np.isfinite(v):
            raise NonFiniteObjectiveError(x, v)
        return v

    steps = _steps(cfg, x0)
    sim = np.empty((d + 1, d))
    sim[0] = x0
    for i in range(d):
        sim[i + 1] = x0
        sim[i + 1, i] += steps[i]
    fs = np.array([f(v) for v in sim])
    f_tol = cfg.f_tol if cfg.f_tol is not None else 1e-10 * (1.0 + abs(fs[0]))

    rho, chi, gam, sig = cfg.reflection, cfg.expansion, cfg.contraction, cfg.shrink
    it = 0
    converged = False
    while True:
        order = np.argsort(fs, kind="stable")
        sim, fs = sim[order], fs[order]
        diam = np.max(np.abs(sim[1:] - sim[0]))
        if diam <= cfg.x_tol and fs[-1] - fs[0] <= f_tol:
            converged = True
            break
        if it >= max_iter:
            break
        it += 1

        centroid = sim[:-1].mean(axis=0)
        xr = centroid + rho * (centroid - sim[-1])
        fr = f(xr)
        if fr < fs[0]:
            xe = centroid + rho * chi * (centroid - sim[-1])
            fe = f(xe)
            if fe < fr:
                sim[-1], fs[-1] = xe, fe
            else:
                sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-2]:
            sim[-1], fs[-1] = xr, fr
            continue
        if fr < fs[-1]:
            # outside contraction
            xc = centroid + gam * (xr - centroid)
            fc = f(xc)
            if fc <= fr:
                sim[-1], fs[-1] = xc, fc
                continue
        else:
            xc = centroid + gam * (sim[-1] - centroid)
            fc = f(xc)
            if fc < fs[-1]:
                sim[-1], fs[-1] = xc, fc
                continue
        for i in range(1, d + 1):
            sim[i] = sim[0] + sig * (sim[i] - sim[0])
            fs[i] = f(sim[i])

    return OptimResult(argmin=sim[0].copy(), value=float(fs[0]), iterations=it,
                       converged=converged, evaluations=n_eval)
