"""Monte Carlo harness and residual diagnostics.

``run_experiment`` simulates truth plus noise for every ``(N, sigma2)`` cell,
runs each requested estimator, attributes estimates to true components by
nearest frequency rate and aggregates mean squared errors next to the
asymptotic variances.  Replication ``r`` always draws its noise with seed
``base_seed + r``, and results are aggregated in replication order, so the
table does not depend on how many worker processes ran it.

The second half of the module is the real-data workflow: RSS trajectory of a
sequential fit, elbow-based order choice, and Ljung-Box tests on the residuals.
"""
from __future__ import annotations

import csv
import itertools
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np
from scipy.special import gammaincc

from . import asymptotics
from .baselines import cpf_estimate, sequential_baseline
from .estimators import (DegenerateBasisError, FitResult, InitializationError, SequentialFitError,
                         _sequential, alse_one, lse_joint, lse_one, profile_rss, residual,
                         sequential_fit)
from .periodogram import GridSpec
from .signal import (TWO_PI, ChirpModel, NoiseSpec, add, as_signal, generate_noise,
                     sigma2_for_snr, snr_db, synthesize_clean, wrap_beta)

log = logging.getLogger(__name__)

METHODS = ("lse", "alse", "lse_joint", "seq_lse", "seq_alse", "dechirp", "cpf", "pcpf")
LSE_FAMILY = ("lse", "alse", "lse_joint", "seq_lse", "seq_alse")
ORACLE_SUFFIX = ":oracle"
ORACLE_HALF_WIDTH = 5


def split_method(label: str) -> tuple[str, bool]:
    if label.endswith(ORACLE_SUFFIX):
        return label[: -len(ORACLE_SUFFIX)], True
    return label, False


@dataclass
class ExperimentConfig:
    """Monte Carlo sweep definition.

    ``methods`` entries are names from :data:`METHODS`, optionally suffixed
    with ``:oracle`` to start that method from a grid window of +-5 cells
    around the true rates (oracle knowledge; the ``oracle_init`` flag applies
    it to every ptf-initialised method).  ``snr_db_values``, when given,
    replaces ``sigma2_values`` using the first component's amplitude.
    """

    model: ChirpModel
    n_values: Sequence[int]
    sigma2_values: Sequence[float] = (1.0,)
    methods: Sequence[str] = ("lse", "alse")
    replications: int = 500
    base_seed: int = 20240101
    oracle_init: bool = False
    output_path: Optional[str] = None
    snr_db_values: Optional[Sequence[float]] = None
    name: str = "custom"

    def __post_init__(self):
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not self.n_values:
            raise ValueError("n_values must not be empty")
        if len(self.model) < 1:
            raise ValueError("the truth model needs at least one component")
        p = len(self.model)
        for label in self.methods:
            m, _ = split_method(label)
            if m not in METHODS:
                raise ValueError(f"unknown method {label!r}")
            if m in ("lse", "alse", "cpf") and p != 1:
                raise ValueError(f"method {m!r} fits a single component but the model has {p}")
        self.n_values = tuple(int(n) for n in self.n_values)
        self.sigma2_values = tuple(float(s) for s in self.sigma2_values)
        self.methods = tuple(self.methods)
        if self.snr_db_values is not None:
            self.snr_db_values = tuple(float(s) for s in self.snr_db_values)

    def noise_levels(self) -> list[float]:
        if self.snr_db_values is not None:
            ref = self.model.components[0]
            return [sigma2_for_snr(ref, s) for s in self.snr_db_values]
        return list(self.sigma2_values)

    def as_dict(self) -> dict:
        return {
            "name": self.name,
            "components": [[c.a_re, c.a_im, c.beta] for c in self.model],
            "n_values": list(self.n_values),
            "sigma2_values": list(self.sigma2_values),
            "snr_db_values": None if self.snr_db_values is None else list(self.snr_db_values),
            "methods": list(self.methods),
            "replications": self.replications,
            "base_seed": self.base_seed,
            "oracle_init": self.oracle_init,
            "output_path": self.output_path,
        }


_ONE = ChirpModel.from_tuples([(5.0, 0.0, 0.5)])
_TWO = ChirpModel.from_tuples([(7.0, 0.0, 1.0), (5.0, 0.0, 0.5)])
_CLOSE_METHODS = ("lse_joint", "lse_joint:oracle", "seq_lse", "seq_alse")


def _close(b1: float) -> ChirpModel:
    return ChirpModel.from_tuples([(7.0, 0.0, b1), (5.0, 0.0, 0.5)])


PRESETS = {
    "4a": dict(model=_ONE, n_values=(101, 201, 301, 401, 501), sigma2_values=(1.0, 2.0, 3.0),
               methods=("lse", "alse", "dechirp", "cpf")),
    "4b": dict(model=_TWO, n_values=(101, 201, 301, 401, 501), sigma2_values=(1.0, 2.0, 3.0),
               methods=("seq_lse", "seq_alse", "dechirp", "pcpf")),
    "4c-1": dict(model=_close(0.51), n_values=(100, 200, 300, 400, 500), sigma2_values=(1.0,),
                 methods=_CLOSE_METHODS),
    "4c-2": dict(model=_close(0.502), n_values=(100, 200, 300, 400, 500), sigma2_values=(1.0,),
                 methods=_CLOSE_METHODS),
    "4c-3": dict(model=_close(0.501), n_values=(100, 200, 300, 400, 500), sigma2_values=(1.0,),
                 methods=_CLOSE_METHODS),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    """Experiment presets for the published simulation setups (500 replications)."""
    try:
        base = dict(PRESETS[name])
    except KeyError:
        raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
    base.update(name=name)
    base.update(overrides)
    return ExperimentConfig(**base)


def _parse_list(value: str, cast):
    return [cast(v.strip()) for v in value.split(",") if v.strip()]


def _parse_bool(value: str) -> bool:
    v = value.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {value!r}")


def parse_components(value: str) -> ChirpModel:
    """``"a_re:a_im:beta,a_re:a_im:beta"`` -> :class:`ChirpModel`."""
    triples = []
    for item in _parse_list(value, str):
        parts = item.split(":")
        if len(parts) != 3:
            raise ValueError(f"component {item!r} is not a_re:a_im:beta")
        triples.append(tuple(float(p) for p in parts))
    return ChirpModel.from_tuples(triples)


def load_config(path, base_preset: Optional[str] = None) -> ExperimentConfig:
    """Read a ``key = value`` experiment file.

    Keys: ``preset``, ``name``, ``components``, ``n_values``, ``sigma2_values``,
    ``snr_db_values``, ``methods``, ``replications``, ``base_seed``,
    ``oracle_init``, ``output_path``.  Lists are comma separated and ``#``
    starts a comment.  Keys given alongside ``preset`` override it;
    ``base_preset`` is used when the file names no preset.
    """
    raw: dict[str, str] = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{lineno}: expected 'key = value'")
            key, value = (s.strip() for s in line.split("=", 1))
            raw[key] = value
    kw: dict = {}
    casts = {
        "name": str,
        "components": parse_components,
        "n_values": lambda v: _parse_list(v, int),
        "sigma2_values": lambda v: _parse_list(v, float),
        "snr_db_values": lambda v: _parse_list(v, float),
        "methods": lambda v: _parse_list(v, str),
        "replications": int,
        "base_seed": int,
        "oracle_init": _parse_bool,
        "output_path": str,
    }
    preset_name = raw.pop("preset", base_preset)
    for key, value in raw.items():
        if key not in casts:
            raise ValueError(f"{path}: unknown key {key!r}")
        kw["model" if key == "components" else key] = casts[key](value)
    if preset_name is not None:
        return preset(preset_name, **kw)
    if "model" not in kw or "n_values" not in kw:
        raise ValueError(f"{path}: 'components' and 'n_values' are required without a preset")
    return ExperimentConfig(**kw)


# ---------------------------------------------------------------- Monte Carlo


def _oracle_window(n: int, beta: float) -> GridSpec:
    return GridSpec("ptf_full", n).window(beta, ORACLE_HALF_WIDTH)


def estimate(y: np.ndarray, method: str, p: int, truth: Optional[ChirpModel] = None,
             oracle: bool = False) -> list[tuple[Optional[complex], float]]:
    """Run one estimator and return ``[(amplitude or None, beta), ...]``.

    With ``oracle=True`` the grid initialisation is restricted to +-5 cells
    around the (dominance ordered) true rates in ``truth``.
    """
    n = y.size
    true_betas = None
    if oracle:
        if truth is None:
            raise ValueError("oracle initialisation needs the true model")
        ordered = sorted(truth, key=lambda c: -c.magnitude)
        true_betas = [c.beta for c in ordered]
    if method in ("lse", "alse"):
        grid = _oracle_window(n, true_betas[0]) if oracle else None
        fit = (lse_one if method == "lse" else alse_one)(y, grid=grid)
    elif method == "lse_joint":
        init = _joint_window_init(y, [_oracle_window(n, b) for b in true_betas]) if oracle else None
        fit = lse_joint(y, p, init_betas=init)
    elif method in ("seq_lse", "seq_alse"):
        grids = [_oracle_window(n, b) for b in true_betas] if oracle else None
        fit = sequential_fit(y, p, method[4:], init_grids=grids)
    elif method in ("dechirp", "pcpf"):
        fit = sequential_baseline(y, p, method)
    elif method == "cpf":
        return [(None, cpf_estimate(y).beta_resolved)]
    else:
        raise ValueError(f"unknown method {method!r}")
    return [(c.amplitude, c.beta) for c in fit.components]


def _joint_window_init(y: np.ndarray, windows: Sequence[GridSpec]) -> list[float]:
    """Minimise the joint profiled RSS over the product of per-component windows.

    Per-component argmaxes are not enough here: when the windows overlap they
    can all land on the same grid point.
    """
    best, best_rss = None, math.inf
    for combo in itertools.product(*(w.points() for w in windows)):
        try:
            rss = profile_rss(y, combo)
        except DegenerateBasisError:
            continue
        if rss < best_rss:
            best, best_rss = list(combo), rss
    if best is None:
        raise InitializationError("no non-degenerate starting point in the oracle windows")
    return [float(b) for b in best]


def match_components(true_betas: Sequence[float], est_betas: Sequence[float]) -> dict[int, int]:
    """Greedy one-to-one assignment by circular distance in ``beta``.

    Returns ``{true_index: estimate_index}``.
    """
    pairs = []
    for i, tb in enumerate(true_betas):
        for j, eb in enumerate(est_betas):
            d = abs(wrap_beta(tb) - wrap_beta(eb))
            pairs.append((min(d, TWO_PI - d), i, j))
    pairs.sort()
    taken_t, taken_e, out = set(), set(), {}
    for _, i, j in pairs:
        if i in taken_t or j in taken_e:
            continue
        out[i] = j
        taken_t.add(i)
        taken_e.add(j)
    return out


def _beta_error(est: float, true: float) -> float:
    d = wrap_beta(est) - wrap_beta(true)
    if d > math.pi:
        d -= TWO_PI
    elif d < -math.pi:
        d += TWO_PI
    return d


def _replicate(task):
    triples, n, sigma2, seed, methods, oracle_all = task
    truth = ChirpModel.from_tuples(triples)
    y = add(synthesize_clean(truth, n), generate_noise(NoiseSpec(sigma2=sigma2, seed=seed), n))
    out = []
    for label in methods:
        method, oracle = split_method(label)
        oracle = oracle or (oracle_all and method in LSE_FAMILY)
        t0 = time.perf_counter()
        try:
            est = estimate(y, method, len(truth), truth, oracle)
            err = None
        except Exception as exc:  # counted as an excluded replication
            est, err = None, f"{type(exc).__name__}: {exc}"
        out.append((est, time.perf_counter() - t0, err))
    return out


@dataclass
class MseRow:
    method: str
    component: int
    parameter: str
    n: int
    sigma2: float
    snr_db: float
    mse: float
    theoretical_var: float
    mean_runtime: float
    replications: int
    excluded: int
    oracle: bool

    @property
    def ratio(self) -> float:
        if not np.isfinite(self.theoretical_var) or self.theoretical_var == 0:
            return math.nan
        return self.mse / self.theoretical_var


MSE_COLUMNS = ("method", "component", "parameter", "n", "sigma2", "snr_db", "mse",
               "theoretical_var", "ratio", "mean_runtime", "replications", "excluded", "oracle")


def _fmt(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return "n/a" if math.isnan(v) else repr(v)
    return str(v)


@dataclass
class MseTable:
    rows: list[MseRow] = field(default_factory=list)
    failures: dict = field(default_factory=dict)

    def get(self, method: str, component: int, parameter: str, n: int, sigma2: float) -> MseRow:
        for r in self.rows:
            if (r.method == method and r.component == component and r.parameter == parameter
                    and r.n == n and math.isclose(r.sigma2, sigma2)):
                return r
        raise KeyError((method, component, parameter, n, sigma2))

    def select(self, **criteria) -> list[MseRow]:
        return [r for r in self.rows
                if all(getattr(r, k) == v for k, v in criteria.items())]

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(MSE_COLUMNS)
            for r in self.rows:
                w.writerow([_fmt(getattr(r, c)) for c in MSE_COLUMNS])

    @classmethod
    def from_csv(cls, path) -> "MseTable":
        def num(v):
            return math.nan if v == "n/a" else float(v)

        rows = []
        with open(path, newline="") as fh:
            for d in csv.DictReader(fh):
                rows.append(MseRow(d["method"], int(d["component"]), d["parameter"], int(d["n"]),
                                   float(d["sigma2"]), num(d["snr_db"]), num(d["mse"]),
                                   num(d["theoretical_var"]), num(d["mean_runtime"]),
                                   int(d["replications"]), int(d["excluded"]),
                                   d["oracle"] == "true"))
        return cls(rows)


def worker_count(workers: Optional[int] = None) -> int:
    """Workers from the argument or ``CHIRPFIT_THREADS`` (``0`` = all CPUs)."""
    if workers is None:
        workers = int(os.environ.get("CHIRPFIT_THREADS", "1") or 1)
    if workers <= 0:
        workers = os.cpu_count() or 1
    return workers


def run_experiment(cfg: ExperimentConfig, workers: Optional[int] = None) -> MseTable:
    """Simulate every ``(N, sigma2)`` cell of ``cfg`` and tabulate MSEs.

    Failed estimator runs are excluded from that method's MSE and counted in
    the ``excluded`` column; their messages are kept in ``table.failures``.
    """
    truth = cfg.model
    triples = [(c.a_re, c.a_im, c.beta) for c in truth]
    p = len(truth)
    workers = worker_count(workers)
    table = MseTable()
    pool = ProcessPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for n in cfg.n_values:
            for sigma2 in cfg.noise_levels():
                tasks = [(triples, n, sigma2, cfg.base_seed + r, cfg.methods, cfg.oracle_init)
                         for r in range(cfg.replications)]
                if pool is None:
                    results = [_replicate(t) for t in tasks]
                else:
                    chunk = max(1, len(tasks) // (4 * workers))
                    results = list(pool.map(_replicate, tasks, chunksize=chunk))
                log.info("cell N=%d sigma2=%g done", n, sigma2)
                table.rows.extend(_aggregate(cfg, truth, p, n, sigma2, results, table.failures))
    finally:
        if pool is not None:
            pool.shutdown()
    if cfg.output_path:
        os.makedirs(cfg.output_path, exist_ok=True)
        table.to_csv(os.path.join(cfg.output_path, "mse_table.csv"))
    return table


def _aggregate(cfg, truth, p, n, sigma2, results, failures) -> list[MseRow]:
    rows = []
    true_betas = [c.beta for c in truth]
    for mi, label in enumerate(cfg.methods):
        method, oracle = split_method(label)
        oracle = oracle or (cfg.oracle_init and method in LSE_FAMILY)
        sq = np.zeros((p, 3))
        has_amp = True
        used, excluded, runtime = 0, 0, 0.0
        for rep in results:
            est, dt, err = rep[mi]
            runtime += dt
            if est is None:
                excluded += 1
                failures.setdefault((label, n, sigma2), []).append(err)
                continue
            used += 1
            assign = match_components(true_betas, [b for _, b in est])
            for i, comp in enumerate(truth):
                if i not in assign:
                    # fewer estimates than components: count as a failure of that component
                    sq[i] += np.nan
                    continue
                amp, beta = est[assign[i]]
                sq[i, 2] += _beta_error(beta, comp.beta) ** 2
                if amp is None:
                    has_amp = False
                else:
                    sq[i, 0] += (amp.real - comp.a_re) ** 2
                    sq[i, 1] += (amp.imag - comp.a_im) ** 2
        mean_rt = runtime / len(results)
        for i, comp in enumerate(truth):
            theory = asymptotics.finite_n_variances(comp, sigma2, n) if method in LSE_FAMILY \
                else np.full(3, math.nan)
            params = range(3) if has_amp else (2,)
            for j in params:
                rows.append(MseRow(
                    method=label, component=i + 1, parameter=asymptotics.PARAMETERS[j], n=n,
                    sigma2=sigma2, snr_db=snr_db(comp, sigma2),
                    mse=float(sq[i, j] / used) if used else math.nan,
                    theoretical_var=float(theory[j]), mean_runtime=mean_rt,
                    replications=used, excluded=excluded, oracle=oracle))
    return rows


# ------------------------------------------------------------- diagnostics


class RssTrajectory(NamedTuple):
    rss: list
    truncated: bool
    fit: FitResult


def rss_trajectory(y, max_order: int, flavor: str = "lse", cfg=None) -> RssTrajectory:
    """RSS after each stage of a sequential fit with ``max_order`` components.

    Unlike :func:`~chirpfit.estimators.sequential_fit` the order may go up to
    ``N - 1``.  A failing stage truncates the trajectory (``truncated=True``).
    """
    y = as_signal(y)
    if max_order < 1:
        raise ValueError("max_order must be >= 1")
    if max_order >= y.size:
        raise ValueError("max_order must be below the number of samples")
    try:
        fit = _sequential(y, max_order, flavor, cfg, None)
        truncated = False
    except SequentialFitError as exc:
        log.warning("RSS trajectory truncated: %s", exc)
        fit, truncated = exc.partial, True
    return RssTrajectory(list(fit.rss_trajectory), truncated, fit)


class OrderChoice(NamedTuple):
    order: int
    flat_found: bool


def select_order(rss: Sequence[float], tau: float = 0.01) -> OrderChoice:
    """Elbow rule on an RSS trajectory (``rss[0]`` is the RSS after one component).

    Returns the smallest order ``k`` after which every further stage lowers the
    RSS by a relative amount below ``tau``.  RSS values below ``1e-10`` of the
    largest entry count as zero, so an exhausted noiseless fit stops there.
    If even the last stage is not flat, the maximum order is returned with
    ``flat_found=False``.
    """
    r = np.asarray(rss, dtype=float)
    if r.size == 0:
        raise ValueError("empty RSS trajectory")
    if not tau > 0:
        raise ValueError("tau must be > 0")
    floor = 1e-10 * float(np.max(np.abs(r)))
    drops = np.zeros(r.size)  # drops[k]: relative decrease from order k to k+1 (0-based)
    for k in range(1, r.size):
        prev = r[k - 1]
        drops[k] = 0.0 if prev <= floor else (prev - r[k]) / prev
    order = r.size
    for k in range(r.size, 0, -1):
        # order k is acceptable if stages k+1..K are all flat
        if np.all(drops[k:] < tau):
            order = k
        else:
            break
    if r.size > 1 and drops[-1] >= tau:
        return OrderChoice(r.size, False)
    return OrderChoice(order, r.size > 1 or False)


class LjungBox(NamedTuple):
    q: float
    p_value: float
    lags: int


def ljung_box(x, h: int = 20) -> LjungBox:
    """Ljung-Box portmanteau statistic and chi-square(h) upper-tail p-value.

    ``Q = N (N+2) sum_{k=1}^{h} r_k^2 / (N-k)`` with ``r_k`` the lag-``k``
    autocorrelation of the mean-centred series.
    """
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise ValueError("ljung_box needs a one-dimensional series")
    n = x.size
    if not 1 <= h < n:
        raise ValueError(f"need 1 <= h < N, got h={h}, N={n}")
    d = x - x.mean()
    denom = float(np.dot(d, d))
    if denom == 0.0 or denom <= 1e-300:
        raise ValueError("Ljung-Box test is undefined for a constant series")
    acf = np.array([np.dot(d[k:], d[:-k]) / denom for k in range(1, h + 1)])
    q = n * (n + 2) * float(np.sum(acf ** 2 / (n - np.arange(1, h + 1))))
    return LjungBox(q, float(gammaincc(h / 2.0, q / 2.0)), h)


@dataclass
class DiagnosticsReport:
    rss_trajectory: list
    selected_order: int
    flat_found: bool
    truncated: bool
    lags: int
    ljung_box_re: Optional[LjungBox]
    ljung_box_im: Optional[LjungBox]
    note: str = ""

    def render(self) -> str:
        lines = [f"max order probed: {len(self.rss_trajectory)}",
                 f"selected order: {self.selected_order}"
                 + ("" if self.flat_found else " (RSS never flattened; using maximum)"),
                 "RSS trajectory:"]
        lines += [f"  {k:4d}  {v:.10g}" for k, v in enumerate(self.rss_trajectory, start=1)]
        if self.truncated:
            lines.append("trajectory truncated by a failed stage")
        for part, lb in (("real", self.ljung_box_re), ("imaginary", self.ljung_box_im)):
            if lb is None:
                lines.append(f"Ljung-Box ({part} part): not applicable")
            else:
                lines.append(f"Ljung-Box ({part} part): Q = {lb.q:.6g}, lags = {lb.lags}, "
                             f"p-value = {lb.p_value:.6g}")
        if self.note:
            lines.append(self.note)
        return "\n".join(lines) + "\n"


def residual_diagnostics(res, y_scale: float, h: int):
    """Ljung-Box on real and imaginary residual parts; ``None`` where inapplicable."""
    rms = float(np.sqrt(np.mean(np.abs(res) ** 2)))
    # rate errors near the optimizer tolerance leave ~1e-7 relative residuals
    if rms <= 1e-6 * y_scale:
        return None, None, "residuals are numerically zero; Ljung-Box not applicable"
    out, notes = [], []
    for part, name in ((res.real, "real"), (res.imag, "imaginary")):
        try:
            out.append(ljung_box(part, h))
        except ValueError as exc:
            out.append(None)
            notes.append(f"{name} part: {exc}")
    return out[0], out[1], "; ".join(notes)


def fit_real(y, max_order: int, tau: float = 0.01, h: int = 20, flavor: str = "lse"):
    """Sequential fit of a recording with elbow-selected order and residual tests.

    Returns ``(report, fit, residual)``; ``fit`` holds the first
    ``selected_order`` components of the sequential fit.
    """
    y = as_signal(y)
    traj = rss_trajectory(y, max_order, flavor)
    choice = select_order(traj.rss, tau)
    k = choice.order
    full = traj.fit
    fit = FitResult(full.components[:k], full.rss_trajectory[:k], full.method, full.n,
                    full.optim[:k], warnings=list(full.warnings))
    res = residual(y, fit)
    scale = float(np.sqrt(np.mean(np.abs(y) ** 2)))
    lb_re, lb_im, note = residual_diagnostics(res, scale, h)
    report = DiagnosticsReport(traj.rss, k, choice.flat_found, traj.truncated, h, lb_re, lb_im, note)
    return report, fit, res
