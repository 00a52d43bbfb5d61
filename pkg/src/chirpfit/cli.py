"""Command-line front end.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Every run writes a JSON manifest with the argument vector, the effective
parameters and the seed, so ``chirpfit <manifest argv>`` reproduces it.
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import replace
from typing import Optional

import numpy as np

from . import __version__, asymptotics
from .baselines import cpf_estimate, sequential_baseline
from .estimators import (DegenerateBasisError, FitResult, InitializationError, SequentialFitError,
                         alse_one, lse_joint, lse_one, profile_amplitudes, residual, sequential_fit)
from .experiments import fit_real, load_config, parse_components, preset, run_experiment
from .files import SignalFormatError, read_signal_csv, write_fit_csv, write_signal_csv
from .optimizer import NonFiniteObjectiveError
from .periodogram import GridSpec, scan
from .signal import ChirpComponent, NoiseSpec, add, generate_noise, synthesize_clean

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
DEFAULT_SEED = 12345
NUMERIC_ERRORS = (DegenerateBasisError, InitializationError, SequentialFitError,
                  NonFiniteObjectiveError, FloatingPointError, np.linalg.LinAlgError)

SCAN_KERNELS = {"ptf": ("ptf", "ptf_full"), "cpf": ("cpf", "cpf_half"),
                "pcpf": ("pcpf", "cpf_half"), "dechirp": ("dechirp_rss", "fourier")}
ESTIMATE_METHODS = ("lse", "alse", "lse-joint", "seq-lse", "seq-alse", "dechirp", "cpf", "pcpf")


class UsageError(Exception):
    pass


class DataError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of numbers: {text!r}") from None


def _components(text: str):
    try:
        return parse_components(text)
    except ValueError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="chirpfit", description="Elementary chirp rate estimation.")
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    ap.add_argument("--manifest", help="manifest path (default: next to the output)")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("synth", help="synthesize a chirp signal to CSV")
    s.add_argument("--components", type=_components, required=True,
                   help="a_re:a_im:beta[,a_re:a_im:beta...]")
    s.add_argument("--n", type=int, required=True)
    s.add_argument("--sigma2", type=float, default=0.0)
    s.add_argument("--seed", type=int, default=DEFAULT_SEED)
    s.add_argument("--out", required=True)

    s = sub.add_parser("scan", help="evaluate a kernel on its natural grid")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--kernel", choices=sorted(SCAN_KERNELS), default="ptf")
    s.add_argument("--k-min", type=int)
    s.add_argument("--k-max", type=int)
    s.add_argument("--out", required=True)

    s = sub.add_parser("estimate", help="fit chirp components")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--method", choices=ESTIMATE_METHODS, default="lse")
    s.add_argument("--p", type=int, default=1)
    s.add_argument("--init-beta", type=_float_list)
    s.add_argument("--out")

    s = sub.add_parser("mc", help="Monte Carlo MSE experiment")
    s.add_argument("--config")
    s.add_argument("--preset", choices=("4a", "4b", "4c-1", "4c-2", "4c-3"))
    s.add_argument("--replications", type=int)
    s.add_argument("--seed", type=int, help="base seed")
    s.add_argument("--out", required=True)

    s = sub.add_parser("avar", help="print asymptotic variances")
    s.add_argument("--components", type=_components, required=True)
    s.add_argument("--sigma2", type=_float_list, required=True)
    s.add_argument("--n", type=_float_list, required=True)
    s.add_argument("--out", help="optional CSV output")

    s = sub.add_parser("fit-real", help="sequential fit with order selection and residual tests")
    s.add_argument("--in", dest="infile", required=True)
    s.add_argument("--max-order", type=int, required=True)
    s.add_argument("--tau", type=float, default=0.01)
    s.add_argument("--lb-lags", type=int, default=20)
    s.add_argument("--flavor", choices=("lse", "alse"), default="lse")
    s.add_argument("--out", required=True)
    return ap


def _read(path) -> np.ndarray:
    try:
        return read_signal_csv(path)
    except (OSError, SignalFormatError) as exc:
        raise DataError(str(exc)) from None


def _cmd_synth(a, params):
    n = a.n
    if n < 1:
        raise UsageError("--n must be >= 1")
    if a.sigma2 < 0:
        raise UsageError("--sigma2 must be >= 0")
    y = synthesize_clean(a.components, n)
    if a.sigma2 > 0:
        y = add(y, generate_noise(NoiseSpec(sigma2=a.sigma2, seed=a.seed), n))
    write_signal_csv(a.out, y)
    params.update(components=[[c.a_re, c.a_im, c.beta] for c in a.components], seed=a.seed)
    print(f"wrote {n} samples to {a.out}")


def _cmd_scan(a, params):
    y = _read(a.infile)
    kernel, kind = SCAN_KERNELS[a.kernel]
    result = scan(y, GridSpec(kind, y.size, a.k_min, a.k_max), kernel)
    result.to_csv(a.out)
    best = result.argmin() if kernel == "dechirp_rss" else result.argmax()
    params.update(grid=kind, points=result.grid.size)
    print(f"{result.grid.size} points written to {a.out}; best location {best!r}")


def _cpf_fit_result(y: np.ndarray) -> FitResult:
    est = cpf_estimate(y)
    amp = profile_amplitudes(y, [est.beta_resolved])[0]
    fit = FitResult([ChirpComponent.from_complex(amp, est.beta_resolved)], [], "cpf", y.size, [est.optim])
    fit.rss_trajectory.append(float(np.vdot(residual(y, fit), residual(y, fit)).real))
    if est.alias_ambiguous:
        fit.warnings.append(f"rate resolved to its alias {est.beta_resolved:.6g}")
    return fit


def _cmd_estimate(a, params):
    y = _read(a.infile)
    m, p, init = a.method, a.p, a.init_beta
    if p < 1:
        raise UsageError("--p must be >= 1")
    if m in ("lse", "alse", "cpf") and p != 1:
        raise UsageError(f"method {m} fits exactly one component (--p 1)")
    if init is not None:
        if m not in ("lse", "alse", "lse-joint"):
            raise UsageError("--init-beta applies to lse, alse and lse-joint only")
        if len(init) != p:
            raise UsageError(f"--init-beta needs {p} value(s)")
    if m in ("lse", "alse"):
        fit = (lse_one if m == "lse" else alse_one)(y, init_beta=None if init is None else init[0])
    elif m == "lse-joint":
        fit = lse_joint(y, p, init_betas=init)
    elif m in ("seq-lse", "seq-alse"):
        fit = sequential_fit(y, p, m[4:])
    elif m in ("dechirp", "pcpf"):
        fit = sequential_baseline(y, p, m)
    else:
        fit = _cpf_fit_result(y)
    print("k,a_re,a_im,beta,rss_after_stage")
    for row in fit.to_rows():
        print(f"{row['k']},{row['a_re']!r},{row['a_im']!r},{row['beta']!r},{row['rss_after_stage']!r}")
    for w in fit.warnings:
        print(f"warning: {w}", file=sys.stderr)
    if a.out:
        write_fit_csv(a.out, fit)
    params.update(betas=[float(b) for b in fit.betas], converged=fit.converged)


def _cmd_mc(a, params):
    if a.config is None and a.preset is None:
        raise UsageError("give --config, --preset or both")
    overrides = {}
    if a.replications is not None:
        overrides["replications"] = a.replications
    if a.seed is not None:
        overrides["base_seed"] = a.seed
    try:
        if a.config is None:
            cfg = preset(a.preset, output_path=a.out, **overrides)
        else:
            # file keys override the preset, command-line flags override both
            cfg = replace(load_config(a.config, a.preset), output_path=a.out, **overrides)
    except OSError as exc:
        raise DataError(str(exc)) from None
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    table = run_experiment(cfg)
    params.update(config=cfg.as_dict(), seed=cfg.base_seed)
    print(f"{len(table.rows)} rows written to {os.path.join(a.out, 'mse_table.csv')}")
    for key, msgs in table.failures.items():
        print(f"excluded {len(msgs)} replication(s) of {key[0]} at N={key[1]}, sigma2={key[2]}: "
              f"{msgs[0]}", file=sys.stderr)


def _cmd_avar(a, params):
    ns = [int(v) for v in a.n]
    if any(n < 1 for n in ns) or any(s < 0 for s in a.sigma2):
        raise UsageError("--n must be >= 1 and --sigma2 >= 0")
    rows = asymptotics.variance_rows(a.components, a.sigma2, ns)
    print("component,parameter,n,sigma2,variance")
    for r in rows:
        print(f"{r['component']},{r['parameter']},{r['n']},{r['sigma2']!r},{r['variance']!r}")
    if a.out:
        asymptotics.write_variance_csv(a.out, rows)


def _cmd_fit_real(a, params):
    y = _read(a.infile)
    if a.max_order < 1 or a.max_order >= y.size:
        raise UsageError("--max-order must lie in 1..N-1")
    if not a.tau > 0 or not 1 <= a.lb_lags < y.size:
        raise UsageError("--tau must be > 0 and --lb-lags in 1..N-1")
    report, fit, res = fit_real(y, a.max_order, a.tau, a.lb_lags, a.flavor)
    os.makedirs(a.out, exist_ok=True)
    write_fit_csv(os.path.join(a.out, "fit.csv"), fit)
    write_signal_csv(os.path.join(a.out, "fitted.csv"), fit.fitted(y.size))
    write_signal_csv(os.path.join(a.out, "residuals.csv"), res)
    with open(os.path.join(a.out, "rss.csv"), "w") as fh:
        fh.write("order,rss\n")
        for k, v in enumerate(report.rss_trajectory, start=1):
            fh.write(f"{k},{v!r}\n")
    text = report.render()
    with open(os.path.join(a.out, "report.txt"), "w") as fh:
        fh.write(text)
    sys.stdout.write(text)
    params.update(selected_order=report.selected_order, flat_found=report.flat_found)


COMMANDS = {"synth": _cmd_synth, "scan": _cmd_scan, "estimate": _cmd_estimate, "mc": _cmd_mc,
            "avar": _cmd_avar, "fit-real": _cmd_fit_real}


def _manifest_path(a) -> str:
    if a.manifest:
        return a.manifest
    out = getattr(a, "out", None)
    if out is None:
        return "chirpfit-manifest.json"
    if a.command in ("mc", "fit-real"):
        return os.path.join(out, "manifest.json")
    return out + ".manifest.json"


def _effective(a) -> dict:
    out = {}
    for k, v in vars(a).items():
        if k in ("manifest", "verbose"):
            continue
        if hasattr(v, "components"):
            v = [[c.a_re, c.a_im, c.beta] for c in v]
        out[k] = v
    return out


def main(argv: Optional[list[str]] = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        a = build_parser().parse_args(argv)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    params: dict = {}
    code, message = EXIT_OK, None
    try:
        COMMANDS[a.command](a, params)
    except UsageError as exc:
        code, message = EXIT_USAGE, f"usage error: {exc}"
    except NUMERIC_ERRORS as exc:
        code, message = EXIT_NUMERIC, f"numerical failure: {type(exc).__name__}: {exc}"
    except (DataError, OSError) as exc:
        code, message = EXIT_DATA, f"data error: {exc}"
    except ValueError as exc:
        code, message = EXIT_DATA, f"data error: {exc}"
    if message:
        print(message, file=sys.stderr)
    manifest = {"command": a.command, "argv": argv, "effective": _effective(a),
                "seed": getattr(a, "seed", None), "results": params, "exit_code": code,
                "version": __version__}
    if "seed" in params:
        manifest["seed"] = params["seed"]
    try:
        path = _manifest_path(a)
        parent = os.path.dirname(path)
        if parent:
            os.makedirs(parent, exist_ok=True)
        with open(path, "w") as fh:
            json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
    except OSError as exc:
        print(f"could not write manifest: {exc}", file=sys.stderr)
        if code == EXIT_OK:
            code = EXIT_DATA
    return code


if __name__ == "__main__":
    sys.exit(main())
