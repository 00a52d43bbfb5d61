"""CSV interchange: signals (``t,re,im``) and fitted components."""
from __future__ import annotations

import csv

import numpy as np

from .signal import as_signal


class SignalFormatError(ValueError):
    pass


def write_signal_csv(path, y) -> None:
    y = as_signal(y)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "re", "im"])
        for t, v in enumerate(y, start=1):
            w.writerow([t, repr(float(v.real)), repr(float(v.imag))])


def read_signal_csv(path) -> np.ndarray:
    """Read a ``t,re,im`` file; a missing ``im`` column is taken as zero.

    ``t`` must run ``1, 2, ..., N``.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip().lower() for h in next(reader)]
        except StopIteration:
            raise SignalFormatError(f"{path}: empty file") from None
        if header[:2] != ["t", "re"] or (len(header) > 2 and header[2] != "im"):
            raise SignalFormatError(f"{path}: expected header 't,re,im', got {','.join(header)}")
        ts, vals = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row or not "".join(row).strip():
                continue
            try:
                t = int(float(row[0]))
                re = float(row[1])
                im = float(row[2]) if len(row) > 2 and row[2].strip() else 0.0
            except (ValueError, IndexError) as exc:
                raise SignalFormatError(f"{path}:{lineno}: {exc}") from None
            ts.append(t)
            vals.append(complex(re, im))
    if not vals:
        raise SignalFormatError(f"{path}: no samples")
    if ts != list(range(1, len(ts) + 1)):
        raise SignalFormatError(f"{path}: t must run 1..N in order")
    try:
        return as_signal(vals)
    except ValueError as exc:
        raise SignalFormatError(f"{path}: {exc}") from None


def write_fit_csv(path, fit) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["k", "a_re", "a_im", "beta", "rss_after_stage"])
        w.writeheader()
        for row in fit.to_rows():
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in row.items()})


def write_covariance_csv(path, fit) -> None:
    """One row per matrix entry: ``k,row,col,value``."""
    if fit.covariance is None:
        raise ValueError("fit has no covariance attached")
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "row", "col", "value"])
        for k, block in enumerate(fit.covariance, start=1):
            for i in range(3):
                for j in range(3):
                    w.writerow([k, i + 1, j + 1, repr(float(block[i, j]))])
