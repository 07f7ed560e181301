"""File formats: delimited matrix ingest and run artifact writers.

Input matrices are comma- or tab-separated text, one feature per row,
one experiment per column, with an optional single header row.  Output
artifacts are plain CSV plus a JSON metadata blob.  Matrix values are
written with 17 significant digits so a write/ingest round trip
reproduces the array bit for bit.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import pandas as pd

from .engine import DirectionalResult, JMResult
from .regions import classify_directional
from .simulate import SUMMARY_COLUMNS


class InputDataError(Exception):
    """Problem with user-supplied data (exit code 2 at the CLI)."""


def _sniff(path: Path) -> tuple[str, bool]:
    """Return (delimiter, has_header) from the first non-empty line."""
    with open(path, "r", encoding="utf-8-sig") as fh:
        first = ""
        for line in fh:
            if line.strip():
                first = line
                break
    if not first:
        raise InputDataError(f"{path}: file is empty")
    delim = "\t" if "\t" in first else ","
    fields = [f.strip() for f in first.rstrip("\n").split(delim)]
    try:
        for f in fields:
            float(f)
        header = False
    except ValueError:
        header = True
    return delim, header


def ingest(path: str | Path, mode: str = "pvalue") -> np.ndarray:
    """Read an (m, K) matrix, validating domain per mode.

    ``pvalue`` entries must lie in [0, 1]; ``zvalue`` entries must be
    finite.  Malformed content is reported with its 1-based file line.
    """
    if mode not in ("pvalue", "zvalue"):
        raise ValueError(f"unknown ingest mode {mode!r}")
    p = Path(path)
    if not p.exists():
        raise InputDataError(f"{p}: no such file")
    delim, header = _sniff(p)
    offset = 2 if header else 1  # data row i sits on file line i + offset
    try:
        frame = pd.read_csv(
            p, sep=delim, header=0 if header else None,
            float_precision="round_trip", engine="c",
            na_values=[""], keep_default_na=False,
        )
    except pd.errors.ParserError as exc:
        raise InputDataError(f"{p}: malformed input ({exc})") from exc
    except pd.errors.EmptyDataError as exc:
        raise InputDataError(f"{p}: file is empty") from exc
    if frame.shape[0] == 0 or frame.shape[1] == 0:
        raise InputDataError(f"{p}: no data rows")
    for col_pos, dtype in enumerate(frame.dtypes):
        if dtype == object:
            coerced = pd.to_numeric(frame.iloc[:, col_pos], errors="coerce")
            bad = np.flatnonzero(coerced.isna().to_numpy() & frame.iloc[:, col_pos].notna().to_numpy())
            row = int(bad[0]) if len(bad) else int(np.flatnonzero(coerced.isna())[0])
            raise InputDataError(
                f"{p}: non-numeric value at line {row + offset}, column {col_pos + 1}"
            )
    matrix = frame.to_numpy(dtype=np.float64)
    if not np.all(np.isfinite(matrix)):
        r, c = np.argwhere(~np.isfinite(matrix))[0]
        raise InputDataError(
            f"{p}: missing or non-finite value at line {int(r) + offset}, column {int(c) + 1}"
        )
    if mode == "pvalue" and ((matrix < 0.0) | (matrix > 1.0)).any():
        r, c = np.argwhere((matrix < 0.0) | (matrix > 1.0))[0]
        raise InputDataError(
            f"{p}: p-value out of [0, 1] at line {int(r) + offset}, column {int(c) + 1}"
        )
    return matrix


def write_matrix(path: str | Path, matrix: np.ndarray) -> None:
    """Write a matrix as CSV with a header and 17 significant digits."""
    arr = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    header = ",".join(f"x{k + 1}" for k in range(arr.shape[1]))
    np.savetxt(path, arr, fmt="%.17g", delimiter=",", header=header, comments="")


_LABEL_STRINGS_CACHE: dict[int, np.ndarray] = {}


def _label_strings(k_dim: int) -> np.ndarray:
    if k_dim not in _LABEL_STRINGS_CACHE:
        names = ["outside", "rejection"] + [f"mirror:{k}" for k in range(1, k_dim + 1)]
        _LABEL_STRINGS_CACHE[k_dim] = np.array(names, dtype=object)
    return _LABEL_STRINGS_CACHE[k_dim]


def _rank_string(rank: float) -> str:
    if np.isinf(rank):
        return "inf"
    return str(int(rank))


def write_results_csv(path: str | Path, result: JMResult, k_dim: int) -> None:
    """Per-feature table: index, rejected flag, reveal rank, region label.

    Ranks use -1 for never-masked features and ``inf`` for features
    still masked at termination.
    """
    m = len(result.labels)
    rejected = np.zeros(m, dtype=np.int64)
    rejected[result.rejected] = 1
    labels = _label_strings(k_dim)[result.labels + 1]
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "rejected", "unmask_rank", "label"])
        ranks = [_rank_string(r) for r in result.unmask_rank]
        for i in range(m):
            writer.writerow([i, rejected[i], ranks[i], labels[i]])


def write_trajectory_csv(path: str | Path, result: JMResult) -> None:
    """Per-step table: step, masked control count, masked rejection
    count, running estimate."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh)
        writer.writerow(["step", "n_control", "n_rejection", "fdp_hat"])
        for step, ctl, rej, fdp in result.trajectory:
            writer.writerow([int(step), int(ctl), int(rej), repr(float(fdp))])


def _directional_labels(zvals: np.ndarray, threshold: float) -> np.ndarray:
    z = np.atleast_2d(np.asarray(zvals, dtype=np.float64))
    m, k_dim = z.shape
    out = np.full(m, "outside", dtype=object)
    if not np.isfinite(threshold):
        return out
    hi = z >= threshold
    lo = z <= -threshold
    n_hi = hi.sum(axis=1)
    n_lo = lo.sum(axis=1)
    out[n_hi == k_dim] = "positive"
    out[n_lo == k_dim] = "negative"
    open_rows = (n_hi != k_dim) & (n_lo != k_dim)
    mir_pos = open_rows & (n_lo == 1) & (n_hi == k_dim - 1)
    mir_neg = open_rows & (n_hi == 1) & (n_lo == k_dim - 1)
    ambiguous = mir_pos & mir_neg
    mir_pos &= ~ambiguous
    mir_neg &= ~ambiguous
    for rows, mat, tag in ((mir_pos, lo, "mirror_pos"), (mir_neg, hi, "mirror_neg")):
        idx = np.flatnonzero(rows)
        if len(idx):
            comps = np.argmax(mat[idx], axis=1) + 1
            out[idx] = [f"{tag}:{c}" for c in comps]
    for i in np.flatnonzero(ambiguous):
        kind, comp = classify_directional(z[i], threshold)
        out[i] = f"{kind}:{comp}"
    return out


def write_directional_results_csv(
    path: str | Path, result: DirectionalResult, zvals: np.ndarray
) -> None:
    """Per-feature table for z-value runs: index, rejected flag, sign,
    region label at the terminal threshold."""
    labels = _directional_labels(zvals, result.threshold)
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh)
        writer.writerow(["feature", "rejected", "sign", "label"])
        for i, (sign, label) in enumerate(zip(result.signs, labels)):
            writer.writerow([i, int(sign != 0), int(sign), label])


def write_directional_trajectory_csv(path: str | Path, result: DirectionalResult) -> None:
    with open(path, "w", newline="\n") as fh:
        writer = csv.writer(fh)
        writer.writerow(["threshold", "n_control", "n_rejection", "dfdp_hat"])
        for thr, ctl, rej, dfdp in result.trajectory:
            writer.writerow([repr(float(thr)), int(ctl), int(rej), repr(float(dfdp))])


def write_summary_csv(path: str | Path, rows: list[dict]) -> None:
    """Replication study summary, one row per method per replication."""
    with open(path, "w", newline="\n") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(SUMMARY_COLUMNS))
        writer.writeheader()
        writer.writerows(rows)


def write_metadata_json(path: str | Path, payload: dict) -> None:
    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")
