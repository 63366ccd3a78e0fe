"""CSV ingestion, band files, coverage reports and experiment configs.

Every output file is CSV preceded by a ``#``-prefixed ``key=value`` header
block, so it loads directly into any plotting tool that skips comments.
"""

from __future__ import annotations

import csv
import hashlib
import io as _io
import logging
from importlib import resources
from pathlib import Path

import numpy as np

from .cops import Partition
from .density import Dataset
from .sets import IntervalUnion, PredictionBand

__all__ = [
    "DataError",
    "load_csv",
    "load_auto_mpg",
    "fingerprint",
    "format_band",
    "write_band",
    "read_band",
    "format_coverage",
    "read_config",
]

log = logging.getLogger(__name__)

MISSING = {"", "?", "na", "nan", "null", "none"}


class DataError(ValueError):
    """Input data could not be turned into a dataset."""


def load_csv(path, x_columns, y_column: str) -> Dataset:
    """Read the selected numeric columns of a CSV file with a header row.

    Rows with a missing value in any selected column are dropped; the count
    is logged and kept in ``Dataset.meta["dropped"]``.
    """
    if isinstance(x_columns, str):
        x_columns = [c.strip() for c in x_columns.split(",") if c.strip()]
    try:
        with open(path, newline="") as fh:
            return _parse(fh, list(x_columns), y_column, str(path))
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _parse(fh, x_columns, y_column, source) -> Dataset:
    reader = csv.reader(fh)
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise DataError(f"{source} is empty") from None
    for col in list(x_columns) + [y_column]:
        if col not in header:
            raise DataError(f"column {col!r} not found in {source}; available: {', '.join(header)}")
    cols = [header.index(c) for c in x_columns] + [header.index(y_column)]
    rows, dropped = [], 0
    for lineno, rec in enumerate(reader, start=2):
        if not rec:
            continue
        cells = [rec[i].strip() if i < len(rec) else "" for i in cols]
        if any(c.lower() in MISSING for c in cells):
            dropped += 1
            continue
        try:
            rows.append([float(c) for c in cells])
        except ValueError:
            bad = next(c for c in cells if not _is_number(c))
            raise DataError(f"non-numeric value {bad!r} in {source} row {lineno}") from None
    if not rows:
        raise DataError(f"no complete rows in {source}")
    if dropped:
        log.info("dropped %d rows with missing values from %s", dropped, source)
    arr = np.array(rows)
    return Dataset(
        arr[:, :-1], arr[:, -1], tuple(x_columns), y_column,
        meta={"source": source, "dropped": dropped},
    )


def _is_number(s: str) -> bool:
    try:
        float(s)
        return True
    except ValueError:
        return False


def load_auto_mpg(x_columns=("horsepower",), y_column: str = "mpg") -> Dataset:
    """The bundled 398-row auto-mpg table (missing horsepower marked ``?``)."""
    text = resources.files("predbands").joinpath("data/auto_mpg.csv").read_text()
    return _parse(_io.StringIO(text), list(x_columns), y_column, "auto_mpg.csv")


def fingerprint(data: Dataset) -> str:
    """Short hash of size, sums and first/last rows."""
    key = "|".join(
        [
            str(data.n),
            repr(float(data.x.sum())),
            repr(float(data.y.sum())),
            ",".join(repr(float(v)) for v in (*data.x[0], data.y[0])),
            ",".join(repr(float(v)) for v in (*data.x[-1], data.y[-1])),
        ]
    )
    return hashlib.sha256(key.encode()).hexdigest()[:16]


def _header(meta: dict) -> str:
    return "".join(f"# {k}={v}\n" for k, v in meta.items())


def format_band(band: PredictionBand, meta: dict | None = None) -> str:
    """Band as CSV: one row per (x-grid point, interval); empty sets get ``nan`` bounds."""
    head = {"method": band.method, "alpha": repr(band.alpha)}
    if isinstance(band.info.get("partition"), str):
        head["partition"] = band.info["partition"]
    head.update(meta or {})
    out = _io.StringIO()
    out.write(_header(head))
    xcols = ["x"] if band.d == 1 else [f"x{j}" for j in range(band.d)]
    out.write(",".join(xcols + ["lo", "hi"]) + "\n")
    for x, s in zip(band.x_grid, band.sets):
        xs = ",".join(repr(float(v)) for v in x)
        if len(s) == 0:
            out.write(f"{xs},nan,nan\n")
        for a, b in s:
            out.write(f"{xs},{float(a)!r},{float(b)!r}\n")
    return out.getvalue()


def write_band(path, band: PredictionBand, meta: dict | None = None) -> None:
    Path(path).write_text(format_band(band, meta))


def read_band(path) -> tuple[PredictionBand, dict]:
    """Load a band file; returns the band and its header fields."""
    meta, body = {}, []
    for line in Path(path).read_text().splitlines():
        if line.startswith("#"):
            k, _, v = line[1:].strip().partition("=")
            meta[k] = v
        elif line.strip():
            body.append(line)
    cols = body[0].split(",")
    d = len(cols) - 2
    arr = np.array([[float(v) for v in row.split(",")] for row in body[1:]]).reshape(-1, d + 2)
    grid, sets = [], []
    for row in arr:
        x = tuple(row[:d])
        if not grid or grid[-1] != x:
            grid.append(x)
            sets.append([])
        if np.isfinite(row[d]):
            sets[-1].append((row[d], row[d + 1]))
    grid = np.array(grid)
    cells = locator = None
    part = _partition_from_descriptor(meta.get("partition", "none"))
    if part is not None:
        locator = part.locate
        cells = locator(grid)
    band = PredictionBand(
        grid, [IntervalUnion(tuple(s)) for s in sets], float(meta["alpha"]), meta["method"],
        cells=cells, locator=locator,
    )
    return band, meta


def _partition_from_descriptor(text: str):
    # "scheme:parameter:e0|e1|...;e0|e1|..." as written by Partition.describe
    parts = text.split(":")
    if len(parts) != 3:
        return None
    edges = [np.array([float(v) for v in axis.split("|")]) for axis in parts[2].split(";")]
    return Partition(parts[0], float(parts[1]), edges)


def format_coverage(report, meta: dict | None = None) -> str:
    head = {"n_reps": report.n_reps, "seed": report.seed}
    head.update(meta or {})
    out = _io.StringIO()
    out.write(_header(head))
    out.write("kind,key,estimate,se\n")
    for kind, key, p, se in report.rows():
        out.write(f"{kind},{key},{p!r},{se!r}\n")
    return out.getvalue()


def read_config(path) -> dict:
    """``key=value`` lines; ``#`` starts a comment."""
    conf = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise DataError(f"{path}:{lineno}: expected key=value")
        k, v = line.split("=", 1)
        conf[k.strip().replace("-", "_")] = v.strip()
    return conf
