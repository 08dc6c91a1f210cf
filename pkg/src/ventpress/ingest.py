"""Reading and writing the competition CSV layout, plus dataset statistics."""

from __future__ import annotations

import io
import json
import os
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
import pandas as pd

from .data_model import Breath, Dataset, LungSettings

HEADER = ("id", "breath_id", "R", "C", "time_step", "u_in", "u_out", "pressure")
REQUIRED = HEADER[:-1]


class ParseError(ValueError):
    pass


def _read_source(source) -> bytes:
    if isinstance(source, (bytes, bytearray)):
        return bytes(source)
    if isinstance(source, (str, os.PathLike)):
        with open(source, "rb") as fh:
            return fh.read()
    data = source.read()
    return data.encode("utf-8") if isinstance(data, str) else data


def parse_csv(source) -> Dataset:
    """Parse CSV text (path, bytes or file object) into a :class:`Dataset`.

    Rows are grouped by runs of equal ``breath_id``; a breath id that shows
    up again after another breath is a fatal error rather than being merged.
    Values are parsed with round-trip precision so that re-writing the file
    reproduces every float exactly.
    """
    raw = _read_source(source)
    try:
        header = raw.split(b"\n", 1)[0].decode("utf-8").strip().lstrip("﻿")
    except UnicodeDecodeError as exc:
        raise ParseError(f"header is not valid UTF-8: {exc}") from None
    columns = [c.strip() for c in header.split(",")] if header else []
    for name in REQUIRED:
        if name not in columns:
            raise ParseError(f"missing required column {name!r}")
    has_pressure = "pressure" in columns
    wanted = list(REQUIRED) + (["pressure"] if has_pressure else [])

    frame = pd.read_csv(io.BytesIO(raw), usecols=wanted, dtype=str,
                        keep_default_na=False, skipinitialspace=True)
    if len(frame) == 0:
        return Dataset((), has_pressure)

    values = {}
    for name in wanted:
        col = frame[name].to_numpy(dtype=object)
        try:
            # float() per cell: correctly rounded, so write_csv round-trips
            num = col.astype(np.float64)
        except ValueError:
            num = pd.to_numeric(frame[name], errors="coerce").to_numpy(dtype=np.float64)
        bad = np.flatnonzero(~np.isfinite(num))
        if len(bad):
            k = int(bad[0])
            # +2: one header line, 1-based line numbers
            raise ParseError(f"line {k + 2}: non-numeric value {col[k]!r} "
                             f"in column {name!r}")
        values[name] = num

    for name in ("breath_id", "u_out"):
        col = values[name]
        frac = np.flatnonzero(col != np.round(col))
        if len(frac):
            raise ParseError(f"line {frac[0] + 2}: {name} must be an integer")
    bid = values["breath_id"].astype(np.int64)
    starts = np.concatenate([[0], np.flatnonzero(np.diff(bid) != 0) + 1])
    stops = np.concatenate([starts[1:], [len(bid)]])
    run_ids = bid[starts]
    uniq, counts = np.unique(run_ids, return_counts=True)
    if np.any(counts > 1):
        dup = int(uniq[np.flatnonzero(counts > 1)[0]])
        rows = starts[run_ids == dup]
        raise ParseError(f"breath_id {dup} is not contiguous (reappears at line {rows[1] + 2})")

    breaths = []
    r, c = values["R"], values["C"]
    for a, b in zip(starts, stops):
        if np.any(r[a:b] != r[a]) or np.any(c[a:b] != c[a]):
            raise ParseError(f"line {a + 2}: R/C change within breath {bid[a]}")
        try:
            settings = LungSettings(float(r[a]), float(c[a]))
        except ValueError as exc:
            raise ParseError(f"line {a + 2}: {exc}") from None
        breaths.append(Breath(
            int(bid[a]), settings,
            values["time_step"][a:b], values["u_in"][a:b],
            values["u_out"][a:b].astype(np.int64),
            values["pressure"][a:b] if has_pressure else None,
        ))
    return Dataset(tuple(breaths), has_pressure)


def _num(x) -> str:
    x = float(x)
    if x.is_integer() and abs(x) < 2 ** 53:
        return str(int(x))
    return repr(x)


def write_csv(d: Dataset) -> bytes:
    """Render ``d`` in the competition layout with a 1-based running ``id``.

    Floats use the shortest representation that round-trips.
    """
    cols = HEADER if d.has_pressure else HEADER[:-1]
    lines = [",".join(cols)]
    row_id = 1
    for b in d.breaths:
        prefix = f"{b.breath_id},{_num(b.settings.r)},{_num(b.settings.c)}"
        t, u_in, u_out = b.time_s.tolist(), b.u_in.tolist(), b.u_out.tolist()
        p = b.pressure.tolist() if d.has_pressure else None
        for k in range(len(t)):
            row = f"{row_id},{prefix},{_num(t[k])},{_num(u_in[k])},{u_out[k]}"
            if p is not None:
                row += f",{_num(p[k])}"
            lines.append(row)
            row_id += 1
    return ("\n".join(lines) + "\n").encode("utf-8")


def read_row_ids(source) -> np.ndarray:
    """The ``id`` column of a CSV, in file order."""
    frame = pd.read_csv(io.BytesIO(_read_source(source)), usecols=["id"])
    return frame["id"].to_numpy(dtype=np.int64)


@dataclass
class DatasetStats:
    n_breaths: int
    n_rows: int
    r_counts: dict = field(default_factory=dict)
    c_counts: dict = field(default_factory=dict)
    rc_breath_counts: dict = field(default_factory=dict)
    u_out_counts: dict = field(default_factory=dict)
    pip: Optional[float] = None
    median_inspiratory_pressure: Optional[float] = None
    max_breath_duration_s: Optional[float] = None
    max_uout_zero_time_s: Optional[float] = None

    def to_dict(self) -> dict:
        out = asdict(self)
        for key in ("r_counts", "c_counts", "u_out_counts"):
            out[key] = {_num(k): v for k, v in out[key].items()}
        out["rc_breath_counts"] = {f"{_num(r)},{_num(c)}": v
                                   for (r, c), v in self.rc_breath_counts.items()}
        return out

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    def to_text(self) -> str:
        d = self.to_dict()
        lines = []
        for key, value in d.items():
            if isinstance(value, dict):
                lines.append(f"{key}:")
                lines.extend(f"  {k}: {v}" for k, v in value.items())
            else:
                lines.append(f"{key}: {'absent' if value is None else _fmt(value)}")
        return "\n".join(lines) + "\n"


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def _count(values: np.ndarray) -> dict:
    keys, counts = np.unique(values, return_counts=True)
    return {k.item(): int(n) for k, n in zip(keys, counts)}


def compute_stats(d: Dataset) -> DatasetStats:
    """Row/breath counts and pressure extrema of a dataset.

    The median over an even number of inspiratory rows is the mean of the
    two central values. Pressure fields are ``None`` without a target column
    or when no row qualifies.
    """
    stats = DatasetStats(n_breaths=len(d), n_rows=d.n_rows)
    if len(d) == 0:
        stats.u_out_counts = {0: 0, 1: 0}
        return stats

    lengths = np.array([len(b) for b in d.breaths])
    r = np.repeat([b.settings.r for b in d.breaths], lengths)
    c = np.repeat([b.settings.c for b in d.breaths], lengths)
    u_out = np.concatenate([b.u_out for b in d.breaths])
    t = np.concatenate([b.time_s for b in d.breaths])

    stats.r_counts = _count(r)
    stats.c_counts = _count(c)
    stats.u_out_counts = {0: 0, 1: 0, **_count(u_out)}
    rc = {}
    for b in d.breaths:
        key = (b.settings.r, b.settings.c)
        rc[key] = rc.get(key, 0) + 1
    stats.rc_breath_counts = dict(sorted(rc.items()))
    nonempty = [b for b in d.breaths if len(b)]
    if nonempty:
        stats.max_breath_duration_s = float(max(b.time_s[-1] for b in nonempty))
    insp = u_out == 0
    if insp.any():
        stats.max_uout_zero_time_s = float(t[insp].max())

    if d.has_pressure and len(t):
        p = np.concatenate([b.pressure for b in d.breaths])
        stats.pip = float(p.max())
        if insp.any():
            stats.median_inspiratory_pressure = float(np.median(p[insp]))
    return stats
