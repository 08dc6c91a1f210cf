"""Core value types for breath-cycle data and their validation.

A :class:`Breath` stores its per-step columns as read-only numpy arrays so
that datasets with millions of rows stay cheap; :attr:`Breath.steps` gives
the row view as :class:`BreathStep` records when that is more convenient.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

CMH2O_IN_PASCAL = 98.0665

SYNTHETIC_R_VALUES = (5.0, 20.0, 50.0)
SYNTHETIC_C_VALUES = (10.0, 20.0, 50.0)
SYNTHETIC_STEPS = 80
SYNTHETIC_MAX_DURATION_S = 3.0


def cmh2o_to_pascal(p):
    """Convert a pressure (scalar or array) from cmH2O to pascal."""
    return np.multiply(p, CMH2O_IN_PASCAL)


@dataclass(frozen=True)
class LungSettings:
    """Airway resistance ``r`` (cmH2O/L/s) and compliance ``c`` (mL/cmH2O)."""

    r: float
    c: float

    def __post_init__(self):
        if not (np.isfinite(self.r) and self.r > 0):
            raise ValueError(f"resistance must be positive and finite, got {self.r}")
        if not (np.isfinite(self.c) and self.c > 0):
            raise ValueError(f"compliance must be positive and finite, got {self.c}")

    @property
    def on_synthetic_grid(self) -> bool:
        return self.r in SYNTHETIC_R_VALUES and self.c in SYNTHETIC_C_VALUES


@dataclass(frozen=True)
class BreathStep:
    time_s: float
    u_in: float
    u_out: int
    pressure: Optional[float] = None


def _frozen(values, dtype) -> np.ndarray:
    arr = np.array(values, dtype=dtype, copy=True).reshape(-1)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class Breath:
    """One breath cycle with column arrays of equal length.

    ``pressure`` is ``None`` for test-style data without a target column.
    Construction only checks shapes; the value-level rules live in
    :func:`validate_breath`.
    """

    breath_id: int
    settings: LungSettings
    time_s: np.ndarray
    u_in: np.ndarray
    u_out: np.ndarray
    pressure: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "breath_id", int(self.breath_id))
        object.__setattr__(self, "time_s", _frozen(self.time_s, np.float64))
        object.__setattr__(self, "u_in", _frozen(self.u_in, np.float64))
        object.__setattr__(self, "u_out", _frozen(self.u_out, np.int64))
        if self.pressure is not None:
            object.__setattr__(self, "pressure", _frozen(self.pressure, np.float64))
        n = len(self.time_s)
        lengths = {len(self.u_in), len(self.u_out)}
        if self.pressure is not None:
            lengths.add(len(self.pressure))
        if lengths != {n}:
            raise ValueError(f"breath {self.breath_id}: column lengths differ")

    @classmethod
    def from_steps(cls, breath_id: int, settings: LungSettings,
                   steps: Sequence[BreathStep]) -> "Breath":
        has_p = [s.pressure is not None for s in steps]
        if any(has_p) and not all(has_p):
            raise ValueError("pressure must be present on every step or on none")
        pressure = [s.pressure for s in steps] if steps and all(has_p) else None
        return cls(
            breath_id,
            settings,
            [s.time_s for s in steps],
            [s.u_in for s in steps],
            [s.u_out for s in steps],
            pressure,
        )

    def __len__(self) -> int:
        return len(self.time_s)

    @property
    def steps(self) -> tuple:
        p = self.pressure
        return tuple(
            BreathStep(float(self.time_s[k]), float(self.u_in[k]), int(self.u_out[k]),
                       None if p is None else float(p[k]))
            for k in range(len(self))
        )

    @property
    def inspiratory(self) -> np.ndarray:
        """Boolean mask of the scored steps (``u_out == 0``)."""
        return self.u_out == 0

    def __eq__(self, other):
        if not isinstance(other, Breath):
            return NotImplemented
        if (self.pressure is None) != (other.pressure is None):
            return False
        return (
            self.breath_id == other.breath_id
            and self.settings == other.settings
            and np.array_equal(self.time_s, other.time_s)
            and np.array_equal(self.u_in, other.u_in)
            and np.array_equal(self.u_out, other.u_out)
            and (self.pressure is None or np.array_equal(self.pressure, other.pressure))
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Dataset:
    breaths: tuple
    has_pressure: bool

    def __post_init__(self):
        object.__setattr__(self, "breaths", tuple(self.breaths))
        ids = [b.breath_id for b in self.breaths]
        if len(set(ids)) != len(ids):
            raise ValueError("breath_id values must be unique")
        if self.has_pressure and any(b.pressure is None for b in self.breaths):
            raise ValueError("has_pressure is set but some breath lacks pressure")

    def __len__(self) -> int:
        return len(self.breaths)

    def __iter__(self):
        return iter(self.breaths)

    def __eq__(self, other):
        if not isinstance(other, Dataset):
            return NotImplemented
        return (self.has_pressure == other.has_pressure
                and len(self.breaths) == len(other.breaths)
                and all(a == b for a, b in zip(self.breaths, other.breaths)))

    __hash__ = None

    @property
    def n_rows(self) -> int:
        return sum(len(b) for b in self.breaths)

    def subset(self, breath_ids) -> "Dataset":
        wanted = set(breath_ids)
        return Dataset(tuple(b for b in self.breaths if b.breath_id in wanted),
                       self.has_pressure)

    def get(self, breath_id: int) -> Breath:
        for b in self.breaths:
            if b.breath_id == breath_id:
                return b
        raise KeyError(breath_id)


@dataclass(frozen=True)
class Violation:
    field: str
    index: Optional[int]
    rule: str

    def __str__(self):
        where = "" if self.index is None else f" at step {self.index}"
        return f"{self.field}{where}: {self.rule}"


def validate_breath(b: Breath, synthetic: bool = False) -> list:
    """Return every rule the breath breaks; an empty list means valid.

    The per-step rules always apply. With ``synthetic=True`` the stricter
    generator guarantees are checked too: 80 steps, duration under 3 s,
    a (R, C) pair from the 3x3 grid and a single 0 -> 1 switch of ``u_out``.
    """
    report = []
    t, u_in, u_out = b.time_s, b.u_in, b.u_out

    for k in np.flatnonzero(~np.isfinite(t) | (t < 0)):
        report.append(Violation("time_s", int(k), "time must be finite and >= 0"))
    for k in np.flatnonzero(np.diff(t) <= 0):
        report.append(Violation("time_s", int(k) + 1, "non-monotone time"))
    for k in np.flatnonzero(~((u_in >= 0) & (u_in <= 100))):
        report.append(Violation("u_in", int(k), "u_in out of range [0, 100]"))
    for k in np.flatnonzero((u_out != 0) & (u_out != 1)):
        report.append(Violation("u_out", int(k), "u_out must be 0 or 1"))
    if b.pressure is not None:
        for k in np.flatnonzero(~np.isfinite(b.pressure)):
            report.append(Violation("pressure", int(k), "pressure must be finite"))

    if synthetic:
        if len(b) != SYNTHETIC_STEPS:
            report.append(Violation("steps", None,
                                    f"synthetic breath must have {SYNTHETIC_STEPS} steps"))
        if len(b) and not t[-1] < SYNTHETIC_MAX_DURATION_S:
            report.append(Violation("time_s", len(b) - 1, "synthetic breath must end before 3 s"))
        if not b.settings.on_synthetic_grid:
            report.append(Violation("settings", None, "(R, C) outside the synthetic grid"))
        for k in np.flatnonzero(np.diff(u_out) < 0):
            report.append(Violation("u_out", int(k) + 1, "u_out must not return to 0"))
    return report
