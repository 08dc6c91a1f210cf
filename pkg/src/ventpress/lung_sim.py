"""Synthetic breath cycles from a single-compartment resistance/compliance lung.

Inspiration integrates a commanded flow into volume and reads pressure as
``peep + R*Q + V/C``; expiration lets the volume decay passively with the
RC time constant. Units: R in cmH2O/L/s, C in mL/cmH2O, flow in L/s,
volume in mL, pressure in cmH2O.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.interpolate import PchipInterpolator

from .data_model import (
    SYNTHETIC_C_VALUES,
    SYNTHETIC_R_VALUES,
    Breath,
    Dataset,
    LungSettings,
)

PROFILES = ("ramp", "triangle", "decay", "random-spline")


@dataclass(frozen=True)
class SimConfig:
    dt_s: float = 0.035
    steps_per_breath: int = 80
    t_switch_s: float = 1.0
    q_max: float = 1.0
    peep: float = 5.0
    noise_sd: float = 0.05
    seed: int = 0
    # fractional per-interval timestamp jitter, e.g. 0.05 for +-5%; 0 = uniform grid
    time_jitter: float = 0.0

    def __post_init__(self):
        if not self.dt_s > 0:
            raise ValueError("dt_s must be positive")
        if self.steps_per_breath < 2:
            raise ValueError("steps_per_breath must be at least 2")
        if not 0 < self.t_switch_s < self.dt_s * self.steps_per_breath:
            raise ValueError("t_switch_s must fall inside the breath")
        if not self.q_max > 0:
            raise ValueError("q_max must be positive")
        if not self.noise_sd >= 0:
            raise ValueError("noise_sd must be non-negative")
        if not 0 <= self.time_jitter < 1:
            raise ValueError("time_jitter must be in [0, 1)")


@dataclass(frozen=True, eq=False)
class ControlSchedule:
    """Valve commands on a time grid (``u_out`` follows the switch time)."""

    time_s: np.ndarray
    u_in: np.ndarray
    u_out: np.ndarray

    def __len__(self):
        return len(self.time_s)


def time_grid(cfg: SimConfig, rng: Optional[np.random.Generator] = None) -> np.ndarray:
    n = cfg.steps_per_breath
    if cfg.time_jitter == 0 or rng is None:
        return np.arange(n) * cfg.dt_s
    dts = cfg.dt_s * (1 + rng.uniform(-cfg.time_jitter, cfg.time_jitter, n - 1))
    return np.concatenate([[0.0], np.cumsum(dts)])


def valve_out(time_s: np.ndarray, cfg: SimConfig) -> np.ndarray:
    return (time_s >= cfg.t_switch_s).astype(np.int64)


def _profile_shape(profile: str, s: np.ndarray, t: np.ndarray, rng) -> np.ndarray:
    """Unit-amplitude inspiratory shape; ``s`` is time scaled to [0, 1].

    Shape parameter ranges keep peak pressure under 100 cmH2O for every lung
    on the synthetic grid at the default flow scale.
    """
    if profile == "ramp":
        return s ** rng.uniform(2.0, 4.0)
    if profile == "triangle":
        peak = rng.uniform(0.1, 0.6)
        end = rng.uniform(0.0, 0.3)
        return np.where(s <= peak, s / peak, 1 - (1 - end) * (s - peak) / (1 - peak))
    if profile == "decay":
        return np.exp(-t / rng.uniform(0.05, 0.8))
    if profile == "random-spline":
        knots = np.linspace(0.0, 1.0, 6)
        vals = rng.uniform(0.2, 1.0, len(knots)) * (1 - 0.6 * knots)
        vals[0] = 0.0
        return np.clip(PchipInterpolator(knots, vals)(s), 0.0, 1.0)
    raise ValueError(f"unknown profile {profile!r}; expected one of {PROFILES}")


def generate_control(profile: str, cfg: SimConfig, rng: np.random.Generator,
                     amplitude: Optional[float] = None) -> ControlSchedule:
    """Random inspiratory valve schedule of the named profile family.

    The amplitude is drawn from [10, 100] unless given. After the switch
    time the inspiratory valve leaks a small command in [0, 3].
    """
    t = time_grid(cfg, rng)
    u_out = valve_out(t, cfg)
    insp = u_out == 0
    t_last = t[insp][-1] if insp.any() and t[insp][-1] > 0 else cfg.t_switch_s
    s = np.clip(t / t_last, 0.0, 1.0)

    amp = rng.uniform(10.0, 100.0) if amplitude is None else float(amplitude)
    shape = _profile_shape(profile, s, t, rng)
    leak_level = rng.uniform(0.0, 3.0)
    leak = np.clip(leak_level + rng.normal(0.0, 0.1, len(t)), 0.0, 3.0)
    u_in = np.where(insp, np.clip(amp * shape, 0.0, 100.0), leak)
    return ControlSchedule(t, u_in, u_out)


def lung_step(volume: float, settings: LungSettings, u_in: float, u_out: int,
              dt: float, cfg: SimConfig) -> tuple:
    """Advance the lung one interval; return ``(new_volume, pressure)``."""
    if u_out == 0:
        flow = cfg.q_max * u_in / 100.0
        volume = volume + flow * dt * 1000.0
        return volume, cfg.peep + settings.r * flow + volume / settings.c
    tau = settings.r * settings.c / 1000.0
    volume = volume * math.exp(-dt / tau)
    return volume, cfg.peep + volume / settings.c


def step_intervals(time_s: np.ndarray, cfg: SimConfig) -> np.ndarray:
    # the first step integrates one nominal interval
    return np.concatenate([[cfg.dt_s], np.diff(time_s)])


def simulate_breath(settings: LungSettings, schedule: ControlSchedule, cfg: SimConfig,
                    rng: Optional[np.random.Generator] = None, breath_id: int = 1) -> Breath:
    if len(schedule) != cfg.steps_per_breath:
        raise ValueError(f"schedule has {len(schedule)} steps, "
                         f"config expects {cfg.steps_per_breath}")
    dts = step_intervals(schedule.time_s, cfg)
    volume = 0.0
    pressure = np.empty(len(schedule))
    for k in range(len(schedule)):
        volume, pressure[k] = lung_step(volume, settings, schedule.u_in[k],
                                        schedule.u_out[k], dts[k], cfg)
    if cfg.noise_sd > 0:
        if rng is None:
            raise ValueError("a random generator is required when noise_sd > 0")
        pressure = pressure + rng.normal(0.0, cfg.noise_sd, len(pressure))
    return Breath(breath_id, settings, schedule.time_s, schedule.u_in,
                  schedule.u_out, pressure)


def breath_rng(seed: int, breath_id: int) -> np.random.Generator:
    """Independent stream per breath so generation order never matters."""
    return np.random.default_rng([seed, breath_id])


def generate_breath(breath_id: int, cfg: SimConfig, seed: Optional[int] = None) -> Breath:
    rng = breath_rng(cfg.seed if seed is None else seed, breath_id)
    settings = LungSettings(float(rng.choice(SYNTHETIC_R_VALUES)),
                            float(rng.choice(SYNTHETIC_C_VALUES)))
    profile = PROFILES[rng.integers(len(PROFILES))]
    schedule = generate_control(profile, cfg, rng)
    return simulate_breath(settings, schedule, cfg, rng, breath_id)


def generate_dataset(n_breaths: int, cfg: SimConfig = SimConfig(),
                     seed: Optional[int] = None, workers: int = 1) -> Dataset:
    """``n_breaths`` synthetic breaths with ids ``1..n_breaths``.

    ``seed`` overrides ``cfg.seed``. Output does not depend on ``workers``.
    """
    if n_breaths < 1:
        raise ValueError("n_breaths must be at least 1")
    ids = range(1, n_breaths + 1)
    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            breaths = list(pool.map(lambda i: generate_breath(i, cfg, seed), ids))
    else:
        breaths = [generate_breath(i, cfg, seed) for i in ids]
    return Dataset(tuple(breaths), has_pressure=True)
