"""Discrete PID baseline and a closed loop around the simulated lung."""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .data_model import Breath, LungSettings
from .lung_sim import SimConfig, lung_step, step_intervals, time_grid, valve_out

U_MIN, U_MAX = 0.0, 100.0


@dataclass(frozen=True)
class PidGains:
    """Defaults were picked by grid search on a 10 cmH2O step with R=20, C=50
    under the default :class:`SimConfig`; they are reproducible, not optimal.
    Any derivative gain rings against the one-step measurement delay.
    """

    kp: float = 1.0
    ki: float = 32.0
    kd: float = 0.0
    windup_limit: float = 50.0  # cmH2O*s

    def __post_init__(self):
        for name in ("kp", "ki", "kd", "windup_limit"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be finite and >= 0, got {v}")


@dataclass(frozen=True)
class PidState:
    integral: float = 0.0
    prev_error: float = 0.0
    initialized: bool = False


def pid_step(g: PidGains, s: PidState, setpoint: float, measurement: float,
             dt: float) -> tuple:
    """One controller update; returns ``(command, new_state)``.

    Derivative acts on the error and is zero on the first call. The
    integral is clamped to ``+-windup_limit`` and the command to [0, 100].
    """
    if not (math.isfinite(setpoint) and math.isfinite(measurement) and math.isfinite(dt)):
        raise ValueError("pid_step inputs must be finite")
    if dt <= 0:
        raise ValueError("dt must be positive")
    e = setpoint - measurement
    integral = min(max(s.integral + e * dt, -g.windup_limit), g.windup_limit)
    derivative = (e - s.prev_error) / dt if s.initialized else 0.0
    raw = g.kp * e + g.ki * integral + g.kd * derivative
    u = min(max(raw, U_MIN), U_MAX)
    return u, PidState(integral, e, True)


def track_waveform(g: PidGains, target, settings: LungSettings,
                   cfg: SimConfig = SimConfig(), breath_id: int = 1) -> tuple:
    """Drive the lung toward ``target`` (one pressure per step).

    The controller only runs while the expiratory valve is closed and sees
    the pressure measured at the previous step (``peep`` before the first).
    Observation noise is disabled. Returns ``(breath, tracking_mae)`` where
    the error is averaged over the inspiratory steps.
    """
    target = np.asarray(target, dtype=np.float64)
    if len(target) != cfg.steps_per_breath:
        raise ValueError(f"target has {len(target)} steps, "
                         f"config expects {cfg.steps_per_breath}")
    cfg = replace(cfg, noise_sd=0.0, time_jitter=0.0)
    t = time_grid(cfg)
    u_out = valve_out(t, cfg)
    dts = step_intervals(t, cfg)

    state = PidState()
    volume, measured = 0.0, cfg.peep
    u_in = np.zeros(len(t))
    pressure = np.empty(len(t))
    for k in range(len(t)):
        if u_out[k] == 0:
            u_in[k], state = pid_step(g, state, target[k], measured, dts[k])
        volume, pressure[k] = lung_step(volume, settings, u_in[k], u_out[k], dts[k], cfg)
        measured = pressure[k]

    insp = u_out == 0
    mae = float(np.mean(np.abs(pressure[insp] - target[insp])))
    return Breath(breath_id, settings, t, u_in, u_out, pressure), mae


def step_target(cfg: SimConfig = SimConfig(), delta: float = 10.0) -> np.ndarray:
    """Constant ``peep + delta`` over the whole breath."""
    return np.full(cfg.steps_per_breath, cfg.peep + delta)
