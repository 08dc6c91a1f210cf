"""
PID pressure tracking
=====================

Drive the simulated lung with a PID controller towards a pressure step and
compare a few gain settings.
"""

from ventpress import LungSettings, PidGains, SimConfig, step_target, track_waveform

cfg = SimConfig()
target = step_target(cfg, delta=10.0)
lung = LungSettings(20, 50)

# %%
# Default gains, then a derivative-heavy setting that rings against the
# one-step measurement delay.
for gains in (PidGains(), PidGains(2.0, 4.0, 0.05), PidGains(0, 0, 0)):
    breath, mae = track_waveform(gains, target, lung, cfg)
    print(f"kp={gains.kp:<4g} ki={gains.ki:<4g} kd={gains.kd:<5g} tracking MAE {mae:.3f}")

# %%
# The achieved pressure over the inspiratory part of the breath
breath, _ = track_waveform(PidGains(), target, lung, cfg)
for t, p, u in list(zip(breath.time_s, breath.pressure, breath.u_in))[:29:4]:
    print(f"t={t:5.3f}  p={p:6.2f}  u_in={u:6.2f}")
