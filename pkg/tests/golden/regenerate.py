"""Recompute the frozen golden values. Run only after a deliberate behaviour change:

    python tests/golden/regenerate.py
"""

import io
import json
from pathlib import Path

import numpy as np
import pandas as pd

from ventpress.data_model import LungSettings
from ventpress.lstm import init_params, lstm_forward
from ventpress.ingest import write_csv
from ventpress.lung_sim import SimConfig, generate_dataset
from ventpress.pid import PidGains, step_target, track_waveform

HERE = Path(__file__).parent


def reversal_net(seed=2024):
    rng = np.random.default_rng(seed)
    p = init_params(2, 3, rng)
    for arr in p.as_dict().values():
        arr[...] = rng.normal(0.0, 0.8, arr.shape)
    xs = rng.normal(size=(4, 2))
    return p, xs


def synthetic_stats(n=200, seed=42):
    """Statistics of a generated file computed with pandas alone."""
    df = pd.read_csv(io.BytesIO(write_csv(generate_dataset(n, SimConfig(seed=seed)))),
                     float_precision="round_trip")
    insp = df[df.u_out == 0]
    first = df.groupby("breath_id")[["R", "C"]].first()
    return {
        "n_breaths": int(df.breath_id.nunique()),
        "n_rows": int(len(df)),
        "r_counts": {repr(float(k)): int(v) for k, v in sorted(df.R.value_counts().items())},
        "c_counts": {repr(float(k)): int(v) for k, v in sorted(df.C.value_counts().items())},
        "rc_breath_counts": {f"{float(r)!r},{float(c)!r}": int(v)
                             for (r, c), v in sorted(first.value_counts().items())},
        "u_out_counts": {str(k): int(v) for k, v in sorted(df.u_out.value_counts().items())},
        "pip": float(df.pressure.max()),
        "median_inspiratory_pressure": float(insp.pressure.median()),
        "max_breath_duration_s": float(df.groupby("breath_id").time_step.last().max()),
        "max_uout_zero_time_s": float(insp.time_step.max()),
    }


def main():
    cfg = SimConfig()
    _, mae = track_waveform(PidGains(), step_target(cfg, 10.0), LungSettings(20, 50), cfg)
    gains = PidGains()
    (HERE / "pid_step_tracking.json").write_text(json.dumps({
        "R": 20, "C": 50, "step_above_peep": 10.0,
        "kp": gains.kp, "ki": gains.ki, "kd": gains.kd, "windup_limit": gains.windup_limit,
        "tracking_mae": mae,
    }, indent=2) + "\n")

    p, xs = reversal_net()
    fwd = lstm_forward(p, xs)[0]
    rev = lstm_forward(p, xs[::-1])[0]
    (HERE / "lstm_reversal.json").write_text(json.dumps({
        "seed": 2024, "D": 2, "H": 3, "T": 4,
        "forward": fwd.tolist(), "reversed": rev.tolist(),
    }, indent=2) + "\n")

    (HERE / "synthetic_stats.json").write_text(json.dumps({
        "n": 200, "seed": 42, "stats": synthetic_stats(),
    }, indent=2) + "\n")


if __name__ == "__main__":
    main()
