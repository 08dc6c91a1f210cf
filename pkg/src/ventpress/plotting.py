"""SVG figures with a sidecar CSV of the plotted points."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402
import pandas as pd  # noqa: E402

from .data_model import Dataset  # noqa: E402
from .lstm import LstmParams, featurize, predict  # noqa: E402

KINDS = ("u_in_trace", "u_out_trace", "pressure_trace", "pressure_hist", "pred_vs_actual")

plt.rcParams["svg.hashsalt"] = "ventpress"


def _pick(dataset: Dataset, breath_id):
    try:
        return dataset.get(breath_id)
    except KeyError:
        ids = [b.breath_id for b in dataset]
        span = f"{min(ids)}..{max(ids)}" if ids else "none"
        raise KeyError(f"breath_id {breath_id} not found (available: {span})") from None


def plot_data(dataset: Dataset, kind: str, breath_id=None, params: LstmParams = None,
              bins: int = 50, inspiratory_only: bool = False) -> pd.DataFrame:
    """The points a plot of ``kind`` would show, as a frame."""
    if kind not in KINDS:
        raise ValueError(f"unknown plot kind {kind!r}; expected one of {KINDS}")
    if kind == "pressure_hist":
        if not dataset.has_pressure:
            raise ValueError("pressure_hist needs a pressure column")
        parts = [b.pressure[b.u_out == 0] if inspiratory_only else b.pressure
                 for b in dataset]
        p = np.concatenate(parts) if parts else np.empty(0)
        if len(p) == 0:
            raise ValueError("no pressure values to histogram")
        counts, edges = np.histogram(p, bins=bins)
        return pd.DataFrame({"bin_left": edges[:-1], "bin_right": edges[1:], "count": counts})

    if breath_id is None:
        raise ValueError(f"{kind} needs a breath id")
    b = _pick(dataset, breath_id)
    if kind == "u_in_trace":
        return pd.DataFrame({"time_s": b.time_s, "u_in": b.u_in})
    if kind == "u_out_trace":
        return pd.DataFrame({"time_s": b.time_s, "u_out": b.u_out})
    if b.pressure is None:
        raise ValueError(f"{kind} needs a pressure column")
    if kind == "pressure_trace":
        return pd.DataFrame({"time_s": b.time_s, "pressure": b.pressure})
    if params is None:
        raise ValueError("pred_vs_actual needs a model checkpoint")
    return pd.DataFrame({"time_s": b.time_s, "actual": b.pressure,
                         "predicted": predict(params, featurize(b)), "u_out": b.u_out})


def render(frame: pd.DataFrame, kind: str, svg_path, title: str = "") -> None:
    fig, ax = plt.subplots(figsize=(7, 4))
    if kind == "pressure_hist":
        ax.bar(frame["bin_left"], frame["count"],
               width=frame["bin_right"] - frame["bin_left"], align="edge")
        ax.set_xlabel("pressure [cmH2O]")
        ax.set_ylabel("rows")
    elif kind == "pred_vs_actual":
        ax.plot(frame["time_s"], frame["actual"], label="actual")
        ax.plot(frame["time_s"], frame["predicted"], label="predicted")
        ax.set_xlabel("time [s]")
        ax.set_ylabel("pressure [cmH2O]")
        ax.legend()
    else:
        column = frame.columns[1]
        if kind == "u_out_trace":
            ax.step(frame["time_s"], frame[column], where="post")
        else:
            ax.plot(frame["time_s"], frame[column])
        ax.set_xlabel("time [s]")
        ax.set_ylabel(column)
    ax.set_title(title)
    fig.tight_layout()
    fig.savefig(svg_path, format="svg", metadata={"Date": None})
    plt.close(fig)
