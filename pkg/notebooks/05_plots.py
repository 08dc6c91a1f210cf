"""
Figures
=======

Write the trace and histogram figures as SVG, each with the CSV of the
plotted points next to it.
"""

from pathlib import Path
import tempfile

from ventpress import SimConfig, generate_dataset
from ventpress.plotting import plot_data, render

data = generate_dataset(50, SimConfig(seed=3))
out = Path(tempfile.mkdtemp())

# %%
for kind in ("u_in_trace", "u_out_trace", "pressure_trace"):
    frame = plot_data(data, kind, breath_id=1)
    render(frame, kind, out / f"{kind}.svg", f"{kind}, breath 1")
    frame.to_csv(out / f"{kind}.csv", index=False)

# %%
hist = plot_data(data, "pressure_hist", bins=30)
render(hist, "pressure_hist", out / "pressure_hist.svg", "pressure")
print(hist.head())
print("written to", out)
