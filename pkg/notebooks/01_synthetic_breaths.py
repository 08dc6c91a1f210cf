"""
Simulating breaths on a one-compartment lung
============================================

Generate a few breaths, look at one of them and print the dataset summary.
"""

import numpy as np

from ventpress import SimConfig, compute_stats, generate_dataset, validate_breath

# %%
# 200 breaths from a fixed seed; every breath has its own RNG stream, so the
# same seed always gives the same file.
data = generate_dataset(200, SimConfig(seed=42))
b = data.breaths[0]
print(f"breath {b.breath_id}: R={b.settings.r:g} C={b.settings.c:g}, {len(b)} steps")

# %%
# Inspiration ends at 1 s, when the outlet valve opens.
insp = b.inspiratory
print("last inspiratory time:", b.time_s[insp][-1])
print("peak pressure:", b.pressure.max().round(2))

# %%
# The generator only emits breaths that pass the strict checks.
print("violations:", sum(len(validate_breath(x, synthetic=True)) for x in data))

# %%
stats = compute_stats(data)
print(stats.to_text())
print("rows per lung setting:", np.array(list(stats.r_counts.values())))
