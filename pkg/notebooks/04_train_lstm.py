"""
Training the pressure model
===========================

A short training run on synthetic breaths, scored against the constant
mean-pressure baseline on the held-out breaths.
"""

from ventpress import (
    ModelConfig,
    SimConfig,
    TrainConfig,
    baseline_mean_predictor,
    evaluate,
    generate_dataset,
    train,
)

data = generate_dataset(300, SimConfig(seed=7))

# %%
# A short run at a raised learning rate and small batches.
tc = TrainConfig(epochs=30, batch_size=16, learning_rate=1e-2, seed=7)
params, report = train(data, ModelConfig(hidden_size=32), tc,
                       progress=lambda e, l, v: print(f"epoch {e}: loss {l:.3f} val {v:.3f}"))
print(report.summary())

# %%
val = data.subset(report.val_ids)
model = evaluate(params, val)
base = baseline_mean_predictor(data.subset(report.train_ids), val)
print(f"model {model.aggregate:.3f} cmH2O, baseline {base.result.aggregate:.3f} cmH2O")
for (r, c), mae in model.by_lung().items():
    print(f"  R={r:g} C={c:g}: {mae:.3f}")
