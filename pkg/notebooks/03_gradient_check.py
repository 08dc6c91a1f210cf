"""
Checking backpropagation through time
=====================================

Compare the analytic LSTM gradient with central finite differences on a
tiny random network.
"""

import numpy as np

from ventpress import init_params, lstm_backward, lstm_forward

rng = np.random.default_rng(0)
params = init_params(2, 3, rng)
xs = rng.normal(size=(4, 2))
w = rng.normal(size=4)


def loss(p):
    return float(lstm_forward(p, xs)[0] @ w)


# %%
grads = lstm_backward(params, lstm_forward(params, xs)[1], w)
eps = 1e-5
for name, arr in params.as_dict().items():
    worst = 0.0
    for idx in np.ndindex(arr.shape):
        q = params.copy()
        getattr(q, name)[idx] += eps
        up = loss(q)
        getattr(q, name)[idx] -= 2 * eps
        num = (up - loss(q)) / (2 * eps)
        ana = getattr(grads, name)[idx]
        worst = max(worst, abs(num - ana) / max(abs(num), abs(ana), 1e-8))
    print(f"{name:7s} max relative error {worst:.1e}")
