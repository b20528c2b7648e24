#!/usr/bin/env python3
"""The dense-network engine: exact gradients, Adam, Polyak targets.

Verifies a backward pass against central finite differences, then drives a
small regression problem to convergence.
"""

import numpy as np

from landmarkrl import nets

rng = np.random.default_rng(0)

net = nets.init_mlp([3, 16, 8, 2], rng, output_activation="tanh", bound=1.0)
x = rng.standard_normal(3)
upstream = rng.standard_normal(2)

bundle = net.backward(x, upstream)
print(f"backward returns {len(bundle.param_grads)} parameter gradients "
      f"plus d/dx of shape {bundle.input_grad.shape}")

# spot-check one weight entry against finite differences
w = net.weights[0]
h = 1e-6
orig = w[2, 1]
w[2, 1] = orig + h
fp = float(net.forward(x) @ upstream)
w[2, 1] = orig - h
fm = float(net.forward(x) @ upstream)
w[2, 1] = orig
numeric = (fp - fm) / (2 * h)
analytic = bundle.param_grads[0][2, 1]
print(f"dL/dW[2,1]: analytic {analytic:+.8f}, finite differences {numeric:+.8f}")

# Adam on a noisy linear regression
target_w = rng.standard_normal((1, 4))
reg = nets.init_mlp([4, 1], rng)
opt = nets.AdamState.for_params(reg.parameters(), lr=1e-2)
for step in range(2000):
    xs = rng.standard_normal((32, 4))
    ys = xs @ target_w.T
    pred, cache = reg._forward_cached(xs)
    grads = reg.backward(xs, (2.0 / 32) * (pred - ys), cache=cache).param_grads
    nets.adam_step(reg.parameters(), grads, opt)
err = np.abs(reg.weights[0] - target_w).max()
print(f"\nAdam fit of a random linear map: max |w - w*| = {err:.2e} after 2000 steps")

# Polyak-averaged target copy trails the online network
online = nets.init_mlp([2, 4, 1], rng)
target = online.copy()
online.weights[0] += 1.0
for _ in range(100):
    nets.polyak_update(target, online, rho=0.95)
gap = np.abs(target.weights[0] - online.weights[0]).max()
print(f"after 100 Polyak updates at rho=0.95, target-online gap {gap:.2e}")
