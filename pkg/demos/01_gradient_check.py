"""
Backprop against finite differences
===================================

The networks in iher are plain numpy. Every gradient the trainer uses comes
from ``diffnet.backward``, so the first thing worth seeing is that it agrees
with central differences.
"""

import numpy as np

from iher import diffnet

rng = np.random.default_rng(0)

# a small tanh net; smooth activations keep finite differences honest
net = diffnet.init_mlp([3, 16, 16, 2], rng, "tanh", "identity")
x = rng.normal(size=(5, 3))
upstream = rng.normal(size=(5, 2))

report = diffnet.gradient_check(net, x, upstream)
print("max relative error, tanh net:", report.max_rel_error)

# relu nets work too as long as no pre-activation sits on the kink
net = diffnet.init_mlp([4, 32, 32, 1], rng, "relu", "identity")
x = rng.normal(size=(8, 4))
print("max relative error, relu net:", diffnet.gradient_check(net, x).max_rel_error)

# Adam on a one-parameter quadratic (p - 3)^2
quad = diffnet.Mlp([1, 1])
state = diffnet.AdamState.for_net(quad, learning_rate=0.1)
for step in range(300):
    p = quad.weights[0][0, 0]
    diffnet.adam_update(quad, [np.array([[2 * (p - 3.0)]]), np.zeros(1)], state)
print("Adam minimiser of (p - 3)^2:", quad.weights[0][0, 0])
