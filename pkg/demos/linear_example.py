"""Degenerate metric of a linear map R^3 -> R^2.

The pullback of the Euclidean metric through a rank-2 linear layer has a
one-dimensional kernel. Points along that kernel map to the same output.
"""

import numpy as np

from simec.metric import pullback_metric, spectral_decompose, select_direction
from simec.nn import Layer, MlpModel, forward

W = [[1.0, 0.0, 1.0],
     [0.0, 1.0, 1.0]]
model = MlpModel([Layer(W, [0.0, 0.0], "identity")])

p = np.array([0.3, -0.2, 0.5])
g = pullback_metric(model, p)
print("pullback metric:\n", g.matrix)

dec = spectral_decompose(g)
print("eigenvalues:", dec.eigenvalues)

null = select_direction(dec, "null")
print("null direction:", null)

# moving along the kernel leaves the output untouched
for t in (0.0, 0.5, 2.0):
    print(f"t={t:4.1f}  output={forward(model, p + t * null)}")
