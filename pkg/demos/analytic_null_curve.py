"""Null curve of a closed-form degenerate metric.

The field [[x^2, x], [x, 1]] has kernel (1, -x) everywhere, so its null
curve through (1, 1) solves dy/dx = -x: y = 1.5 - x^2 / 2.
"""

import numpy as np

from simec.metric import analytic_metric
from simec.tracer import IGNORE, TraceConfig, simec_trace

cfg = TraceConfig(1e-4, 10_000, IGNORE)
poly = simec_trace(analytic_metric("example2"), [1.0, 1.0], cfg)

x, y = poly.points.T
print("vertices:", len(poly))
print("x range: [%.4f, %.4f]" % (x.min(), x.max()))
print("max |y - (1.5 - x^2/2)|: %.2e" % np.max(np.abs(y - (1.5 - x ** 2 / 2))))
print("cumulative energy: %.2e" % poly.cumulative_energy)
