"""Train a small net on exp(x^2 + y^2 - 2) and trace one of its level sets.

The level sets of the target are circles centred at the origin. The traced
curve is compared with the marching-squares contour of the trained net.
"""

import sys
from pathlib import Path

import numpy as np

from simec.experiments import train_experiment
from simec.metric import PullbackMetric
from simec.nn import forward
from simec.oracle import GridSpec, hausdorff, marching_contour
from simec.tracer import HALT, TraceConfig, simec_trace, write_trace_csv

out = Path(sys.argv[1] if len(sys.argv) > 1 else "demo_output/circle")
out.mkdir(parents=True, exist_ok=True)

data, res = train_experiment("circle")
model = res.model
print("final train MSE: %.3e" % res.train_loss[-1])

box = ((-1.0, 1.0), (-1.0, 1.0))
start = np.array([0.25, 0.25])
level = float(forward(model, start)[0])
print("level through start: %.5f" % level)

poly = simec_trace(PullbackMetric(model), start, TraceConfig(1e-3, 3000, HALT, box))
write_trace_csv(poly, out / "trace.csv")
print("max output drift: %.2e" % poly.max_output_drift())

grid = GridSpec(box, 512)
contour = marching_contour(lambda p: forward(model, p)[:, 0], grid, level)
print("Hausdorff to grid contour: %.4f (cell diagonal %.4f)"
      % (hausdorff(poly.points, contour.points()), grid.cell_diagonal))

r = np.hypot(*poly.points.T)
print("radius along the trace: %.4f .. %.4f" % (r.min(), r.max()))
