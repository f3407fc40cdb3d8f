"""Preimage of an output band for the circle net.

Leaves are traced along level sets, a transversal walk moves between them.
The union of leaves should fill the quarter annulus in the unit square.
"""

from simec.experiments import train_experiment
from simec.explorer import ExploreConfig, preimage_interval
from simec.nn import forward
from simec.oracle import GridSpec, coverage_fraction, grid_preimage
from simec.tracer import HALT, TraceConfig

UNIT = ((0.0, 1.0), (0.0, 1.0))

_, res = train_experiment("circle")
model = res.model

cfg = ExploreConfig(1e-3, 0.05, 0.005, 20_000, TraceConfig(1e-3, 2000, HALT, UNIT))
fol = preimage_interval(model, [0.2, 0.2], cfg, jobs=2)
c = fol.center_output
print(f"center output {c:.4f}, {len(fol.leaves)} leaves")
print("covered output interval: [%.4f, %.4f]" % fol.covered_interval)

grid = GridSpec(UNIT, 128)
field = lambda p: forward(model, p)[:, 0]
targets = grid_preimage(field, grid, (c - 0.05, c + 0.05))
cov = coverage_fraction(targets, fol.vertices(), 2 * fol.leaf_spacing())
print(f"grid nodes in band: {len(targets)}, covered: {cov:.3f}")
