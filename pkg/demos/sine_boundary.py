"""Decision boundary of a classifier trained on y >= sin(x).

Training takes about a minute. The 0.5 level set of the network is found
by bisection at x = 0 and the band around it is foliated.
"""

import math

import numpy as np

from simec.experiments import bisect_level, train_experiment
from simec.explorer import ExploreConfig, preimage_interval
from simec.oracle import hausdorff
from simec.tracer import HALT, TraceConfig

LEAF_BOX = ((-math.pi, math.pi), (-1.5, 1.5))

_, res = train_experiment("sine")
model = res.model
print("final train MSE: %.2e" % res.train_loss[-1])

y0 = bisect_level(model, 0.0)
print("boundary crosses x=0 at y=%.5f" % y0)

# the net's boundary overshoots the crests slightly, so leaves may pass |y| = 1
cfg = ExploreConfig(1e-5, 0.1, 0.02, 200_000, TraceConfig(1e-3, 8000, HALT, LEAF_BOX),
                    allow_outside=True, transversal_box=LEAF_BOX)
fol = preimage_interval(model, [0.0, y0], cfg)
medial = fol.leaves[0].points
print("leaves:", len(fol.leaves))

xs = np.linspace(-math.pi, math.pi, 4000)
sine = np.column_stack([xs, np.sin(xs)])
print("Hausdorff(boundary leaf, sine): %.3f" % hausdorff(medial, sine))
