"""Build the TWT connection on the perturbed Heisenberg model in exact
rational arithmetic and print every structural family.

The Tanno tensor is live here, so the curvature swap symmetry that holds
for integrable structures picks up a torsion correction.
"""

import numpy as np

from contactlab.connection import geometry_tables, structure_residuals
from contactlab.geometry import build_frame, make_perturbed_heisenberg
from contactlab.jets import EXACT

model = make_perturbed_heisenberg(2)
p = model.sample_points(np.random.default_rng(0), 1, EXACT)[0]
print("point:", [str(v) for v in p])

tables = geometry_tables(build_frame(model, p, 3, EXACT))
print("max |Q| component:", float(tables.Q.truncate(0).max_abs()))

for family, residual in sorted(structure_residuals(tables).items()):
    print(f"  {family:<28} {residual}")
