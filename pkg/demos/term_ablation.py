"""Drop each term group from the commutation formulae and watch which
families break.

The default shear has no Webster torsion; the x1+t profile makes every
term live, so each ablation shows up somewhere.
"""

import numpy as np

from contactlab import calculus
from contactlab.connection import geometry_tables
from contactlab.geometry import build_frame, make_perturbed_heisenberg
from contactlab.jets import EXACT

model = make_perturbed_heisenberg(2, profile="x1+t")
P = model.sample_points(np.random.default_rng(1), 3, EXACT)
fr = build_frame(model, P, 3, EXACT)
tb = geometry_tables(fr)
u = calculus.random_polynomial(5, 3, np.random.default_rng(2))
ct = calculus.covariant_table(u, fr, tb)

print("all terms kept:", {k: float(v) for k, v in calculus.commutation_residuals(ct).items() if v})
for group in calculus.TERM_GROUPS:
    res = calculus.commutation_residuals(ct, scale={group: 0})
    broken = {k: f"{float(v):.3g}" for k, v in res.items() if v}
    print(f"without {group}: {broken}")

rep = calculus.bochner(u, fr, tb, ct=ct)
print("Bochner families:", {k: float(v) for k, v in calculus.bochner_families(rep).items()})
print("dropping torsion:", float(calculus.bochner_families(rep, {"torsion-terms"})["frame-form"]))
