"""The eigenvalue bound on the CR sphere S^5: kappa from the curvature
condition, lambda_1 from a Galerkin estimate, and their ratio (1 in the
equality case)."""

from contactlab import spectral
from contactlab.geometry import make_sphere

sphere = make_sphere(2)
kr = spectral.kappa(sphere, count=200)
print(f"kappa = {kr.kappa:.15g} (relative spread {kr.spread:.1e} over 200 points)")

for d in (1, 2, 3):
    g = spectral.lambda1(sphere, d)
    print(f"degree {d}: basis {g.basis_size:3d}, lambda_1 <= {g.lambda1:.15g}")

rep = spectral.lichnerowicz_report(sphere, degree=3)
print(f"bound n kappa / (n + 1) = {rep.bound:.15g}, ratio = {rep.ratio:.15g}, {rep.status}")

# rescaling theta and h together changes kappa and lambda_1 but not the ratio
rep3 = spectral.lichnerowicz_report(make_sphere(2, scale=3), degree=1, samples=20)
print(f"scale 3: kappa = {rep3.kappa:.6g}, lambda_1 = {rep3.lambda1_estimate:.6g}, ratio = {rep3.ratio:.15g}")
