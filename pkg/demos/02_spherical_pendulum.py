"""Joint spectrum of the quantum spherical pendulum against its classical image.

The pair (J, H) commutes, so it has a joint spectrum: one point per
eigenvector, with J = hbar*m and H the energy in that sector. As hbar
shrinks, the points crowd into the region above the classical boundary
H >= min over the polar angle of j^2/(2 sin^2) + cos.

Run:  python3 demos/02_spherical_pendulum.py [output-dir]
"""
import os
import sys
import tempfile

from qspec.files import polyline_csv, points_csv, render_svg
from qspec.geometry import hausdorff_to_region, one_sided_to_region
from qspec.joint import membership_indicator
from qspec.pendulum import (
    PendulumConfig,
    classical_boundary,
    classical_region,
    joint_spectrum_pendulum,
    pendulum_system,
)

out = sys.argv[1] if len(sys.argv) > 1 else tempfile.mkdtemp(prefix="qspec-demo-")
os.makedirs(out, exist_ok=True)

print("Classical boundary h(j) at a few momenta:")
for j in (0.0, 0.5, 1.0, 2.0):
    print(f"  h({j}) = {classical_boundary(j):+.6f}")

print("\nhbar    points  d_H to region   sup distance outside")
clouds = []
for hbar in (0.3, 0.1, 0.05):
    cfg = PendulumConfig(hbar, e_cap=3.0)
    cloud = joint_spectrum_pendulum(cfg)
    region = classical_region(cfg, 0.01)
    d, mesh = hausdorff_to_region(cloud, region)
    print(f"  {hbar:<5}  {cloud.total:6d}  {d:.4f} (+-{mesh})   {one_sided_to_region(cloud, region):.4f}")
    clouds.append(cloud)

# Far from the classical image, phi_c = sum (T_i - c_i)^2 is bounded below.
sys05 = pendulum_system(PendulumConfig(0.05, e_cap=3.0))
print(f"\nmin eigenvalue of phi_c at c=(0,-2): {membership_indicator(sys05, [0.0, -2.0]):.4f}")

region = classical_region(PendulumConfig(0.05, 3.0), 0.01)
with open(os.path.join(out, "pendulum_points.csv"), "w") as fh:
    fh.write(points_csv(clouds, {"demo": "spherical pendulum"}))
with open(os.path.join(out, "pendulum_boundary.csv"), "w") as fh:
    fh.write(polyline_csv(region.boundary))
with open(os.path.join(out, "pendulum.svg"), "w") as fh:
    fh.write(render_svg([clouds[-1]], region.boundary, title="spherical pendulum, hbar=0.05"))
print(f"\nwrote CSV and SVG files to {out}")
