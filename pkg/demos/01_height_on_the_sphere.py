"""Quantize the height function on the sphere and watch its spectrum fill [-1, 1].

Run:  python3 demos/01_height_on_the_sphere.py
"""
import numpy as np

from qspec.geometry import box_region, hausdorff_to_region
from qspec.joint import joint_spectrum
from qspec.operators import matrix_norm
from qspec.toeplitz import Cp1Symbol, toeplitz_matrix

u = Cp1Symbol.height()

print("Spectrum of T_k(u) for a few small k; eigenvalues are (2j - k)/(k + 2):")
for k in (1, 2, 5):
    vals = np.linalg.eigvalsh(toeplitz_matrix(u, k).dense())
    print(f"  k={k}: {(np.round(vals, 6) + 0.0).tolist()}")

# The classical spectrum of u is the segment [-1, 1]. The extreme eigenvalue
# sits at k/(k+2), so the Hausdorff distance is exactly 2/(k+2).
region = box_region([-1.0], [1.0], 1e-3)
print("\nDistance from the joint spectrum to [-1, 1]:")
print("     k   d_H        2/(k+2)")
for k in (10, 20, 40, 80, 160):
    d, mesh = hausdorff_to_region(joint_spectrum([toeplitz_matrix(u, k)]), region)
    print(f"  {k:4d}   {d:.6f}   {2 / (k + 2):.6f}   (mesh {mesh:g})")

# Quantization is multiplicative only to first order in 1/k.
print("\nProduct defect ||T(u)^2 - T(u^2)|| and (k+3) times it, for even k:")
for k in (10, 40, 160):
    t = toeplitz_matrix(u, k).dense()
    n = matrix_norm(t @ t - toeplitz_matrix(u * u, k).dense())
    print(f"  k={k:4d}  defect={n:.3e}  (k+3)*defect={n * (k + 3):.12f}")
