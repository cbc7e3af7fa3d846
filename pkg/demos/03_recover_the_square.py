"""Read the moment polytope off a joint spectrum.

On CP1 x CP1 the heights (u1, u2) generate a torus action whose moment
image is a square. In moment coordinates pi*(1 + u) the joint spectrum at
level k is an affine image of the lattice (2*pi/k) Z^2 cut to that square.
Fitting the affine map, pulling the cloud back and taking the hull gives
the square's vertices, which then pass the rational/simple/smooth test.

Run:  python3 demos/03_recover_the_square.py
"""
import numpy as np

from qspec.geometry import delzant_check, lattice_fit, recover_polytope
from qspec.joint import joint_spectrum
from qspec.toeplitz import Cp1Symbol, moment_normalize, product_system

u = Cp1Symbol.height()
exact = np.array([[0, 0], [2 * np.pi, 0], [2 * np.pi, 2 * np.pi], [0, 2 * np.pi]])

for k in (10, 40, 100):
    cloud = moment_normalize(joint_spectrum(product_system([u, u], k)))
    g = lattice_fit(cloud, k)
    poly = recover_polytope(cloud, k)
    err = np.abs(poly.vertices - exact).max()
    print(f"k={k:3d}  points={cloud.total:5d}  residual={g.residual:.1e}  "
          f"||g - Id||={g.deviation:.4f}  k*(||g - Id|| + |offset|)={g.constant:.3f}  vertex error={err:.1e}")

rep = delzant_check(poly)
print("\nlattice vertices:", poly.lattice_vertices.tolist())
print("primitive edges: ", poly.edges)
print(f"rational={rep.rational} simple={rep.simple} smooth={rep.smooth}")

# A triangle whose corner has a determinant-2 edge pair is not smooth.
bad = delzant_check([(0, 0), (1, 0), (0, 2)])
print("\ntriangle (0,0),(1,0),(0,2):", "pass" if bad.passed else "fail",
      [v["det"] for v in bad.vertices])
