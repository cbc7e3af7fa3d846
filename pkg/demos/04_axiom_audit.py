"""Audit the quantization axioms numerically, and catch a broken quantizer.

Each audit sweeps hbar, records a defect norm and fits its decay rate.
Exact identities sit at the floor of roundoff. A quantizer that adds an
O(hbar) error to every operator no longer maps 1 to the identity; the
audit shows a nonzero defect decaying like hbar^1. That still meets the
asymptotic criterion (slope >= 0.8), but the floor flag is gone.

Run:  python3 demos/04_axiom_audit.py
"""
from qspec.audit import (
    PerturbedBackend,
    ToeplitzBackend,
    WeylBackend,
    audit_normalization,
    audit_product,
    audit_square,
)
from qspec.weyl import CircleSymbol


def show(label, res):
    fit = res.fit
    slope = "floor" if fit.all_floor else f"{fit.slope:.3f}"
    print(f"  {label:<40} slope={slope:<7} pass={res.passed}")


hb = tuple(1.0 / k for k in (10, 20, 40, 80, 160))
print("Berezin-Toeplitz on the sphere:")
show("q1  ||T(1) - Id||", audit_normalization(ToeplitzBackend(), hb))
show("q4  ||T(u)T(1-u^2) - T(u-u^3)||", audit_product(ToeplitzBackend(), "u", "1-u^2", hb))
show("q5  ||T(u)^2 - T(u^2)||", audit_square(ToeplitzBackend(), "u", hb))

wb = WeylBackend()
whb = (0.1, 0.05, 0.025, 0.0125)
xi = CircleSymbol.xi_power(1, -wb.xi_max, wb.xi_max)
print("\nWeyl on the cylinder (defects on the trusted window |xi| <= 2):")
show("q1  ||Op(1) - Id||", audit_normalization(wb, whb))
show("q4  ||Op(cos x)Op(xi) - Op(xi cos x)||", audit_product(wb, CircleSymbol.cos_x(), xi, whb))

print("\nA quantizer with an O(hbar) error term:")
res = audit_normalization(PerturbedBackend(seed=1), hb)
show("q1  ||Op(1) - Id||", res)
print("  defects:", ", ".join(f"{n:.2e}" for n in res.fit.norms), " at floor:", res.fit.all_floor)
