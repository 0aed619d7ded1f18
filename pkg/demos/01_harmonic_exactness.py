"""For a quadratic Hamiltonian the second-order propagator is exact.

Runs one family of the harmonic oscillator over T in [0, 10] and compares
with the closed form ``<z''|z' e^{-iT}> e^{-iT/2}``.
"""
import numpy as np

from cohprop.core import CoherentLabel, label_to_z, overlap_normalized
from cohprop.propagator import k2_contribution
from cohprop.shooting import BoundaryProblem, continue_family, refine_root
from cohprop.systems import make_system

s = make_system("harmonic", omega=1.0)
lin = CoherentLabel.from_values([0.3], [-1.0], s.b, hbar=s.hbar)
lout = CoherentLabel.from_values([0.5], [0.2], s.b, hbar=s.hbar)
P = BoundaryProblem(s, lin, lout)
Ts = np.round(np.linspace(0, 10, 11), 10)
fam = continue_family(P, refine_root(P, 0.0, P.affine_root()), Ts, "f1")
zi, zo = label_to_z(lin)[0], label_to_z(lout)[0]
print(f"{'T':>5} {'|K2|':>12} {'|K exact|':>12} {'rel err':>10}")
for r in fam.roots:
    ex = overlap_normalized(zo, zi * np.exp(-1j * r.T)) * np.exp(-0.5j * r.T)
    k2 = k2_contribution(r)
    print(f"{r.T:5.1f} {abs(k2):12.6e} {abs(ex):12.6e} {abs(k2 - ex) / abs(ex):10.1e}")
