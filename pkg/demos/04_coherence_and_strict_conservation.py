"""Coherence is only worth something if energy conservation is on average.

For |+> = (|0> + |1>)/sqrt(2) with H = diag(0, E), average-energy-conserving
operations extract F(rho) - F(tau). Protocols that commute with the total
Hamiltonian cannot touch coherences between energy levels, so they act as if
the state were first dephased; the difference is T ln 2. Extracting from the
dephased state and from |+> with the same protocol confirms the gap.
"""
import math

import numpy as np

from qthermo import BathSpec
from qthermo.audit import decohere, strict_deficit, strict_deficit_protocol_check

E = 1.0
h = np.diag([0.0, E])
plus = np.full((2, 2), 0.5)
for T in (0.5, 1.0, 2.0):
    print(f"T={T}: F(rho) - F(omega) = {strict_deficit(plus, h, BathSpec(T)):.15f}, T ln 2 = {T * math.log(2):.15f}")

print("\ndephased state:\n", decohere(plus, h).omega.real)
for N in (100, 1000, 10000):
    chk = strict_deficit_protocol_check(plus, h, BathSpec(1.0), N)
    print(f"N={N:>5}: W(rho) - W(omega) = {chk.work_full - chk.work_decohered:.8f} "
          f"(expected {chk.deficit:.8f}, finite-N deficits {chk.protocol_deficits[0]:.1e}, {chk.protocol_deficits[1]:.1e})")
