"""How much entropy ends up in the weight?

In exact mode every branch of the protocol shifts the weight by a slightly
different amount, so the weight ends in a mixture of displaced wavepackets.
Its entropy depends only on how distinguishable those packets are. A packet
much wider than the spread of displacements barely notices the mixture; the
entropy audit (system + bath qubits + weight) stays non-negative throughout.
"""
import numpy as np

from qthermo import BathSpec, GaussianWavepacket, run_extraction
from qthermo.audit import entropy_audit, offset_spread
from qthermo.protocol import offset_histogram

rho = np.diag([0.8, 0.2])
run = run_extraction(rho, np.diag([0.0, 1.0]), BathSpec(1.0), 10, "exact", GaussianWavepacket())
spread = offset_spread(run.weight)
print(f"{len(run.ensemble)} branches, {len(run.weight)} distinct weight offsets, spread {spread:.4f}")
print(f"mean displacement {run.ensemble.mean_offset():.6f} equals the ledger work {run.W:.6f}")

print(f"\n{'sigma/spread':>12} {'dS_sys':>10} {'dS_bath':>10} {'dS_weight':>11} {'slack':>10}")
for f in (0.01, 0.1, 1.0, 10.0, 100.0):
    a = entropy_audit(run, GaussianWavepacket(sigma=f * spread))
    print(f"{f:>12g} {a.dS_sys:10.5f} {a.dS_bath:10.5f} {a.dS_weight:11.3e} {a.slack:10.3e}")

hist = offset_histogram(run.ensemble, spread / 8)
print("\nweight displacement histogram")
for c, m in zip(hist.centers, hist.masses):
    print(f"{c:+8.4f} {'#' * int(round(60 * m))}")
