"""A one-qubit Carnot engine.

The qubit starts thermal at the cold temperature. It is brought to the hot
thermal state with the hot bath (absorbing heat Q_H) and back with the cold bath
(dumping heat). As the number of steps per stage grows, the efficiency W / Q_H
approaches 1 - T_C / T_H from below. Running the cycle backwards gives a heat
pump; engine followed by pump never produces net work.
"""
import numpy as np

from qthermo import BathSpec
from qthermo.carnot import engine_pump_net_work, run_cycle, run_heat_pump

h = np.diag([0.0, 1.0])
hot, cold = BathSpec(2.0), BathSpec(1.0)

print(f"{'N':>6} {'W':>11} {'Q_H':>11} {'Q_C':>11} {'efficiency':>11} {'W/W_ideal':>10}")
for N in (10, 100, 1000, 10000):
    rep = run_cycle(h, hot, cold, N)
    print(f"{N:>6} {rep.W:11.7f} {rep.Q_H:11.7f} {rep.Q_C:11.7f} {rep.efficiency:11.7f} {rep.W / rep.ideal_work:10.6f}")
print(f"Carnot bound: {rep.carnot_efficiency}")

print("\nheat pump, same paths reversed")
for N in (100, 10000):
    eng, pump = run_cycle(h, hot, cold, N), run_heat_pump(h, hot, cold, N)
    print(f"N={N:>5}: pump W = {pump.W:.7f} (engine {eng.W:.7f}), "
          f"engine+pump net W = {engine_pump_net_work(h, hot, cold, N):.2e}")
