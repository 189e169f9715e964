"""Carnot engine and heat pump built from two thermalisation runs."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .protocol import ProtocolLedger, plan_path, reverse_path, run_population_path
from .qcore import as_observable, eig_hermitian
from .thermo import BathSpec, population_energetics, thermal_populations


@dataclass
class CarnotReport:
    """Outcome of one cycle. Heats are flows out of the respective bath."""

    W: float
    Q_H: float
    Q_C: float
    efficiency: float
    S_H: float
    S_C: float
    U_H: float
    U_C: float
    hot_stage: ProtocolLedger
    cold_stage: ProtocolLedger
    N: int

    @property
    def carnot_efficiency(self) -> float:
        return 1.0 - self.cold_stage.bath.temperature / self.hot_stage.bath.temperature

    @property
    def ideal_work(self) -> float:
        """(T_H - T_C)(S_H - S_C), the infinite-N work of the engine."""
        th = self.hot_stage.bath.temperature
        tc = self.cold_stage.bath.temperature
        return (th - tc) * (self.S_H - self.S_C)

    @property
    def first_law_residual(self) -> float:
        cycle = abs(self.W - (self.Q_H + self.Q_C))
        return max(cycle, self.hot_stage.first_law_residual, self.cold_stage.first_law_residual)

    def summary(self) -> dict:
        return {
            "N": self.N,
            "W": self.W,
            "Q_H": self.Q_H,
            "Q_C": self.Q_C,
            "efficiency": self.efficiency,
            "carnot_efficiency": self.carnot_efficiency,
            "ideal_work": self.ideal_work,
            "S_H": self.S_H,
            "S_C": self.S_C,
            "U_H": self.U_H,
            "U_C": self.U_C,
            "first_law_residual": self.first_law_residual,
        }


def _setup(h, hot: BathSpec, cold: BathSpec, N: int):
    if hot.temperature < cold.temperature:
        raise ValidationError(
            f"hot bath ({hot.temperature}) must not be colder than cold bath ({cold.temperature})"
        )
    if N < 1:
        raise ValidationError(f"N must be at least 1, got {N}")
    e = eig_hermitian(as_observable(h)).eigenvalues
    tau_c, _ = thermal_populations(e, cold)
    tau_h, _ = thermal_populations(e, hot)
    return e, tau_c, tau_h


def _report(e, tau_c, tau_h, hot, cold, first: ProtocolLedger, second: ProtocolLedger, N, hot_first):
    hot_led, cold_led = (first, second) if hot_first else (second, first)
    W = first.W + second.W
    q_h, q_c = hot_led.Q, cold_led.Q
    eh = population_energetics(tau_h, e, hot)
    ec = population_energetics(tau_c, e, cold)
    eff = W / q_h if q_h != 0 else 0.0
    return CarnotReport(
        W=W, Q_H=q_h, Q_C=q_c, efficiency=eff,
        S_H=eh.S, S_C=ec.S, U_H=eh.U, U_C=ec.U,
        hot_stage=hot_led, cold_stage=cold_led, N=N,
    )


def run_cycle(h, hot: BathSpec, cold: BathSpec, N: int, N_cold: int | None = None) -> CarnotReport:
    """Engine: cold thermal state -> hot thermal state (hot bath) -> back (cold bath)."""
    e, tau_c, tau_h = _setup(h, hot, cold, N)
    n_c = N if N_cold is None else N_cold
    heat = run_population_path(tau_c, plan_path(tau_c, tau_h, e, N, hot), e, hot, kind="carnot-hot")
    cool = run_population_path(
        heat.final_populations, plan_path(heat.final_populations, tau_c, e, n_c, cold), e, cold,
        kind="carnot-cold",
    )
    return _report(e, tau_c, tau_h, hot, cold, heat, cool, N, hot_first=True)


def run_heat_pump(h, hot: BathSpec, cold: BathSpec, N: int, N_cold: int | None = None) -> CarnotReport:
    """The engine cycle run backwards, each stage's path reversed."""
    e, tau_c, tau_h = _setup(h, hot, cold, N)
    n_c = N if N_cold is None else N_cold
    hot_path = plan_path(tau_c, tau_h, e, N, hot)
    cold_path = plan_path(_end(tau_c, hot_path), tau_c, e, n_c, cold)
    # cold bath first: tau_c -> tau_h along the reversed cold path
    warm = run_population_path(tau_c, reverse_path(cold_path, e, cold), e, cold, kind="pump-cold")
    back = run_population_path(
        warm.final_populations, reverse_path(hot_path, e, hot), e, hot, kind="pump-hot"
    )
    return _report(e, tau_c, tau_h, hot, cold, warm, back, N, hot_first=False)


def _end(p0, path) -> np.ndarray:
    p = np.array(p0, dtype=float)
    for st in path:
        p[st.i], p[st.j] = st.target
    return p


def engine_pump_net_work(h, hot: BathSpec, cold: BathSpec, N: int) -> float:
    """Net work of an engine cycle followed by the pump at equal N (never positive)."""
    return math.fsum([run_cycle(h, hot, cold, N).W, run_heat_pump(h, hot, cold, N).W])
