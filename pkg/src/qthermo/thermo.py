"""Thermal states, free energies and the bath qubits used by the protocol.

Units: k_B = 1, so temperatures are energies and entropies are in nats.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InfiniteGap, PopulationInversion, ValidationError
from .qcore import as_density, as_observable, eig_hermitian, entropy_from_probabilities, vn_entropy

# gaps above this many multiples of T are rejected (exp underflow)
MAX_GAP_OVER_T = 700.0


@dataclass(frozen=True)
class BathSpec:
    """A heat bath at temperature ``temperature`` (energy units)."""

    temperature: float

    def __post_init__(self):
        if not (np.isfinite(self.temperature) and self.temperature > 0):
            raise ValidationError(f"bath temperature must be positive, got {self.temperature!r}")


@dataclass(frozen=True)
class BathQubit:
    gap: float
    populations: tuple[float, float]

    @property
    def entropy(self) -> float:
        return entropy_from_probabilities(self.populations)


@dataclass(frozen=True)
class EnergeticReport:
    """Internal energy, entropy and free energy (plus Z for thermal states)."""

    U: float
    S: float
    F: float
    Z: float | None = None


def thermal_populations(energies, bath: BathSpec) -> tuple[np.ndarray, float]:
    """Gibbs weights for a list of energies, and the partition function Z."""
    e = np.asarray(energies, dtype=float)
    T = bath.temperature
    shift = float(np.min(e))
    w = np.exp(-(e - shift) / T)
    zs = float(np.sum(w))
    return w / zs, float(zs * np.exp(-shift / T))


def thermal_state(h, bath: BathSpec) -> tuple[np.ndarray, EnergeticReport]:
    """Gibbs state exp(-H/T)/Z together with its energetics.

    Degenerate levels get equal weight, so the result does not depend on the
    eigenbasis chosen inside a degenerate subspace.
    """
    h = as_observable(h)
    spec = eig_hermitian(h)
    T = bath.temperature
    e = spec.eigenvalues
    pops, Z = thermal_populations(e, bath)
    v = spec.eigenvectors
    tau = (v * pops) @ v.conj().T
    U = float(np.dot(pops, e))
    S = entropy_from_probabilities(pops)
    return tau, EnergeticReport(U=U, S=S, F=U - T * S, Z=Z)


def free_energy_of_thermal(energies, bath: BathSpec) -> float:
    """-T ln Z, evaluated without overflow."""
    e = np.asarray(energies, dtype=float)
    T = bath.temperature
    shift = float(np.min(e))
    return shift - T * float(np.log(np.sum(np.exp(-(e - shift) / T))))


def energetics(rho, h, bath: BathSpec) -> EnergeticReport:
    """U = tr(rho H), S = S(rho) and F = U - T S."""
    rho = as_density(rho)
    h = as_observable(h)
    if rho.shape != h.shape:
        raise ValidationError(f"state {rho.shape} and Hamiltonian {h.shape} differ in size")
    U = float(np.trace(rho @ h).real)
    S = vn_entropy(rho)
    return EnergeticReport(U=U, S=S, F=U - bath.temperature * S)


def population_energetics(pops, energies, bath: BathSpec) -> EnergeticReport:
    """Energetics of a state diagonal in the energy basis."""
    p = np.asarray(pops, dtype=float)
    U = float(np.dot(p, energies))
    S = entropy_from_probabilities(p)
    return EnergeticReport(U=U, S=S, F=U - bath.temperature * S)


def bath_qubit_for(q_lo: float, q_hi: float, bath: BathSpec) -> BathQubit:
    """Thermal qubit whose population ratio matches ``q_lo : q_hi``.

    The gap is E_B = T ln(q_lo / q_hi); its populations are the pair
    renormalised to sum to one.

    Raises:
        InfiniteGap: ``q_hi`` is zero or the ratio needs a gap beyond 700 T.
        PopulationInversion: ``q_hi > q_lo`` (would need a negative gap).
    """
    if q_lo < 0 or q_hi < 0:
        raise ValidationError(f"populations must be non-negative, got ({q_lo}, {q_hi})")
    if q_hi > q_lo:
        raise PopulationInversion(f"target pair ({q_lo}, {q_hi}) is inverted")
    if q_hi == 0:
        raise InfiniteGap("target excited population is zero")
    T = bath.temperature
    gap = T * float(np.log(q_lo / q_hi))
    if gap > MAX_GAP_OVER_T * T:
        raise InfiniteGap(f"gap {gap:.3e} exceeds {MAX_GAP_OVER_T} T")
    total = q_lo + q_hi
    return BathQubit(gap=gap, populations=(q_lo / total, q_hi / total))
