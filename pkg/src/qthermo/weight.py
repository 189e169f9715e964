"""The weight: a work-storage device with Hamiltonian mg * x.

Every allowed operation translates the weight conditionally on the system and
bath, so its marginal is always a probabilistic mixture of translates of the
initial wavepacket. All spectral quantities of such a mixture follow from the
Gram matrix of the translated packets; no position grid is needed.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import ValidationError
from .qcore import entropy_from_probabilities

# overlaps below this magnitude are set to exactly zero
OVERLAP_FLOOR = 1e-300
OFFSET_MERGE_TOL = 1e-12


@dataclass(frozen=True)
class WeightConfig:
    mg: float = 1.0

    def __post_init__(self):
        if not self.mg > 0:
            raise ValidationError(f"mg must be positive, got {self.mg!r}")


@dataclass(frozen=True)
class GaussianWavepacket:
    """Pure Gaussian packet; ``sigma`` is the position standard deviation.

    The wavefunction is proportional to exp(-(x - center)^2 / (4 sigma^2) + i p0 x)
    with hbar = 1.
    """

    center: float = 0.0
    sigma: float = 1.0
    p0: float = 0.0

    def __post_init__(self):
        if not (np.isfinite(self.sigma) and self.sigma > 0):
            raise ValidationError(f"wavepacket width must be positive, got {self.sigma!r}")

    def amplitude(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        norm = (2 * np.pi * self.sigma**2) ** -0.25
        return norm * np.exp(-((x - self.center) ** 2) / (4 * self.sigma**2) + 1j * self.p0 * x)


@dataclass(frozen=True)
class OffsetMixture:
    """Mixture sum_k p_k Gamma_{a_k} |base><base| Gamma_{a_k}^dagger."""

    probabilities: np.ndarray
    offsets: np.ndarray
    base: GaussianWavepacket = field(default_factory=GaussianWavepacket)

    def __post_init__(self):
        p = np.asarray(self.probabilities, dtype=float)
        a = np.asarray(self.offsets, dtype=float)
        if p.shape != a.shape or p.ndim != 1:
            raise ValidationError("probabilities and offsets must be 1-d and equal length")
        if p.size == 0:
            raise ValidationError("mixture needs at least one entry")
        if np.any(p < 0) or abs(p.sum() - 1.0) > 1e-12:
            raise ValidationError(f"probabilities must be non-negative and sum to 1 (sum={p.sum()!r})")
        if not np.all(np.isfinite(a)):
            raise ValidationError("offsets must be finite")
        object.__setattr__(self, "probabilities", p)
        object.__setattr__(self, "offsets", a)

    @classmethod
    def single(cls, base: GaussianWavepacket, offset: float = 0.0) -> "OffsetMixture":
        return cls(np.array([1.0]), np.array([float(offset)]), base)

    @classmethod
    def from_entries(
        cls,
        entries: Iterable[tuple[float, float]],
        base: GaussianWavepacket,
        tol: float = OFFSET_MERGE_TOL,
    ) -> "OffsetMixture":
        """Build a mixture from (probability, offset) pairs, merging equal offsets."""
        pairs = sorted((float(a), float(p)) for p, a in entries if p > 0)
        if not pairs:
            raise ValidationError("mixture needs at least one entry with positive weight")
        merged_a: list[float] = []
        merged_p: list[float] = []
        for a, p in pairs:
            if merged_a and abs(a - merged_a[-1]) <= tol:
                merged_p[-1] += p
            else:
                merged_a.append(a)
                merged_p.append(p)
        p = np.array(merged_p)
        p = p / p.sum()
        return cls(p, np.array(merged_a), base)

    def with_base(self, base: GaussianWavepacket) -> "OffsetMixture":
        return OffsetMixture(self.probabilities, self.offsets, base)

    def __len__(self) -> int:
        return int(self.offsets.size)


def gram_overlap(a: float, b: float, w: GaussianWavepacket) -> complex:
    """<base| Gamma_a^dagger Gamma_b |base> for a Gaussian base packet."""
    return complex(gram_matrix(np.array([a]), np.array([b]), w)[0, 0])


def gram_matrix(a: Sequence[float], b: Sequence[float], w: GaussianWavepacket) -> np.ndarray:
    """Matrix of overlaps <Gamma_{a_k} base | Gamma_{b_l} base>."""
    a = np.asarray(a, dtype=float)[:, None]
    b = np.asarray(b, dtype=float)[None, :]
    d = a - b
    mag = np.exp(-(d**2) / (8 * w.sigma**2))
    out = mag * np.exp(1j * w.p0 * d)
    out[mag < OVERLAP_FLOOR] = 0.0
    return out


# grid spacing (in packet widths) and margin for the sampled representation;
# the trapezoid rule on Gaussian overlaps errs by about exp(-8 pi^2) at dx = sigma / 2
GRID_STEP = 0.5
GRID_MARGIN = 10.0


def _gram_form(m: OffsetMixture) -> np.ndarray:
    # the momentum phase is a diagonal unitary conjugation, so the real Gram
    # matrix has the same spectrum
    s = np.sqrt(m.probabilities)
    d = m.offsets[:, None] - m.offsets[None, :]
    g = np.exp(-(d**2) / (8 * m.base.sigma**2))
    g[g < OVERLAP_FLOOR] = 0.0
    return s[:, None] * g * s[None, :]


def _grid_points(m: OffsetMixture) -> np.ndarray:
    sig = m.base.sigma
    lo = float(m.offsets.min()) - GRID_MARGIN * sig
    hi = float(m.offsets.max()) + GRID_MARGIN * sig
    n = int(np.ceil((hi - lo) / (GRID_STEP * sig))) + 1
    return lo + GRID_STEP * sig * np.arange(n)


def _grid_form(m: OffsetMixture, x: np.ndarray) -> np.ndarray:
    # sampled real packets scaled by sqrt(dx p_k); same non-zero spectrum as the Gram form
    sig = m.base.sigma
    dx = x[1] - x[0]
    phi = np.exp(-((x[:, None] - m.offsets[None, :]) ** 2) / (4 * sig**2))
    phi *= (2 * np.pi * sig**2) ** -0.25 * np.sqrt(dx * m.probabilities)[None, :]
    return phi @ phi.T


def mixture_spectrum(m: OffsetMixture, form: str = "auto") -> np.ndarray:
    """Eigenvalues of the mixed weight state (descending, clipped at zero).

    ``form`` picks the Gram matrix of the packets or the state sampled on a
    position grid; "auto" diagonalises whichever matrix is smaller.
    """
    x = _grid_points(m) if form != "gram" else None
    if form == "grid" or (form == "auto" and x.size < len(m)):
        mat = _grid_form(m, x)
    elif form in ("gram", "auto"):
        mat = _gram_form(m)
    else:
        raise ValidationError(f"unknown form {form!r}")
    lam = np.linalg.eigvalsh(mat)[::-1]
    return np.clip(lam, 0.0, None)


def mixture_entropy(m: OffsetMixture) -> float:
    """Von Neumann entropy (nats) of a mixture of translated packets."""
    if len(m) == 1:
        return 0.0
    return entropy_from_probabilities(mixture_spectrum(m))


def mixture_mean_energy(m: OffsetMixture, cfg: WeightConfig = WeightConfig()) -> float:
    return cfg.mg * (m.base.center + float(np.dot(m.probabilities, m.offsets)))


def mixture_position_variance(m: OffsetMixture) -> float:
    """Packet variance plus the variance of the offset distribution."""
    mean = float(np.dot(m.probabilities, m.offsets))
    var_off = float(np.dot(m.probabilities, (m.offsets - mean) ** 2))
    return m.base.sigma**2 + max(var_off, 0.0)


def _sqrt_psd(g: np.ndarray) -> np.ndarray:
    lam, v = np.linalg.eigh(0.5 * (g + g.conj().T))
    lam = np.clip(lam, 0.0, None)
    return (v * np.sqrt(lam)) @ v.conj().T


def mixture_trace_distance(m1: OffsetMixture, m2: OffsetMixture) -> float:
    """Trace norm of the difference of two mixtures sharing a base packet.

    Both states live in the span of the translated packets. With G the Gram matrix
    of all packets involved and C the coefficient matrix of the difference, the
    non-zero eigenvalues of the difference are those of G^1/2 C G^1/2.
    """
    if m1.base != m2.base:
        raise ValidationError("mixtures must share the same base packet")
    offs = np.concatenate([m1.offsets, m2.offsets])
    coeff = np.concatenate([m1.probabilities, -m2.probabilities])
    g = gram_matrix(offs, offs, m1.base)
    r = _sqrt_psd(g)
    lam = np.linalg.eigvalsh(r @ np.diag(coeff) @ r)
    return float(np.sum(np.abs(lam)))


def fannes_bound(m: OffsetMixture, reference: OffsetMixture) -> tuple[float, float, float]:
    """Return (|S(m) - S(reference)|, D, D ln(d^2 / D)).

    D is half the trace norm of the difference and d the number of packets in the
    joint Gram representation, which bounds the dimension of the relevant support.
    """
    ds = abs(mixture_entropy(m) - mixture_entropy(reference))
    D = 0.5 * mixture_trace_distance(m, reference)
    d = len(m) + len(reference)
    bound = 0.0 if D <= 0 else D * float(np.log(d**2 / D))
    return ds, D, bound
