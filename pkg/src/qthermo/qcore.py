"""Dense linear algebra for finite-dimensional quantum states.

States and observables are plain ``numpy`` arrays. The ``as_density`` and
``as_observable`` helpers validate an array and return a complex copy, so the
rest of the package can assume well-formed input.

Entropies are in nats (natural logarithm) throughout.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import ValidationError

HERMITIAN_TOL = 1e-12
PSD_TOL = 1e-12
TRACE_TOL = 1e-12
# eigenvalues below this contribute nothing to an entropy (0 log 0 := 0)
ENTROPY_CUTOFF = 1e-14


@dataclass(frozen=True)
class SpectralDecomposition:
    """Eigenvalues in ascending order and the matching eigenvector columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


def _square(m) -> np.ndarray:
    a = np.asarray(m, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {a.shape}")
    return a


def _check_hermitian(a: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    scale = max(1.0, float(np.max(np.abs(a))) if a.size else 1.0)
    err = float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0
    if err > tol * scale:
        raise ValidationError(f"matrix is not Hermitian (max deviation {err:.3e})")


def as_observable(m) -> np.ndarray:
    """Validate a Hermitian matrix and return it as a complex array."""
    a = _square(m)
    _check_hermitian(a)
    return 0.5 * (a + a.conj().T)


def as_density(m) -> np.ndarray:
    """Validate a density operator (Hermitian, PSD, unit trace)."""
    a = as_observable(m)
    tr = np.trace(a).real
    if abs(tr - 1.0) > TRACE_TOL * max(1, a.shape[0]):
        raise ValidationError(f"trace is {tr!r}, expected 1")
    lo = np.linalg.eigvalsh(a)[0] if a.size else 0.0
    if lo < -PSD_TOL:
        raise ValidationError(f"matrix has negative eigenvalue {lo:.3e}")
    return a


def ket_to_density(psi) -> np.ndarray:
    psi = np.asarray(psi, dtype=complex).ravel()
    psi = psi / np.linalg.norm(psi)
    return np.outer(psi, psi.conj())


def _fix_phases(v: np.ndarray) -> np.ndarray:
    # first component above noise made real and positive, column by column
    out = v.copy()
    for k in range(out.shape[1]):
        col = out[:, k]
        idx = int(np.argmax(np.abs(col) > 1e-10 * np.max(np.abs(col))))
        ph = col[idx] / abs(col[idx])
        out[:, k] = col / ph
    return out


def eig_hermitian(m) -> SpectralDecomposition:
    """Eigendecomposition of a Hermitian matrix.

    Eigenvalues come back ascending. Each eigenvector is phase-fixed so that its
    first non-negligible component is real and positive, which makes the output
    reproducible for identical input.

    Raises:
        ValidationError: if ``m`` is not square or not Hermitian to 1e-12.
    """
    a = as_observable(m)
    w, v = np.linalg.eigh(a)
    return SpectralDecomposition(eigenvalues=w, eigenvectors=_fix_phases(v))


def tensor(*ops) -> np.ndarray:
    """Kronecker product of any number of matrices or vectors."""
    if not ops:
        raise ValidationError("tensor needs at least one operand")
    out = np.asarray(ops[0])
    for op in ops[1:]:
        out = np.kron(out, np.asarray(op))
    return out


def partial_trace(rho, dims: Sequence[int], keep) -> np.ndarray:
    """Reduced state on the subsystems listed in ``keep``.

    ``dims`` gives the factor dimensions in the order used by ``tensor``; the kept
    factors stay in their original order.
    """
    a = _square(rho)
    dims = [int(d) for d in dims]
    if int(np.prod(dims)) != a.shape[0]:
        raise ValidationError(f"factor dims {dims} do not multiply to {a.shape[0]}")
    keep = sorted({int(k) for k in np.atleast_1d(keep)})
    n = len(dims)
    if any(k < 0 or k >= n for k in keep):
        raise ValidationError(f"keep indices {keep} out of range for {n} factors")
    t = a.reshape(dims + dims)
    traced = [k for k in range(n) if k not in keep]
    # trace out from the highest index so axis numbers stay valid
    for k in sorted(traced, reverse=True):
        m = t.ndim // 2
        t = np.trace(t, axis1=k, axis2=k + m)
    d_keep = int(np.prod([dims[k] for k in keep])) if keep else 1
    return t.reshape(d_keep, d_keep)


def entropy_from_probabilities(p) -> float:
    """Shannon entropy in nats with the 0 log 0 = 0 convention."""
    p = np.asarray(p, dtype=float)
    p = np.where(p < 0.0, 0.0, p)
    nz = p[p > ENTROPY_CUTOFF]
    return float(-np.sum(nz * np.log(nz)))


def vn_entropy(rho) -> float:
    """Von Neumann entropy -tr(rho log rho) in nats."""
    a = _square(rho)
    _check_hermitian(a, tol=1e-10)
    lam = np.linalg.eigvalsh(0.5 * (a + a.conj().T))
    # small negative drift is clamped before the log
    lam = np.where((lam < 0.0) & (lam >= -PSD_TOL), 0.0, lam)
    return max(0.0, entropy_from_probabilities(lam))


def trace_norm(m) -> float:
    """tr sqrt(M^dagger M), i.e. the sum of singular values."""
    return float(np.sum(np.linalg.svd(np.asarray(m, dtype=complex), compute_uv=False)))


def trace_distance(a, b) -> float:
    """Trace norm of ``a - b`` (no factor of one half).

    Orthogonal pure states are at distance 2 in this convention.
    """
    a = _square(a)
    b = _square(b)
    if a.shape != b.shape:
        raise ValidationError(f"shape mismatch {a.shape} vs {b.shape}")
    diff = a - b
    diff = 0.5 * (diff + diff.conj().T)
    return float(np.sum(np.abs(np.linalg.eigvalsh(diff))))


def random_density(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    """Random density matrix from a Ginibre ensemble (full rank by default)."""
    rank = dim if rank is None else rank
    g = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary via QR with phase correction."""
    z = (rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))) / np.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diag(r)
    return q * (d / np.abs(d))


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    return 0.5 * (g + g.conj().T)


PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
