"""Dense complex linear algebra for small spin registers.

Every operator in the package is a plain square ``numpy`` array of dtype
``complex128``.  Spin 1 is the most significant tensor factor, so the basis
label ``"b1 b2 ... bn"`` maps to index ``sum(b_i * 2**(n - i))``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-12
UNITARY_TOL = 1e-10
ORTHONORMAL_TOL = 1e-12


@dataclass(frozen=True)
class EquivalenceReport:
    """Phase-insensitive comparison of two unitaries.

    ``global_phase`` is ``None`` when the overlap vanishes (fidelity 0).
    """

    fidelity: float
    global_phase: complex | None
    max_entry_deviation: float


def as_operator(a) -> np.ndarray:
    m = np.asarray(a, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {m.shape}")
    return m


def dagger(a: np.ndarray) -> np.ndarray:
    return a.conj().T


def is_hermitian(h, tol: float = HERMITIAN_TOL) -> bool:
    h = as_operator(h)
    scale = max(1.0, float(np.max(np.abs(h), initial=0.0)))
    return bool(np.max(np.abs(h - dagger(h)), initial=0.0) <= tol * scale)


def is_unitary(u, tol: float = UNITARY_TOL) -> bool:
    u = as_operator(u)
    return bool(np.max(np.abs(dagger(u) @ u - np.eye(len(u))), initial=0.0) <= tol)


def commutator(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b - b @ a


def kron(a, b) -> np.ndarray:
    """Kronecker product with ``a`` as the more significant factor."""
    return np.kron(as_operator(a), as_operator(b))


def kron_all(*factors) -> np.ndarray:
    out = np.eye(1, dtype=complex)
    for f in factors:
        out = kron(out, f)
    return out


def expm_hermitian(h, theta: float) -> np.ndarray:
    """Return ``exp(-1j * theta * h)`` for Hermitian ``h``.

    Computed through the eigendecomposition of ``h``, which is exact up to
    rounding at the dimensions used here.
    """
    h = as_operator(h)
    if not is_hermitian(h):
        raise ValueError("generator is not Hermitian")
    w, v = np.linalg.eigh((h + dagger(h)) / 2)
    return (v * np.exp(-1j * theta * w)) @ dagger(v)


def compare_up_to_global_phase(u, v) -> EquivalenceReport:
    """Fidelity ``|tr(u^dagger v)| / dim`` plus the best-fit phase ``v ~ phase * u``."""
    u = as_operator(u)
    v = as_operator(v)
    if u.shape != v.shape:
        raise ValueError(f"dimension mismatch: {u.shape} vs {v.shape}")
    if not (is_unitary(u) and is_unitary(v)):
        raise ValueError("compare_up_to_global_phase requires unitary inputs")
    overlap = np.trace(dagger(u) @ v)
    dim = len(u)
    fidelity = min(1.0, abs(overlap) / dim)
    if abs(overlap) / dim > 1e-15:
        phase = complex(overlap / abs(overlap))
        deviation = float(np.max(np.abs(v - phase * u)))
    else:
        phase = None
        deviation = float(np.max(np.abs(v - u)))
    return EquivalenceReport(float(fidelity), phase, deviation)


def basis_matrix(basis) -> np.ndarray:
    """Column matrix of a basis; accepts a ``SubspaceBasis`` or a raw array."""
    vecs = np.asarray(getattr(basis, "vectors", basis), dtype=complex)
    if vecs.ndim != 2:
        raise ValueError("basis must be a 2-D array of column vectors")
    return vecs


def check_orthonormal(vecs: np.ndarray, tol: float = ORTHONORMAL_TOL) -> None:
    gram = dagger(vecs) @ vecs
    if np.max(np.abs(gram - np.eye(gram.shape[0])), initial=0.0) > tol:
        raise ValueError("basis vectors are not orthonormal")


def restrict(op, basis) -> np.ndarray:
    """Compress ``op`` onto the span of ``basis``: ``B^dagger op B``."""
    op = as_operator(op)
    b = basis_matrix(basis)
    if b.shape[0] != op.shape[0] or b.shape[1] > op.shape[0]:
        raise ValueError(f"basis of shape {b.shape} does not fit operator of dim {len(op)}")
    check_orthonormal(b)
    return dagger(b) @ op @ b


def projector(basis) -> np.ndarray:
    b = basis_matrix(basis)
    return b @ dagger(b)
