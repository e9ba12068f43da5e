"""Fixed-magnetisation subspaces, spin-pair logical qubits and leakage measures."""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from itertools import combinations
from math import comb
from typing import NamedTuple

import numpy as np

from .linalg import basis_matrix, dagger, projector, restrict
from .spins import DeviceConfig, heisenberg, spin_operator, zeeman

LEAK_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class SubspaceBasis:
    """Ordered computational-basis states spanning a subspace of an n-spin register."""

    n_spins: int
    labels: tuple[str, ...]
    vectors: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.labels)

    @property
    def indices(self) -> list[int]:
        return [int(lab, 2) for lab in self.labels]

    @classmethod
    def from_labels(cls, labels) -> "SubspaceBasis":
        labels = tuple(labels)
        if not labels:
            raise ValueError("a basis needs at least one label")
        n = len(labels[0])
        if any(len(lab) != n or set(lab) - {"0", "1"} for lab in labels):
            raise ValueError(f"labels must be {n}-bit strings: {labels}")
        if len(set(labels)) != len(labels):
            raise ValueError("duplicate basis labels")
        vecs = np.zeros((2**n, len(labels)), dtype=complex)
        for col, lab in enumerate(labels):
            vecs[int(lab, 2), col] = 1.0
        vecs.setflags(write=False)
        return cls(n, labels, vecs)


def magnetization(label: str) -> Fraction:
    """Total S^z of a computational label; '0' is spin up."""
    return Fraction(label.count("0") - label.count("1"), 2)


def dfs_basis(c: int, m) -> SubspaceBasis:
    """All ``c``-spin labels with total S^z = m, in lexicographic order."""
    m = Fraction(m).limit_denominator(2)
    if c < 1 or abs(m) > Fraction(c, 2) or (Fraction(c, 2) - m).denominator != 1:
        raise ValueError(f"no DFS_{c}({m}) sector: need |m| <= c/2 and c/2 - m integral")
    ones = int(Fraction(c, 2) - m)
    labels = []
    for pos in combinations(range(c), ones):
        bits = ["0"] * c
        for p in pos:
            bits[p] = "1"
        labels.append("".join(bits))
    return SubspaceBasis.from_labels(sorted(labels))


def logical_qubit_basis(pair: tuple[int, int] = (1, 2)) -> SubspaceBasis:
    """The pair's S^z = 0 states, ``|0>_Q = |01>`` first, on the pair's own two spins.

    Use :func:`register_labels` for the position of the pair inside a register.
    """
    i, j = pair
    if not i < j:
        raise ValueError(f"pair must satisfy i < j, got {pair}")
    return SubspaceBasis.from_labels(["01", "10"])


def register_labels(pair: tuple[int, int], n_spins: int) -> list[str]:
    """Logical labels of ``pair`` placed in an ``n_spins`` register, wildcard '*' elsewhere."""
    out = []
    for bits in ("01", "10"):
        lab = ["*"] * n_spins
        lab[pair[0] - 1], lab[pair[1] - 1] = bits
        out.append("".join(lab))
    return out


def logical_product_basis(qubits, n_spins: int | None = None) -> SubspaceBasis:
    """Tensor-product logical basis ``|0..0>_Q, |0..1>_Q, ...``; first qubit most significant.

    Spins not in any pair are held at '0'.
    """
    qubits = [tuple(p) for p in qubits]
    spins = [s for p in qubits for s in p]
    if len(set(spins)) != len(spins):
        raise ValueError(f"logical qubits overlap: {qubits}")
    if any(not p[0] < p[1] for p in qubits):
        raise ValueError(f"each pair must satisfy i < j: {qubits}")
    n = n_spins or max(spins)
    if max(spins) > n:
        raise ValueError(f"pairs {qubits} do not fit in {n} spins")
    labels = []
    for k in range(2 ** len(qubits)):
        lab = ["0"] * n
        for q, (i, j) in enumerate(qubits):
            bit = (k >> (len(qubits) - 1 - q)) & 1
            lab[i - 1], lab[j - 1] = ("10" if bit else "01")
        labels.append("".join(lab))
    return SubspaceBasis.from_labels(labels)


def pair_product_basis(n_qubits: int) -> SubspaceBasis:
    """Product basis of qubits built from consecutive pairs (1,2), (3,4), ..."""
    return logical_product_basis([(2 * k + 1, 2 * k + 2) for k in range(n_qubits)])


@dataclass(frozen=True, eq=False)
class LogicalOperatorSet:
    sigma_x: np.ndarray
    sigma_y: np.ndarray
    sigma_z: np.ndarray

    def __getitem__(self, axis: str) -> np.ndarray:
        return {"x": self.sigma_x, "y": self.sigma_y, "z": self.sigma_z}[axis]


@lru_cache(maxsize=None)
def logical_operators() -> LogicalOperatorSet:
    """Half-Pauli generators on a single logical qubit (``|0>_Q`` first)."""
    return LogicalOperatorSet(*(spin_operator(1, 1, a) for a in "xyz"))


def logical_sigma(q: int, axis: str, n_qubits: int) -> np.ndarray:
    """Half-Pauli on logical qubit ``q`` (0-based) of an ``n_qubits`` product space."""
    return spin_operator(n_qubits, q + 1, axis)


class AxisDecomposition(NamedTuple):
    axis: str | None
    coefficient: float
    logical: np.ndarray
    identity_shift: float


def _pair_subspace(pair, n: int, spectator: str | None) -> np.ndarray:
    i, j = pair
    if spectator is None:
        spectator = "0" * n
    if len(spectator) != n:
        raise ValueError(f"spectator pattern must have {n} characters")
    vecs = np.zeros((2**n, 2), dtype=complex)
    for col, bits in enumerate(("01", "10")):
        lab = list(spectator)
        lab[i - 1], lab[j - 1] = bits
        vecs[int("".join(lab), 2), col] = 1.0
    return vecs


def logical_operators_from_restriction(
    pair, op, spectator: str | None = None, tol: float = 1e-12
) -> AxisDecomposition:
    """Write the restriction of ``op`` to the pair's logical qubit as ``c * Sigma^A + d * I``.

    ``op`` may act on the pair alone (dimension 4) or on a larger register; in
    the latter case the other spins are frozen in ``spectator`` (default all
    '0').  Raises ``ValueError`` when ``op`` leaks out of the logical subspace
    or needs more than one logical axis.
    """
    op = np.asarray(op, dtype=complex)
    n = int(round(np.log2(op.shape[0])))
    if 2**n != op.shape[0]:
        raise ValueError("operator dimension is not a power of two")
    if n == 2:
        pair_local = (1, 2)
    else:
        pair_local = tuple(pair)
    b = _pair_subspace(pair_local, n, spectator)
    off = op @ b - b @ (dagger(b) @ op @ b)
    if np.linalg.norm(off, 2) > tol:
        raise ValueError("operator leaks out of the logical subspace")
    r = restrict(op, b)
    shift = np.trace(r) / 2
    ops = logical_operators()
    coeffs = {a: 2 * np.trace(ops[a] @ r) for a in "xyz"}
    if abs(shift.imag) > tol or any(abs(c.imag) > tol for c in coeffs.values()):
        raise ValueError("restriction is not Hermitian")
    nonzero = [a for a, c in coeffs.items() if abs(c) > tol]
    if len(nonzero) > 1:
        raise ValueError(f"restriction mixes logical axes {nonzero}")
    if not nonzero:
        return AxisDecomposition(None, 0.0, np.zeros((2, 2), dtype=complex), float(shift.real))
    a = nonzero[0]
    return AxisDecomposition(a, float(coeffs[a].real), ops[a], float(shift.real))


def leakage(u, basis) -> float:
    """Operator 2-norm of ``(I - P) u P``; zero iff ``u`` maps the subspace into itself."""
    u = np.asarray(u, dtype=complex)
    b = basis_matrix(basis)
    if u.shape[0] != b.shape[0]:
        raise ValueError(f"operator dim {u.shape[0]} does not match basis dim {b.shape[0]}")
    ub = u @ b
    return float(np.linalg.norm(ub - projector(b) @ ub, 2))


def leakage_components(bond, state_label: str, qubits=None) -> dict[str, complex]:
    """All components of ``S_i . S_j |state>`` outside the logical product space.

    ``qubits`` defaults to consecutive pairs (1,2), (3,4), ...
    """
    n = len(state_label)
    if qubits is None:
        qubits = [(2 * k + 1, 2 * k + 2) for k in range(n // 2)]
    space = set(logical_product_basis(qubits, n).labels)
    state = np.zeros(2**n, dtype=complex)
    state[int(state_label, 2)] = 1.0
    out = heisenberg(n, *bond) @ state
    comps = {}
    for idx in np.flatnonzero(np.abs(out) > LEAK_TOL):
        lab = format(idx, f"0{n}b")
        if lab not in space:
            comps[lab] = complex(out[idx])
    return comps


def leakage_witness(bond, state_label: str, qubits=None) -> tuple[str | None, complex]:
    """Dominant out-of-space component of ``S_i . S_j |state>``; ``(None, 0)`` if none."""
    comps = leakage_components(bond, state_label, qubits)
    if not comps:
        return None, 0j
    lab = max(comps, key=lambda k: abs(comps[k]))
    return lab, comps[lab]


@dataclass(frozen=True)
class EffectiveField:
    """Logical-qubit field: ``H = h_x Sigma^x + h_z Sigma^z + const``."""

    h_x: float
    h_z: float

    @property
    def magnitude(self) -> float:
        return float(np.hypot(self.h_x, self.h_z))

    @property
    def tilt(self) -> float:
        """Angle of the field away from the logical Z axis (a rotation about Y)."""
        return float(np.arctan2(self.h_x, self.h_z))


def effective_qubit_field(g1: float, g2: float, b: float, j_intra: float) -> EffectiveField:
    """Field felt by a pair qubit under Zeeman splitting plus quenched intra-pair exchange."""
    dev = DeviceConfig(2, (g1, g2), b)
    r = restrict(zeeman(dev) + j_intra * heisenberg(2, 1, 2), _pair_subspace((1, 2), 2, None))
    ops = logical_operators()
    return EffectiveField(
        h_x=float(np.real(2 * np.trace(ops.sigma_x @ r))),
        h_z=float(np.real(2 * np.trace(ops.sigma_z @ r))),
    )


def zeeman_sigma_z_sign() -> int:
    """Sign ``s`` in ``Zeeman | DFS_2(0) = s * dg * B * Sigma^z + const``.

    With ``|0>_Q = |01>`` and ``|0> = spin up`` this is -1.
    """
    dec = logical_operators_from_restriction((1, 2), zeeman(DeviceConfig(2, (0.0, 1.0), 1.0)))
    return int(np.sign(dec.coefficient))


def logical_z_coefficient(config: DeviceConfig, pair) -> float:
    """Coefficient of ``Sigma^z`` for ``pair`` under the device's Zeeman term."""
    return zeeman_sigma_z_sign() * config.delta_g(pair) * config.field_b


def dfs_dimension(c: int, m) -> int:
    m = Fraction(m).limit_denominator(2)
    return comb(c, int(Fraction(c, 2) - m))
