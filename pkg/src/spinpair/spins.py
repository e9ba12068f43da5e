"""Spin-1/2 operators, device configurations and the exchange/Zeeman generators.

Conventions: ``|0> = m = +1/2`` ("up"), natural units with hbar = mu_B = 1,
field in tesla, so energies are in units of ``mu_B * 1 T`` and times in
``hbar / (mu_B * 1 T)``.  Exchange strengths in a :class:`DeviceConfig` are
kept in meV; :func:`spinpair.units.mev_to_natural` converts them.
"""
from __future__ import annotations

import json
import sys
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path

import numpy as np

from .linalg import expm_hermitian, kron_all

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

AXES = ("x", "y", "z")
LAYOUTS = ("longitudinal-1d", "vertical-1d", "horizontal-2d", "vertical-2d", "custom")

_HALF_PAULI = {
    "x": np.array([[0, 1], [1, 0]], dtype=complex) / 2,
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex) / 2,
    "z": np.array([[1, 0], [0, -1]], dtype=complex) / 2,
}


class ConfigError(ValueError):
    """Invalid or unreadable device configuration."""


@dataclass(frozen=True)
class Bond:
    i: int
    j: int
    j_max: float = 1.0  # meV

    @property
    def pair(self) -> tuple[int, int]:
        return (self.i, self.j)


@dataclass(frozen=True)
class DeviceConfig:
    n_spins: int
    g_factors: tuple[float, ...]
    field_b: float
    bonds: tuple[Bond, ...] = ()
    layout: str = "custom"
    _bond_index: dict = field(default=None, init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "g_factors", tuple(float(g) for g in self.g_factors))
        object.__setattr__(
            self, "bonds", tuple(b if isinstance(b, Bond) else Bond(*b) for b in self.bonds)
        )
        if int(self.n_spins) != self.n_spins or self.n_spins < 1:
            raise ConfigError(f"n_spins must be a positive integer, got {self.n_spins!r}")
        if len(self.g_factors) != self.n_spins:
            raise ConfigError(
                f"expected {self.n_spins} g-factors, got {len(self.g_factors)}"
            )
        if not np.isfinite(self.field_b) or not all(np.isfinite(self.g_factors)):
            raise ConfigError("g-factors and field must be finite")
        if self.layout not in LAYOUTS:
            raise ConfigError(f"unknown layout {self.layout!r}; expected one of {LAYOUTS}")
        index = {}
        for b in self.bonds:
            if not (1 <= b.i < b.j <= self.n_spins):
                raise ConfigError(f"bond ({b.i}, {b.j}) must satisfy 1 <= i < j <= {self.n_spins}")
            if b.pair in index:
                raise ConfigError(f"duplicate bond ({b.i}, {b.j})")
            if not np.isfinite(b.j_max) or b.j_max <= 0:
                raise ConfigError(f"bond ({b.i}, {b.j}) needs a positive j_max")
            index[b.pair] = b
        object.__setattr__(self, "_bond_index", index)

    def bond(self, i: int, j: int) -> Bond | None:
        return self._bond_index.get((min(i, j), max(i, j)))

    def has_bond(self, i: int, j: int) -> bool:
        return self.bond(i, j) is not None

    def delta_g(self, pair: tuple[int, int] = (1, 2)) -> float:
        i, j = pair
        return self.g_factors[j - 1] - self.g_factors[i - 1]

    def to_dict(self) -> dict:
        return {
            "n_spins": self.n_spins,
            "g_factors": list(self.g_factors),
            "field_tesla": self.field_b,
            "bonds": [[b.i, b.j, b.j_max] for b in self.bonds],
            "layout": self.layout,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "DeviceConfig":
        try:
            bonds = [Bond(int(i), int(j), float(jm)) for i, j, jm in data.get("bonds", [])]
            return cls(
                n_spins=int(data["n_spins"]),
                g_factors=tuple(float(g) for g in data["g_factors"]),
                field_b=float(data["field_tesla"]),
                bonds=tuple(bonds),
                layout=str(data.get("layout", "custom")),
            )
        except KeyError as exc:
            raise ConfigError(f"device config is missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"malformed device config: {exc}") from None


def load_device(path) -> DeviceConfig:
    """Read a device from a ``.toml`` or ``.json`` file."""
    path = Path(path)
    try:
        raw = path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read device config {path}: {exc}") from None
    try:
        if path.suffix.lower() == ".toml":
            data = tomllib.loads(raw.decode())
        else:
            data = json.loads(raw)
    except (ValueError, UnicodeDecodeError) as exc:
        raise ConfigError(f"{path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a table/object")
    return DeviceConfig.from_dict(data)


def qubit_pairs(n_qubits: int) -> list[tuple[int, int]]:
    """Spin pairs of logical qubits 0..n-1: qubit k is spins (2k+1, 2k+2)."""
    return [(2 * k + 1, 2 * k + 2) for k in range(n_qubits)]


def _grid_shape(n_qubits: int, shape) -> tuple[int, int]:
    if shape is not None:
        rows, cols = shape
        if rows * cols != n_qubits:
            raise ConfigError(f"grid {rows}x{cols} does not hold {n_qubits} qubits")
        return rows, cols
    cols = int(np.ceil(np.sqrt(n_qubits)))
    if n_qubits % cols:
        raise ConfigError(f"cannot lay out {n_qubits} qubits on a square-ish grid; pass shape")
    return n_qubits // cols, cols


def _coupling(a: int, b: int, flip: bool) -> tuple[int, int]:
    """Inter-qubit bond between qubits a < b.

    Only the "end-to-end" bonds (a.second, b.first) and (a.first, b.second)
    keep the two-exchange nAND construction exact; ``flip`` picks the latter.
    """
    (a1, a2), (b1, b2) = qubit_pairs(max(a, b) + 1)[a], qubit_pairs(max(a, b) + 1)[b]
    return (a1, b2) if flip else (a2, b1)


def layout_device(
    layout: str,
    n_qubits: int,
    g_pair: tuple[float, float] = (1.0, 1.5),
    field_b: float = 1.0,
    j_max: float = 1.0,
    shape: tuple[int, int] | None = None,
) -> DeviceConfig:
    """Build a device whose inter-qubit bonds follow one of the standard layouts.

    Every qubit is a (g1, g2) spin pair with an intra-pair bond.  1-D layouts
    couple neighbours along a chain; 2-D layouts couple grid neighbours.  The
    vertical layouts alternate the orientation of successive pairs so that
    the coupled spins always form an end-to-end bond.
    """
    if layout not in LAYOUTS or layout == "custom":
        raise ConfigError(f"unknown layout {layout!r}")
    pairs = qubit_pairs(n_qubits)
    bonds = {p: j_max for p in pairs}
    links: list[tuple[int, int, bool]] = []
    if layout == "longitudinal-1d":
        links = [(k, k + 1, False) for k in range(n_qubits - 1)]
    elif layout == "vertical-1d":
        links = [(k, k + 1, k % 2 == 0) for k in range(n_qubits - 1)]
    else:
        rows, cols = _grid_shape(n_qubits, shape)
        for r in range(rows):
            for c in range(cols):
                k = r * cols + c
                if c + 1 < cols:
                    flip = layout == "vertical-2d" and (r + c) % 2 == 0
                    links.append((k, k + 1, flip))
                if r + 1 < rows:
                    flip = layout == "horizontal-2d" or (r + c) % 2 == 0
                    links.append((k, k + cols, flip))
    for a, b, flip in links:
        i, j = _coupling(a, b, flip)
        bonds[(min(i, j), max(i, j))] = j_max
    return DeviceConfig(
        n_spins=2 * n_qubits,
        g_factors=tuple(g for _ in range(n_qubits) for g in g_pair),
        field_b=field_b,
        bonds=tuple(Bond(i, j, jm) for (i, j), jm in sorted(bonds.items())),
        layout=layout,
    )


def default_device(n_qubits: int = 2) -> DeviceConfig:
    """Demo device: pairs with g = (1, 1.5) at B = 1 T on a longitudinal chain."""
    return layout_device("longitudinal-1d", n_qubits)


# Ge / Si electron g-factors; their difference is the 0.435 used for timing estimates.
SI_GE_G_PAIR = (1.563, 1.998)
SI_GE_FIELD_T = 2.0


def si_ge_device(n_qubits: int = 2) -> DeviceConfig:
    return layout_device("longitudinal-1d", n_qubits, g_pair=SI_GE_G_PAIR, field_b=SI_GE_FIELD_T)


def _check_index(n: int, i: int) -> None:
    if not (1 <= i <= n):
        raise IndexError(f"spin index {i} out of range 1..{n}")


@lru_cache(maxsize=None)
def _spin_operator_cached(n: int, i: int, axis: str) -> np.ndarray:
    factors = [np.eye(2, dtype=complex)] * n
    factors[i - 1] = _HALF_PAULI[axis]
    out = kron_all(*factors)
    out.setflags(write=False)
    return out


def spin_operator(n: int, i: int, axis: str) -> np.ndarray:
    """Half-Pauli ``sigma^axis / 2`` on spin ``i`` (1-based) of an ``n``-spin register."""
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    _check_index(n, i)
    return _spin_operator_cached(n, i, axis)


def total_sz(n: int) -> np.ndarray:
    return sum(spin_operator(n, i, "z") for i in range(1, n + 1))


@lru_cache(maxsize=None)
def _heisenberg_cached(n: int, i: int, j: int) -> np.ndarray:
    out = sum(spin_operator(n, i, a) @ spin_operator(n, j, a) for a in AXES)
    out.setflags(write=False)
    return out


def heisenberg(n: int, i: int, j: int) -> np.ndarray:
    """``S_i . S_j`` (exchange with J = 1)."""
    _check_index(n, i)
    _check_index(n, j)
    if i == j:
        raise ValueError("heisenberg needs two distinct spins")
    return _heisenberg_cached(n, min(i, j), max(i, j))


def zeeman(config: DeviceConfig) -> np.ndarray:
    """Static Zeeman Hamiltonian ``sum_i g_i B S_i^z`` in natural units."""
    n = config.n_spins
    diag = np.zeros(2**n)
    for i, g in enumerate(config.g_factors, start=1):
        diag += g * config.field_b * np.real(np.diag(spin_operator(n, i, "z")))
    return np.diag(diag).astype(complex)


def exchange_gate(n: int, i: int, j: int, theta: float, sign: int = 1) -> np.ndarray:
    """``exp(-i * sign * theta * S_i . S_j)``."""
    return expm_hermitian(heisenberg(n, i, j), sign * theta)


def rotation_gate(n: int, i: int, axis: str, theta: float, sign: int = 1) -> np.ndarray:
    """Rotation of spin ``i`` by ``theta`` about ``axis``: ``exp(-i * sign * theta * S_i^axis)``.

    ``theta`` is the rotation angle itself; the ``g B`` normalisation of the
    Zeeman generator is divided out.
    """
    return expm_hermitian(spin_operator(n, i, axis), sign * theta)
