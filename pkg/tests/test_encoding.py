from fractions import Fraction
from itertools import product
from math import comb

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from spinpair.encoding import (
    SubspaceBasis,
    dfs_basis,
    dfs_dimension,
    effective_qubit_field,
    leakage,
    leakage_components,
    leakage_witness,
    logical_operators,
    logical_operators_from_restriction,
    logical_product_basis,
    logical_qubit_basis,
    logical_sigma,
    logical_z_coefficient,
    magnetization,
    pair_product_basis,
    register_labels,
    zeeman_sigma_z_sign,
)
from spinpair.linalg import commutator, expm_hermitian, restrict
from spinpair.spins import DeviceConfig, default_device, heisenberg, total_sz, zeeman


def brute_count(c, m):
    return sum(1 for bits in product("01", repeat=c) if magnetization("".join(bits)) == m)


@pytest.mark.parametrize("c", range(1, 9))
def test_dfs_dimension_formula(c):
    for k in range(c + 1):
        m = Fraction(c, 2) - k
        assert dfs_dimension(c, m) == comb(c, k) == brute_count(c, m) == dfs_basis(c, m).dim


def test_dfs_basis_is_sz_eigenspace():
    b = dfs_basis(4, 0)
    assert b.labels == ("0011", "0101", "0110", "1001", "1010", "1100")
    assert np.allclose(total_sz(4) @ b.vectors, 0)
    with pytest.raises(ValueError):
        dfs_basis(3, 0)
    with pytest.raises(ValueError):
        dfs_basis(2, 2)


def test_basis_construction():
    assert logical_qubit_basis((3, 4)).labels == ("01", "10")
    assert register_labels((3, 4), 4) == ["**01", "**10"]
    assert logical_product_basis([(1, 2), (3, 4)]).labels == ("0101", "0110", "1001", "1010")
    assert pair_product_basis(2).labels == logical_product_basis([(1, 2), (3, 4)]).labels
    assert logical_product_basis([(1, 2)], 4).labels == ("0100", "1000")
    with pytest.raises(ValueError):
        logical_product_basis([(1, 2), (2, 3)])
    with pytest.raises(ValueError):
        SubspaceBasis.from_labels(["01", "01"])
    with pytest.raises(ValueError):
        logical_qubit_basis((2, 1))


def test_heisenberg_restricts_to_sigma_x():
    dec = logical_operators_from_restriction((1, 2), heisenberg(2, 1, 2))
    assert dec.axis == "x"
    assert dec.coefficient == pytest.approx(1.0, abs=1e-12)
    assert dec.identity_shift == pytest.approx(-0.25, abs=1e-12)
    # in a larger register with spectators frozen
    dec = logical_operators_from_restriction((3, 4), heisenberg(4, 3, 4), spectator="0110")
    assert dec.axis == "x" and dec.coefficient == pytest.approx(1.0)


@given(st.floats(-3, 3), st.floats(-3, 3), st.floats(0.1, 5))
def test_zeeman_restricts_to_sigma_z(g1, g2, b):
    dec = logical_operators_from_restriction((1, 2), zeeman(DeviceConfig(2, (g1, g2), b)))
    dg_b = (g2 - g1) * b
    if abs(dg_b) > 1e-9:
        assert dec.axis == "z"
        assert dec.coefficient == pytest.approx(zeeman_sigma_z_sign() * dg_b, abs=1e-12)
    assert dec.identity_shift == pytest.approx(0.0, abs=1e-12)


def test_zeeman_sign_and_coefficient():
    assert zeeman_sigma_z_sign() == -1
    assert logical_z_coefficient(default_device(), (3, 4)) == pytest.approx(-0.5)


@given(st.floats(-3, 3), st.floats(0, 5))
def test_collective_field_is_identity_on_dfs(g, b):
    r = restrict(zeeman(DeviceConfig(2, (g, g), b)), logical_qubit_basis())
    assert np.allclose(r, r[0, 0] * np.eye(2), atol=1e-12)


def test_restriction_errors():
    with pytest.raises(ValueError, match="leaks"):
        logical_operators_from_restriction((2, 3), heisenberg(4, 1, 2), spectator="0000")
    h = heisenberg(2, 1, 2) + zeeman(DeviceConfig(2, (1.0, 2.0), 1.0))
    with pytest.raises(ValueError, match="mixes"):
        logical_operators_from_restriction((1, 2), h)


def test_leakage_witness():
    comps = leakage_components((2, 3), "1010")
    assert set(comps) == {"1100"}
    assert comps["1100"] == pytest.approx(0.5, abs=1e-12)
    assert leakage_witness((2, 3), "1010") == ("1100", pytest.approx(0.5))
    # intra-pair exchange never leaves the space
    assert leakage_witness((1, 2), "1010") == (None, 0j)


def test_leakage_measure():
    basis = pair_product_basis(2)
    assert leakage(np.eye(16), basis) == 0
    u = expm_hermitian(heisenberg(4, 2, 3), np.pi / 3)
    assert leakage(u, basis) > 0.1
    assert leakage(expm_hermitian(heisenberg(4, 3, 4), 0.7), basis) < 1e-12
    with pytest.raises(ValueError):
        leakage(np.eye(8), basis)


@given(st.lists(st.floats(-np.pi, np.pi), min_size=20, max_size=20))
def test_exchange_only_restrictions_commute(thetas):
    # with dg = 0 the pair qubit only ever sees Sigma^x
    basis = logical_qubit_basis()
    rs = [restrict(expm_hermitian(heisenberg(2, 1, 2), t), basis) for t in thetas]
    for a, b in zip(rs, rs[1:] + rs[:1]):
        assert np.allclose(commutator(a, b), 0, atol=1e-10)


def test_effective_field_tilt():
    f = effective_qubit_field(1.0, 1.5, 1.0, 0.0)
    assert f.h_x == pytest.approx(0) and f.h_z == pytest.approx(-0.5)
    f = effective_qubit_field(1.0, 1.5, 1.0, 0.5)
    assert f.magnitude == pytest.approx(np.hypot(0.5, 0.5))
    assert abs(f.tilt) == pytest.approx(3 * np.pi / 4)


def test_logical_sigma_embedding():
    ops = logical_operators()
    assert np.allclose(logical_sigma(1, "x", 2), np.kron(np.eye(2), ops.sigma_x))
