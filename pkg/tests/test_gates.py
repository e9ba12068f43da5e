import numpy as np
import pytest

from spinpair.encoding import leakage, logical_product_basis
from spinpair.gates import (
    CNOT,
    NAND,
    NAND_PHYSICAL,
    Convention,
    ImpossibleRotationError,
    build_cnot_from_nand,
    build_nand_encoded,
    build_nand_physical,
    build_u0,
    calibrate,
    local_z_fidelity,
    nand_encoded_sequence,
    u0_time,
    verify_controlled_phase,
)
from spinpair.linalg import compare_up_to_global_phase
from spinpair.spins import Bond, DeviceConfig, default_device

BASIS = logical_product_basis([(1, 2), (3, 4)])


def test_calibration_picks_literal_reading():
    cal = calibrate()
    assert cal.convention == Convention(1, 1, 1.0)
    assert cal.nand_physical_fidelity > 1 - 1e-10
    assert cal.nand_encoded_fidelity > 1 - 1e-10
    assert len(cal.scan) == 8
    assert calibrate() is cal


def test_physical_nand_is_exact():
    rep = compare_up_to_global_phase(build_nand_physical(), NAND)
    assert rep.fidelity > 1 - 1e-10 and rep.max_entry_deviation < 1e-10


def test_encoded_nand_is_exact():
    u = build_nand_encoded()
    rep = verify_controlled_phase(u, BASIS)
    assert rep.is_block_diagonal and rep.leakage < 1e-10
    assert rep.fidelity_vs_nand > 1 - 1e-10
    assert np.allclose(rep.residual_local_z, 0, atol=1e-10)
    assert nand_encoded_sequence().total_exchange_ops == 2
    assert nand_encoded_sequence().total_z_evolutions == 2
    assert NAND_PHYSICAL.total_exchange_ops == 2


def test_encoded_nand_diagonal_phases():
    rep = verify_controlled_phase(build_nand_encoded(), BASIS)
    phases = np.angle(np.array(rep.diagonal_phases) * np.conj(rep.diagonal_phases[0]))
    assert np.allclose(phases, [0, 0, 0, np.pi], atol=1e-10) or np.allclose(phases, [0, 0, 0, -np.pi], atol=1e-10)


@pytest.mark.parametrize("bond,exact", [((2, 3), True), ((1, 4), True), ((1, 3), False), ((2, 4), False)])
def test_inter_qubit_bond_choice(bond, exact):
    rep = verify_controlled_phase(build_nand_encoded(bond=bond), BASIS)
    if exact:
        assert rep.leakage < 1e-10 and rep.fidelity_vs_nand > 1 - 1e-10
    else:
        assert rep.leakage > 0.5


def test_other_conventions_fail():
    bad = Convention(-1, 1, 0.5)
    rep = verify_controlled_phase(build_nand_encoded(convention=bad), BASIS)
    assert rep.fidelity_vs_nand < 0.99 or rep.leakage > 1e-6


@pytest.mark.parametrize("g", [(1.0, 2.0, 1.0, 2.0), (0.3, 0.8, 0.3, 0.8), (2.0, 1.0, 2.0, 1.0)])
def test_encoded_nand_other_devices(g):
    dev = DeviceConfig(4, g, 1.7, (Bond(1, 2), Bond(2, 3), Bond(3, 4)))
    rep = verify_controlled_phase(build_nand_encoded(dev), BASIS)
    assert rep.leakage < 1e-10 and rep.fidelity_vs_nand > 1 - 1e-10


def test_u0_needs_g_contrast():
    dev = DeviceConfig(4, (1.0,) * 4, 1.0)
    with pytest.raises(ImpossibleRotationError):
        build_nand_encoded(dev)
    assert u0_time(0.0, dev, Convention()) == 0.0
    uneven = DeviceConfig(4, (1.0, 1.5, 1.0, 2.0), 1.0)
    with pytest.raises(ValueError):
        u0_time(1.0, uneven, Convention())
    with pytest.raises(ValueError):
        build_nand_encoded(default_device(1))


def test_u0_stays_in_logical_space():
    assert leakage(build_u0(0.7), BASIS) < 1e-12


def test_cnot_from_nand_up_to_local_z():
    u = build_cnot_from_nand(NAND)
    fid, angles = local_z_fidelity(u, CNOT)
    assert fid > 1 - 1e-10
    # the bare conjugation leaves a pi phase on the control qubit
    assert abs(abs(angles[0]) - np.pi) < 1e-6 and abs(angles[1]) < 1e-6
    assert compare_up_to_global_phase(np.kron(np.diag([1, -1]), np.eye(2)) @ u, CNOT).fidelity > 1 - 1e-10
    with pytest.raises(ValueError):
        build_cnot_from_nand(np.eye(2))


def test_verify_controlled_phase_variants():
    rep = verify_controlled_phase(NAND)
    assert rep.fidelity_vs_nand == pytest.approx(1.0) and rep.leakage == 0
    z = np.diag(np.exp(1j * np.array([0, 0.4, 0.3, 0.7 + np.pi])))
    rep = verify_controlled_phase(z)
    assert rep.fidelity_vs_nand < 1 - 1e-3
    assert rep.fidelity_z_corrected == pytest.approx(1.0)
    assert rep.residual_local_z == pytest.approx((0.3, 0.4))
    assert set(rep.to_dict()) >= {"leakage", "fidelity_vs_nand", "residual_local_z"}
    with pytest.raises(ValueError):
        verify_controlled_phase(np.eye(16))
