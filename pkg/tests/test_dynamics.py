import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import solve_ivp

from spinpair import _kernels_py, kernels
from spinpair.dynamics import (
    Constant,
    ConvergenceError,
    PulseSchedule,
    PulseSegment,
    Sinusoid,
    carrier_phase,
    evolve,
    logical_block,
    qubit_echo,
    rabi_frequency,
    rotating_frame,
    rotation_angle,
    synthesize_resonant_pulse,
    with_device,
)
from spinpair.encoding import logical_product_basis
from spinpair.gates import logical_rotation
from spinpair.linalg import compare_up_to_global_phase, expm_hermitian
from spinpair.spins import Bond, DeviceConfig, default_device, heisenberg, zeeman


def ode_propagator(schedule, rtol=1e-11):
    """Independent oracle: integrate the Schroedinger equation with an adaptive RK solver."""
    dev = schedule.device
    n = dev.n_spins
    d = 2**n
    u = np.eye(d, dtype=complex)
    t0 = 0.0
    hz = zeeman(dev)
    for seg in schedule.segments:
        def rhs(t, y, seg=seg):
            h = hz.copy() if seg.zeeman_active else np.zeros((d, d), dtype=complex)
            for (i, j), c in seg.couplings.items():
                jt = c.j if isinstance(c, Constant) else c.at(t)
                h = h + jt * heisenberg(n, i, j)
            return (-1j * h @ y.reshape(d, d)).ravel()

        sol = solve_ivp(rhs, (t0, t0 + seg.duration), u.ravel(), method="DOP853", rtol=rtol, atol=1e-12)
        u = sol.y[:, -1].reshape(d, d)
        t0 += seg.duration
    return u


def pair_dev(g=(1.0, 1.5), b=1.0):
    return DeviceConfig(2, g, b, (Bond(1, 2),))


def test_constant_segments_are_exact():
    dev = default_device()
    seg = PulseSegment(0.7, {(2, 3): Constant(0.4), (1, 2): Constant(1.1)}, True)
    res = evolve(PulseSchedule((seg,), dev))
    h = zeeman(dev) + 0.4 * heisenberg(4, 2, 3) + 1.1 * heisenberg(4, 1, 2)
    assert np.allclose(res.final_unitary, expm_hermitian(h, 0.7), atol=1e-12)
    assert res.converged and res.convergence_estimate == 0


def test_modulated_segment_matches_ode_solver():
    dev = pair_dev()
    sched = PulseSchedule((PulseSegment(9.0, {(1, 2): Sinusoid(0.3, 0.5, 0.2)}),
                           PulseSegment(2.0, {(1, 2): Constant(0.8)}, False)), dev)
    res = evolve(sched, tol=1e-10)
    assert res.convergence_estimate < 1e-9
    assert np.allclose(res.final_unitary, ode_propagator(sched), atol=1e-7)


def test_group_factorisation_matches_ode_solver():
    # two independently modulated pairs plus one spectator-free constant bond
    dev = default_device()
    seg = PulseSegment(6.0, {(1, 2): Sinusoid(0.2, 0.5, 0.0), (3, 4): Sinusoid(0.1, 0.5, 1.0)})
    sched = PulseSchedule((seg, PulseSegment(1.0, {(2, 3): Constant(0.6)})), dev)
    assert np.allclose(evolve(sched, tol=1e-10).final_unitary, ode_propagator(sched), atol=1e-7)


def test_chain_group_matches_ode_solver():
    dev = default_device()
    seg = PulseSegment(3.0, {(1, 2): Sinusoid(0.3, 0.5), (2, 3): Constant(0.2), (3, 4): Sinusoid(0.2, 0.7, 0.4)})
    sched = PulseSchedule((seg,), dev)
    assert np.allclose(evolve(sched, tol=1e-10).final_unitary, ode_propagator(sched), atol=1e-7)


@settings(max_examples=20)
@given(st.integers(0, 2**32 - 1), st.sampled_from([1, 2, 3, 4, 6]), st.integers(1, 300))
def test_backends_agree(seed, d, n_steps):
    rng = np.random.default_rng(seed)
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    h = (a + a.conj().T) / 2
    vs = []
    for _ in range(2):
        b = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
        vs.append((b + b.conj().T) / 2)
    args = (np.ascontiguousarray(h), np.ascontiguousarray(np.stack(vs)), rng.uniform(0, 1, 2),
            rng.uniform(0, 2, 2), rng.uniform(0, 6, 2), rng.uniform(0, 5), 0.01, n_steps)
    assert np.allclose(kernels.propagate(*args), _kernels_py.propagate(*args), atol=1e-10)


def test_backend_selection():
    assert kernels.BACKEND in ("cython", "python")


def test_empty_and_concatenated_schedules():
    dev = pair_dev()
    empty = PulseSchedule((), dev)
    assert np.allclose(evolve(empty).final_unitary, np.eye(4))
    a = PulseSchedule((PulseSegment(1.0),), dev)
    b = PulseSchedule((PulseSegment(2.0, {(1, 2): Constant(0.3)}),), dev)
    assert (a + b).total_duration == 3.0
    assert np.allclose(evolve(a + b).final_unitary, evolve(b).final_unitary @ evolve(a).final_unitary)
    with pytest.raises(ValueError):
        a + PulseSchedule((), default_device())


def test_schedule_validation():
    dev = pair_dev()
    with pytest.raises(ValueError):
        PulseSegment(0.0)
    with pytest.raises(ValueError):
        PulseSegment(1.0, {(1, 2): Constant(math.inf)})
    with pytest.raises(TypeError):
        PulseSegment(1.0, {(1, 2): 0.5})
    with pytest.raises(ValueError, match="absent"):
        PulseSchedule((PulseSegment(1.0, {(1, 3): Constant(1.0)}),), default_device())
    seg = PulseSegment(1.0, {(2, 1): Constant(1.0)})
    assert list(seg.couplings) == [(1, 2)]
    assert PulseSchedule((seg,), dev) == PulseSchedule((PulseSegment(1.0, {(1, 2): Constant(1.0)}),), dev)


def test_non_convergence_is_reported():
    sched = PulseSchedule((PulseSegment(50.0, {(1, 2): Sinusoid(0.5, 0.5)}),), pair_dev())
    with pytest.warns(RuntimeWarning):
        res = evolve(sched, tol=1e-14, max_steps=64)
    assert not res.converged
    with pytest.raises(ConvergenceError):
        evolve(sched, tol=1e-14, max_steps=64, strict=True)


def test_leakage_trace_with_basis():
    dev = default_device()
    basis = logical_product_basis([(1, 2), (3, 4)])
    sched = PulseSchedule((PulseSegment(1.0, {(2, 3): Constant(np.pi / 2)}, False),), dev)
    res = evolve(sched, basis=basis, samples=4)
    times = [t for t, _ in res.leakage_trace]
    assert times[0] == 0 and times[-1] == pytest.approx(1.0) and len(times) == 5
    assert res.leakage_trace[0][1] == 0 and max(l for _, l in res.leakage_trace) > 0.1


def test_rwa_guards():
    dev = pair_dev()
    with pytest.raises(ValueError):
        synthesize_resonant_pulse(dev, np.pi, 0.2 * rabi_frequency(dev))
    with pytest.warns(RuntimeWarning):
        synthesize_resonant_pulse(dev, np.pi, 0.07 * rabi_frequency(dev))
    with pytest.raises(ValueError):
        rabi_frequency(pair_dev((1.0, 1.0)))
    assert synthesize_resonant_pulse(dev, 0.0, 0.01).segments == ()


@pytest.mark.parametrize("axis", [0.0, np.pi / 2, 1.0])
def test_resonant_pulse_axis(axis):
    dev = pair_dev()
    omega = rabi_frequency(dev)
    sched = synthesize_resonant_pulse(dev, np.pi / 2, 0.05 * omega, axis_angle=axis)
    res = evolve(sched, tol=1e-7)
    r = logical_block(res.final_unitary, 1, zeeman(dev), sched.zeeman_time)
    target = expm_hermitian(np.cos(axis) * np.array([[0, .5], [.5, 0]]) + np.sin(axis) * np.array([[0, -.5j], [.5j, 0]]),
                            np.pi / 2)
    assert compare_up_to_global_phase(r, target).fidelity > 0.999


def test_negative_angle_and_sign_of_detuning():
    dev = pair_dev((1.5, 1.0))
    omega = rabi_frequency(dev)
    sched = synthesize_resonant_pulse(dev, -np.pi / 2, 0.05 * omega)
    r = logical_block(evolve(sched, tol=1e-7).final_unitary, 1, zeeman(dev), sched.zeeman_time)
    assert compare_up_to_global_phase(r, logical_rotation("x", -np.pi / 2)).fidelity > 0.999
    assert carrier_phase(dev, (1, 2), 0.3) == pytest.approx(np.pi / 2 + 0.3)


def test_rotation_angle():
    assert rotation_angle(logical_rotation("x", 1.2)) == pytest.approx(1.2)
    assert rotation_angle(logical_rotation("y", 0.4), np.pi / 2) == pytest.approx(0.4)
    assert rotation_angle(logical_rotation("x", 1.2), hint=1.2 + 4 * np.pi) == pytest.approx(1.2 + 4 * np.pi)


def test_rotating_frame_removes_free_evolution():
    dev = pair_dev()
    u = expm_hermitian(zeeman(dev), 3.3)
    assert np.allclose(rotating_frame(u, zeeman(dev), 3.3), np.eye(4))


def test_echo_refocuses_small_device():
    dev = default_device(2)
    sched = qubit_echo(dev, 2000.0)
    assert len(sched.segments) == 3
    assert len(sched.segments[1].couplings) == 2
    res = evolve(sched, tol=1e-7)
    u = logical_block(res.final_unitary, 2, zeeman(dev), sched.zeeman_time)
    x = logical_rotation("x", np.pi)
    assert compare_up_to_global_phase(u, np.kron(x, x)).fidelity > 0.999
    shifted = DeviceConfig(4, (1.0, 1.5 + 1.0 / 2000, 1.0, 1.5 - 1.5 / 2000), 1.0, dev.bonds)
    u2 = logical_block(evolve(with_device(sched, shifted), tol=1e-7).final_unitary, 2, zeeman(dev), sched.zeeman_time)
    assert compare_up_to_global_phase(u, u2).fidelity > 0.99
    with pytest.raises(ValueError):
        qubit_echo(dev, -1.0)


def test_pure_python_fallback_selected_by_env():
    import os
    import subprocess
    import sys

    env = dict(os.environ, SPINPAIR_PURE_PYTHON="1")
    code = "from spinpair import kernels; print(kernels.BACKEND)"
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
