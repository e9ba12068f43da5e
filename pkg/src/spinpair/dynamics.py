"""Time-dependent evolution under switched and sinusoidally modulated exchange.

A schedule is a list of segments.  In each segment every listed bond carries
either a constant coupling ``J`` or ``J_amp * sin(omega * t + phase)``, where
``t`` is the global schedule clock, and the static Zeeman term is on or off.

Constant segments are exponentiated exactly.  Modulated segments use
midpoint-sampled piecewise-constant steps whose count is doubled until the
segment propagator changes by less than ``tol`` in operator norm.  The
propagator is factorised over connected groups of coupled spins and then
over total-S^z sectors, so the stepping kernel only sees small blocks.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from . import kernels
from .encoding import SubspaceBasis, leakage, logical_operators, logical_product_basis, logical_z_coefficient
from .linalg import expm_hermitian, kron_all, restrict
from .spins import Bond, DeviceConfig, heisenberg, qubit_pairs, zeeman

DEFAULT_TOL = 1e-8
MAX_STEPS = 2**20
RWA_WARN = 0.05
RWA_LIMIT = 0.1


class ConvergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class Constant:
    j: float


@dataclass(frozen=True)
class Sinusoid:
    amp: float
    omega: float
    phase: float = 0.0

    def at(self, t: float) -> float:
        return self.amp * math.sin(self.omega * t + self.phase)


@dataclass(frozen=True, eq=False)
class PulseSegment:
    duration: float
    couplings: dict = field(default_factory=dict)
    zeeman_active: bool = True

    def __post_init__(self):
        if not (self.duration > 0 and math.isfinite(self.duration)):
            raise ValueError(f"segment duration must be positive and finite, got {self.duration}")
        norm = {}
        for (i, j), c in dict(self.couplings).items():
            if not isinstance(c, (Constant, Sinusoid)):
                raise TypeError(f"coupling on ({i}, {j}) must be Constant or Sinusoid")
            vals = (c.j,) if isinstance(c, Constant) else (c.amp, c.omega, c.phase)
            if not all(math.isfinite(v) for v in vals):
                raise ValueError(f"coupling on ({i}, {j}) is not finite")
            norm[(min(i, j), max(i, j))] = c
        object.__setattr__(self, "couplings", norm)

    @property
    def is_modulated(self) -> bool:
        return any(isinstance(c, Sinusoid) for c in self.couplings.values())

    def __eq__(self, other):
        if not isinstance(other, PulseSegment):
            return NotImplemented
        return (self.duration, self.couplings, self.zeeman_active) == (
            other.duration, other.couplings, other.zeeman_active)


@dataclass(frozen=True, eq=False)
class PulseSchedule:
    segments: tuple
    device: DeviceConfig

    def __post_init__(self):
        object.__setattr__(self, "segments", tuple(self.segments))
        for k, seg in enumerate(self.segments):
            for i, j in seg.couplings:
                if not self.device.has_bond(i, j):
                    raise ValueError(f"segment {k} drives bond ({i}, {j}) absent from the device")

    @property
    def total_duration(self) -> float:
        return math.fsum(s.duration for s in self.segments)

    @property
    def zeeman_time(self) -> float:
        """Total time with the Zeeman term on (the clock of the qubit rotating frame)."""
        return math.fsum(s.duration for s in self.segments if s.zeeman_active)

    def __add__(self, other: "PulseSchedule") -> "PulseSchedule":
        if other.device != self.device:
            raise ValueError("cannot concatenate schedules for different devices")
        return PulseSchedule(self.segments + other.segments, self.device)

    def __eq__(self, other):
        if not isinstance(other, PulseSchedule):
            return NotImplemented
        return self.device == other.device and self.segments == other.segments


@dataclass(eq=False)
class SimulationResult:
    final_unitary: np.ndarray
    leakage_trace: list
    step_count: int
    convergence_estimate: float
    converged: bool = True


def _groups(n: int, bonds) -> list[list[int]]:
    """Connected groups of spins under ``bonds`` (singletons included), sorted."""
    parent = list(range(n + 1))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for i, j in bonds:
        parent[find(i)] = find(j)
    out: dict[int, list[int]] = {}
    for s in range(1, n + 1):
        out.setdefault(find(s), []).append(s)
    return sorted(out.values())


def _assemble(groups, mats, n: int) -> np.ndarray:
    order = [s for g in groups for s in g]
    u = kron_all(*mats)
    if order == list(range(1, n + 1)):
        return u
    perm = list(np.argsort(order))
    t = u.reshape([2] * (2 * n)).transpose(perm + [n + p for p in perm])
    return t.reshape(2**n, 2**n)


class _GroupProblem:
    """Hamiltonian pieces of one coupled group, split into total-S^z sectors."""

    def __init__(self, seg: PulseSegment, device: DeviceConfig, spins: list[int]):
        k = len(spins)
        local = {s: idx + 1 for idx, s in enumerate(spins)}
        h = np.zeros((2**k, 2**k), dtype=complex)
        if seg.zeeman_active:
            sub = DeviceConfig(k, tuple(device.g_factors[s - 1] for s in spins), device.field_b)
            h = h + zeeman(sub)
        mods = []
        for (i, j), c in seg.couplings.items():
            if i not in local:
                continue
            v = heisenberg(k, local[i], local[j])
            if isinstance(c, Constant):
                h = h + c.j * v
            else:
                mods.append((c, v))
        self.dim = 2**k
        self.h = h
        self.mods = mods
        mag = np.array([bin(x).count("1") for x in range(2**k)])
        self.sectors = [np.flatnonzero(mag == m) for m in range(k + 1)]

    def propagate(self, t_start: float, dt: float, n_steps: int) -> np.ndarray:
        u = np.zeros((self.dim, self.dim), dtype=complex)
        amps = np.array([c.amp for c, _ in self.mods], dtype=float)
        omegas = np.array([c.omega for c, _ in self.mods], dtype=float)
        phases = np.array([c.phase for c, _ in self.mods], dtype=float)
        for idx in self.sectors:
            ix = np.ix_(idx, idx)
            hs = np.ascontiguousarray(self.h[ix])
            vs = np.ascontiguousarray(np.stack([v[ix] for _, v in self.mods]))
            u[ix] = kernels.propagate(hs, vs, amps, omegas, phases, t_start, dt, n_steps)
        return u


def _initial_steps(seg: PulseSegment, n_chunks: int) -> int:
    fastest = max((abs(c.omega) for c in seg.couplings.values() if isinstance(c, Sinusoid)), default=0.0)
    want = max(16, n_chunks, math.ceil(seg.duration * fastest / (2 * math.pi) * 16))
    return 1 << (want - 1).bit_length()


def _chunked(problem: _GroupProblem, t0: float, duration: float, n: int, n_chunks: int):
    """Cumulative group propagators at the end of each of ``n_chunks`` equal chunks."""
    dt = duration / n
    per = n // n_chunks
    out, u = [], np.eye(problem.dim, dtype=complex)
    for c in range(n_chunks):
        u = problem.propagate(t0 + c * per * dt, dt, per) @ u
        out.append(u)
    return out


def evolve(
    schedule: PulseSchedule,
    basis: SubspaceBasis | None = None,
    tol: float = DEFAULT_TOL,
    max_steps: int = MAX_STEPS,
    samples: int = 8,
    strict: bool = False,
) -> SimulationResult:
    """Propagate ``schedule`` from the identity.

    ``samples`` leakage samples are taken inside each segment when ``basis``
    is given.  If a modulated segment does not converge within ``max_steps``
    steps the result is flagged ``converged=False`` (or
    :class:`ConvergenceError` is raised when ``strict``).
    """
    dev = schedule.device
    n = dev.n_spins
    samples = 1 << max(0, int(samples) - 1).bit_length()
    u = np.eye(2**n, dtype=complex)
    trace = [(0.0, leakage(u, basis))] if basis is not None else []
    t = 0.0
    steps = 0
    estimate = 0.0
    converged = True
    for seg in schedule.segments:
        if not seg.is_modulated:
            h = sum((c.j * heisenberg(n, i, j) for (i, j), c in seg.couplings.items()),
                    np.zeros((2**n, 2**n), dtype=complex))
            if seg.zeeman_active:
                h = h + zeeman(dev)
            if basis is not None:
                for k in range(1, samples + 1):
                    trace.append((t + seg.duration * k / samples,
                                  leakage(expm_hermitian(h, seg.duration * k / samples) @ u, basis)))
            u = expm_hermitian(h, seg.duration) @ u
            steps += 1
            t += seg.duration
            continue
        groups = _groups(n, seg.couplings)
        partials = []
        for spins in groups:
            prob = _GroupProblem(seg, dev, spins)
            if not prob.mods:
                full = expm_hermitian(prob.h, seg.duration)
                partials.append([expm_hermitian(prob.h, seg.duration * (k + 1) / samples)
                                 for k in range(samples)] if basis is not None else [full])
                continue
            nsteps = _initial_steps(seg, samples)
            prev = _chunked(prob, t, seg.duration, nsteps, samples)
            diff = math.inf
            while nsteps * 2 <= max_steps:
                nsteps *= 2
                cur = _chunked(prob, t, seg.duration, nsteps, samples)
                diff = float(np.linalg.norm(cur[-1] - prev[-1], 2))
                prev = cur
                if diff < tol:
                    break
            if not diff < tol:
                converged = False
            estimate += diff
            steps += nsteps
            partials.append(prev if basis is not None else [prev[-1]])
        if basis is not None:
            for k in range(samples):
                mats = [p[k] for p in partials]
                trace.append((t + seg.duration * (k + 1) / samples,
                              leakage(_assemble(groups, mats, n) @ u, basis)))
        u = _assemble(groups, [p[-1] for p in partials], n) @ u
        t += seg.duration
    if not converged:
        msg = f"integration did not reach tol={tol:g} within {max_steps} steps (estimate {estimate:.3g})"
        if strict:
            raise ConvergenceError(msg)
        warnings.warn(msg, RuntimeWarning, stacklevel=2)
    return SimulationResult(u, trace, steps, estimate, converged)


def rotating_frame(u, h0, t: float) -> np.ndarray:
    """``exp(+i h0 t) u``: remove the free evolution generated by ``h0``."""
    return expm_hermitian(h0, -t) @ np.asarray(u, dtype=complex)


def rabi_frequency(config: DeviceConfig, pair: tuple[int, int] = (1, 2)) -> float:
    """Logical level splitting ``|dg B|`` of the pair qubit."""
    omega = abs(config.delta_g(pair) * config.field_b)
    if omega == 0:
        raise ValueError(f"pair {pair} has no Zeeman splitting (dg * B = 0); resonance undefined")
    return omega


def pair_device(config: DeviceConfig, pair: tuple[int, int]) -> DeviceConfig:
    """Two-spin device holding just ``pair``, with its intra-pair bond."""
    bond = config.bond(*pair)
    if bond is None:
        raise ValueError(f"device has no intra-pair bond {pair}")
    g = (config.g_factors[pair[0] - 1], config.g_factors[pair[1] - 1])
    return DeviceConfig(2, g, config.field_b, (Bond(1, 2, bond.j_max),))


def rotation_angle(r, axis_angle: float = 0.0, hint: float | None = None) -> float:
    """Rotation angle of a 2x2 unitary about the equatorial axis at ``axis_angle``.

    Defined modulo 4*pi; with ``hint`` the representative closest to it is returned.
    """
    r = np.asarray(r, dtype=complex)
    r = r / np.sqrt(np.linalg.det(r))
    ops = logical_operators()
    n_dot_sigma = 2 * (math.cos(axis_angle) * ops.sigma_x + math.sin(axis_angle) * ops.sigma_y)
    s = float(np.real(1j * np.trace(r @ n_dot_sigma) / 2))
    c = float(np.real(np.trace(r) / 2))
    theta = 2 * math.atan2(s, c)
    if hint is not None:
        theta += 2 * math.pi * round((hint - theta) / (2 * math.pi))
    return theta


def carrier_phase(config: DeviceConfig, pair, axis_angle: float) -> float:
    """Carrier phase making ``sin(Omega t + phase)`` drive about ``axis_angle`` in the qubit frame."""
    sign = 1.0 if logical_z_coefficient(config, pair) > 0 else -1.0
    return math.pi / 2 + sign * axis_angle


def _pair_rotation(config, pair, amp, omega, phase, duration, tol) -> np.ndarray:
    dev = pair_device(config, pair)
    seg = PulseSegment(duration, {(1, 2): Sinusoid(amp, omega, phase)}, True)
    res = evolve(PulseSchedule((seg,), dev), tol=tol)
    ur = rotating_frame(res.final_unitary, zeeman(dev), duration)
    return restrict(ur, logical_product_basis([(1, 2)]))


def calibrate_pulse_duration(
    config: DeviceConfig,
    target_angle: float,
    j_amp: float,
    pair: tuple[int, int] = (1, 2),
    axis_angle: float = 0.0,
    tol: float = 1e-7,
    angle_tol: float = 1e-9,
) -> float:
    """Duration of a resonant pulse that rotates the pair qubit by ``target_angle``.

    Secant search on the simulated rotating-frame angle, seeded by the
    rotating-wave rate ``j_amp / 2``.
    """
    omega = rabi_frequency(config, pair)
    phase = carrier_phase(config, pair, axis_angle)
    rate = j_amp / 2

    def angle(duration):
        r = _pair_rotation(config, pair, j_amp, omega, phase, duration, tol)
        return rotation_angle(r, axis_angle, hint=rate * duration)

    t0 = target_angle / rate
    f0 = angle(t0) - target_angle
    t1 = t0 - f0 / rate
    for _ in range(12):
        f1 = angle(t1) - target_angle
        if abs(f1) < angle_tol or f1 == f0:
            break
        t0, t1, f0 = t1, t1 - f1 * (t1 - t0) / (f1 - f0), f1
    return t1


def _check_rwa(j_amp: float, omega: float) -> None:
    ratio = abs(j_amp) / omega
    if ratio > RWA_LIMIT:
        raise ValueError(f"j_amp/Omega = {ratio:.3g} exceeds {RWA_LIMIT}; rotating-wave picture breaks down")
    if ratio > RWA_WARN:
        warnings.warn(f"j_amp/Omega = {ratio:.3g} is above {RWA_WARN}; expect counter-rotating errors",
                      RuntimeWarning, stacklevel=3)


def synthesize_resonant_pulse(
    config: DeviceConfig,
    target_angle: float,
    j_amp: float,
    pair: tuple[int, int] = (1, 2),
    axis_angle: float = 0.0,
    tol: float = 1e-7,
) -> PulseSchedule:
    """One modulated exchange segment at the qubit Rabi frequency.

    In the qubit rotating frame (clocked by the global schedule time) the
    pulse rotates the pair qubit by ``target_angle`` about the axis at
    ``axis_angle`` (0 = X, pi/2 = Y).
    """
    omega = rabi_frequency(config, pair)
    if target_angle == 0:
        return PulseSchedule((), config)
    if target_angle < 0:
        target_angle, axis_angle = -target_angle, axis_angle + math.pi
    _check_rwa(j_amp, omega)
    duration = calibrate_pulse_duration(config, target_angle, j_amp, pair, axis_angle, tol)
    seg = PulseSegment(duration, {pair: Sinusoid(j_amp, omega, carrier_phase(config, pair, axis_angle))})
    return PulseSchedule((seg,), config)


def simultaneous_pi_segment(
    config: DeviceConfig, pairs, j_amp_ratio: float = 0.05, axis_angle: float = 0.0, tol: float = 1e-7
) -> PulseSegment:
    """Resonant pi pulses on all ``pairs`` at once, sharing one duration."""
    drives, durations = {}, []
    for p in pairs:
        omega = rabi_frequency(config, p)
        amp = j_amp_ratio * omega
        _check_rwa(amp, omega)
        durations.append(calibrate_pulse_duration(config, math.pi, amp, p, axis_angle, tol))
        drives[p] = (amp, omega, carrier_phase(config, p, axis_angle))
    duration = max(durations)
    couplings = {
        p: Sinusoid(amp * d / duration, omega, phase)
        for (p, (amp, omega, phase)), d in zip(drives.items(), durations)
    }
    return PulseSegment(duration, couplings, True)


def qubit_echo(config: DeviceConfig, idle_time: float, pairs=None, j_amp_ratio: float = 0.05) -> PulseSchedule:
    """Idle ``t/2``, simultaneous resonant pi pulses on every qubit, idle ``t/2``."""
    if pairs is None:
        pairs = qubit_pairs(config.n_spins // 2)
    if idle_time < 0:
        raise ValueError("idle time must be non-negative")
    pulse = simultaneous_pi_segment(config, pairs, j_amp_ratio)
    if idle_time == 0:
        return PulseSchedule((pulse,), config)
    idle = PulseSegment(idle_time / 2, {}, True)
    return PulseSchedule((idle, pulse, idle), config)


def with_device(schedule: PulseSchedule, device: DeviceConfig) -> PulseSchedule:
    """Same pulses played on a different (e.g. disordered) device."""
    return replace(schedule, device=device)


def logical_block(u, n_qubits: int, h0=None, t: float = 0.0) -> np.ndarray:
    """Restriction of ``u`` (optionally in the frame of ``h0`` at time ``t``) to the pair product space."""
    if h0 is not None:
        u = rotating_frame(u, h0, t)
    return restrict(u, logical_product_basis(qubit_pairs(n_qubits)))
