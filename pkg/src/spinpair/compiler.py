"""Logical-circuit language, lowering to pulse schedules, timing estimates and schedule I/O.

Circuit grammar (one statement per line, ``#`` starts a comment)::

    qubits 2
    rx q0 pi/2
    rz q1 0.25pi
    ry q0 -pi/2
    nand q0 q1
    cnot q0 q1
    echo 10.0

Logical qubit ``k`` is the spin pair ``(2k+1, 2k+2)``.  Logical rotations are
``R_A(theta) = exp(-i theta sigma^A / 2)``; qubit 0 is the most significant
factor of the logical product space.
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import asdict, dataclass, field

import numpy as np

from . import units
from .dynamics import (
    Constant,
    PulseSchedule,
    PulseSegment,
    Sinusoid,
    calibrate_pulse_duration,
    carrier_phase,
    rabi_frequency,
)
from .encoding import logical_z_coefficient
from .gates import CNOT, NAND, ImpossibleRotationError, calibrate, logical_rotation, u0_time
from .spins import ConfigError, DeviceConfig, qubit_pairs

GATE_ARITY = {"rx": 1, "ry": 1, "rz": 1, "nand": 2, "cnot": 2, "echo": 0}
REFERENCE_CLOCK_GHZ = 6.0
RY_POLICIES = ("composite", "resonant")
TWO_PI = 2 * math.pi


class CircuitError(ValueError):
    def __init__(self, line: int, message: str):
        super().__init__(f"line {line}: {message}")
        self.line = line


class LoweringError(ValueError):
    pass


class ScheduleFormatError(ValueError):
    pass


@dataclass(frozen=True)
class LogicalGate:
    name: str
    qubits: tuple[int, ...] = ()
    param: float | None = None
    line: int = 0


@dataclass
class LogicalCircuit:
    n_logical: int
    gates: list[LogicalGate] = field(default_factory=list)


_NUM = r"(?:\d+(?:\.\d*)?|\.\d+)(?:[eE][+-]?\d+)?"
_ANGLE = re.compile(rf"^([+-])?({_NUM})?(pi)?(?:/({_NUM}))?$")


def parse_angle(text: str) -> float:
    """``1.5``, ``pi``, ``-pi/2``, ``0.25pi``, ``3pi/4``."""
    m = _ANGLE.match(text.strip())
    if not m or (m.group(2) is None and m.group(3) is None):
        raise ValueError(f"malformed angle {text!r}")
    sign, num, pi, den = m.groups()
    if den is not None and pi is None:
        raise ValueError(f"malformed angle {text!r}: a divisor needs a pi factor")
    value = float(num) if num is not None else 1.0
    if pi:
        value *= math.pi
    if den is not None:
        d = float(den)
        if d == 0:
            raise ValueError(f"malformed angle {text!r}: division by zero")
        value /= d
    return -value if sign == "-" else value


def _parse_qubit(tok: str, n: int, line: int) -> int:
    m = re.fullmatch(r"q(\d+)", tok)
    if not m:
        raise CircuitError(line, f"expected a qubit like q0, got {tok!r}")
    q = int(m.group(1))
    if q >= n:
        raise CircuitError(line, f"qubit index q{q} out of range for {n} qubits")
    return q


def parse_circuit(text: str) -> LogicalCircuit:
    circuit = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        toks = raw.split("#", 1)[0].split()
        if not toks:
            continue
        head = toks[0].lower()
        if circuit is None:
            if head != "qubits" or len(toks) != 2 or not toks[1].isdigit() or int(toks[1]) < 1:
                raise CircuitError(lineno, "circuit must start with 'qubits N' (N >= 1)")
            circuit = LogicalCircuit(int(toks[1]))
            continue
        if head == "qubits":
            raise CircuitError(lineno, "duplicate 'qubits' header")
        if head not in GATE_ARITY:
            raise CircuitError(lineno, f"unknown mnemonic {toks[0]!r}")
        arity = GATE_ARITY[head]
        if head == "echo":
            if len(toks) != 2:
                raise CircuitError(lineno, "echo takes one idle time")
            try:
                idle = float(toks[1])
            except ValueError:
                raise CircuitError(lineno, f"malformed idle time {toks[1]!r}") from None
            if not (idle >= 0 and math.isfinite(idle)):
                raise CircuitError(lineno, "echo idle time must be finite and non-negative")
            circuit.gates.append(LogicalGate("echo", (), idle, lineno))
            continue
        want = arity + (1 if arity == 1 else 0)
        if len(toks) - 1 != want:
            raise CircuitError(lineno, f"{head} takes {want} operands, got {len(toks) - 1}")
        qubits = tuple(_parse_qubit(t, circuit.n_logical, lineno) for t in toks[1 : 1 + arity])
        param = None
        if arity == 1:
            try:
                param = parse_angle(toks[2])
            except ValueError as exc:
                raise CircuitError(lineno, str(exc)) from None
        elif qubits[0] == qubits[1]:
            raise CircuitError(lineno, f"{head} needs two distinct qubits")
        circuit.gates.append(LogicalGate(head, qubits, param, lineno))
    if circuit is None:
        raise CircuitError(1, "empty circuit: missing 'qubits N' header")
    return circuit


# --- ideal logical semantics -------------------------------------------------

def _embed(n: int, q: int, m: np.ndarray) -> np.ndarray:
    return np.kron(np.kron(np.eye(2**q), m), np.eye(2 ** (n - q - 1)))


def _two_qubit(n: int, a: int, b: int, m: np.ndarray) -> np.ndarray:
    """Embed a 4x4 gate acting on (a, b), ``a`` as the more significant input."""
    dim = 2**n
    out = np.zeros((dim, dim), dtype=complex)
    for col in range(dim):
        bits = [(col >> (n - 1 - k)) & 1 for k in range(n)]
        sub = 2 * bits[a] + bits[b]
        for row_sub in range(4):
            amp = m[row_sub, sub]
            if amp == 0:
                continue
            nb = list(bits)
            nb[a], nb[b] = row_sub >> 1, row_sub & 1
            out[int("".join(map(str, nb)), 2), col] += amp
    return out


def gate_unitary(gate: LogicalGate, n: int) -> np.ndarray:
    if gate.name in ("rx", "ry", "rz"):
        return _embed(n, gate.qubits[0], logical_rotation(gate.name[1], gate.param))
    if gate.name == "nand":
        return _two_qubit(n, *gate.qubits, NAND)
    if gate.name == "cnot":
        return _two_qubit(n, *gate.qubits, CNOT)
    if gate.name == "echo":
        out = np.eye(1)
        for _ in range(n):
            out = np.kron(out, logical_rotation("x", math.pi))
        return out
    raise ValueError(f"unknown gate {gate.name}")


def circuit_unitary(circuit: LogicalCircuit) -> np.ndarray:
    u = np.eye(2**circuit.n_logical, dtype=complex)
    for g in circuit.gates:
        u = gate_unitary(g, circuit.n_logical) @ u
    return u


# --- timing model --------------------------------------------------------------

@dataclass(frozen=True)
class TimingModel:
    """Pi-rotation time scales: ``t_z = 35 ps / (dg * H[T])`` and ``t_x = 0.5 ps / J[meV]``."""

    delta_g: float
    h_ext_tesla: float
    j_ex_mev: float
    coeff_z_ps: float = 35.0
    coeff_x_ps: float = 0.5

    @classmethod
    def si_ge(cls, j_ex_mev: float = 1.0) -> "TimingModel":
        return cls(delta_g=0.435, h_ext_tesla=2.0, j_ex_mev=j_ex_mev)


def duration_z(theta: float, timing: TimingModel) -> float:
    """Picoseconds of free Zeeman evolution for a logical Z rotation by ``theta``."""
    if timing.delta_g == 0:
        raise ImpossibleRotationError("Z rotation is impossible with dg = 0")
    if timing.h_ext_tesla <= 0:
        raise ValueError("external field must be positive")
    return abs(theta) / math.pi * timing.coeff_z_ps / (abs(timing.delta_g) * timing.h_ext_tesla)


def duration_x(theta: float, timing: TimingModel) -> float:
    """Picoseconds of intra-pair exchange for a logical X rotation by ``theta``."""
    if timing.j_ex_mev <= 0:
        raise ValueError("exchange strength must be positive")
    return abs(theta) / math.pi * timing.coeff_x_ps / timing.j_ex_mev


@dataclass(frozen=True)
class ClockEstimate:
    t_z_pi_ps: float
    t_x_pi_ps: float
    nand_duration_ps: float
    clock_ghz: float
    reference_clock_ghz: float
    discrepancy: bool

    def to_dict(self) -> dict:
        return asdict(self)


def estimate_clock(timing: TimingModel) -> ClockEstimate:
    """nAND time from two Z evolutions (pi, pi/2) and two pi/2 exchange pulses."""
    nand = (
        duration_z(math.pi, timing)
        + duration_z(math.pi / 2, timing)
        + 2 * duration_x(math.pi / 2, timing)
    )
    clock = 1000.0 / nand
    off = abs(clock / REFERENCE_CLOCK_GHZ - 1) > 0.25
    return ClockEstimate(
        duration_z(math.pi, timing), duration_x(math.pi, timing), nand, clock, REFERENCE_CLOCK_GHZ, off
    )


# --- lowering ----------------------------------------------------------------------

@dataclass
class CompileStats:
    exchange_op_count: int = 0
    z_evolution_count: int = 0
    resonant_pulse_count: int = 0
    total_duration_ps: float = 0.0

    def to_dict(self) -> dict:
        return asdict(self)


def _wrap_positive(x: float, period: float) -> float:
    r = math.fmod(x, period)
    if r < 0:
        r += period
    if period - r < 1e-12 * period:
        r = 0.0
    return r


class _Lowering:
    def __init__(self, circuit, device, timing, ry_policy, j_amp_ratio):
        self.n = circuit.n_logical
        self.device = device
        self.timing = timing
        self.ry_policy = ry_policy
        self.j_amp_ratio = j_amp_ratio
        self.pairs = qubit_pairs(self.n)
        self.segments: list[PulseSegment] = []
        self.stats = CompileStats()
        self.t = 0.0  # schedule clock
        self.tau = 0.0  # Zeeman-on clock

    # primitives
    def _push(self, seg: PulseSegment, model_ps: float):
        self.segments.append(seg)
        self.t += seg.duration
        if seg.zeeman_active:
            self.tau += seg.duration
        self.stats.total_duration_ps += model_ps

    def _z_coeff(self, q: int) -> float:
        c = logical_z_coefficient(self.device, self.pairs[q])
        if c == 0:
            raise LoweringError(
                f"Z rotation on q{q} is impossible: its spins have equal g-factors (dg = 0)")
        return c

    def _z_model_ps(self, angle: float) -> float:
        try:
            return duration_z(angle, self.timing)
        except ImpossibleRotationError:
            raise LoweringError("Z rotation is impossible with timing dg = 0") from None
        except ValueError as exc:
            raise LoweringError(str(exc)) from None

    def idle(self, duration: float):
        if duration <= 0:
            return
        angle = abs(self._z_coeff(0)) * duration
        self._push(PulseSegment(duration, {}, True), self._z_model_ps(angle))
        self.stats.z_evolution_count += 1

    def exchange(self, areas: dict):
        """Simultaneous hard exchange pulses with logical X areas ``{pair: theta}``."""
        areas = {b: _wrap_positive(a, TWO_PI) for b, a in areas.items()}
        areas = {b: a for b, a in areas.items() if a > 0}
        if not areas:
            return
        bonds = {b: self.device.bond(*b) for b in areas}
        for b, bond in bonds.items():
            if bond is None:
                raise LoweringError(f"device has no bond {b}")
        duration = max(a / units.mev_to_natural(bonds[b].j_max) for b, a in areas.items())
        couplings = {b: Constant(a / duration) for b, a in areas.items()}
        try:
            model = max(duration_x(a, self.timing) for a in areas.values())
        except ValueError as exc:
            raise LoweringError(str(exc)) from None
        self._push(PulseSegment(duration, couplings, False), model)
        self.stats.exchange_op_count += len(areas)

    def _rz_time(self, q: int, theta: float) -> float:
        c = self._z_coeff(q)
        return _wrap_positive(theta / c, TWO_PI / abs(c))

    def rz(self, q: int, theta: float):
        t = self._rz_time(q, theta)
        if t == 0:
            return
        others = [p for k, p in enumerate(self.pairs) if k != q]
        if not others:
            self.idle(t)
            return
        # the spectators' Z phase is cancelled by pi pulses between two half idles
        flip = {p: math.pi for p in others}
        self.idle(t / 2)
        self.exchange(flip)
        self.idle(t / 2)
        self.exchange(flip)

    def rx(self, q: int, theta: float):
        self.exchange({self.pairs[q]: theta})

    def _common_omega(self, qubits) -> float:
        omegas = {round(rabi_frequency(self.device, self.pairs[q]), 12) for q in qubits}
        if len(omegas) != 1:
            raise LoweringError(f"qubits {list(qubits)} have different Rabi frequencies {sorted(omegas)}")
        return rabi_frequency(self.device, self.pairs[qubits[0]])

    def resonant(self, drives: dict):
        """Resonant pulses ``{q: (theta, lab_axis)}`` played together, then a frame-closing idle."""
        for q in range(self.n):
            self._z_coeff(q)
        omega = self._common_omega(list(range(self.n)))
        amp = self.j_amp_ratio * omega
        if amp / omega > 0.1:
            raise LoweringError("resonant drive amplitude violates the rotating-wave limit")
        offset = self.t - self.tau
        durations, params = [], {}
        for q, (theta, axis) in drives.items():
            if theta < 0:
                theta, axis = -theta, axis + math.pi
            pair = self.pairs[q]
            c = logical_z_coefficient(self.device, pair)
            frame_axis = axis - c * self.tau
            durations.append(calibrate_pulse_duration(self.device, theta, amp, pair, frame_axis))
            params[pair] = carrier_phase(self.device, pair, frame_axis) - omega * offset
        duration = max(durations)
        couplings = {
            p: Sinusoid(amp * d / duration, omega, math.fmod(ph, TWO_PI))
            for (p, ph), d in zip(params.items(), durations)
        }
        self._push(PulseSegment(duration, couplings, True), units.natural_to_ps(duration))
        self.stats.resonant_pulse_count += len(couplings)
        self.idle(_wrap_positive(-duration, TWO_PI / omega))

    def ry(self, q: int, theta: float):
        if _wrap_positive(theta, 2 * TWO_PI) == 0:
            return
        if self.ry_policy == "resonant":
            self.resonant({q: (theta, math.pi / 2)})
        else:
            self.rz(q, -math.pi / 2)
            self.rx(q, theta)
            self.rz(q, math.pi / 2)

    def nand_bond(self, a: int, b: int) -> tuple[int, int]:
        lo, hi = sorted((a, b))
        (l1, l2), (h1, h2) = self.pairs[lo], self.pairs[hi]
        for bond in ((l2, h1), (l1, h2)):
            if self.device.has_bond(*bond):
                return bond
        raise LoweringError(f"q{lo} and q{hi} are not adjacent: no end-to-end bond in the device layout")

    def nand(self, a: int, b: int):
        bond = self.nand_bond(a, b)
        ca, cb = self._z_coeff(a), self._z_coeff(b)
        if not math.isclose(ca, cb, rel_tol=1e-12):
            raise LoweringError(f"q{a} and q{b} need equal g-factor contrasts for the two-exchange nAND")
        conv = calibrate().convention
        period = TWO_PI / abs(ca)
        sub = DeviceConfig(
            4,
            tuple(self.device.g_factors[s - 1] for s in (*self.pairs[min(a, b)], *self.pairs[max(a, b)])),
            self.device.field_b,
        )
        t_pi = _wrap_positive(u0_time(math.pi, sub, conv), period)
        t_half = _wrap_positive(u0_time(math.pi / 2, sub, conv), period)
        area = conv.theta_sign * math.pi / 2
        self.exchange({bond: area})
        self.idle(t_pi)
        self.exchange({bond: area})
        self.idle(t_half)
        for q in range(self.n):
            if q not in (a, b):
                # undo the Zeeman phase picked up by spectators during the idles
                self.rz(q, -self._z_coeff(q) * (t_pi + t_half))

    def cnot(self, control: int, target: int):
        self.ry(target, -math.pi / 2)
        self.nand(control, target)
        self.ry(target, math.pi / 2)

    def echo(self, idle_time: float):
        self.idle(idle_time / 2)
        self.resonant({q: (math.pi, 0.0) for q in range(self.n)})
        self.idle(idle_time / 2)


def lower(
    circuit: LogicalCircuit,
    device: DeviceConfig,
    timing: TimingModel,
    ry_policy: str = "composite",
    j_amp_ratio: float = 0.05,
) -> tuple[PulseSchedule, CompileStats]:
    """Compile ``circuit`` into a pulse schedule for ``device``.

    Exchange pulses are idealised as hard pulses with the Zeeman term off;
    Z rotations are timed free evolution; resonant pulses are followed by an
    idle that closes the Zeeman frame, so the schedule's lab-frame unitary
    implements the circuit.  ``stats.total_duration_ps`` prices each segment
    with the ``timing`` model (resonant pulses at their physical length).
    """
    if ry_policy not in RY_POLICIES:
        raise LoweringError(f"unknown RY policy {ry_policy!r}; expected one of {RY_POLICIES}")
    if device.n_spins < 2 * circuit.n_logical:
        raise LoweringError(
            f"{circuit.n_logical} logical qubits need {2 * circuit.n_logical} spins; device has {device.n_spins}")
    for q, p in enumerate(qubit_pairs(circuit.n_logical)):
        if not device.has_bond(*p):
            raise LoweringError(f"q{q} has no intra-pair bond {p} in the device")
    low = _Lowering(circuit, device, timing, ry_policy, j_amp_ratio)
    for g in circuit.gates:
        try:
            if g.name == "echo":
                low.echo(g.param)
            elif g.name in ("rx", "ry", "rz"):
                getattr(low, g.name)(g.qubits[0], g.param)
            else:
                getattr(low, g.name)(*g.qubits)
        except (LoweringError, ImpossibleRotationError, ValueError) as exc:
            raise LoweringError(f"line {g.line}: {g.name}: {exc}") from None
    return PulseSchedule(tuple(low.segments), device), low.stats


# --- schedule JSON -------------------------------------------------------------------

def _bond_doc(i: int, j: int, c) -> dict:
    if isinstance(c, Constant):
        return {"i": i, "j": j, "mode": "constant", "j_mev": units.natural_to_mev(c.j)}
    return {
        "i": i,
        "j": j,
        "mode": "sin",
        "amp_mev": units.natural_to_mev(c.amp),
        "carrier_ghz": units.omega_to_ghz(c.omega),
        "phase_rad": c.phase,
    }


def export_schedule(schedule: PulseSchedule, stats: CompileStats | None = None) -> str:
    """Canonical JSON: sorted keys, shortest round-trip float repr, lab units."""
    doc = {
        "device": schedule.device.to_dict(),
        "segments": [
            {
                "duration_ps": units.natural_to_ps(seg.duration),
                "bonds": [_bond_doc(i, j, c) for (i, j), c in sorted(seg.couplings.items())],
                "zeeman": seg.zeeman_active,
            }
            for seg in schedule.segments
        ],
        "stats": stats.to_dict() if stats is not None else None,
    }
    return json.dumps(doc, sort_keys=True, indent=2, allow_nan=False) + "\n"


def _get(obj, key, kind, where):
    if not isinstance(obj, dict) or key not in obj:
        raise ScheduleFormatError(f"{where}: missing key {key!r}")
    val = obj[key]
    if kind is float:
        if isinstance(val, bool) or not isinstance(val, (int, float)):
            raise ScheduleFormatError(f"{where}.{key}: expected a number")
        return float(val)
    if kind is int:
        if isinstance(val, bool) or not isinstance(val, int):
            raise ScheduleFormatError(f"{where}.{key}: expected an integer")
        return val
    if not isinstance(val, kind):
        raise ScheduleFormatError(f"{where}.{key}: expected {kind.__name__}")
    return val


def load_schedule(text: str) -> tuple[PulseSchedule, CompileStats | None]:
    """Inverse of :func:`export_schedule`; errors carry a line/column or a JSON path."""
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScheduleFormatError(f"line {exc.lineno}, column {exc.colno}: {exc.msg}") from None
    if not isinstance(doc, dict):
        raise ScheduleFormatError("line 1: top level must be an object")
    try:
        device = DeviceConfig.from_dict(_get(doc, "device", dict, "$"))
    except ConfigError as exc:
        raise ScheduleFormatError(f"$.device: {exc}") from None
    segments = []
    for k, sd in enumerate(_get(doc, "segments", list, "$")):
        where = f"$.segments[{k}]"
        couplings = {}
        for m, bd in enumerate(_get(sd, "bonds", list, where)):
            bw = f"{where}.bonds[{m}]"
            i, j = _get(bd, "i", int, bw), _get(bd, "j", int, bw)
            mode = _get(bd, "mode", str, bw)
            if mode == "constant":
                c = Constant(units.mev_to_natural(_get(bd, "j_mev", float, bw)))
            elif mode == "sin":
                c = Sinusoid(
                    units.mev_to_natural(_get(bd, "amp_mev", float, bw)),
                    units.ghz_to_omega(_get(bd, "carrier_ghz", float, bw)),
                    _get(bd, "phase_rad", float, bw),
                )
            else:
                raise ScheduleFormatError(f"{bw}.mode: expected 'constant' or 'sin', got {mode!r}")
            couplings[(i, j)] = c
        try:
            segments.append(PulseSegment(
                units.ps_to_natural(_get(sd, "duration_ps", float, where)),
                couplings,
                _get(sd, "zeeman", bool, where),
            ))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ScheduleFormatError):
                raise
            raise ScheduleFormatError(f"{where}: {exc}") from None
    try:
        schedule = PulseSchedule(tuple(segments), device)
    except ValueError as exc:
        raise ScheduleFormatError(f"$.segments: {exc}") from None
    stats = None
    sd = doc.get("stats")
    if sd is not None:
        stats = CompileStats(
            _get(sd, "exchange_op_count", int, "$.stats"),
            _get(sd, "z_evolution_count", int, "$.stats"),
            _get(sd, "resonant_pulse_count", int, "$.stats"),
            _get(sd, "total_duration_ps", float, "$.stats"),
        )
    return schedule, stats
