"""Pulse schedules built from global rotations.

A :class:`Schedule` is an ordered list of :class:`Evolution` items
(constant Hamiltonian for a duration) and instantaneous :class:`Pulse`
items (the same rotation on every qubit). Items act in list order, so the
propagator is ``U = item_m ... item_1``.

Hamiltonians are kept symbolic (:class:`~globaldd.operators.PauliSum`)
so that the compiler can reason about frames and the simulator can tell
couplings from local terms.

A schedule without pulses whose Hamiltonians are written in the frame
defined by the pulses is called *toggled*. :func:`compile_to_physical`
turns a toggled schedule into one whose segments are all physically
available (the register's own Zeeman term, diagonal couplings and a
uniform x drive) separated by global pi pulses.
"""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .magnus import Segment
from .operators import AXES, PauliSum, global_rotation, propagator
from .systems import RegisterSpec

__all__ = [
    "BlockParams",
    "CompileError",
    "Evolution",
    "Pulse",
    "RWAWarning",
    "Schedule",
    "basic_block",
    "compile_to_physical",
    "conjugated_pair",
    "insert_hahn_echo",
    "repeat",
    "to_toggled",
    "wahuha_block",
    "without_couplings",
]

THETA_WARN = 0.2
RWA_WARN = 10.0
# basic-block sign patterns of the Zeeman and drive terms
ZEEMAN_SIGNS = (1, -1, -1, 1)
DRIVE_SIGNS = (1, 1, -1, -1)


class CompileError(ValueError):
    """A segment cannot be reached from the physical set by global pi pulses."""


class RWAWarning(UserWarning):
    """The schedule is too short to average away the coupled Zeeman differences."""


@dataclass(frozen=True)
class Evolution:
    hamiltonian: PauliSum
    duration: float
    label: str = ""

    def __post_init__(self):
        if not isinstance(self.hamiltonian, PauliSum):
            object.__setattr__(self, "hamiltonian", PauliSum(self.hamiltonian))
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise ValueError(f"evolution duration must be positive and finite, got {self.duration}")


@dataclass(frozen=True)
class Pulse:
    axis: str
    angle: float = math.pi

    def __post_init__(self):
        if self.axis not in AXES:
            raise ValueError(f"pulse axis must be one of {AXES}, got {self.axis!r}")
        if not np.isfinite(self.angle):
            raise ValueError("pulse angle must be finite")

    def unitary(self, n_qubits: int) -> np.ndarray:
        return global_rotation(self.axis, self.angle, n_qubits)

    @property
    def half_turns(self) -> int | None:
        """Angle in units of pi when it is an integer multiple, else None."""
        q = self.angle / math.pi
        return int(round(q)) if abs(q - round(q)) < 1e-12 else None


@dataclass(frozen=True)
class Schedule:
    """Ordered evolutions and pulses on an ``n_qubits`` register.

    ``omegas`` records the register's Zeeman frequencies so the compiler
    knows which sign of the Zeeman term is the physical one.
    """

    n_qubits: int
    items: tuple = ()
    omegas: tuple | None = None

    def __post_init__(self):
        object.__setattr__(self, "items", tuple(self.items))
        if self.omegas is not None:
            object.__setattr__(self, "omegas", tuple(float(w) for w in self.omegas))
        for it in self.items:
            if isinstance(it, Evolution):
                if it.hamiltonian.max_site() > self.n_qubits:
                    raise ValueError(f"segment {it.label!r} addresses a site beyond {self.n_qubits}")
            elif not isinstance(it, Pulse):
                raise TypeError(f"schedule items must be Evolution or Pulse, got {type(it).__name__}")

    def __add__(self, other: "Schedule") -> "Schedule":
        if not isinstance(other, Schedule):
            return NotImplemented
        if other.n_qubits != self.n_qubits:
            raise ValueError("cannot concatenate schedules on different registers")
        return Schedule(self.n_qubits, self.items + other.items, self.omegas or other.omegas)

    def __len__(self):
        return len(self.items)

    @property
    def evolutions(self) -> list:
        return [it for it in self.items if isinstance(it, Evolution)]

    @property
    def pulses(self) -> list:
        return [it for it in self.items if isinstance(it, Pulse)]

    @property
    def duration(self) -> float:
        return math.fsum(it.duration for it in self.evolutions)

    def segments(self) -> list:
        """Matrix segments for :mod:`globaldd.magnus`; pulses are not allowed."""
        if self.pulses:
            raise ValueError("schedule contains pulses; convert with to_toggled first")
        return [Segment(it.hamiltonian.to_matrix(self.n_qubits), it.duration) for it in self.items]

    def propagator(self) -> np.ndarray:
        """Ordered product of all item unitaries."""
        n = self.n_qubits
        U = np.eye(2**n, dtype=complex)
        cache = {}
        for it in self.items:
            if isinstance(it, Pulse):
                step = it.unitary(n)
            else:
                key = (it.hamiltonian, it.duration)
                if key not in cache:
                    cache[key] = propagator(it.hamiltonian.to_matrix(n), it.duration)
                step = cache[key]
            U = step @ U
        return U

    def pulse_product(self) -> np.ndarray:
        """Product of the pulse unitaries alone (identity for a cyclic schedule)."""
        U = np.eye(2**self.n_qubits, dtype=complex)
        for p in self.pulses:
            U = p.unitary(self.n_qubits) @ U
        return U

    def to_dict(self) -> dict:
        items = []
        for it in self.items:
            if isinstance(it, Pulse):
                items.append({"type": "pulse", "axis": it.axis, "angle": it.angle})
            else:
                items.append({"type": "evolution", "duration": it.duration,
                              "terms": it.hamiltonian.to_dict(), "label": it.label})
        out = {"n_qubits": self.n_qubits, "items": items}
        if self.omegas is not None:
            out["omegas"] = list(self.omegas)
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "Schedule":
        items = []
        for k, d in enumerate(data["items"]):
            kind = d.get("type")
            if kind == "pulse":
                items.append(Pulse(d["axis"], float(d.get("angle", math.pi))))
            elif kind == "evolution":
                items.append(Evolution(PauliSum(d["terms"]), float(d["duration"]), d.get("label", "")))
            else:
                raise ValueError(f"item {k}: unknown type {kind!r}")
        return cls(int(data["n_qubits"]), tuple(items), data.get("omegas"))

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    @classmethod
    def from_json(cls, text: str) -> "Schedule":
        return cls.from_dict(json.loads(text))


@dataclass(frozen=True)
class BlockParams:
    """Segment length ``delta_t`` (s) and pulse area ``theta = A delta_t``.

    The drive amplitude ``A`` in rad/s is derived from the two.
    """

    delta_t: float
    theta: float

    def __post_init__(self):
        if not (np.isfinite(self.delta_t) and self.delta_t > 0):
            raise ValueError(f"delta_t must be positive, got {self.delta_t}")
        if not (np.isfinite(self.theta) and self.theta >= 0):
            raise ValueError(f"theta must be non-negative, got {self.theta}")
        if self.theta > THETA_WARN:
            warnings.warn(f"theta = {self.theta:g} is not small; the expansion in theta "
                          f"is unreliable above {THETA_WARN}", stacklevel=2)

    @classmethod
    def from_amplitude(cls, delta_t: float, amplitude: float) -> "BlockParams":
        return cls(delta_t, amplitude * delta_t)

    @property
    def amplitude(self) -> float:
        return self.theta / self.delta_t


def _drive(n: int) -> PauliSum:
    return PauliSum({((j, "x"),): 1.0 for j in range(1, n + 1)})


def basic_block(register: RegisterSpec, params: BlockParams, couplings=None) -> Schedule:
    """Four toggled segments ``s Z + C_k + a A X`` of length ``delta_t``.

    The signs ``(s, a)`` run through ``(+,+), (-,+), (-,-), (+,-)``.

    Parameters
    ----------
    register : RegisterSpec
    params : BlockParams
    couplings : array, optional
        Coupling strengths per segment, shape ``(4, n_edges)`` or
        ``(n_edges,)`` for the same values in every segment. Defaults to
        the register's couplings.
    """
    n_edges = len(register.edges)
    J = register.couplings if couplings is None else np.asarray(couplings, dtype=float)
    if J.shape == (n_edges,):
        J = np.tile(J, (4, 1))
    if J.shape != (4, n_edges):
        raise ValueError(f"per-segment couplings must have shape (4, {n_edges}), got {J.shape}")
    Z = register.zeeman()
    X = _drive(register.n_qubits) * params.amplitude
    items = [
        Evolution(s * Z + register.coupling(J[k]) + a * X, params.delta_t, f"H{k + 1}")
        for k, (s, a) in enumerate(zip(ZEEMAN_SIGNS, DRIVE_SIGNS))
    ]
    return Schedule(register.n_qubits, tuple(items), register.omegas)


def conjugated_pair(block: Schedule, second: Schedule | None = None, axis: str = "y") -> Schedule:
    """``block``, a pi pulse, ``second`` (default ``block``), and the inverse pulse.

    The second block therefore acts with every Hamiltonian conjugated by
    the pi rotation, which flips the sign of odd terms in the axis.
    """
    second = block if second is None else second
    for b in (block, second):
        if b.pulses or len(b.evolutions) != 4:
            raise ValueError("conjugated_pair expects pulse-free four-segment blocks")
    if block.n_qubits != second.n_qubits:
        raise ValueError("blocks act on different registers")
    items = block.items + (Pulse(axis, math.pi),) + second.items + (Pulse(axis, -math.pi),)
    return Schedule(block.n_qubits, items, block.omegas)


def _coupled_pairs(schedule: Schedule) -> set:
    pairs = set()
    for ev in schedule.evolutions:
        for label in ev.hamiltonian.by_weight(2).labels():
            pairs.add((label[0][0], label[1][0]))
    return pairs


def repeat(schedule: Schedule, k: int, *, check_rwa: bool = True) -> Schedule:
    """``k`` back-to-back copies of ``schedule``.

    Warns with :class:`RWAWarning` if the total duration times the Zeeman
    difference of any coupled pair is below 10.
    """
    if int(k) != k or k < 1:
        raise ValueError(f"repeat count must be a positive integer, got {k!r}")
    out = Schedule(schedule.n_qubits, schedule.items * int(k), schedule.omegas)
    if check_rwa and schedule.omegas is not None:
        T = out.duration
        for j, l in sorted(_coupled_pairs(schedule)):
            dw = abs(schedule.omegas[j - 1] - schedule.omegas[l - 1])
            if T * dw < RWA_WARN:
                warnings.warn(f"repeated duration {T:.3g} s times |w_{j} - w_{l}| = {T * dw:.3g} "
                              f"< {RWA_WARN:g}; the Zeeman difference is not averaged",
                              RWAWarning, stacklevel=2)
                break
    return out


def _split_at(schedule: Schedule, t_split: float) -> tuple:
    """Items before and after time ``t_split``, cutting one segment if needed."""
    before, after = [], []
    t = 0.0
    tol = 1e-12 * max(schedule.duration, 1e-300)
    for it in schedule.items:
        if after or (isinstance(it, Evolution) and t >= t_split - tol):
            after.append(it)
            continue
        if isinstance(it, Pulse):
            before.append(it)
            continue
        end = t + it.duration
        if end <= t_split + tol:
            before.append(it)
        else:
            first = t_split - t
            before.append(Evolution(it.hamiltonian, first, it.label))
            after.append(Evolution(it.hamiltonian, it.duration - first, it.label))
        t = end
    return before, after


def insert_hahn_echo(schedule: Schedule, axis: str = "x") -> Schedule:
    """Pi pulse about ``axis`` at the time midpoint plus a closing inverse pulse.

    The second half then runs with single-spin terms that anticommute
    with the axis reversed, so their first-order average cancels.
    """
    if axis not in AXES:
        raise ValueError(f"echo axis must be one of {AXES}")
    if schedule.duration <= 0:
        raise ValueError("cannot insert an echo into a schedule of zero duration")
    before, after = _split_at(schedule, schedule.duration / 2)
    items = tuple(before) + (Pulse(axis, math.pi),) + tuple(after) + (Pulse(axis, -math.pi),)
    return Schedule(schedule.n_qubits, items, schedule.omegas)


# --------------------------------------------------------------------------
# Frames of global pi rotations
#
# Up to phase, a product of global pi pulses is one of I, R_x, R_y, R_z
# (per qubit: 1, sigma_x, sigma_y, sigma_z). A frame is stored as None or
# an axis letter.

def _compose(first, then):
    """Frame after applying pulse axis ``then`` on top of frame ``first``."""
    if first is None:
        return then
    if then is None:
        return first
    if first == then:
        return None
    return next(a for a in AXES if a not in (first, then))


def _in_frame(h: PauliSum, frame) -> PauliSum:
    """``F^+ h F`` for the pi rotation ``F`` of the frame."""
    return h if frame is None else h.rotated(frame, 2)


def _pi_pulses(schedule: Schedule):
    for p in schedule.pulses:
        if p.half_turns is None:
            raise CompileError(f"only multiples of pi pulses are supported here, got angle {p.angle}")


def to_toggled(schedule: Schedule) -> Schedule:
    """Pulse-free schedule with the same propagator up to a global phase.

    Each Hamiltonian is rewritten in the frame of the pulses applied before
    it. The leftover frame, if the schedule is not cyclic, is kept as a
    final pulse.
    """
    _pi_pulses(schedule)
    frame = None
    items = []
    for it in schedule.items:
        if isinstance(it, Pulse):
            if it.half_turns % 2:
                frame = _compose(frame, it.axis)
        else:
            items.append(Evolution(_in_frame(it.hamiltonian, frame), it.duration, it.label))
    if frame is not None:
        items.append(Pulse(frame, math.pi))
    return Schedule(schedule.n_qubits, tuple(items), schedule.omegas)


def _is_physical(h: PauliSum, omegas: Sequence[float], tol: float) -> bool:
    """``h`` is ``+sum w_j I_jz + (diagonal couplings) + a sum_j I_jx``."""
    n = len(omegas)
    drive = None
    for label, c in h:
        if len(label) == 1:
            site, axis = label[0]
            if axis == "z":
                continue
            if axis != "x":
                return False
            if drive is None:
                drive = c
            elif abs(c - drive) > tol * max(abs(drive), 1.0):
                return False
        elif any(a != "z" for _, a in label):
            return False
    if drive is not None and len(h.by_weight(1).filter(lambda k: k[0][1] == "x")) != n:
        return False
    for j, w in enumerate(omegas, start=1):
        if abs(h.coefficient(((j, "z"),)) - w) > tol * max(abs(w), 1.0):
            return False
    return True


def _exact_pulse(prev, nxt):
    """Pulse ``F_next F_prev^+`` with the phase matched on every qubit, or None."""
    if prev == nxt:
        return None
    if prev is None:
        return Pulse(nxt, math.pi)
    if nxt is None:
        return Pulse(prev, -math.pi)
    # per qubit: sigma_b sigma_a = i eps_bac sigma_c and R_c(-+pi) = +-i sigma_c
    c = _compose(prev, nxt)
    eps = 1 if (nxt, prev, c) in (("x", "y", "z"), ("y", "z", "x"), ("z", "x", "y")) else -1
    return Pulse(c, -eps * math.pi)


def compile_to_physical(schedule: Schedule, omegas=None, *, tol: float = 1e-9) -> Schedule:
    """Physically executable schedule with the same propagator.

    Every segment is written as ``F^+ H_phys F`` with ``F`` a global pi
    rotation (or identity) and ``H_phys`` in the physical set. Frames are
    tried in the order: the previous segment's frame, identity, x, y, z,
    so pulses are only inserted where a segment cannot be reached from
    the current frame. The frame is returned to the identity at the end.

    Pulses already present in ``schedule`` are first absorbed with
    :func:`to_toggled`, so the output equals the input propagator up to a
    global phase.

    Raises
    ------
    CompileError
        If a segment is not reachable from the physical set.
    """
    omegas = schedule.omegas if omegas is None else tuple(omegas)
    if omegas is None:
        raise CompileError("the register Zeeman frequencies are needed to decide which terms are physical")
    if len(omegas) != schedule.n_qubits:
        raise CompileError("omegas do not match the register size")
    toggled = to_toggled(schedule)
    frame = None
    items = []
    for it in toggled.items:
        if isinstance(it, Pulse):
            continue  # leftover frame of a non-cyclic input, handled below
        for cand in (frame, None, "x", "y", "z"):
            phys = _in_frame(it.hamiltonian, cand)
            if _is_physical(phys, omegas, tol):
                break
        else:
            raise CompileError(f"segment {it.label!r} is not a global pi rotation of a physical Hamiltonian")
        p = _exact_pulse(frame, cand)
        if p is not None:
            items.append(p)
        items.append(Evolution(phys, it.duration, it.label))
        frame = cand
    final = toggled.pulses[0].axis if toggled.pulses else None
    p = _exact_pulse(frame, final)
    if p is not None:
        items.append(p)
    return Schedule(schedule.n_qubits, tuple(items), omegas)


def without_couplings(schedule: Schedule) -> Schedule:
    """Same schedule with every multi-spin term removed."""
    items = []
    for it in schedule.items:
        if isinstance(it, Evolution):
            it = Evolution(it.hamiltonian.by_weight(1), it.duration, it.label)
        items.append(it)
    return Schedule(schedule.n_qubits, tuple(items), schedule.omegas)


def wahuha_block(d, delta_t: float = 1.0, weights=(-1.0, -1.0, 2.0)) -> Schedule:
    """Three toggled segments of the dipolar averaging block.

    The first is ``sum_{j<k} d_jk (a I_jx I_kx + b I_jy I_ky + c I_jz I_kz)``
    with ``(a, b, c) = weights``; the other two are its images under global
    pi/2 rotations about x and about y. Their average is
    ``(a + b + c)/3`` times the isotropic coupling, which vanishes for the
    secular dipolar weights ``(-1, -1, 2)``.
    """
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[0] != d.shape[1]:
        raise ValueError("dipolar coupling matrix must be square")
    if not np.allclose(d, d.T, rtol=0, atol=0):
        raise ValueError("dipolar coupling matrix must be symmetric")
    if np.any(np.diag(d) != 0):
        raise ValueError("dipolar coupling matrix must have zero diagonal")
    n = d.shape[0]
    a, b, c = weights
    terms = {}
    for j in range(1, n + 1):
        for k in range(j + 1, n + 1):
            for axis, w in zip(AXES, (a, b, c)):
                terms[((j, axis), (k, axis))] = d[j - 1, k - 1] * w
    h1 = PauliSum(terms)
    items = (Evolution(h1, delta_t, "H1dd"),
             Evolution(h1.rotated("x", 1), delta_t, "H2dd"),
             Evolution(h1.rotated("y", 1), delta_t, "H3dd"))
    return Schedule(n, items)
