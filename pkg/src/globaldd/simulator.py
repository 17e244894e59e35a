"""Time evolution of pulse schedules and the noisy-ensemble decoupling experiment.

The experiment compares two evolutions of the same register over the same
noise realization:

* free: the bare Zeeman plus Ising Hamiltonian;
* decoupled: the compiled physical pulse schedule of repeated
  conjugated block pairs.

Couplings are redrawn for every segment of length ``delta_t``. At each
sample time the fidelity of the propagator is measured against a
reference, by default the coupling-free evolution of the same schedule,
so only the couplings can lower it.

Long noisy runs use a perturbative segment propagator. For a nominal
segment ``exp(M)`` with ``M = -i H0 dt`` and coupling deviations
``delta_e`` on the diagonal operators ``P_e``,

    exp(M + sum_e delta_e B_e) = U0 + sum_e delta_e E1[e]
                                 + sum_ef delta_e delta_f E2[e, f] + O(eps^3)

with ``B_e = -i P_e dt`` and ``eps = sum |delta_e| dt / 4``. ``E1`` and
``E2`` are read off one block-triangular matrix exponential per edge pair
(Van Loan's construction), so every segment costs one small real matrix
product. Segments whose ``eps`` exceeds ``DYSON_EPS_MAX`` are
exponentiated exactly instead.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from functools import reduce

import numpy as np
import scipy.linalg

from .operators import PauliSum, propagator
from .sequences import (BlockParams, Pulse, Schedule, basic_block, compile_to_physical,
                        conjugated_pair, insert_hahn_echo, repeat, without_couplings)
from .systems import CouplingNoise, RegisterSpec, sample_couplings

__all__ = [
    "DecayFit",
    "ExperimentConfig",
    "FidelityTrace",
    "decay_rate_ratio",
    "decoupling_chunk",
    "evolve",
    "extract_decay_rate",
    "read_trace_csv",
    "run_experiment",
    "write_trace_csv",
]

DYSON_EPS_MAX = 2e-5
REFERENCES = ("local", "lab")
METRICS = ("unitary", "state")


# --------------------------------------------------------------------------
# Reference evolution

def _coupling_pairs(schedule: Schedule) -> list:
    pairs = set()
    for ev in schedule.evolutions:
        for label, _ in ev.hamiltonian.by_weight(2):
            if all(a == "z" for _, a in label):
                pairs.add((label[0][0], label[1][0]))
    return sorted(pairs)


def _with_couplings(h: PauliSum, pairs, values) -> PauliSum:
    keys = {((j, "z"), (k, "z")) for j, k in pairs}
    kept = h.filter(lambda label: label not in keys)
    return kept + PauliSum({((j, "z"), (k, "z")): v for (j, k), v in zip(pairs, values)})


def evolve(schedule: Schedule, noise: CouplingNoise | None = None, rng: np.random.Generator | None = None,
           pairs=None) -> np.ndarray:
    """Ordered product of the item unitaries of ``schedule``.

    With ``noise``, every evolution segment gets fresh coupling strengths
    from :func:`~globaldd.systems.sample_couplings`, replacing the
    coefficients of the ``I_jz I_kz`` terms of ``pairs`` (default: all
    coupled pairs of the schedule, sorted) before exponentiation.
    """
    if noise is None:
        return schedule.propagator()
    pairs = _coupling_pairs(schedule) if pairs is None else [tuple(p) for p in pairs]
    if len(pairs) != len(noise.means):
        raise ValueError(f"noise has {len(noise.means)} edges but the schedule couples {len(pairs)} pairs")
    rng = noise.rng() if rng is None else rng
    n = schedule.n_qubits
    U = np.eye(2**n, dtype=complex)
    for it in schedule.items:
        if isinstance(it, Pulse):
            U = it.unitary(n) @ U
        else:
            J = sample_couplings(noise, rng)
            H = _with_couplings(it.hamiltonian, pairs, J).to_matrix(n)
            U = propagator(H, it.duration) @ U
    return U


# --------------------------------------------------------------------------
# Fast chunk propagators

def _ordered_product(mats: np.ndarray) -> np.ndarray:
    """``mats[-1] @ ... @ mats[0]`` by pairwise reduction."""
    while len(mats) > 1:
        odd = mats[-1:] if len(mats) % 2 else mats[:0]
        even = mats[: len(mats) - len(odd)]
        mats = np.concatenate([np.matmul(even[1::2], even[0::2]), odd])
    return mats[0]


class _ChunkEngine:
    """Propagator of a fixed pulse schedule with per-segment coupling deviations."""

    def __init__(self, schedule: Schedule, pairs, means):
        n = schedule.n_qubits
        self.dim = d = 2**n
        self.pairs = [tuple(p) for p in pairs]
        self.means = np.asarray(means, dtype=float)
        diag_ops = np.array([PauliSum({((j, "z"), (k, "z")): 1.0}).diagonal(n) for j, k in self.pairs])
        self.diag_ops = diag_ops.reshape(len(self.pairs), d)
        kinds, order, pulses = {}, [], ()
        self.kind_data = []
        for it in schedule.items:
            if isinstance(it, Pulse):
                pulses += ((it.axis, it.angle),)
                continue
            key = (id(it.hamiltonian), it.duration, pulses)
            if key not in kinds:
                h = _with_couplings(it.hamiltonian, self.pairs, self.means)
                kinds[key] = len(self.kind_data)
                self.kind_data.append(self._basis(h.to_matrix(n), it.duration, self._pulses(pulses, n)))
            order.append(kinds[key])
            pulses = ()
        self.tail = self._pulses(pulses, n)
        self.kind_of = np.array(order, dtype=int)
        self.durations = np.array([it.duration for it in schedule.evolutions])
        self.n_segments = len(order)

    @staticmethod
    def _pulses(pulses, n):
        U = np.eye(2**n, dtype=complex)
        for axis, angle in pulses:
            U = Pulse(axis, angle).unitary(n) @ U
        return U

    def _basis(self, H0, dt, pre):
        d = self.dim
        E = len(self.pairs)
        M = -1j * H0 * dt
        B = [-1j * np.diag(p) * dt for p in self.diag_ops]
        Z = np.zeros((d, d), dtype=complex)
        E1 = [None] * E
        E2 = np.empty((E, E, d, d), dtype=complex)
        U0 = None
        for e in range(E):
            for f in range(E):
                big = scipy.linalg.expm(np.block([[M, B[e], Z], [Z, M, B[f]], [Z, Z, M]]))
                U0 = big[:d, :d]
                E1[e] = big[:d, d:2 * d]
                E2[e, f] = big[:d, 2 * d:]
        if U0 is None:
            U0 = propagator(H0, dt)
        mats = [U0] + E1 + list(E2.reshape(E * E, d, d))
        basis = np.stack([m @ pre for m in mats]).reshape(len(mats), d * d)
        return {"H0": H0, "dt": dt, "pre": pre, "basis": np.ascontiguousarray(basis).view(np.float64)}

    def segment_unitaries(self, deltas: np.ndarray | None) -> np.ndarray:
        d, S, E = self.dim, self.n_segments, len(self.pairs)
        out = np.empty((S, d * d), dtype=complex)
        if deltas is None or E == 0:
            deltas = np.zeros((S, E))
        coeff = np.concatenate([np.ones((S, 1)), deltas,
                                (deltas[:, :, None] * deltas[:, None, :]).reshape(S, E * E)], axis=1)
        eps = np.abs(deltas).sum(axis=1) * self.durations / 4
        exact = eps > DYSON_EPS_MAX
        for k, kd in enumerate(self.kind_data):
            idx = np.flatnonzero((self.kind_of == k) & ~exact)
            if idx.size:
                out[idx] = (coeff[idx] @ kd["basis"]).view(complex)
        for s in np.flatnonzero(exact):
            kd = self.kind_data[self.kind_of[s]]
            H = kd["H0"] + np.diag(deltas[s] @ self.diag_ops)
            out[s] = (propagator(H, kd["dt"]) @ kd["pre"]).ravel()
        return out.reshape(S, d, d)

    def chunk(self, deltas: np.ndarray | None = None) -> np.ndarray:
        return self.tail @ _ordered_product(self.segment_unitaries(deltas))


# --------------------------------------------------------------------------
# Experiment

@dataclass(frozen=True)
class ExperimentConfig:
    """Settings of the free versus decoupled comparison.

    Parameters
    ----------
    register : RegisterSpec
        Nominal register; its couplings are the noise means.
    params : BlockParams
    noise : CouplingNoise or None
        Per-edge fluctuations, one draw per segment.
    total_time, sample_interval : float
        Seconds. ``sample_interval`` must hold a whole number of block
        pairs (``8 delta_t`` each).
    iterations : int
        Nesting depth of the decoupling; only 1 is simulated.
    ensemble_size : int
    reference : {"local", "lab"}
        Compare against the coupling-free evolution of the same schedule,
        or against the identity.
    metric : {"unitary", "state"}
        Operator fidelity, or the overlap of ``U psi`` with ``psi``.
    initial_state : sequence of complex, optional
        ``psi`` for the state metric; defaults to ``|+>`` on every qubit.
    hahn_echo : bool
        Insert an x echo in the middle of every sample interval.
    """

    register: RegisterSpec
    params: BlockParams
    noise: CouplingNoise | None = None
    total_time: float = 0.1
    sample_interval: float = 5e-4
    iterations: int = 1
    ensemble_size: int = 8
    reference: str = "local"
    metric: str = "unitary"
    initial_state: tuple | None = None
    hahn_echo: bool = False

    def __post_init__(self):
        if self.iterations != 1:
            raise ValueError("the experiment simulates one level of decoupling only (iterations = 1)")
        if self.reference not in REFERENCES:
            raise ValueError(f"reference must be one of {REFERENCES}")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if self.ensemble_size < 1:
            raise ValueError("ensemble_size must be at least 1")
        if not self.total_time >= self.sample_interval > 0:
            raise ValueError("need total_time >= sample_interval > 0")
        k = self.sample_interval / (8 * self.params.delta_t)
        if abs(k - round(k)) > 1e-6 * k or round(k) < 1:
            raise ValueError(f"sample_interval {self.sample_interval} is not a multiple of 8 delta_t")
        if self.noise is not None and len(self.noise.means) != len(self.register.edges):
            raise ValueError("noise must have one entry per register edge")
        if self.initial_state is not None:
            psi = np.asarray(self.initial_state, dtype=complex)
            if psi.shape != (2**self.register.n_qubits,):
                raise ValueError("initial_state has the wrong dimension")

    @property
    def pairs_per_sample(self) -> int:
        return int(round(self.sample_interval / (8 * self.params.delta_t)))

    @property
    def n_samples(self) -> int:
        return int(math.floor(self.total_time / self.sample_interval + 1e-9))

    def state(self) -> np.ndarray:
        if self.initial_state is not None:
            psi = np.asarray(self.initial_state, dtype=complex)
            return psi / np.linalg.norm(psi)
        plus = np.array([1, 1], dtype=complex) / math.sqrt(2)
        return reduce(np.kron, [plus] * self.register.n_qubits)

    def to_dict(self) -> dict:
        out = {
            "register": self.register.to_dict(),
            "delta_t_s": self.params.delta_t,
            "theta": self.params.theta,
            "total_time_s": self.total_time,
            "sample_interval_s": self.sample_interval,
            "iterations": self.iterations,
            "ensemble": self.ensemble_size,
            "reference": self.reference,
            "metric": self.metric,
            "hahn_echo": self.hahn_echo,
        }
        if self.noise is not None:
            out["noise"] = {"mean_hz": [m / (2 * np.pi) for m in self.noise.means],
                            "std_hz": [s / (2 * np.pi) for s in self.noise.stds],
                            "seed": self.noise.seed}
        return out


@dataclass
class FidelityTrace:
    times: np.ndarray
    mean_fidelity: np.ndarray
    members: np.ndarray | None = None  # (ensemble, samples)
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=float)
        self.mean_fidelity = np.asarray(self.mean_fidelity, dtype=float)
        if self.times.shape != self.mean_fidelity.shape:
            raise ValueError("times and fidelities differ in length")
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("sample times must increase")


def decoupling_pair(config: ExperimentConfig) -> Schedule:
    """Physical schedule of one conjugated block pair (cyclic)."""
    return compile_to_physical(conjugated_pair(basic_block(config.register, config.params)))


def decoupling_chunk(config: ExperimentConfig) -> Schedule:
    """Physical schedule of one sample interval of the decoupled evolution."""
    chunk = repeat(decoupling_pair(config), config.pairs_per_sample, check_rwa=False)
    if config.hahn_echo:
        chunk = compile_to_physical(insert_hahn_echo(chunk, "x"))
    return chunk


def _static_chunks(config: ExperimentConfig) -> tuple:
    """Noise-free ``(chunk, coupling-free chunk)`` propagators."""
    k = config.pairs_per_sample
    if config.hahn_echo:
        chunk = decoupling_chunk(config)
        return chunk.propagator(), without_couplings(chunk).propagator()
    pair = decoupling_pair(config)
    return (np.linalg.matrix_power(pair.propagator(), k),
            np.linalg.matrix_power(without_couplings(pair).propagator(), k))


def _metric(config: ExperimentConfig, psi):
    d = 2**config.register.n_qubits
    if config.metric == "state":
        return lambda U: abs(np.vdot(psi, U @ psi)) ** 2
    return lambda U: abs(np.trace(U)) ** 2 / d**2


def _diag_metric(config: ExperimentConfig, psi):
    d = 2**config.register.n_qubits
    if config.metric == "state":
        w = np.abs(psi) ** 2
        return lambda phases: abs(np.sum(w * phases)) ** 2
    return lambda phases: abs(np.sum(phases)) ** 2 / d**2


def run_experiment(config: ExperimentConfig) -> tuple:
    """Fidelity traces ``(decoupled, free)`` for every ensemble member.

    Both traces of a member see the same coupling draws: one per edge per
    segment, from the generator of ``(noise.seed, member)``. Samples are
    taken at the end of every sample interval, where the pulse frame is
    the identity. The ensemble is processed in member order so the
    output does not depend on scheduling.
    """
    reg, noise = config.register, config.noise
    n, d = reg.n_qubits, 2**reg.n_qubits
    n_samples = config.n_samples
    T = config.sample_interval
    times = T * np.arange(n_samples + 1)
    psi = config.state()
    measure = _metric(config, psi)
    measure_diag = _diag_metric(config, psi)

    pairs = reg.pairs
    static = noise is None or noise.is_static
    nominal, R_chunk = _static_chunks(config)
    engine = None if static else _ChunkEngine(decoupling_chunk(config), pairs, reg.couplings)
    S = 8 * config.pairs_per_sample
    dt = config.params.delta_t
    coupling_diag = np.array([PauliSum({((j, "z"), (k, "z")): 1.0}).diagonal(n) for j, k in pairs])
    coupling_diag = coupling_diag.reshape(len(pairs), d)

    # reference frames, one per sample
    if config.reference == "lab":
        R_chunk = np.eye(d, dtype=complex)
    refs = [np.eye(d, dtype=complex)]
    for _ in range(n_samples):
        refs.append(R_chunk @ refs[-1])
    lab_phase = np.zeros(d) if config.reference == "local" else reg.zeeman().diagonal(n)
    members = 1 if noise is None else config.ensemble_size
    dec = np.ones((members, n_samples + 1))
    free = np.ones((members, n_samples + 1))
    for m in range(members):
        rng = noise.rng(m) if noise is not None else None
        U = np.eye(d, dtype=complex)
        phase_sum = np.zeros(len(pairs))
        for s in range(1, n_samples + 1):
            if static:
                U = nominal @ U
                J = np.broadcast_to(reg.couplings if noise is None else noise.means, (S, len(pairs)))
            else:
                J = sample_couplings(noise, rng, size=S)
                U = engine.chunk(J - engine.means) @ U
            phase_sum += J.sum(axis=0) * dt
            dec[m, s] = measure(refs[s].conj().T @ U)
            phases = np.exp(-1j * (phase_sum @ coupling_diag + lab_phase * times[s]))
            free[m, s] = measure_diag(phases)
    if noise is None and config.ensemble_size > 1:
        dec = np.repeat(dec, config.ensemble_size, axis=0)
        free = np.repeat(free, config.ensemble_size, axis=0)
    dec = np.minimum(dec, 1.0)
    free = np.minimum(free, 1.0)
    meta = {"config": config.to_dict(), "seed": None if noise is None else noise.seed}
    return (FidelityTrace(times, dec.mean(axis=0), dec, {**meta, "trace": "decoupled"}),
            FidelityTrace(times, free.mean(axis=0), free, {**meta, "trace": "free"}))


# --------------------------------------------------------------------------
# Decay rates

@dataclass(frozen=True)
class DecayFit:
    """Least-squares fit of ``-log F`` on the leading window of a trace.

    ``rate`` is ``sqrt(quadratic)`` for the Gaussian model
    ``c0 + a t^2`` and ``linear`` for the exponential model ``c0 + b t``.
    """

    rate: float
    model: str
    quadratic: float
    linear: float
    rss_quadratic: float
    rss_linear: float
    n_points: int


def _fit(t, y, power):
    X = np.column_stack([np.ones_like(t), t**power])
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return coef[1], float(np.sum((X @ coef - y) ** 2))


def extract_decay_rate(trace: FidelityTrace, min_fidelity: float = 0.9, model: str | None = None) -> DecayFit:
    """Decay rate from the samples before the fidelity first drops below ``min_fidelity``.

    Both ``-log F = c0 + a t^2`` and ``c0 + b t`` are fitted; the one with
    the smaller residual is chosen unless ``model`` (``"quadratic"`` or
    ``"linear"``) is given.

    Raises
    ------
    ValueError
        If fewer than five samples lie in the window.
    """
    F = np.asarray(trace.mean_fidelity, dtype=float)
    t = np.asarray(trace.times, dtype=float)
    below = np.flatnonzero(F < min_fidelity)
    stop = below[0] if below.size else len(F)
    if stop < 5:
        raise ValueError(f"only {stop} samples above fidelity {min_fidelity}; need at least 5 to fit a decay")
    t, y = t[:stop], -np.log(np.clip(F[:stop], 1e-300, 1.0))
    a, rss_q = _fit(t, y, 2)
    b, rss_l = _fit(t, y, 1)
    if model is None:
        model = "quadratic" if rss_q <= rss_l else "linear"
    if model not in ("quadratic", "linear"):
        raise ValueError(f"unknown decay model {model!r}")
    rate = math.sqrt(max(a, 0.0)) if model == "quadratic" else max(b, 0.0)
    return DecayFit(rate, model, float(a), float(b), rss_q, rss_l, int(stop))


def decay_rate_ratio(free: FidelityTrace, decoupled: FidelityTrace, min_fidelity: float = 0.9) -> tuple:
    """``(ratio, free_fit, decoupled_fit)`` with both traces fitted by the free trace's model."""
    f = extract_decay_rate(free, min_fidelity)
    g = extract_decay_rate(decoupled, min_fidelity, model=f.model)
    ratio = f.rate / g.rate if g.rate > 0 else math.inf
    return ratio, f, g


# --------------------------------------------------------------------------
# CSV

def write_trace_csv(path_or_file, trace: FidelityTrace, version: str = "") -> None:
    """``time_s,mean_fidelity,member_0,...`` with ``#`` metadata lines first."""
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, "w", newline="") if own else path_or_file
    try:
        fh.write(f"# metadata: {json.dumps(trace.metadata, sort_keys=True)}\n")
        if version:
            fh.write(f"# version: {version}\n")
        members = trace.members if trace.members is not None else np.empty((0, len(trace.times)))
        writer = csv.writer(fh)
        writer.writerow(["time_s", "mean_fidelity"] + [f"member_{m}" for m in range(len(members))])
        for i, t in enumerate(trace.times):
            writer.writerow([repr(float(t)), repr(float(trace.mean_fidelity[i]))]
                            + [repr(float(v)) for v in members[:, i]])
    finally:
        if own:
            fh.close()


def read_trace_csv(path_or_file) -> FidelityTrace:
    own = isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__")
    fh = open(path_or_file, newline="") if own else path_or_file
    try:
        text = fh.read()
    finally:
        if own:
            fh.close()
    meta, rows = {}, []
    for line in text.splitlines():
        if line.startswith("# metadata: "):
            meta = json.loads(line[len("# metadata: "):])
        elif line.startswith("# version: "):
            meta["version"] = line[len("# version: "):]
        elif line.strip() and not line.startswith("#"):
            rows.append(line)
    reader = list(csv.reader(io.StringIO("\n".join(rows))))
    header, data = reader[0], np.array(reader[1:], dtype=float).reshape(-1, len(reader[0]))
    if header[:2] != ["time_s", "mean_fidelity"]:
        raise ValueError("not a fidelity trace: unexpected header")
    members = data[:, 2:].T if data.shape[1] > 2 else None
    return FidelityTrace(data[:, 0], data[:, 1], members, meta)
