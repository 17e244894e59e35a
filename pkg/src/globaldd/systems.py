"""Qubit registers: Zeeman splittings, Ising coupling graphs and coupling noise.

All frequencies are stored in rad/s. Helpers that take values in Hz say
so in their argument names.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy import constants

from .operators import MAX_QUBITS, PauliSum

__all__ = [
    "CouplingNoise",
    "Geometry",
    "RegisterSpec",
    "RegisterValidityWarning",
    "Topology",
    "build_register",
    "chain_edges",
    "dipolar_coupling",
    "lattice_noise",
    "lattice_register",
    "sample_couplings",
    "square_lattice_edges",
    "zeeman_from_gradient",
]

TWO_PI = 2 * np.pi
# min |w_j - w_k| / max J below which the secular picture is doubtful
VALIDITY_RATIO = 100.0
# mu_0 / 4 pi in T m / A
MU0_OVER_4PI = constants.mu_0 / (4 * np.pi)
GAMMA_SI29 = -5.3190e7  # rad / (s T)

# Four-spin square-lattice example: sites 1 2 / 3 4 in row-major order.
LATTICE_ZEEMAN_HZ = (62.8e3, 95.9e3, 120.1e3, 153.18e3)
LATTICE_COUPLING_HZ = (17.3, 17.9, 18.5, 19.2, 6.1, 6.6)
NOISE_PRESETS_HZ = {
    # standard deviation for (adjacent, diagonal) edges
    "moderate": (9.0, 3.0),
    "strong": (10.0, 5.0),
}


class RegisterValidityWarning(UserWarning):
    """Zeeman differences are not large compared with the couplings."""


@dataclass(frozen=True)
class RegisterSpec:
    """Register of ``n_qubits`` spins with Zeeman terms and Ising couplings.

    Parameters
    ----------
    n_qubits : int
    omegas : sequence of float
        Zeeman angular frequencies ``w_j`` in rad/s, site ``j = 1..N``.
    edges : sequence of (j, k, J)
        Coupled pairs with ``J_jk`` in rad/s. Sites are 1-based.
    edge_kinds : sequence of str, optional
        Free-form tag per edge (``"adjacent"``, ``"diagonal"``...) used to
        assign noise presets.
    """

    n_qubits: int
    omegas: tuple
    edges: tuple
    edge_kinds: tuple = ()

    def __post_init__(self):
        n = self.n_qubits
        if int(n) != n or not 1 <= n <= MAX_QUBITS:
            raise ValueError(f"n_qubits must be in 1..{MAX_QUBITS}, got {n!r}")
        omegas = tuple(float(w) for w in self.omegas)
        if len(omegas) != n:
            raise ValueError(f"expected {n} Zeeman frequencies, got {len(omegas)}")
        if not all(np.isfinite(omegas)):
            raise ValueError("Zeeman frequencies must be finite")
        edges = []
        seen = set()
        for e in self.edges:
            j, k, J = int(e[0]), int(e[1]), float(e[2])
            if j == k:
                raise ValueError(f"self-loop on site {j}")
            if not (1 <= j <= n and 1 <= k <= n):
                raise ValueError(f"edge ({j}, {k}) outside sites 1..{n}")
            key = (min(j, k), max(j, k))
            if key in seen:
                raise ValueError(f"duplicate edge {key}")
            if not np.isfinite(J):
                raise ValueError(f"coupling on edge {key} is not finite")
            seen.add(key)
            edges.append((key[0], key[1], J))
        kinds = tuple(self.edge_kinds) or ("edge",) * len(edges)
        if len(kinds) != len(edges):
            raise ValueError("edge_kinds must have one entry per edge")
        object.__setattr__(self, "omegas", omegas)
        object.__setattr__(self, "edges", tuple(edges))
        object.__setattr__(self, "edge_kinds", kinds)

    @property
    def pairs(self) -> list:
        return [(j, k) for j, k, _ in self.edges]

    @property
    def couplings(self) -> np.ndarray:
        return np.array([J for _, _, J in self.edges])

    def with_couplings(self, couplings) -> "RegisterSpec":
        couplings = np.asarray(couplings, dtype=float)
        if couplings.shape != (len(self.edges),):
            raise ValueError(f"expected {len(self.edges)} couplings, got shape {couplings.shape}")
        edges = tuple((j, k, J) for (j, k), J in zip(self.pairs, couplings))
        return RegisterSpec(self.n_qubits, self.omegas, edges, self.edge_kinds)

    def with_omegas(self, omegas) -> "RegisterSpec":
        return RegisterSpec(self.n_qubits, tuple(omegas), self.edges, self.edge_kinds)

    def zeeman(self) -> PauliSum:
        """``sum_j w_j I_jz``."""
        return PauliSum({((j, "z"),): w for j, w in enumerate(self.omegas, start=1)})

    def coupling(self, couplings=None) -> PauliSum:
        """``sum_(jk) J_jk I_jz I_kz``, optionally with replacement strengths."""
        J = self.couplings if couplings is None else np.asarray(couplings, dtype=float)
        return PauliSum({((j, "z"), (k, "z")): c for (j, k), c in zip(self.pairs, J)})

    def hamiltonian(self, couplings=None) -> PauliSum:
        return self.zeeman() + self.coupling(couplings)

    def validity_ratio(self) -> float:
        """``min |w_j - w_k| / max |J_jk|`` over coupled pairs (inf when uncoupled)."""
        J = np.abs(self.couplings)
        if J.size == 0 or J.max() == 0:
            return np.inf
        gaps = [abs(self.omegas[j - 1] - self.omegas[k - 1]) for j, k in self.pairs]
        return float(min(gaps) / J.max())

    def check_validity(self, ratio: float = VALIDITY_RATIO) -> bool:
        ok = self.validity_ratio() >= ratio
        if not ok:
            warnings.warn(
                f"min Zeeman difference / max coupling = {self.validity_ratio():.3g} < {ratio:g}; "
                "couplings are not small compared with the Zeeman differences",
                RegisterValidityWarning, stacklevel=2)
        return ok

    def to_dict(self) -> dict:
        """Plain form in Hz."""
        return {
            "n_qubits": self.n_qubits,
            "zeeman_hz": [w / TWO_PI for w in self.omegas],
            "edges": [[j, k, J / TWO_PI] for j, k, J in self.edges],
            "edge_kinds": list(self.edge_kinds),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RegisterSpec":
        return cls(
            int(data["n_qubits"]),
            tuple(TWO_PI * float(w) for w in data["zeeman_hz"]),
            tuple((int(j), int(k), TWO_PI * float(J)) for j, k, J in data["edges"]),
            tuple(data.get("edge_kinds", ())),
        )


# --------------------------------------------------------------------------
# Topologies

def chain_edges(n: int) -> list:
    """Nearest-neighbour pairs ``(j, j+1, "adjacent")`` of a linear chain."""
    if n < 1:
        raise ValueError("chain needs at least one site")
    return [(j, j + 1, "adjacent") for j in range(1, n)]


def square_lattice_edges(rows: int, cols: int, diagonals: bool = False) -> list:
    """Pairs of a ``rows x cols`` lattice with sites numbered row-major from 1.

    Adjacent pairs come first, sorted; diagonal pairs (both directions of
    every plaquette) follow when ``diagonals`` is set.
    """
    if rows < 1 or cols < 1:
        raise ValueError("lattice extents must be positive")
    site = lambda r, c: r * cols + c + 1
    adjacent, diag = [], []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                adjacent.append((site(r, c), site(r, c + 1)))
            if r + 1 < rows:
                adjacent.append((site(r, c), site(r + 1, c)))
            if diagonals and r + 1 < rows and c + 1 < cols:
                diag.append((site(r, c), site(r + 1, c + 1)))
                diag.append((site(r, c + 1), site(r + 1, c)))
    return ([(j, k, "adjacent") for j, k in sorted(adjacent)]
            + [(j, k, "diagonal") for j, k in sorted(diag)])


@dataclass(frozen=True)
class Topology:
    """Coupling graph shape.

    ``kind`` is ``"chain"`` (uses ``n``), ``"square"`` (uses ``rows``,
    ``cols`` and ``diagonals``) or ``"explicit"`` (uses ``edges``, a list
    of ``(j, k)`` or ``(j, k, kind)``).
    """

    kind: str
    n: int = 0
    rows: int = 0
    cols: int = 0
    diagonals: bool = False
    edges: tuple = ()

    def n_qubits(self) -> int:
        if self.kind == "chain":
            return self.n
        if self.kind == "square":
            return self.rows * self.cols
        if self.kind == "explicit":
            return self.n or max((max(e[0], e[1]) for e in self.edges), default=0)
        raise ValueError(f"unknown topology kind {self.kind!r}")

    def edge_list(self) -> list:
        if self.kind == "chain":
            return chain_edges(self.n)
        if self.kind == "square":
            return square_lattice_edges(self.rows, self.cols, self.diagonals)
        if self.kind == "explicit":
            return [(int(e[0]), int(e[1]), e[2] if len(e) > 2 else "edge") for e in self.edges]
        raise ValueError(f"unknown topology kind {self.kind!r}")


def build_register(topology: Topology, omegas, couplings, *, check: bool = True) -> RegisterSpec:
    """Register with the edges of ``topology``.

    Parameters
    ----------
    topology : Topology
    omegas : sequence of float
        Zeeman frequencies in rad/s, one per site.
    couplings : float or sequence of float
        Coupling strength in rad/s for every edge, in the topology's edge
        order, or a single value shared by all edges.
    check : bool
        Emit :class:`RegisterValidityWarning` if the couplings are not
        small compared with the Zeeman differences.
    """
    edges = topology.edge_list()
    n = topology.n_qubits()
    if len(omegas) != n:
        raise ValueError(f"topology has {n} sites but {len(omegas)} Zeeman frequencies were given")
    J = np.broadcast_to(np.asarray(couplings, dtype=float), (len(edges),)) \
        if np.ndim(couplings) == 0 else np.asarray(couplings, dtype=float)
    if J.shape != (len(edges),):
        raise ValueError(f"topology has {len(edges)} edges but {J.size} couplings were given")
    reg = RegisterSpec(n, tuple(omegas), tuple((j, k, c) for (j, k, _), c in zip(edges, J)),
                       tuple(kind for _, _, kind in edges))
    if check:
        reg.check_validity()
    return reg


# --------------------------------------------------------------------------
# Geometry

@dataclass(frozen=True)
class Geometry:
    """Spin positions in a static field with a linear gradient.

    Parameters
    ----------
    positions : (N, 3) array, metres
    field_direction : 3-vector
        Direction of the applied field; normalized on construction.
    gyromagnetic_ratio : float
        rad / (s T).
    field_gradient : float
        T/m, along ``gradient_direction``.
    base_field : float
        T. Its Zeeman contribution is the common rotating-frame offset.
    gradient_direction : 3-vector, optional
        Defaults to ``field_direction``.
    """

    positions: np.ndarray
    field_direction: tuple = (0.0, 0.0, 1.0)
    gyromagnetic_ratio: float = GAMMA_SI29
    field_gradient: float = 0.0
    base_field: float = 0.0
    gradient_direction: tuple | None = None

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ValueError("positions must have shape (N, 3)")
        for i in range(len(pos)):
            for j in range(i):
                if np.allclose(pos[i], pos[j], rtol=0, atol=1e-15):
                    raise ValueError(f"sites {j + 1} and {i + 1} coincide")
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "field_direction", _unit(self.field_direction))
        g = self.field_direction if self.gradient_direction is None else _unit(self.gradient_direction)
        object.__setattr__(self, "gradient_direction", g)


def _unit(v) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    norm = np.linalg.norm(v)
    if v.shape != (3,) or norm == 0:
        raise ValueError("direction must be a nonzero 3-vector")
    return v / norm


def dipolar_coupling(geometry: Geometry, i: int, j: int) -> float:
    """Secular dipolar ``J_ij`` in rad/s between sites ``i`` and ``j`` (1-based).

    ``J = (mu0/4pi) gamma^2 hbar (1 - 3 cos^2 theta) / r^3`` where ``theta``
    is the angle between the bond and the field.
    """
    if i == j:
        raise ValueError("dipolar coupling needs two distinct sites")
    r = geometry.positions[j - 1] - geometry.positions[i - 1]
    dist = np.linalg.norm(r)
    if dist == 0:
        raise ValueError(f"sites {i} and {j} coincide")
    cos_t = float(r @ geometry.field_direction) / dist
    g = geometry.gyromagnetic_ratio
    return float(MU0_OVER_4PI * g**2 * constants.hbar * (1 - 3 * cos_t**2) / dist**3)


def zeeman_from_gradient(geometry: Geometry) -> np.ndarray:
    """Zeeman frequencies ``gamma (B0 + G r_j.g) - gamma B0`` in rad/s."""
    proj = geometry.positions @ geometry.gradient_direction
    g = geometry.gyromagnetic_ratio
    return g * (geometry.base_field + geometry.field_gradient * proj) - g * geometry.base_field


# --------------------------------------------------------------------------
# Noise

@dataclass(frozen=True)
class CouplingNoise:
    """Independent normal fluctuations of every coupling, redrawn per segment.

    Parameters
    ----------
    means, stds : sequence of float
        Per-edge mean and standard deviation in rad/s.
    seed : int
    """

    means: tuple
    stds: tuple
    seed: int = 0

    def __post_init__(self):
        means = tuple(float(m) for m in self.means)
        stds = tuple(float(s) for s in self.stds)
        if len(means) != len(stds):
            raise ValueError("means and stds must have the same length")
        if any(s < 0 or not np.isfinite(s) for s in stds):
            raise ValueError("standard deviations must be finite and non-negative")
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "stds", stds)

    @property
    def is_static(self) -> bool:
        return not any(self.stds)

    def rng(self, member: int = 0) -> np.random.Generator:
        """Generator for ensemble member ``member``, independent of the others."""
        return np.random.default_rng(np.random.SeedSequence([int(self.seed), int(member)]))


def sample_couplings(noise: CouplingNoise, rng: np.random.Generator, size=None) -> np.ndarray:
    """One draw per edge, shape ``size + (n_edges,)``.

    Negative draws are kept: truncating would bias the mean.
    """
    size = () if size is None else tuple(np.atleast_1d(size))
    means = np.asarray(noise.means)
    if noise.is_static:
        return np.broadcast_to(means, size + means.shape).copy()
    return rng.normal(means, noise.stds, size=size + means.shape)


# --------------------------------------------------------------------------
# Presets

def lattice_register() -> RegisterSpec:
    """Four spins on a 2x2 lattice with adjacent and diagonal couplings."""
    return build_register(
        Topology("square", rows=2, cols=2, diagonals=True),
        [TWO_PI * f for f in LATTICE_ZEEMAN_HZ],
        [TWO_PI * J for J in LATTICE_COUPLING_HZ],
    )


def lattice_noise(preset: str = "moderate", seed: int = 0, register: RegisterSpec | None = None) -> CouplingNoise:
    """Per-edge noise with standard deviations chosen by edge kind."""
    if preset not in NOISE_PRESETS_HZ:
        raise ValueError(f"unknown noise preset {preset!r}; choose from {sorted(NOISE_PRESETS_HZ)}")
    reg = lattice_register() if register is None else register
    adj, diag = NOISE_PRESETS_HZ[preset]
    stds = [TWO_PI * (diag if kind == "diagonal" else adj) for kind in reg.edge_kinds]
    return CouplingNoise(tuple(reg.couplings), tuple(stds), seed)
