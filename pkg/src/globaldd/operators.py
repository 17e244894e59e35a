"""Dense spin-1/2 operator algebra for small qubit registers.

Operators are plain complex ``numpy`` arrays of shape ``(2**N, 2**N)``.
Sites are numbered from 1 and qubit 1 is the leftmost tensor factor.
Single-spin operators are the spin matrices ``I_a = sigma_a / 2`` so
that their eigenvalues are +-1/2. All Hamiltonians are in rad/s.

:class:`PauliSum` is a symbolic companion: a mapping from products of
spin matrices to real coefficients. It is what schedules store, since
noise resampling and frame bookkeeping need to know which terms are
couplings and which are local.
"""

from __future__ import annotations

import itertools
import math
import re
from functools import reduce
from typing import Iterable, Mapping

import numpy as np

__all__ = [
    "AXES",
    "MAX_QUBITS",
    "SPIN",
    "PauliSum",
    "check_hermitian",
    "check_unitary",
    "commutator",
    "conjugate",
    "embed_pauli",
    "fidelity",
    "global_rotation",
    "pauli_decompose",
    "pauli_product",
    "propagator",
    "state_fidelity",
]

AXES = ("x", "y", "z")
MAX_QUBITS = 12
HERMITIAN_RTOL = 1e-12
UNITARY_ATOL = 1e-10

SIGMA = {
    "i": np.eye(2, dtype=complex),
    "x": np.array([[0, 1], [1, 0]], dtype=complex),
    "y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "z": np.array([[1, 0], [0, -1]], dtype=complex),
}
SPIN = {a: SIGMA[a] / 2 for a in AXES}

# Levi-Civita symbol restricted to axis labels.
_EPS = {("x", "y"): ("z", 1), ("y", "z"): ("x", 1), ("z", "x"): ("y", 1),
        ("y", "x"): ("z", -1), ("z", "y"): ("x", -1), ("x", "z"): ("y", -1)}


def _check_axis(axis: str) -> str:
    axis = str(axis).lower()
    if axis not in AXES:
        raise ValueError(f"axis must be one of {AXES}, got {axis!r}")
    return axis


def _check_size(n_qubits: int) -> int:
    if int(n_qubits) != n_qubits or n_qubits < 1:
        raise ValueError(f"n_qubits must be a positive integer, got {n_qubits!r}")
    if n_qubits > MAX_QUBITS:
        raise ValueError(
            f"n_qubits={n_qubits} exceeds the dense-simulation guard of {MAX_QUBITS}")
    return int(n_qubits)


def embed_pauli(site: int, axis: str, n_qubits: int) -> np.ndarray:
    """Spin operator ``I_axis`` acting on ``site`` of an ``n_qubits`` register."""
    n_qubits = _check_size(n_qubits)
    axis = _check_axis(axis)
    if not 1 <= site <= n_qubits:
        raise ValueError(f"site {site} out of range 1..{n_qubits}")
    factors = [SPIN[axis] if k == site else SIGMA["i"] for k in range(1, n_qubits + 1)]
    return reduce(np.kron, factors)


def pauli_product(label, n_qubits: int) -> np.ndarray:
    """Matrix of a product of spin operators, e.g. ``"1y 2z"``."""
    n_qubits = _check_size(n_qubits)
    factors = [SIGMA["i"]] * n_qubits
    for site, axis in _parse_label(label):
        if site > n_qubits:
            raise ValueError(f"label {label!r} addresses site {site} > {n_qubits}")
        factors[site - 1] = SPIN[axis]
    return reduce(np.kron, factors)


def global_rotation(axis: str, angle: float, n_qubits: int) -> np.ndarray:
    """``exp(-i angle sum_j I_j,axis)``, i.e. the same rotation on every qubit."""
    n_qubits = _check_size(n_qubits)
    axis = _check_axis(axis)
    if not np.isfinite(angle):
        raise ValueError("rotation angle must be finite")
    u = math.cos(angle / 2) * SIGMA["i"] - 1j * math.sin(angle / 2) * SIGMA[axis]
    return reduce(np.kron, [u] * n_qubits)


def check_hermitian(H: np.ndarray, name: str = "operator") -> np.ndarray:
    H = np.asarray(H, dtype=complex)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {H.shape}")
    scale = max(np.abs(H).max(), 1e-300)
    if np.abs(H - H.conj().T).max() > HERMITIAN_RTOL * scale:
        raise ValueError(f"{name} is not Hermitian")
    return H


def check_unitary(U: np.ndarray, name: str = "operator", atol: float = UNITARY_ATOL) -> np.ndarray:
    U = np.asarray(U, dtype=complex)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ValueError(f"{name} must be a square matrix, got shape {U.shape}")
    if np.abs(U.conj().T @ U - np.eye(U.shape[0])).max() > atol:
        raise ValueError(f"{name} is not unitary")
    return U


def propagator(H: np.ndarray, t: float) -> np.ndarray:
    """``exp(-i H t)`` through the eigendecomposition of the Hermitian ``H``."""
    H = check_hermitian(H, "Hamiltonian")
    if t < 0:
        raise ValueError("evolution time must be non-negative")
    w, V = np.linalg.eigh(H)
    return (V * np.exp(-1j * w * t)) @ V.conj().T


def conjugate(H: np.ndarray, U: np.ndarray) -> np.ndarray:
    """``U^dagger H U``."""
    H = np.asarray(H)
    U = np.asarray(U)
    if H.shape != U.shape:
        raise ValueError(f"dimension mismatch: {H.shape} vs {U.shape}")
    out = U.conj().T @ H @ U
    return (out + out.conj().T) / 2


def commutator(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape:
        raise ValueError(f"dimension mismatch: {A.shape} vs {B.shape}")
    return A @ B - B @ A


def fidelity(U1: np.ndarray, U2: np.ndarray) -> float:
    """Phase-insensitive overlap ``|tr(U1 U2^+)|^2 / (|tr(U2 U2^+)| |tr(U1 U1^+)|)``.

    Equals 1 exactly when ``U1 = exp(i alpha) U2``.
    """
    U1 = np.asarray(U1)
    U2 = np.asarray(U2)
    if U1.shape != U2.shape:
        raise ValueError(f"dimension mismatch: {U1.shape} vs {U2.shape}")
    overlap = np.vdot(U2, U1)  # tr(U1 U2^+)
    norm = np.vdot(U1, U1).real * np.vdot(U2, U2).real
    return float(min(abs(overlap) ** 2 / norm, 1.0))


def state_fidelity(U: np.ndarray, psi: np.ndarray) -> float:
    """Return ``|<psi|U|psi>|^2`` for a normalized state ``psi``."""
    psi = np.asarray(psi, dtype=complex).ravel()
    if abs(np.linalg.norm(psi) - 1) > 1e-12:
        raise ValueError("state vector is not normalized")
    if U.shape != (psi.size, psi.size):
        raise ValueError(f"dimension mismatch: {U.shape} vs state of size {psi.size}")
    return float(min(abs(np.vdot(psi, U @ psi)) ** 2, 1.0))


# --------------------------------------------------------------------------
# Symbolic sums of spin products

_TOKEN = re.compile(r"^(\d+)([xyz])$")


def _parse_label(label) -> tuple:
    """Canonical label: tuple of ``(site, axis)`` sorted by site."""
    if isinstance(label, tuple):
        items = label
    else:
        text = str(label).strip()
        if text in ("", "I"):
            return ()
        items = []
        for tok in text.replace("*", " ").split():
            m = _TOKEN.match(tok)
            if not m:
                raise ValueError(f"bad operator token {tok!r} in label {label!r}")
            items.append((int(m.group(1)), m.group(2)))
    items = sorted((int(s), _check_axis(a)) for s, a in items)
    sites = [s for s, _ in items]
    if len(set(sites)) != len(sites) or (sites and sites[0] < 1):
        raise ValueError(f"invalid label {label!r}")
    return tuple(items)


def label_str(label: tuple) -> str:
    return " ".join(f"{s}{a}" for s, a in label) if label else "I"


class PauliSum:
    """Real linear combination of products of spin operators.

    >>> H = PauliSum({"1z": 1.0, "1z 2z": 0.5})
    >>> H.coefficient("2z 1z")
    0.5
    """

    __slots__ = ("_terms",)

    def __init__(self, terms: Mapping | Iterable = (), *, tol: float = 0.0):
        acc: dict = {}
        items = terms.items() if isinstance(terms, Mapping) else terms
        for label, coef in items:
            key = _parse_label(label)
            acc[key] = acc.get(key, 0.0) + float(coef)
        self._terms = {k: v for k, v in acc.items() if abs(v) > tol}

    # mapping-like access
    def __iter__(self):
        return iter(self._terms.items())

    def __len__(self):
        return len(self._terms)

    def __eq__(self, other):
        return isinstance(other, PauliSum) and self._terms == other._terms

    def __hash__(self):
        return hash(frozenset(self._terms.items()))

    def __repr__(self):
        body = ", ".join(f"{label_str(k)!r}: {v:.6g}" for k, v in sorted(self._terms.items()))
        return f"PauliSum({{{body}}})"

    def coefficient(self, label) -> float:
        return self._terms.get(_parse_label(label), 0.0)

    def labels(self):
        return list(self._terms)

    def weight(self, label) -> int:
        return len(_parse_label(label))

    def to_dict(self) -> dict:
        return {label_str(k): v for k, v in sorted(self._terms.items())}

    def __add__(self, other):
        if not isinstance(other, PauliSum):
            return NotImplemented
        return PauliSum(itertools.chain(self._terms.items(), other._terms.items()))

    def __neg__(self):
        return PauliSum({k: -v for k, v in self._terms.items()})

    def __sub__(self, other):
        return self + (-other)

    def __mul__(self, scalar):
        return PauliSum({k: v * float(scalar) for k, v in self._terms.items()})

    __rmul__ = __mul__

    def filter(self, predicate) -> "PauliSum":
        """Keep the terms whose label satisfies ``predicate(label_tuple)``."""
        return PauliSum({k: v for k, v in self._terms.items() if predicate(k)})

    def by_weight(self, weight: int) -> "PauliSum":
        return self.filter(lambda k: len(k) == weight)

    def max_site(self) -> int:
        return max((s for k in self._terms for s, _ in k), default=0)

    def is_diagonal(self) -> bool:
        return all(a == "z" for k in self._terms for _, a in k)

    def rotated(self, axis: str, quarter_turns: int) -> "PauliSum":
        """Symbolic ``U^+ H U`` for ``U = global_rotation(axis, quarter_turns * pi/2)``."""
        axis = _check_axis(axis)
        q = int(quarter_turns) % 4
        out = {}
        for label, coef in self._terms.items():
            sign = 1.0
            new = []
            for site, b in label:
                if b != axis and q:
                    if q == 2:
                        sign = -sign
                    else:
                        c, eps = _EPS[(axis, b)]
                        # cos(phi) b - sin(phi) eps c  with phi = q*pi/2
                        sign *= -eps if q == 1 else eps
                        b = c
                new.append((site, b))
            key = tuple(sorted(new))
            out[key] = out.get(key, 0.0) + sign * coef
        return PauliSum(out)

    def to_matrix(self, n_qubits: int) -> np.ndarray:
        n_qubits = _check_size(n_qubits)
        if self.max_site() > n_qubits:
            raise ValueError(f"operator addresses site {self.max_site()} > {n_qubits}")
        dim = 2 ** n_qubits
        if self.is_diagonal():
            return np.diag(self.diagonal(n_qubits)).astype(complex)
        H = np.zeros((dim, dim), dtype=complex)
        for label, coef in self._terms.items():
            H += coef * pauli_product(label, n_qubits)
        return H

    def diagonal(self, n_qubits: int) -> np.ndarray:
        """Diagonal of a z-only operator without building the full matrix."""
        if not self.is_diagonal():
            raise ValueError("operator has off-diagonal terms")
        # bit k of the basis index (MSB = qubit 1) set means spin down
        idx = np.arange(2 ** n_qubits)
        spins = 0.5 - ((idx[:, None] >> (n_qubits - 1 - np.arange(n_qubits))) & 1)
        d = np.zeros(2 ** n_qubits)
        for label, coef in self._terms.items():
            term = np.full(2 ** n_qubits, coef)
            for site, _ in label:
                term = term * spins[:, site - 1]
            d += term
        return d


def pauli_decompose(H: np.ndarray, n_qubits: int | None = None, tol: float = 1e-12) -> PauliSum:
    """Expand a Hermitian matrix in products of spin operators.

    Coefficients are ``tr(P H) / tr(P P)`` for each product ``P``, which
    is unambiguous because distinct products are trace-orthogonal.
    Terms with ``|coef| <= tol * max|H|`` are dropped.
    """
    H = np.asarray(H, dtype=complex)
    dim = H.shape[0]
    n = int(round(math.log2(dim))) if n_qubits is None else n_qubits
    _check_size(n)
    if H.shape != (2 ** n, 2 ** n):
        raise ValueError(f"matrix shape {H.shape} does not match {n} qubits")
    coeffs = _decompose_coefficients(H, n)
    scale = max(np.abs(H).max(), 1e-300)
    out = {}
    for idx in zip(*np.nonzero(np.abs(coeffs) > tol * scale)):
        label = tuple((k + 1, "ixyz"[p]) for k, p in enumerate(idx) if p)
        c = coeffs[idx].real * 2 ** len(label)  # sigma products -> spin products
        out[label] = c
    return PauliSum(out)


def _decompose_coefficients(H: np.ndarray, n: int) -> np.ndarray:
    """Array ``c[p1..pn] = tr(sigma_p1 x ... x sigma_pn H) / 2**n``."""
    basis = np.stack([SIGMA[a] for a in "ixyz"])  # basis[p, col, row]
    T = H.reshape((2,) * (2 * n))
    for j in range(n):
        # leading axis is the row index of site j+1, its column sits n-j further on
        T = np.tensordot(T, basis, axes=([0, n - j], [2, 1]))
    return T / 2 ** n
