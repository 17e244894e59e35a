"""Average Hamiltonians of piecewise-constant schedules.

Convention: segments are listed in the order they act, so the cycle
propagator is ``U = exp(-i H_m t_m) ... exp(-i H_1 t_1)`` and the
average Hamiltonian is defined by ``U = exp(-i Hbar t)`` with
``t = sum t_k``.

With ``A_k = -i H_k t_k`` the Magnus exponent ``Omega = log U`` has

    Omega_1 = sum_k A_k
    Omega_2 = 1/2 sum_{i<j} [A_j, A_i]
    Omega_3 = 1/6 sum_{i<j<k} ([A_k,[A_j,A_i]] + [A_i,[A_j,A_k]])
              + 1/12 sum_{i<j} ([A_j,[A_j,A_i]] + [A_i,[A_i,A_j]])

and ``Hbar^(n) = (i/t) Omega_{n+1}``. The second-order term has the
opposite overall sign to the ``+1/(12t)`` prefactor sometimes printed
for it; :func:`exact_generator` is the arbiter and the tests check the
sign against it.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
import scipy.linalg

from .operators import check_hermitian

__all__ = ["BranchCutError", "MagnusResult", "Segment", "exact_generator", "magnus_terms"]

# largest eigenphase of the cycle propagator allowed for the principal log
BRANCH_MARGIN = 0.1


class BranchCutError(ArithmeticError):
    """The cycle propagator has an eigenphase too close to +-pi."""


@dataclass(frozen=True)
class Segment:
    hamiltonian: np.ndarray
    duration: float

    def __post_init__(self):
        if not (np.isfinite(self.duration) and self.duration > 0):
            raise ValueError(f"segment duration must be positive and finite, got {self.duration}")


@dataclass(frozen=True)
class MagnusResult:
    order0: np.ndarray
    order1: np.ndarray
    order2: np.ndarray
    total_time: float

    def truncated(self, order: int = 2) -> np.ndarray:
        """Sum of the terms up to and including ``order``."""
        return sum((self.order0, self.order1, self.order2)[: order + 1])


def _as_segments(segments) -> list[Segment]:
    segs = [s if isinstance(s, Segment) else Segment(*s) for s in segments]
    if not segs:
        raise ValueError("schedule has no segments")
    shape = np.shape(segs[0].hamiltonian)
    for s in segs:
        if np.shape(s.hamiltonian) != shape:
            raise ValueError("segment Hamiltonians have mismatched dimensions")
    return segs


def _comm(a, b):
    return a @ b - b @ a


def _hermitian_part(m):
    return (m + m.conj().T) / 2


def magnus_terms(segments: Sequence[Segment]) -> MagnusResult:
    """Zeroth, first and second order average Hamiltonian.

    Segments are folded in one at a time with the two-factor
    Baker-Campbell-Hausdorff series ``log(e^X e^Z)`` truncated by degree:
    appending ``X = A_j`` to a prefix with exponent ``Z = Z1 + Z2 + Z3``
    gives

        Z1 <- Z1 + X
        Z2 <- Z2 + [X, Z1]/2
        Z3 <- Z3 + [X, Z2]/2 + ([X,[X,Z1]] + [Z1,[Z1,X]])/12

    which reproduces the Magnus sums above exactly at degrees 1-3 with a
    cost linear in the number of segments.
    """
    segs = _as_segments(segments)
    t = float(sum(s.duration for s in segs))
    Z1 = Z2 = Z3 = 0
    for s in segs:
        X = -1j * check_hermitian(s.hamiltonian, "segment Hamiltonian") * s.duration
        if isinstance(Z1, int):
            Z1, Z2, Z3 = X, np.zeros_like(X), np.zeros_like(X)
            continue
        Z3 = Z3 + _comm(X, Z2) / 2 + (_comm(X, _comm(X, Z1)) + _comm(Z1, _comm(Z1, X))) / 12
        Z2 = Z2 + _comm(X, Z1) / 2
        Z1 = Z1 + X
    return MagnusResult(
        order0=_hermitian_part(1j * Z1 / t),
        order1=_hermitian_part(1j * Z2 / t),
        order2=_hermitian_part(1j * Z3 / t),
        total_time=t,
    )


def exact_generator(segments: Sequence[Segment]) -> np.ndarray:
    """``(i/t) log U`` of the ordered cycle propagator, principal branch.

    Raises :class:`BranchCutError` when any eigenphase of ``U`` lies
    within ``BRANCH_MARGIN`` of +-pi, where the principal logarithm would
    silently jump sheets.
    """
    segs = _as_segments(segments)
    U = np.eye(np.shape(segs[0].hamiltonian)[0], dtype=complex)
    for s in segs:
        H = check_hermitian(s.hamiltonian, "segment Hamiltonian")
        w, V = np.linalg.eigh(H)
        U = (V * np.exp(-1j * w * s.duration)) @ V.conj().T @ U
    t = float(sum(s.duration for s in segs))
    return generator_from_unitary(U, t)


def generator_from_unitary(U: np.ndarray, t: float) -> np.ndarray:
    """Hermitian ``H`` with ``U = exp(-i H t)`` on the principal branch."""
    T, Z = scipy.linalg.schur(U, output="complex")
    phases = np.angle(np.diag(T))
    worst = np.abs(phases).max()
    if worst >= np.pi - BRANCH_MARGIN:
        raise BranchCutError(
            f"cycle propagator eigenphase {worst:.4f} is within {BRANCH_MARGIN} of pi; "
            "the average Hamiltonian is ambiguous (shorten the cycle)")
    H = -(Z * phases) @ Z.conj().T / t
    return _hermitian_part(H)
