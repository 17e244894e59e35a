"""Closed-form effective Hamiltonians of the decoupling blocks and the secular projection.

Notation: ``theta = A delta_t``, ``Z = sum w_j I_jz``, and for two qubits
``zz = I_1z I_2z``, ``yy = I_1y I_2y`` and ``yz+zy = I_1y I_2z + I_1z I_2y``.

The forms are complete through second order in the small quantities
``theta``, ``w delta_t`` and ``J delta_t``. Terms that carry an explicit
``delta_t`` (rather than only ``theta``) are included when ``delta_t`` is
given; leaving it out reproduces the theta-only expressions, whose
error then has a second-order piece proportional to ``theta J delta_t``.

For the pair ``conjugated_pair(block_a, block_b)`` the plain block ``a``
(couplings ``J1..J4``) acts first and the pi-y conjugated block ``b``
(couplings ``J5..J8``) second.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .magnus import exact_generator
from .operators import PauliSum, label_str, pauli_decompose
from .sequences import BlockParams, RWAWarning, basic_block, conjugated_pair, to_toggled
from .systems import RegisterSpec

__all__ = [
    "EffectiveForm",
    "coupling_reduction",
    "h1eff_analytic",
    "h1eff_fluct_analytic",
    "h2eff_analytic",
    "h2eff_fluct_analytic",
    "h3eff_analytic",
    "heff_n_analytic",
    "iterated_reduction",
    "numeric_effective",
    "reduction_factor",
    "secular_effective",
    "secular_projection",
]

RWA_RATIO = 10.0
DEGENERACY_RTOL = 1e-6


@dataclass(frozen=True)
class EffectiveForm:
    """Effective Hamiltonian as named spin products with coefficients in rad/s."""

    terms: PauliSum
    theta: float
    n_qubits: int
    truncation_order: int = 2

    def __post_init__(self):
        for label, c in self.terms:
            if len(label) > 2:
                raise ValueError(f"term {label_str(label)!r} has more than two factors")
            if not np.isfinite(c):
                raise ValueError(f"coefficient of {label_str(label)!r} is not finite")

    def coefficient(self, label) -> float:
        return self.terms.coefficient(label)

    def to_matrix(self) -> np.ndarray:
        return self.terms.to_matrix(self.n_qubits)

    def to_list(self) -> list:
        """``[(operator name, coefficient), ...]`` sorted by name."""
        return sorted(self.terms.to_dict().items())


def reduction_factor(theta: float) -> float:
    """Leading-order ratio of residual to bare coupling, ``4 theta^2 / 3``."""
    return 4.0 * theta**2 / 3.0


def _pair_of(register: RegisterSpec, J):
    if register.n_qubits != 2:
        raise ValueError(f"two-qubit form requested for a {register.n_qubits}-qubit register")
    if J is None:
        if len(register.edges) != 1:
            raise ValueError("register must have exactly one edge or J must be given")
        J = register.edges[0][2]
    return register.omegas, float(J)


def _pair_terms(w, zz=0.0, yy=0.0, yz=0.0, y=0.0, z=0.0, x=0.0, xz=0.0) -> PauliSum:
    """Two-qubit operator from the coefficients of the standard products.

    Single-spin coefficients multiply ``w_j`` except ``x``, which is the
    same on both spins.
    """
    w1, w2 = w
    return PauliSum({
        "1z 2z": zz,
        "1y 2y": yy,
        "1y 2z": yz,
        "1z 2y": yz,
        "1y": y * w1,
        "2y": y * w2,
        "1z": z * w1,
        "2z": z * w2,
        "1x": x,
        "2x": x,
        "1x 2z": xz * w1,
        "1z 2x": xz * w2,
    })


def _check_rwa(register: RegisterSpec, theta: float, couplings=None):
    J = register.couplings if couplings is None else np.asarray(couplings)
    for (j, k), c in zip(register.pairs, J):
        gap = theta * abs(register.omegas[j - 1] - register.omegas[k - 1])
        if c != 0 and gap < RWA_RATIO * abs(c):
            warnings.warn(f"theta |w_{j} - w_{k}| / J = {gap / abs(c):.3g} < {RWA_RATIO:g}; "
                          "the rotating-wave reduction is not justified", RWAWarning, stacklevel=3)
            return False
    return True


def h1eff_analytic(register: RegisterSpec, theta: float, J: float | None = None) -> EffectiveForm:
    """Average Hamiltonian of one basic block on two qubits.

    ``J (1 - 4/3 theta^2) zz - theta/2 (w1 I1y + w2 I2y) + theta J (yz+zy)
    + theta^2/2 (w1 I1z + w2 I2z) + 4/3 theta^2 J yy``
    """
    w, J = _pair_of(register, J)
    r = reduction_factor(theta)
    terms = _pair_terms(w, zz=J * (1 - r), yy=r * J, yz=theta * J, y=-theta / 2, z=theta**2 / 2)
    return EffectiveForm(terms, theta, 2)


def h2eff_analytic(register: RegisterSpec, theta: float, J: float | None = None,
                   delta_t: float | None = None) -> EffectiveForm:
    """Average Hamiltonian of the pi-y conjugated pair of blocks, constant ``J``.

    ``J (1 - 4/3 theta^2) zz - theta/2 (w1 I1y + w2 I2y) + 4/3 theta^2 J yy``,
    plus ``-theta delta_t J^2 / 2 (I1x + I2x)`` when ``delta_t`` is given.
    """
    w, J = _pair_of(register, J)
    r = reduction_factor(theta)
    x = 0.0 if delta_t is None else -theta * delta_t * J**2 / 2
    terms = _pair_terms(w, zz=J * (1 - r), yy=r * J, y=-theta / 2, x=x)
    return EffectiveForm(terms, theta, 2)


def h3eff_analytic(register: RegisterSpec, theta: float, J: float | None = None) -> EffectiveForm:
    """Secular part of :func:`h2eff_analytic`: ``-theta/2 (w1 I1y + w2 I2y) + 4/3 theta^2 J yy``.

    Warns with :class:`RWAWarning` unless ``theta |w1 - w2| >= 10 |J|``.
    """
    w, J = _pair_of(register, J)
    _check_rwa(register, theta, [J])
    terms = _pair_terms(w, yy=reduction_factor(theta) * J, y=-theta / 2)
    return EffectiveForm(terms, theta, 2)


def heff_n_analytic(register: RegisterSpec, theta: float) -> EffectiveForm:
    """Secular effective Hamiltonian on any coupling graph.

    ``-theta/2 sum_j w_j I_jy + 4/3 theta^2 sum_(jk) J_jk I_jy I_ky``
    """
    _check_rwa(register, theta)
    r = reduction_factor(theta)
    terms = {((j, "y"),): -theta / 2 * w for j, w in enumerate(register.omegas, start=1)}
    for j, k, J in register.edges:
        terms[((j, "y"), (k, "y"))] = r * J
    return EffectiveForm(PauliSum(terms), theta, register.n_qubits)


def _block_moments(theta, J4, delta_t):
    """Per-block pieces shared by the fluctuating-coupling forms."""
    J1, J2, J3, J4_ = J4
    mean = (J1 + J2 + J3 + J4_) / 4
    weighted = (J1 + 3 * J2 + 3 * J3 + J4_) / 8
    yy = theta**2 * (J1 + 7 * J2 + 7 * J3 + J4_) / 12
    xz = 0.0 if delta_t is None else theta * delta_t * (-5 * J1 - J2 + J3 + 5 * J4_) / 24
    return mean, weighted, yy, xz


def h1eff_fluct_analytic(register: RegisterSpec, theta: float, J, delta_t: float | None = None) -> EffectiveForm:
    """Average Hamiltonian of one basic block whose segments have couplings ``J1..J4``.

    With ``c = theta^2 (J1 + 7 J2 + 7 J3 + J4) / 12``:
    ``(mean J - c) zz + c yy + theta (J1 + 3 J2 + 3 J3 + J4)/8 (yz+zy)
    - theta/2 y-Zeeman + theta^2/2 z-Zeeman``, plus
    ``theta delta_t (-5 J1 - J2 + J3 + 5 J4)/24 (w1 I1x I2z + w2 I1z I2x)``
    when ``delta_t`` is given. Equal couplings give :func:`h1eff_analytic`.
    """
    w, _ = _pair_of(register, 0.0)
    J = np.asarray(J, dtype=float)
    if J.shape != (4,):
        raise ValueError(f"expected four couplings, got shape {J.shape}")
    mean, weighted, c, xz = _block_moments(theta, J, delta_t)
    terms = _pair_terms(w, zz=mean - c, yy=c, yz=theta * weighted,
                        y=-theta / 2, z=theta**2 / 2, xz=xz)
    return EffectiveForm(terms, theta, 2)


def h2eff_fluct_analytic(register: RegisterSpec, theta: float, J, delta_t: float | None = None) -> EffectiveForm:
    """Average Hamiltonian of a conjugated pair with couplings ``J1..J8``.

    ``J1..J4`` belong to the plain first block and ``J5..J8`` to the
    conjugated second block. With ``c`` the mean of the two blocks'
    yy coefficients (see :func:`h1eff_fluct_analytic`):
    ``(mean J - c) zz + c yy
    + theta (J1 + 3 J2 + 3 J3 + J4 - J5 - 3 J6 - 3 J7 - J8)/16 (yz+zy)
    - theta/2 y-Zeeman``. With ``delta_t`` the second-order ``x`` and
    ``xz`` terms are added as well.
    """
    w, _ = _pair_of(register, 0.0)
    J = np.asarray(J, dtype=float)
    if J.shape != (8,):
        raise ValueError(f"expected eight couplings, got shape {J.shape}")
    mean_a, wt_a, c_a, q_a = _block_moments(theta, J[:4], delta_t)
    mean_b, wt_b, c_b, q_b = _block_moments(theta, J[4:], delta_t)
    c = (c_a + c_b) / 2
    x = xz = 0.0
    if delta_t is not None:
        xz = (q_a + q_b) / 2 + theta * delta_t / 2 * (mean_b - mean_a)
        x = -theta * delta_t * (mean_b * wt_a + mean_a * wt_b) / 4
    terms = _pair_terms(w, zz=(mean_a + mean_b) / 2 - c, yy=c, yz=theta * (wt_a - wt_b) / 2,
                        y=-theta / 2, x=x, xz=xz)
    return EffectiveForm(terms, theta, 2)


# --------------------------------------------------------------------------
# Secular projection and the numerical pipeline

def secular_projection(H_full: np.ndarray, H_dominant: np.ndarray, rtol: float = DEGENERACY_RTOL) -> np.ndarray:
    """Keep only the part of ``H_full`` that commutes with ``H_dominant``.

    In the eigenbasis of ``H_dominant`` the matrix elements of ``H_full``
    between eigenvalue groups are set to zero. Eigenvalues closer than
    ``rtol`` times the spectral range are grouped together. This equals
    the long-time average of ``exp(i H_dom t) H_full exp(-i H_dom t)``.
    """
    H_full = np.asarray(H_full, dtype=complex)
    H_dominant = np.asarray(H_dominant, dtype=complex)
    if H_full.shape != H_dominant.shape:
        raise ValueError(f"dimension mismatch: {H_full.shape} vs {H_dominant.shape}")
    evals, V = np.linalg.eigh(H_dominant)
    spread = evals[-1] - evals[0]
    if spread == 0:
        return H_full.copy()
    groups = np.concatenate([[0], np.cumsum(np.diff(evals) > rtol * spread)])
    mask = groups[:, None] == groups[None, :]
    Hd = V.conj().T @ H_full @ V
    out = V @ (Hd * mask) @ V.conj().T
    return (out + out.conj().T) / 2


def numeric_effective(register: RegisterSpec, params: BlockParams, couplings=None) -> np.ndarray:
    """Exact average Hamiltonian of one conjugated pair of basic blocks.

    ``couplings`` may be ``None``, per-edge values, or an ``(8, n_edges)``
    array giving the couplings of the eight segments in order.
    """
    if couplings is not None:
        couplings = np.asarray(couplings, dtype=float)
    if couplings is not None and couplings.ndim == 2:
        if couplings.shape[0] != 8:
            raise ValueError("per-segment couplings must have eight rows")
        a = basic_block(register, params, couplings[:4])
        b = basic_block(register, params, couplings[4:])
    else:
        a = b = basic_block(register, params, couplings)
    return exact_generator(to_toggled(conjugated_pair(a, b)).segments())


def _one_body(H: np.ndarray, n: int) -> np.ndarray:
    return pauli_decompose(H, n).by_weight(1).to_matrix(n)


def secular_effective(register: RegisterSpec, params: BlockParams, couplings=None) -> np.ndarray:
    """Secular part of :func:`numeric_effective` relative to its own one-body terms."""
    G = numeric_effective(register, params, couplings)
    return secular_projection(G, _one_body(G, register.n_qubits))


def coupling_reduction(register: RegisterSpec, params: BlockParams) -> np.ndarray:
    """Residual ``I_jy I_ky`` coefficient over the bare ``J_jk``, per edge."""
    P = pauli_decompose(secular_effective(register, params), register.n_qubits, tol=0.0)
    res = np.array([P.coefficient(((j, "y"), (k, "y"))) for j, k in register.pairs])
    return res / register.couplings


def iterated_reduction(register: RegisterSpec, params: BlockParams, iterations: int = 1) -> np.ndarray:
    """Residual coupling over bare coupling after nesting the decoupling ``iterations`` times.

    Each level takes the secular effective Hamiltonian of the previous one,
    a y-Zeeman term plus yy couplings, as a new register (rotated so the
    Zeeman axis is z) and decouples it again with the same theta. The
    segment length is scaled by ``2/theta`` so the Zeeman phase per
    segment stays the same as on the first level.
    """
    if int(iterations) != iterations or iterations < 1:
        raise ValueError("iterations must be a positive integer")
    if iterations > 1 and params.theta <= 0:
        raise ValueError("nested decoupling needs theta > 0")
    n = register.n_qubits
    reg, p = register, params
    for level in range(int(iterations)):
        P = pauli_decompose(secular_effective(reg, p), n, tol=0.0)
        omegas = [P.coefficient(((j, "y"),)) for j in range(1, n + 1)]
        J = [P.coefficient(((j, "y"), (k, "y"))) for j, k in reg.pairs]
        reg = RegisterSpec(n, tuple(omegas), tuple((j, k, c) for (j, k), c in zip(reg.pairs, J)),
                           reg.edge_kinds)
        if level + 1 < iterations:
            p = BlockParams(p.delta_t * 2 / p.theta, p.theta)
    return reg.couplings / register.couplings
