"""Numerical self-checks run by ``globaldd verify``.

Every check returns :class:`Check` rows: a residual compared with a
tolerance (or a ratio with a required interval).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .effective import (h1eff_analytic, h1eff_fluct_analytic, h2eff_analytic, h2eff_fluct_analytic,
                        numeric_effective)
from .magnus import Segment, exact_generator, magnus_terms
from .operators import pauli_decompose
from .sequences import (BlockParams, basic_block, compile_to_physical, conjugated_pair,
                        insert_hahn_echo, repeat, wahuha_block)
from .systems import RegisterSpec

__all__ = ["Check", "SUITES", "cubic_ratios", "run_suite"]

TWO_PI = 2 * np.pi


@dataclass(frozen=True)
class Check:
    name: str
    value: float
    low: float
    high: float
    form: str

    @property
    def ok(self) -> bool:
        return bool(self.low <= self.value <= self.high)


def _random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def _max_abs(a):
    return float(np.abs(a).max())


def check_magnus(seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    Hs = [_random_hermitian(rng, 4) for _ in range(4)]
    ts = rng.uniform(0.5, 1.5, 4)
    res = []
    for s in (1e-2, 5e-3):
        segs = [Segment(H, t * s) for H, t in zip(Hs, ts)]
        res.append(np.linalg.norm(exact_generator(segs) - magnus_terms(segs).truncated(2)))
    H = Hs[0]
    single = magnus_terms([Segment(H, 0.3)])
    palindrome = [Segment(H, t * 1e-2) for H, t in zip(Hs, ts)]
    palindrome = palindrome + palindrome[::-1]
    return [
        Check("second-order residual ratio per halving", res[0] / res[1], 7.0, 10.0, "Magnus series"),
        Check("single segment reproduces H", _max_abs(single.truncated(2) - H), 0.0, 1e-12, "Magnus series"),
        Check("palindromic schedule has no first order", _max_abs(magnus_terms(palindrome).order1), 0.0, 1e-12,
              "Magnus series"),
    ]


def _two_qubit(rng):
    w = TWO_PI * rng.uniform(40e3, 160e3, 2)
    while abs(w[0] - w[1]) < TWO_PI * 20e3:
        w = TWO_PI * rng.uniform(40e3, 160e3, 2)
    J = TWO_PI * rng.uniform(10, 30)
    return RegisterSpec(2, tuple(w), ((1, 2, J),)), J


def cubic_ratios(which: str, thetas=(0.04, 0.02), amplitude: float = 4e5, seed: int = 0) -> tuple:
    """Residuals of an analytic form against the exact average, for each theta.

    ``delta_t = theta / amplitude`` so halving theta halves every small
    quantity. Returns ``(full residuals, two-body residuals / J)``.
    """
    rng = np.random.default_rng(seed)
    reg, J = _two_qubit(rng)
    J4 = J * rng.uniform(0.5, 1.5, 4)
    J8 = J * rng.uniform(0.5, 1.5, 8)
    full, two = [], []
    for th in thetas:
        dt = th / amplitude
        p = BlockParams(dt, th)
        if which == "h1":
            G, F = exact_generator(basic_block(reg, p).segments()), h1eff_analytic(reg, th)
        elif which == "h2":
            G, F = numeric_effective(reg, p), h2eff_analytic(reg, th, delta_t=dt)
        elif which == "h1_fluct":
            G = exact_generator(basic_block(reg, p, J4[:, None]).segments())
            F = h1eff_fluct_analytic(reg, th, J4, delta_t=dt)
        elif which == "h2_fluct":
            G, F = numeric_effective(reg, p, J8[:, None]), h2eff_fluct_analytic(reg, th, J8, delta_t=dt)
        else:
            raise ValueError(f"unknown form {which!r}")
        D = G - F.to_matrix()
        full.append(np.linalg.norm(D))
        two.append(np.linalg.norm(pauli_decompose(D, 2, tol=0.0).by_weight(2).to_matrix(2)) / J)
    return np.array(full), np.array(two)


EFFECTIVE_FORMS = {
    "h1": "one block, constant J",
    "h2": "conjugated pair, constant J",
    "h1_fluct": "one block, J per segment",
    "h2_fluct": "conjugated pair, J per segment",
}


def check_effective(seed: int = 0) -> list:
    out = []
    for key, form in EFFECTIVE_FORMS.items():
        full, two = cubic_ratios(key, seed=seed)
        out.append(Check(f"{key} residual ratio, theta 0.04 -> 0.02", full[0] / full[1], 6.0, 10.0, form))
        out.append(Check(f"{key} two-body residual ratio", two[0] / two[1], 6.0, 10.0, form))
    return out


def check_wahuha(seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    out = []
    for n in (2, 3, 4):
        d = np.triu(rng.normal(size=(n, n)), 1)
        d = d + d.T
        block = wahuha_block(d)
        total = sum((ev.hamiltonian for ev in block.evolutions[1:]), block.evolutions[0].hamiltonian)
        avg = magnus_terms(block.segments()).order0
        out.append(Check(f"N={n} summed coefficients", max((abs(c) for _, c in total), default=0.0),
                         0.0, 1e-14, "dipolar averaging block"))
        out.append(Check(f"N={n} average Hamiltonian", _max_abs(avg), 0.0, 1e-14, "dipolar averaging block"))
    iso = wahuha_block(np.array([[0.0, 1.0], [1.0, 0.0]]), weights=(1.0, 1.0, 1.0))
    avg = magnus_terms(iso.segments()).order0
    out.append(Check("isotropic coupling survives", _max_abs(avg), 0.1, np.inf, "dipolar averaging block"))
    return out


def _phase_aligned(U, V):
    ph = np.vdot(V, U)
    return _max_abs(U - ph / abs(ph) * V)


def check_compile(seed: int = 0) -> list:
    rng = np.random.default_rng(seed)
    tp = TWO_PI
    reg = RegisterSpec(3, (tp * 62.8e3, tp * 95.9e3, tp * 120.1e3), ((1, 2, tp * 17.3), (2, 3, tp * 18.5)))
    p = BlockParams(1e-7, 0.05)
    block = basic_block(reg, p)
    noisy = lambda: basic_block(reg, p, reg.couplings + tp * rng.normal(0, 10, (4, 2)))
    cases = {
        "basic block": block,
        "conjugated pair": conjugated_pair(block),
        "echo-inserted pair": insert_hahn_echo(conjugated_pair(block)),
        "repeated pair": repeat(conjugated_pair(block), 3, check_rwa=False),
        "noisy pair": conjugated_pair(noisy(), noisy()),
        "noisy repeated echo": insert_hahn_echo(
            conjugated_pair(noisy(), noisy()) + conjugated_pair(noisy(), noisy())),
    }
    out = []
    for name, s in cases.items():
        phys = compile_to_physical(s)
        out.append(Check(f"{name}: propagator", _phase_aligned(phys.propagator(), s.propagator()),
                         0.0, 1e-10, "physical compilation"))
        out.append(Check(f"{name}: pulse frame", _phase_aligned(phys.pulse_product(), np.eye(2**reg.n_qubits)),
                         0.0, 1e-10, "physical compilation"))
    return out


SUITES = {
    "magnus": check_magnus,
    "effective": check_effective,
    "wahuha": check_wahuha,
    "compile": check_compile,
}


def run_suite(name: str, seed: int = 0) -> list:
    if name == "all":
        return [c for fn in SUITES.values() for c in fn(seed)]
    if name not in SUITES:
        raise ValueError(f"unknown suite {name!r}")
    return SUITES[name](seed)
