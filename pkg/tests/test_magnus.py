import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from globaldd.magnus import BranchCutError, Segment, exact_generator, generator_from_unitary, magnus_terms
from globaldd.operators import conjugate, embed_pauli, propagator


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2


def random_unitary(rng, d):
    q, r = np.linalg.qr(rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d)))
    return q * (np.diag(r) / abs(np.diag(r)))


def comm(a, b):
    return a @ b - b @ a


def brute_force_terms(segments):
    """Explicit nested sums with A_k = -i H_k t_k, cubic in the number of segments."""
    A = [-1j * s.hamiltonian * s.duration for s in segments]
    m = len(A)
    t = sum(s.duration for s in segments)
    o1 = sum(A)
    o2 = sum(comm(A[j], A[i]) for i in range(m) for j in range(i + 1, m)) / 2 if m > 1 else 0 * A[0]
    o3 = 0 * A[0]
    for i in range(m):
        for j in range(i + 1, m):
            o3 = o3 + (comm(A[j], comm(A[j], A[i])) + comm(A[i], comm(A[i], A[j]))) / 12
            for k in range(j + 1, m):
                o3 = o3 + (comm(A[k], comm(A[j], A[i])) + comm(A[i], comm(A[j], A[k]))) / 6
    return [1j * o / t for o in (o1, o2, o3)]


def test_single_segment():
    H = random_hermitian(np.random.default_rng(0), 4)
    r = magnus_terms([Segment(H, 0.2)])
    np.testing.assert_allclose(r.order0, H)
    np.testing.assert_allclose(r.order1, 0)
    np.testing.assert_allclose(r.order2, 0)
    assert r.total_time == pytest.approx(0.2)


def test_commuting_segments_have_no_corrections():
    Z1, Z2 = embed_pauli(1, "z", 2), embed_pauli(2, "z", 2)
    segs = [Segment(2.0 * Z1, 0.3), Segment(Z1 @ Z2, 0.5), Segment(-Z2, 0.1)]
    r = magnus_terms(segs)
    np.testing.assert_allclose(r.order1, 0, atol=1e-15)
    np.testing.assert_allclose(r.order2, 0, atol=1e-15)
    np.testing.assert_allclose(exact_generator(segs), (0.6 * Z1 + 0.5 * Z1 @ Z2 - 0.1 * Z2) / 0.9, atol=1e-12)


@pytest.mark.parametrize("m", [2, 3, 5, 7])
def test_terms_match_explicit_nested_sums(m):
    rng = np.random.default_rng(m)
    segs = [Segment(random_hermitian(rng, 4), rng.uniform(0.1, 1.0)) for _ in range(m)]
    r = magnus_terms(segs)
    for got, want in zip((r.order0, r.order1, r.order2), brute_force_terms(segs)):
        np.testing.assert_allclose(got, want, atol=1e-12)


def test_first_order_two_segment_formula():
    rng = np.random.default_rng(1)
    H1, H2 = random_hermitian(rng, 2), random_hermitian(rng, 2)
    t1, t2 = 0.3, 0.4
    r = magnus_terms([Segment(H1, t1), Segment(H2, t2)])
    want = -1j / (2 * (t1 + t2)) * comm(H2 * t2, H1 * t1)
    np.testing.assert_allclose(r.order1, want, atol=1e-14)


def test_second_order_sign_against_exact_generator():
    rng = np.random.default_rng(2)
    H1, H2 = random_hermitian(rng, 2), random_hermitian(rng, 2)
    s = 1e-2
    segs = [Segment(H1, s), Segment(H2, s)]
    r = magnus_terms(segs)
    exact = exact_generator(segs)
    with_order2 = np.linalg.norm(exact - r.truncated(2))
    flipped = np.linalg.norm(exact - (r.truncated(1) - r.order2))
    assert with_order2 < flipped / 10


@pytest.mark.parametrize("order,expected", [(0, 2.0), (1, 4.0), (2, 8.0)])
def test_residual_scales_with_next_order(order, expected):
    rng = np.random.default_rng(3)
    Hs = [random_hermitian(rng, 4) for _ in range(4)]
    ts = rng.uniform(0.5, 1.5, 4)
    res = []
    for s in (4e-3, 2e-3, 1e-3):
        segs = [Segment(H, t * s) for H, t in zip(Hs, ts)]
        res.append(np.linalg.norm(exact_generator(segs) - magnus_terms(segs).truncated(order)))
    ratios = np.array(res[:-1]) / np.array(res[1:])
    np.testing.assert_allclose(ratios, expected, rtol=0.1)
    assert min(ratios) >= 0.9 * expected


def test_exact_generator_halving_reduces_residual_sevenfold():
    rng = np.random.default_rng(4)
    Hs = [random_hermitian(rng, 4) for _ in range(3)]
    res = []
    for s in (1e-2, 5e-3):
        segs = [Segment(H, s) for H in Hs]
        res.append(np.linalg.norm(exact_generator(segs) - magnus_terms(segs).truncated(2)))
    assert res[0] / res[1] >= 7


def test_palindromic_schedule_cancels_first_order():
    rng = np.random.default_rng(5)
    segs = [Segment(random_hermitian(rng, 4), rng.uniform(0.1, 1)) for _ in range(4)]
    r = magnus_terms(segs + segs[::-1])
    np.testing.assert_allclose(r.order1, 0, atol=1e-12)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_covariance_under_fixed_conjugation(seed):
    rng = np.random.default_rng(seed)
    segs = [Segment(random_hermitian(rng, 4), rng.uniform(0.1, 1)) for _ in range(3)]
    U = random_unitary(rng, 4)
    r = magnus_terms(segs)
    rc = magnus_terms([Segment(conjugate(s.hamiltonian, U), s.duration) for s in segs])
    for a, b in zip((r.order0, r.order1, r.order2), (rc.order0, rc.order1, rc.order2)):
        np.testing.assert_allclose(b, conjugate(a, U), atol=1e-10)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**32 - 1))
def test_terms_are_hermitian(seed):
    rng = np.random.default_rng(seed)
    segs = [Segment(random_hermitian(rng, 4), rng.uniform(0.1, 1)) for _ in range(4)]
    r = magnus_terms(segs)
    for term in (r.order0, r.order1, r.order2, exact_generator([Segment(s.hamiltonian, 0.1 * s.duration)
                                                               for s in segs])):
        assert np.abs(term - term.conj().T).max() <= 1e-12 * max(np.abs(term).max(), 1e-300)


def test_exact_generator_reproduces_propagator():
    rng = np.random.default_rng(6)
    segs = [Segment(random_hermitian(rng, 4), 0.1) for _ in range(3)]
    U = np.eye(4)
    for s in segs:
        U = propagator(s.hamiltonian, s.duration) @ U
    np.testing.assert_allclose(propagator(exact_generator(segs), 0.3), U, atol=1e-12)


def test_branch_cut_is_reported():
    X = embed_pauli(1, "x", 1)
    # eigenphases +-pi/2 * 1.99 are within 0.1 of pi
    with pytest.raises(BranchCutError):
        exact_generator([Segment(2 * X, 0.995 * np.pi)])
    with pytest.raises(BranchCutError):
        generator_from_unitary(-np.eye(2), 1.0)


@pytest.mark.parametrize("bad", [0.0, -1.0, np.inf, np.nan])
def test_segment_duration_must_be_positive(bad):
    with pytest.raises(ValueError):
        Segment(np.eye(2), bad)


def test_empty_and_mismatched_schedules_rejected():
    with pytest.raises(ValueError):
        magnus_terms([])
    with pytest.raises(ValueError):
        magnus_terms([Segment(np.eye(2), 1.0), Segment(np.eye(4), 1.0)])
