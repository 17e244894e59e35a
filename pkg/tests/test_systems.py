import warnings

import numpy as np
import pytest

from globaldd.operators import pauli_product
from globaldd.systems import (LATTICE_COUPLING_HZ, LATTICE_ZEEMAN_HZ, CouplingNoise, Geometry,
                              RegisterSpec, RegisterValidityWarning, Topology, build_register, chain_edges,
                              dipolar_coupling, lattice_noise, lattice_register, sample_couplings,
                              square_lattice_edges, zeeman_from_gradient)

TWO_PI = 2 * np.pi
GAMMA_H = 2.6752e8


def test_two_qubit_hamiltonian_matrix():
    reg = RegisterSpec(2, (3.0, 5.0), ((1, 2, 0.7),))
    H = reg.hamiltonian().to_matrix(2)
    want = 3.0 * pauli_product("1z", 2) + 5.0 * pauli_product("2z", 2) + 0.7 * pauli_product("1z 2z", 2)
    np.testing.assert_allclose(H, want)
    # diagonal entries (+-w1 +-w2)/2 + s1 s2 J/4 over |00>, |01>, |10>, |11>
    np.testing.assert_allclose(np.diag(H).real, [4.175, -1.175, 0.825, -3.825])


def test_edges_are_normalized_to_increasing_sites():
    reg = RegisterSpec(3, (1, 2, 3), ((3, 1, 0.5), (2, 3, 0.1)))
    assert reg.pairs == [(1, 3), (2, 3)]
    np.testing.assert_array_equal(reg.couplings, [0.5, 0.1])


@pytest.mark.parametrize("edges", [((1, 1, 1.0),), ((1, 4, 1.0),), ((1, 2, 1.0), (2, 1, 1.0)),
                                   ((1, 2, np.nan),)])
def test_invalid_edges_rejected(edges):
    with pytest.raises(ValueError):
        RegisterSpec(3, (1, 2, 3), edges)


@pytest.mark.parametrize("n,omegas", [(0, ()), (13, (1.0,) * 13), (2, (1.0,))])
def test_invalid_sizes_rejected(n, omegas):
    with pytest.raises(ValueError):
        RegisterSpec(n, omegas, ())


def test_chain_edges():
    assert chain_edges(4) == [(1, 2, "adjacent"), (2, 3, "adjacent"), (3, 4, "adjacent")]
    assert chain_edges(1) == []


def test_square_lattice_with_diagonals():
    assert square_lattice_edges(2, 2, diagonals=True) == [
        (1, 2, "adjacent"), (1, 3, "adjacent"), (2, 4, "adjacent"), (3, 4, "adjacent"),
        (1, 4, "diagonal"), (2, 3, "diagonal")]


@pytest.mark.parametrize("rows,cols,n_adj", [(1, 4, 3), (2, 3, 7), (3, 3, 12)])
def test_square_lattice_edge_counts(rows, cols, n_adj):
    edges = square_lattice_edges(rows, cols, diagonals=True)
    assert sum(k == "adjacent" for *_, k in edges) == n_adj
    assert sum(k == "diagonal" for *_, k in edges) == 2 * (rows - 1) * (cols - 1)


def test_lattice_register_values():
    reg = lattice_register()
    assert reg.n_qubits == 4
    np.testing.assert_allclose(np.array(reg.omegas) / TWO_PI, LATTICE_ZEEMAN_HZ)
    np.testing.assert_allclose(reg.couplings / TWO_PI, LATTICE_COUPLING_HZ)
    assert reg.edge_kinds == ("adjacent",) * 4 + ("diagonal",) * 2


def test_lattice_register_satisfies_weak_coupling():
    assert lattice_register().validity_ratio() > 100


def test_strong_coupling_warns():
    with pytest.warns(RegisterValidityWarning):
        build_register(Topology("chain", n=2), [0.0, 50.0], 1.0)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        build_register(Topology("chain", n=2), [0.0, 500.0], 1.0)


def test_uncoupled_register_is_always_valid():
    assert RegisterSpec(2, (1.0, 1.0), ()).validity_ratio() == np.inf


def test_build_register_scalar_coupling_and_mismatch():
    reg = build_register(Topology("chain", n=3), [0, 1e3, 2e3], 2.0)
    np.testing.assert_array_equal(reg.couplings, [2.0, 2.0])
    with pytest.raises(ValueError):
        build_register(Topology("chain", n=3), [0, 1e3], 2.0)
    with pytest.raises(ValueError):
        build_register(Topology("chain", n=3), [0, 1e3, 2e3], [1.0, 2.0, 3.0])


def test_explicit_topology():
    topo = Topology("explicit", edges=((1, 3), (2, 3, "diagonal")))
    reg = build_register(topo, [0, 1e4, 2e4], [1.0, 2.0])
    assert reg.pairs == [(1, 3), (2, 3)]
    assert reg.edge_kinds == ("edge", "diagonal")


def test_dict_round_trip_in_hz():
    reg = lattice_register()
    d = reg.to_dict()
    assert d["zeeman_hz"][0] == pytest.approx(62.8e3)
    assert RegisterSpec.from_dict(d) == reg


def test_with_couplings_keeps_edges():
    reg = lattice_register().with_couplings(np.arange(6.0))
    assert reg.pairs == lattice_register().pairs
    with pytest.raises(ValueError):
        reg.with_couplings([1.0])


# dipolar coupling: textbook proton-proton constant at 1 angstrom is 120.1 kHz

def test_dipolar_coupling_perpendicular_proton_pair():
    g = Geometry([[0, 0, 0], [1e-10, 0, 0]], gyromagnetic_ratio=GAMMA_H)
    assert dipolar_coupling(g, 1, 2) / TWO_PI == pytest.approx(120.1e3, rel=2e-3)


def test_dipolar_coupling_angular_dependence():
    r = 3e-10
    along = Geometry([[0, 0, 0], [0, 0, r]])
    perp = Geometry([[0, 0, 0], [r, 0, 0]])
    magic = Geometry([[0, 0, 0], [r * np.sin(np.arccos(1 / np.sqrt(3))), 0, r / np.sqrt(3)]])
    assert dipolar_coupling(along, 1, 2) == pytest.approx(-2 * dipolar_coupling(perp, 1, 2))
    assert abs(dipolar_coupling(magic, 1, 2)) < 1e-12 * abs(dipolar_coupling(perp, 1, 2))
    assert dipolar_coupling(perp, 1, 2) == pytest.approx(dipolar_coupling(perp, 2, 1))


def test_dipolar_coupling_inverse_cube():
    a = Geometry([[0, 0, 0], [1e-9, 0, 0]])
    b = Geometry([[0, 0, 0], [2e-9, 0, 0]])
    assert dipolar_coupling(a, 1, 2) / dipolar_coupling(b, 1, 2) == pytest.approx(8.0)


def test_coincident_sites_rejected():
    with pytest.raises(ValueError):
        Geometry([[0, 0, 0], [0, 0, 0]])


def test_gradient_zeeman_is_linear_in_position():
    g = Geometry([[0, 0, 0], [0, 0, 1e-9], [0, 0, 3e-9]], field_gradient=1e6, base_field=1.0)
    w = zeeman_from_gradient(g)
    assert w[0] == pytest.approx(0.0, abs=1e-6)
    np.testing.assert_allclose(w / w[1], [0, 1, 3], atol=1e-9)
    assert w[1] == pytest.approx(-5.319e7 * 1e6 * 1e-9)


def test_gradient_perpendicular_to_positions_gives_no_splitting():
    g = Geometry([[0, 0, 0], [1e-9, 0, 0]], field_gradient=1e6, gradient_direction=(0, 0, 1))
    np.testing.assert_allclose(zeeman_from_gradient(g), 0.0, atol=1e-9)


def test_noise_presets_by_edge_kind():
    n = lattice_noise("strong")
    np.testing.assert_allclose(np.array(n.stds) / TWO_PI, [10, 10, 10, 10, 5, 5])
    n = lattice_noise("moderate")
    np.testing.assert_allclose(np.array(n.stds) / TWO_PI, [9, 9, 9, 9, 3, 3])
    with pytest.raises(ValueError):
        lattice_noise("loud")


def test_sampling_is_reproducible_per_member():
    n = lattice_noise(seed=7)
    a = sample_couplings(n, n.rng(3), (5,))
    b = sample_couplings(n, n.rng(3), (5,))
    c = sample_couplings(n, n.rng(4), (5,))
    assert a.shape == (5, 6)
    np.testing.assert_array_equal(a, b)
    assert not np.allclose(a, c)


def test_sampling_statistics():
    n = CouplingNoise((1.0, -2.0), (0.5, 0.1), seed=1)
    x = sample_couplings(n, n.rng(), (200_000,))
    np.testing.assert_allclose(x.mean(axis=0), [1.0, -2.0], atol=5e-3)
    np.testing.assert_allclose(x.std(axis=0), [0.5, 0.1], rtol=1e-2)


def test_static_noise_returns_means():
    n = CouplingNoise((1.0, 2.0), (0.0, 0.0))
    assert n.is_static
    np.testing.assert_array_equal(sample_couplings(n, n.rng(), (3,)), [[1.0, 2.0]] * 3)


def test_noise_validation():
    with pytest.raises(ValueError):
        CouplingNoise((1.0,), (1.0, 2.0))
    with pytest.raises(ValueError):
        CouplingNoise((1.0,), (-1.0,))
