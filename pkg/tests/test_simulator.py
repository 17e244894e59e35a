import io
import math

import numpy as np
import pytest
import scipy.linalg

from globaldd.operators import PauliSum
from globaldd.sequences import BlockParams, Pulse, basic_block, conjugated_pair
from globaldd.simulator import (DYSON_EPS_MAX, ExperimentConfig, FidelityTrace, _ChunkEngine, decay_rate_ratio,
                                decoupling_chunk, evolve, extract_decay_rate, read_trace_csv, run_experiment,
                                write_trace_csv)
from globaldd.systems import CouplingNoise, RegisterSpec, lattice_noise, lattice_register

TWO_PI = 2 * np.pi


def explicit(schedule, couplings):
    """Item-by-item product with scipy's expm; ``couplings[i]`` replaces the zz terms of evolution ``i``."""
    n = schedule.n_qubits
    U = np.eye(2**n, dtype=complex)
    i = 0
    for it in schedule.items:
        if isinstance(it, Pulse):
            U = it.unitary(n) @ U
            continue
        h = it.hamiltonian.filter(lambda label: not (len(label) == 2 and label[0][1] == label[1][1] == "z"))
        for (j, k), J in zip(sorted(couplings["pairs"]), couplings["values"][i]):
            h = h + PauliSum({((j, "z"), (k, "z")): J})
        U = scipy.linalg.expm(-1j * h.to_matrix(n) * it.duration) @ U
        i += 1
    return U


@pytest.fixture
def small():
    reg = RegisterSpec(3, (TWO_PI * 62.8e3, TWO_PI * 95.9e3, TWO_PI * 120.1e3),
                       ((1, 2, TWO_PI * 17.3), (2, 3, TWO_PI * 18.5)))
    noise = CouplingNoise(tuple(reg.couplings), (TWO_PI * 9, TWO_PI * 3), seed=11)
    return reg, noise


def short_config(reg, noise, **kw):
    base = dict(register=reg, params=BlockParams(1e-7, 0.05), noise=noise, total_time=4e-5,
                sample_interval=8e-6, ensemble_size=2)
    base.update(kw)
    return ExperimentConfig(**base)


def test_evolve_without_noise_is_the_schedule_propagator(small):
    reg, _ = small
    pair = conjugated_pair(basic_block(reg, BlockParams(1e-7, 0.05)))
    np.testing.assert_allclose(evolve(pair), pair.propagator())


def test_evolve_redraws_couplings_per_segment(small):
    reg, noise = small
    pair = conjugated_pair(basic_block(reg, BlockParams(1e-7, 0.05)))
    draws = np.random.default_rng(3).normal(noise.means, noise.stds, size=(8, 2))
    want = explicit(pair, {"pairs": reg.pairs, "values": draws})
    np.testing.assert_allclose(evolve(pair, noise, np.random.default_rng(3)), want, atol=1e-12)


def test_evolve_rejects_mismatched_noise(small):
    reg, _ = small
    pair = conjugated_pair(basic_block(reg, BlockParams(1e-7, 0.05)))
    with pytest.raises(ValueError):
        evolve(pair, CouplingNoise((1.0,), (1.0,)))


@pytest.mark.parametrize("echo", [False, True])
def test_chunk_engine_matches_exact_product(small, echo):
    reg, noise = small
    cfg = short_config(reg, noise, hahn_echo=echo)
    chunk = decoupling_chunk(cfg)
    S = len(chunk.evolutions)
    deltas = np.random.default_rng(0).normal(0, TWO_PI * 10, (S, 2))
    engine = _ChunkEngine(chunk, reg.pairs, reg.couplings)
    want = explicit(chunk, {"pairs": reg.pairs, "values": reg.couplings + deltas})
    np.testing.assert_allclose(engine.chunk(deltas), want, atol=1e-12)
    np.testing.assert_allclose(engine.chunk(None), explicit(chunk, {"pairs": reg.pairs,
                                                                  "values": np.tile(reg.couplings, (S, 1))}),
                               atol=1e-12)


def test_chunk_engine_falls_back_for_large_deviations(small):
    reg, noise = small
    chunk = decoupling_chunk(short_config(reg, noise))
    S = len(chunk.evolutions)
    big = 8 * DYSON_EPS_MAX / 1e-7
    deltas = np.full((S, 2), big)
    engine = _ChunkEngine(chunk, reg.pairs, reg.couplings)
    want = explicit(chunk, {"pairs": reg.pairs, "values": reg.couplings + deltas})
    np.testing.assert_allclose(engine.chunk(deltas), want, atol=1e-11)


def test_uncoupled_register_keeps_unit_fidelity():
    reg = RegisterSpec(2, (TWO_PI * 62.8e3, TWO_PI * 95.9e3), ((1, 2, 0.0),))
    for noise in (None, CouplingNoise((0.0,), (0.0,))):
        dec, free = run_experiment(short_config(reg, noise))
        np.testing.assert_allclose(dec.mean_fidelity, 1.0, atol=1e-12)
        np.testing.assert_allclose(free.mean_fidelity, 1.0, atol=1e-12)


def test_uncoupled_register_with_echo_keeps_unit_fidelity():
    reg = RegisterSpec(2, (TWO_PI * 62.8e3, TWO_PI * 95.9e3), ((1, 2, 0.0),))
    dec, _ = run_experiment(short_config(reg, None, hahn_echo=True))
    np.testing.assert_allclose(dec.mean_fidelity, 1.0, atol=1e-12)


def test_traces_are_deterministic_per_seed(small):
    reg, noise = small
    a = run_experiment(short_config(reg, noise))
    b = run_experiment(short_config(reg, noise))
    c = run_experiment(short_config(reg, CouplingNoise(noise.means, noise.stds, seed=12)))
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.members, y.members)
    assert not np.array_equal(a[1].members, c[1].members)


def test_trace_shapes_and_bounds(small):
    reg, noise = small
    dec, free = run_experiment(short_config(reg, noise))
    for tr in (dec, free):
        assert tr.members.shape == (2, 6)
        np.testing.assert_allclose(tr.times, 8e-6 * np.arange(6))
        assert tr.mean_fidelity[0] == 1.0
        assert np.all(tr.members <= 1.0) and np.all(tr.members >= 0.0)
        assert np.all(tr.mean_fidelity <= tr.members.max(axis=0) + 1e-15)
        assert np.all(tr.mean_fidelity >= tr.members.min(axis=0) - 1e-15)


def test_free_trace_matches_direct_phase_computation(small):
    reg, noise = small
    cfg = short_config(reg, noise, ensemble_size=1)
    _, free = run_experiment(cfg)
    rng = noise.rng(0)
    S = 8 * cfg.pairs_per_sample
    n, d = 3, 8
    zz = [PauliSum({((j, "z"), (k, "z")): 1.0}).to_matrix(n).diagonal().real for j, k in reg.pairs]
    acc = np.zeros(2)
    for s in range(1, 6):
        J = rng.normal(noise.means, noise.stds, size=(S, 2))
        acc += J.sum(axis=0) * 1e-7
        phase = np.exp(-1j * (acc[0] * zz[0] + acc[1] * zz[1]))
        assert free.members[0, s] == pytest.approx(abs(phase.sum()) ** 2 / d**2, abs=1e-12)


def test_zero_theta_gives_no_decoupling(small):
    reg, noise = small
    dec, free = run_experiment(short_config(reg, noise, params=BlockParams(1e-7, 0.0)))
    np.testing.assert_allclose(dec.members, free.members, atol=1e-9)


def test_state_metric_and_lab_reference(small):
    reg, _ = small
    zero = RegisterSpec(3, reg.omegas, ((1, 2, 0.0), (2, 3, 0.0)))
    dec, free = run_experiment(short_config(zero, None, metric="state", reference="lab"))
    assert np.all(dec.mean_fidelity <= 1.0)
    assert dec.mean_fidelity[-1] < 0.999  # the Zeeman precession is visible in the lab frame
    assert free.mean_fidelity[-1] < 0.999


def test_static_run_repeats_single_member(small):
    reg, _ = small
    dec, _ = run_experiment(short_config(reg, None, ensemble_size=3))
    assert dec.members.shape[0] == 3
    np.testing.assert_array_equal(dec.members[0], dec.members[2])


@pytest.mark.parametrize("kw", [dict(iterations=2), dict(reference="rotating"), dict(metric="trace"),
                                dict(ensemble_size=0), dict(sample_interval=9e-6), dict(total_time=1e-6)])
def test_config_validation(small, kw):
    reg, noise = small
    with pytest.raises(ValueError):
        short_config(reg, noise, **kw)


def test_default_state_is_uniform_superposition(small):
    reg, noise = small
    psi = short_config(reg, noise).state()
    np.testing.assert_allclose(psi, np.full(8, 1 / math.sqrt(8)))


# decay-rate extraction on synthetic traces

def synthetic(fn, t_max=1.0, n=201):
    t = np.linspace(0, t_max, n)
    return FidelityTrace(t, fn(t))


def test_constant_trace_has_zero_rate():
    fit = extract_decay_rate(synthetic(lambda t: np.ones_like(t)))
    assert fit.rate == 0.0


def test_gaussian_trace_rate():
    c = 0.4
    fit = extract_decay_rate(synthetic(lambda t: np.cos(c * t) ** 2))
    assert fit.model == "quadratic"
    assert fit.rate == pytest.approx(c, rel=0.05)


def test_exponential_trace_rate():
    fit = extract_decay_rate(synthetic(lambda t: np.exp(-0.07 * t)))
    assert fit.model == "linear"
    assert fit.rate == pytest.approx(0.07, rel=1e-6)


def test_fit_window_stops_below_threshold():
    fit = extract_decay_rate(synthetic(lambda t: np.exp(-(t / 0.5) ** 2), t_max=2.0))
    assert fit.n_points < 201
    assert fit.rate == pytest.approx(2.0, rel=1e-6)


def test_too_few_points_raises():
    with pytest.raises(ValueError):
        extract_decay_rate(synthetic(lambda t: np.exp(-100 * t)))


def test_rate_ratio_uses_free_model():
    free = synthetic(lambda t: np.exp(-(0.3 * t) ** 2))
    dec = synthetic(lambda t: np.exp(-0.01 * t))
    ratio, f, g = decay_rate_ratio(free, dec)
    assert f.model == g.model == "quadratic"
    assert ratio == pytest.approx(f.rate / g.rate)


def test_csv_round_trip(tmp_path, small):
    reg, noise = small
    dec, _ = run_experiment(short_config(reg, noise))
    path = tmp_path / "dec.csv"
    write_trace_csv(path, dec, "9.9")
    back = read_trace_csv(path)
    np.testing.assert_array_equal(back.times, dec.times)
    np.testing.assert_array_equal(back.mean_fidelity, dec.mean_fidelity)
    np.testing.assert_array_equal(back.members, dec.members)
    assert back.metadata["version"] == "9.9"
    assert back.metadata["seed"] == 11
    buf = io.StringIO()
    write_trace_csv(buf, dec)
    assert buf.getvalue().splitlines()[1].startswith("time_s,mean_fidelity,member_0,member_1")


def test_csv_rejects_foreign_header():
    with pytest.raises(ValueError):
        read_trace_csv(io.StringIO("a,b\n1,2\n"))


@pytest.mark.slow
def test_decoupled_rate_follows_theta_squared_when_zeeman_splitting_dominates():
    # theta^3 |dw| >> J: the residual coupling is the 4/3 theta^2 J term alone
    reg = RegisterSpec(2, (TWO_PI * 62.8e3, TWO_PI * 262.8e3), ((1, 2, TWO_PI * 1.0),))
    rates = []
    for theta, total in ((0.05, 17.3), (0.025, 69.2)):
        cfg = ExperimentConfig(reg, BlockParams(1e-7, theta), None, total_time=total, sample_interval=2e-3,
                               ensemble_size=1)
        dec, _ = run_experiment(cfg)
        rates.append(extract_decay_rate(dec, model="quadratic").rate)
    assert rates[0] / rates[1] == pytest.approx(4.0, rel=0.05)


def test_lattice_run_smoke():
    reg = lattice_register()
    cfg = ExperimentConfig(reg, BlockParams(1e-7, 0.05), lattice_noise(seed=0), total_time=2e-3,
                           sample_interval=5e-4, ensemble_size=1)
    dec, free = run_experiment(cfg)
    assert dec.mean_fidelity[-1] > free.mean_fidelity[-1]
