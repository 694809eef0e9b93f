import numpy as np
import pytest
from scipy import stats

from conftest import all_configs, ferro_chain
from divanneal.instance import Instance, energies, energy, generate_2d, generate_quasi_1d
from divanneal.schedule import build_schedule, homogeneous, random_clusters
from divanneal.solver import (PimcParams, gibbs_sample, imaginary_time_coupling, jackknife,
                              pimc_anneal, pimc_equilibrium, pimc_samples)
from oracles import chain_transfer_matrix_corr, config_index, ed_thermal, gibbs_probs


def test_oracles_agree_classically():
    inst = Instance.from_edges(4, [(0, 1, -0.7), (1, 2, 0.4), (2, 3, -1.0)],
                               fields=[0.1, -0.2, 0.0, 0.3])
    corr_ed, diag = ed_thermal(inst, 0.0, 1.3)
    S, p = gibbs_probs(inst, 1.3)
    np.testing.assert_allclose(diag, p, atol=1e-12)
    tm = chain_transfer_matrix_corr([-0.7, 0.4, -1.0], inst.h, 1.3)
    np.testing.assert_allclose(tm, corr_ed, atol=1e-12)
    np.testing.assert_allclose(tm, [(p * S[:, i] * S[:, i + 1]).sum() for i in range(3)],
                               atol=1e-12)


def test_params_validation():
    assert PimcParams(beta=24).slices == 96
    assert PimcParams(beta=1).dtau <= 0.25
    with pytest.raises(ValueError):
        PimcParams(beta=10, slices=10)
    with pytest.raises(ValueError):
        PimcParams(beta=-1)
    with pytest.raises(ValueError):
        PimcParams(slices=1, beta=0.1)
    with pytest.raises(ValueError):
        PimcParams(readout="median")
    with pytest.raises(ValueError):
        PimcParams(sweeps=0)


def test_imaginary_time_coupling_ordering():
    g = np.linspace(1, 0.01, 50)
    K = imaginary_time_coupling(g, 0.25)
    assert np.all(K >= 0)
    assert np.all(np.diff(K) > 0)
    assert np.isinf(imaginary_time_coupling(0.0, 0.25))


def test_anneal_deterministic_and_consistent():
    inst = generate_2d(4, 3)
    sched = build_schedule(inst, random_clusters(inst, 2, 0), [0.1, 0.2], 1.0)
    p = PimcParams(beta=8, sweeps=50, seed=9)
    a, b = pimc_anneal(inst, sched, p), pimc_anneal(inst, sched, p)
    np.testing.assert_array_equal(a.config, b.config)
    assert a.energy == b.energy == energy(inst, a.config)
    assert a.schedule_meta["alphas"] == [0.1, 0.2]
    c = pimc_anneal(inst, sched, PimcParams(beta=8, sweeps=50, seed=10))
    assert c.seed == 10


@pytest.mark.parametrize("readout", ["lowest", "slice", "majority"])
def test_readouts_never_below_ground(readout):
    inst = generate_quasi_1d(12, 2, 4)
    e0 = energies(inst, all_configs(12)).min()
    sched = homogeneous(inst, 1.0)
    for s in range(10):
        rec = pimc_anneal(inst, sched, PimcParams(beta=8, sweeps=40, seed=s, readout=readout))
        assert rec.energy >= e0 - 1e-12
        assert set(np.unique(rec.config)) <= {-1, 1}


def test_uncoupled_fields():
    inst = Instance.from_edges(6, [], fields=[0.5] * 6, coords=np.arange(6.0)[:, None])
    sched = homogeneous(inst, 1.0)
    ok = sum(np.all(pimc_anneal(inst, sched, PimcParams(beta=24, sweeps=100, seed=s)).config == -1)
             for s in range(100))
    assert ok >= 99


def test_large_beta_ferro_correlation():
    inst = ferro_chain(2)
    est = pimc_equilibrium(inst, 0.05, PimcParams(beta=20, slices=80, sweeps=4000, seed=1))
    assert est.mean[0] > 0.98


def test_classical_chain_correlations():
    inst = Instance.from_edges(4, [(0, 1, -0.5), (1, 2, 0.8), (2, 3, -0.3)],
                               fields=[0.2, 0.0, -0.1, 0.0])
    beta = 1.5
    want = chain_transfer_matrix_corr([-0.5, 0.8, -0.3], inst.h, beta)
    est = pimc_equilibrium(inst, 0.0, PimcParams(beta=beta, slices=4, sweeps=40_000, seed=2))
    assert np.all(np.abs(est.mean - want) < 4 * est.stderr + 1e-3)


def test_three_spin_stationary_distribution():
    inst = Instance.from_edges(3, [(0, 1, -0.6), (1, 2, 0.9), (0, 2, 0.3)], fields=[0.2, -0.4, 0.1])
    beta = 1.0
    S, p = gibbs_probs(inst, beta)
    n = 1_000_000
    X = pimc_samples(inst, 0.0, PimcParams(beta=beta, slices=2, seed=5), n, burn_in=100, thin=3)
    counts = np.bincount(config_index(X), minlength=8)
    assert stats.chisquare(counts, n * p).pvalue > 0.01


def test_quantum_slice_distribution():
    inst = Instance.from_edges(3, [(0, 1, -1.0), (1, 2, 0.5)], fields=[0.1, 0.0, -0.2])
    _, diag = ed_thermal(inst, 0.8, 2.0)
    X = pimc_samples(inst, 0.8, PimcParams(beta=2.0, slices=64, seed=6), 100_000, thin=2)
    freq = np.bincount(config_index(X), minlength=8) / len(X)
    np.testing.assert_allclose(freq, diag, atol=0.01)


def test_gibbs_infinite_temperature():
    inst = generate_quasi_1d(20, 3, 0)
    X = gibbs_sample(inst, 0.0, 20_000, seed=1)
    E = energies(inst, X)
    assert abs(E.mean()) < 4 * E.std() / np.sqrt(len(E))
    assert abs(X.mean()) < 0.02


def test_gibbs_cold_ferromagnet():
    inst = ferro_chain(2)
    X = gibbs_sample(inst, 10.0, 10_000, burn_in=100, seed=3)
    aligned = np.mean(X[:, 0] == X[:, 1])
    assert aligned >= 0.99


def test_gibbs_deterministic():
    inst = generate_2d(3, 0)
    a = gibbs_sample(inst, 1.0, 100, seed=4, thin=2)
    np.testing.assert_array_equal(a, gibbs_sample(inst, 1.0, 100, seed=4, thin=2))
    assert a.shape == (50, 9)


def test_jackknife_of_iid_means():
    rng = np.random.default_rng(0)
    bins = rng.normal(size=(400, 1))
    mean, err = jackknife(bins)
    assert mean[0] == pytest.approx(bins.mean())
    assert err[0] == pytest.approx(bins.std(ddof=1) / np.sqrt(400), rel=1e-9)
