import itertools

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_model, scalar_system
from kfselect import covariance, model, numerics
from kfselect.covariance import InformationModel
from kfselect.errors import ConfigurationError, SizeError


def test_evaluate_Y_examples(rng):
    m = InformationModel(np.array([[1.0]]), M_sensors=[np.array([[3.0]])])
    assert covariance.evaluate_Y(m, ()) == pytest.approx(1.0)
    assert covariance.evaluate_Y(m, (0,)) == pytest.approx(0.25)
    model_ = random_model(rng, n=4, p=5)
    full = tuple(range(5))
    direct = model_.M_empty + sum(G @ G.T for G in model_.factors)
    assert np.allclose(covariance.evaluate_Y(model_, full), np.linalg.inv(direct), atol=1e-10)
    assert np.allclose(covariance.evaluate_Y(model_, ()), np.linalg.inv(model_.M_empty))


def test_evaluate_Y_bad_index(rng):
    with pytest.raises(ConfigurationError):
        covariance.evaluate_Y(random_model(rng, p=3), (3,))


def test_information_model_validation():
    with pytest.raises(ConfigurationError):
        InformationModel(-np.eye(2), M_sensors=[np.eye(2)])
    with pytest.raises(ConfigurationError):
        InformationModel(np.eye(2), M_sensors=[np.diag([1.0, -1.0])])
    with pytest.raises(ConfigurationError):
        InformationModel(np.eye(2), M_sensors=[np.eye(3)])


def test_factor_and_matrix_forms_agree(rng):
    m = random_model(rng, n=4, p=4, rank=2)
    as_mats = InformationModel(m.M_empty, M_sensors=m.M_sensors)
    for X in [(), (1,), (0, 2, 3)]:
        assert np.allclose(covariance.evaluate_Y(m, X), covariance.evaluate_Y(as_mats, X))
    for G, M in zip(as_mats.factors, m.M_sensors):
        assert np.allclose(G @ G.T, M)
    assert np.allclose(m.M_total, as_mats.M_total)


def test_filtering_scalar_riccati():
    sys = scalar_system(F=0.5, Pi0=1.0, R_w=1.0, infos=(1.0,))
    h = covariance.filtering_horizon(sys, (), m=0, N=2)
    assert h[0].M_empty[0, 0] == pytest.approx(1.0)
    assert h[1].M_empty[0, 0] == pytest.approx(0.8)
    h = covariance.filtering_horizon(sys, (0,), m=1, N=1)
    assert h[0].M_empty[0, 0] == pytest.approx(1 / 1.125)
    assert np.allclose(h[0].M_sensors[0], [[1.0]])


def test_filtering_initial_step_uses_pi0(rng):
    sys = model.random_system(4, 3, output_mode="gaussian", rng_seed=4, pi0=np.diag([1.0, 2.0, 3.0, 4.0]))
    h = covariance.filtering_horizon(sys, (0, 2), m=0, N=1)
    assert np.allclose(h[0].M_empty, np.diag([1.0, 0.5, 1 / 3, 0.25]))


def test_filtering_covariance_vs_information_form():
    sys = model.random_system(5, 4, output_mode="gaussian", sigma_v2_range=(0.1, 1), rng_seed=8)
    X = (1, 3)
    priors, posts = covariance.filtering_covariances(sys, X, 5)
    for P, Pk in zip(priors, posts):
        info = np.linalg.inv(P) + sum(sys.information[u] for u in X)
        assert np.allclose(Pk, np.linalg.inv(info), rtol=1e-9, atol=1e-12)
    for k in range(1, 6):
        assert np.allclose(priors[k], sys.F @ posts[k - 1] @ sys.F.T + sys.R_w)


def test_smoothing_phi():
    assert np.array_equal(covariance.smoothing_phi(np.eye(3) * 2, 0), np.eye(3))
    assert np.allclose(covariance.smoothing_phi(np.array([[2.0]]), 2), [[1, 0, 0], [2, 1, 0], [4, 2, 1]])


def test_smoothing_phi_blocks(rng):
    F = rng.standard_normal((3, 3))
    Phi = covariance.smoothing_phi(F, 3)
    assert Phi.shape == (12, 12)
    assert np.allclose(Phi[9:12, 3:6], F @ F)
    assert np.allclose(Phi[6:9, 0:3], F @ F)
    assert np.allclose(Phi[3:6, 6:9], 0.0)
    for i in range(4):
        assert np.allclose(Phi[3 * i : 3 * i + 3, 3 * i : 3 * i + 3], np.eye(3))


def test_smoothing_scalar_step_one():
    sys = scalar_system(F=0.5, Pi0=1.0, R_w=1.0, infos=(1.0,))
    h = covariance.smoothing_horizon(sys, m=1, N=1)
    assert np.allclose(h[0].M_sensors[0], [[1.25, 0.5], [0.5, 1.0]])
    assert np.allclose(h[0].M_empty, np.eye(2))


def test_smoothing_empty_set_block_diagonal(rng):
    sys = model.random_system(3, 3, sigma_w2=0.5, rng_seed=6, pi0=np.diag([1.0, 2.0, 3.0]))
    h = covariance.smoothing_horizon(sys, m=2, N=1)
    Y = covariance.evaluate_Y(h[0], ())
    assert np.trace(Y) == pytest.approx(6.0 + 2 * 1.5)


def test_smoothing_size_cap():
    sys = model.random_system(10, 2, rng_seed=0)
    with pytest.raises(SizeError) as err:
        covariance.smoothing_horizon(sys, m=5, N=6, max_dim=100)
    assert err.value.cap == 100


def test_filtering_and_smoothing_agree_at_step_zero():
    sys = model.random_system(4, 4, output_mode="gaussian", sigma_v2_range=(0.2, 1), rng_seed=2)
    hf = covariance.filtering_horizon(sys, (), 0, 1)[0]
    hs = covariance.smoothing_horizon(sys, 0, 1)[0]
    for r in range(5):
        for X in itertools.combinations(range(4), r):
            assert np.allclose(covariance.evaluate_Y(hf, X), covariance.evaluate_Y(hs, X), atol=1e-12)


def test_smoothing_sensor_information_psd():
    sys = model.random_system(3, 4, output_mode="gaussian", rng_seed=9)
    for step in covariance.smoothing_horizon(sys, 0, 4):
        for M in step.M_sensors:
            w = numerics.eigvalsh(M)
            assert w[0] >= -1e-10 * max(1.0, w[-1])
        assert np.allclose(step.M_total, sum(step.M_sensors))


def test_incremental_gain_examples(rng):
    m = InformationModel(np.array([[1.0]]), M_sensors=[np.array([[3.0]]), np.zeros((1, 1))])
    Y = covariance.evaluate_Y(m, ())
    assert covariance.incremental_trace_gain(m, (), 0, Y) == pytest.approx(0.75)
    assert covariance.incremental_trace_gain(m, (), 1, Y) == 0.0
    with pytest.raises(ConfigurationError):
        covariance.incremental_trace_gain(m, (0,), 0, covariance.evaluate_Y(m, (0,)))


def test_incremental_gain_matches_difference(rng):
    m = random_model(rng, n=5, p=6, rank=2)
    X = (0, 3)
    Y = covariance.evaluate_Y(m, X)
    for u in (1, 2, 4, 5):
        direct = np.trace(Y) - np.trace(covariance.evaluate_Y(m, X + (u,)))
        assert covariance.incremental_trace_gain(m, X, u, Y) == pytest.approx(direct, abs=1e-9)


@given(st.integers(0, 2**32 - 1), st.integers(1, 6))
def test_loewner_monotone(seed, n):
    rng = np.random.default_rng(seed)
    m = random_model(rng, n=n, p=5)
    order = rng.permutation(5)
    A = tuple(sorted(order[:2]))
    B = tuple(sorted(order[:4]))
    assert numerics.lambda_min(covariance.evaluate_Y(m, A) - covariance.evaluate_Y(m, B)) >= -1e-9


def test_insertion_order_irrelevant(rng):
    m = random_model(rng, n=4, p=5)
    a = covariance.evaluate_Y(m, (4, 0, 2))
    b = covariance.evaluate_Y(m, (0, 2, 4))
    assert np.array_equal(a, b)
