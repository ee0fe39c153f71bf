import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shadowbench import oracles
from shadowbench.errors import DiagnosticCapExceeded, DimensionMismatchError, InvariantViolation, ShadowBenchError
from shadowbench.hilbert import hermitian_eigenvalues
from shadowbench.shadow import (
    Observable,
    Shadow,
    closest_physical_state,
    shadow_expectation,
    shadow_expectation_grid,
    shadow_matrix,
    shadow_self_overlap,
)
from shadowbench.simulate import Dataset, RngStream, simulate_dataset, simulate_shot

from .conftest import random_state


def one_shot(psi):
    return Dataset(len(psi), np.array([psi]), 0, 0)


def test_expectation_parallel_and_orthogonal():
    phi = np.array([1, 0])
    assert shadow_expectation(one_shot(np.array([1, 0])), 1, Observable.projector(phi)) == pytest.approx(2.0)
    assert shadow_expectation(one_shot(np.array([0, 1])), 1, Observable.projector(phi)) == pytest.approx(-1.0)


def test_expectation_dimension_mismatch():
    with pytest.raises(DimensionMismatchError):
        shadow_expectation(one_shot(np.array([1, 0])), 1, Observable.projector([1, 0, 0]))


def test_prefix_bounds():
    d = simulate_dataset(4, 5, 0, 0)
    with pytest.raises(ShadowBenchError):
        Shadow(d, 0)
    with pytest.raises(ShadowBenchError):
        Shadow(d, 6)


def test_matrix_free_matches_dense(gen):
    for dim in (2, 5, 16, 64):
        d = simulate_dataset(dim, 40, 5, dim)
        for m in (1, 7, 40):
            phi = Observable.projector(random_state(gen, dim))
            fast = shadow_expectation(d, m, phi)
            dense = shadow_expectation(d, m, phi, dense=True)
            assert abs(fast - dense) <= 1e-10


def test_dense_observable_path(gen):
    d = simulate_dataset(6, 12, 1, 1)
    a = gen.standard_normal((6, 6)) + 1j * gen.standard_normal((6, 6))
    obs = Observable.dense(a + a.conj().T)
    assert shadow_expectation(d, 12, obs) == pytest.approx(shadow_expectation(d, 12, obs, dense=True), abs=1e-10)
    np.testing.assert_allclose(shadow_expectation_grid(d, obs, [3, 12]),
                               [shadow_expectation(d, 3, obs), shadow_expectation(d, 12, obs)], atol=1e-10)


def test_identity_observable_is_one():
    d = simulate_dataset(8, 30, 2, 0)
    for m in (1, 13, 30):
        assert shadow_expectation(d, m, Observable.dense(np.eye(8))) == pytest.approx(1.0, abs=1e-10)
        assert shadow_expectation(d, m, Observable.dense(np.eye(8)), dense=True) == pytest.approx(1.0, abs=1e-10)


def test_permutation_invariance(gen):
    d = simulate_dataset(8, 20, 4, 0)
    phi = Observable.projector(random_state(gen, 8))
    perm = Dataset(8, d.outcomes[gen.permutation(20)], 0, 0)
    assert shadow_expectation(perm, 20, phi) == pytest.approx(shadow_expectation(d, 20, phi), abs=1e-12)


def test_grid_matches_pointwise(gen):
    d = simulate_dataset(32, 300, 7, 3)
    phi = Observable.projector(random_state(gen, 32))
    grid = [1, 2, 50, 299, 300]
    np.testing.assert_allclose(shadow_expectation_grid(d, phi, grid),
                               [shadow_expectation(d, m, phi) for m in grid], atol=1e-12)
    with pytest.raises(ShadowBenchError):
        shadow_expectation_grid(d, phi, [0, 5])


@pytest.mark.parametrize("dim", [4, 32])
def test_single_shot_unbiased(dim):
    rng = RngStream(77, dim)
    psi = np.array([simulate_shot(dim, rng) for _ in range(100_000)])
    for j, truth in ((0, 1.0), (1, 0.0)):
        est = (dim + 1) * np.abs(psi[:, j]) ** 2 - 1
        se = est.std(ddof=1) / np.sqrt(est.size)
        assert abs(est.mean() - truth) <= 3 * se


def test_matrix_trace_and_m1_spectrum():
    d = simulate_dataset(2, 1, 3, 0)
    rho = shadow_matrix(d, 1)
    np.testing.assert_allclose(hermitian_eigenvalues(rho), [2, -1], atol=1e-12)
    d = simulate_dataset(12, 40, 3, 0)
    for m in (1, 11, 40):
        assert np.trace(shadow_matrix(d, m)).real == pytest.approx(1.0, abs=1e-10)


@settings(max_examples=20, deadline=None)
@given(dim=st.integers(2, 24), m=st.integers(1, 30), seed=st.integers(0, 2**32))
def test_negativity_multiplicity(dim, m, seed):
    d = simulate_dataset(dim, m, seed, 0)
    ev = hermitian_eigenvalues(shadow_matrix(d, m))
    assert np.sum(np.abs(ev + 1) <= 1e-9) >= dim - m


def test_matrix_cap():
    d = simulate_dataset(600, 1, 0, 0)
    with pytest.raises(DiagnosticCapExceeded):
        shadow_matrix(d, 1)


def test_self_overlap_examples():
    psi = random_state(np.random.default_rng(0), 2)
    assert shadow_self_overlap(one_shot(psi), 1) == pytest.approx(5.0, abs=1e-12)
    twice = Dataset(2, np.array([psi, psi]), 0, 0)
    assert shadow_self_overlap(twice, 2) == pytest.approx(5.0, abs=1e-12)


def test_self_overlap_matches_dense():
    d = simulate_dataset(8, 20, 9, 0)
    rho = oracles.dense_shadow(d.outcomes)
    assert shadow_self_overlap(d, 20) == pytest.approx(np.trace(rho @ rho).real, abs=1e-8)


def test_quadratic_form_matches_dense(gen):
    d = simulate_dataset(8, 15, 2, 2)
    rho = oracles.dense_shadow(d.outcomes)
    xs = gen.standard_normal((5, 8)) + 1j * gen.standard_normal((5, 8))
    q = Shadow(d, 15).quadratic_form(xs)
    expected = [np.vdot(x, rho @ x).real / np.vdot(x, x).real for x in xs]
    np.testing.assert_allclose(q, expected, atol=1e-10)


def test_projection_identity_on_density_matrices(gen):
    a = gen.standard_normal((5, 5)) + 1j * gen.standard_normal((5, 5))
    rho = a @ a.conj().T
    rho /= np.trace(rho).real
    np.testing.assert_allclose(closest_physical_state(rho), rho, atol=1e-10)


def test_projection_single_shot():
    psi = random_state(np.random.default_rng(3), 2)
    proj = closest_physical_state(shadow_matrix(one_shot(psi), 1))
    np.testing.assert_allclose(proj, np.outer(psi, psi.conj()), atol=1e-10)


def test_projection_matches_dykstra(gen):
    for _ in range(5):
        a = gen.standard_normal((6, 6)) + 1j * gen.standard_normal((6, 6))
        h = (a + a.conj().T) / 2
        h += (1 - np.trace(h).real) / 6 * np.eye(6)
        proj = closest_physical_state(h)
        ref = oracles.dykstra_density_projection(h)
        assert np.max(np.abs(proj - ref)) <= 1e-7
        assert hermitian_eigenvalues(proj).min() >= -1e-10
        assert np.trace(proj).real == pytest.approx(1.0, abs=1e-10)


def test_projection_of_shadows_is_physical():
    d = simulate_dataset(16, 50, 8, 0)
    for m in (1, 5, 50):
        proj = closest_physical_state(shadow_matrix(d, m))
        assert hermitian_eigenvalues(proj).min() >= -1e-10
        assert np.trace(proj).real == pytest.approx(1.0, abs=1e-10)


def test_projection_rejects_bad_trace():
    with pytest.raises(InvariantViolation):
        closest_physical_state(np.eye(3))


def test_observable_constructors():
    with pytest.raises(InvariantViolation):
        Observable.projector([1, 1])
    obs = Observable.projector([0, 1], tag="e1")
    assert obs.ground_truth() == 0.0
    assert obs.expectation(np.array([[0, 3j], [1, 0]])) == pytest.approx([1.0, 0.0])
