"""Gaussian and projected ensembles against analytic and resampling oracles."""

import numpy as np
import pytest
from scipy import stats

from conftest import diagonal_density
from gaplab.linalg import trace_norm
from gaplab.sampling import (
    DensityMatrix,
    derive_rng,
    empirical_density_matrix,
    sample_gap,
    sample_gap_resampling_oracle,
    sample_gaussian,
)
from gaplab.scenarios import haar_unitary, random_density


def test_density_matrix_validates_trace_and_unitarity():
    with pytest.raises(ValueError):
        DensityMatrix(probabilities=np.array([0.6, 0.6]), basis=np.eye(2))
    with pytest.raises(ValueError):
        DensityMatrix(probabilities=np.array([0.5, 0.5]), basis=np.ones((2, 2)))


def test_density_matrix_from_matrix_sorts_descending():
    rng = derive_rng(300)
    rho = random_density(5, rng)
    rebuilt = DensityMatrix.from_matrix(rho.matrix())
    assert np.all(np.diff(rebuilt.probabilities) <= 1e-15)
    assert np.abs(rebuilt.matrix() - rho.matrix()).max() <= 1e-10


def test_gaussian_mean_square_norm_is_one():
    rng = derive_rng(301)
    rho = random_density(5, rng)
    g = sample_gaussian(rho, rng, size=100_000)
    sq = np.einsum("ij,ij->i", g.conj(), g).real
    se = sq.std() / np.sqrt(sq.size)
    assert abs(sq.mean() - 1.0) <= 4.0 * se


def test_gaussian_covariance_split_evenly():
    rng = derive_rng(302)
    rho = diagonal_density([0.5, 0.5])
    g = sample_gaussian(rho, rng, size=200_000)
    parts = np.column_stack([g[:, 0].real, g[:, 0].imag, g[:, 1].real, g[:, 1].imag])
    cov = np.cov(parts, rowvar=False)
    assert np.abs(cov - np.diag([0.25, 0.25, 0.25, 0.25])).max() <= 5e-3


def test_pure_state_supported_on_one_coordinate():
    rho = diagonal_density([1.0, 0.0, 0.0])
    rng = derive_rng(303)
    g = sample_gaussian(rho, rng, size=50)
    assert np.abs(g[:, 1:]).max() == 0.0
    psi = sample_gap(rho, rng, size=50)
    assert np.abs(np.abs(psi[:, 0]) - 1.0).max() <= 1e-12
    assert np.abs(psi[:, 1:]).max() == 0.0


def test_gap_states_have_unit_norm():
    rng = derive_rng(304)
    rho = random_density(6, rng)
    psi = sample_gap(rho, rng, size=2000)
    assert np.abs(np.linalg.norm(psi, axis=1) - 1.0).max() <= 1e-12


def test_gap_matches_target_density_matrix():
    rho = diagonal_density([0.3, 0.3, 0.2, 0.2])
    rng = derive_rng(305)
    psi = sample_gap(rho, rng, size=50_000)
    emp = empirical_density_matrix(psi)
    assert trace_norm(emp - rho.matrix()) <= 0.03


def test_gap_covariant_under_change_of_basis():
    p = np.array([0.4, 0.3, 0.2, 0.1])
    U = haar_unitary(4, derive_rng(306))
    plain = sample_gap(diagonal_density(p), derive_rng(307), size=64)
    rotated = sample_gap(DensityMatrix(probabilities=p, basis=U), derive_rng(307), size=64)
    assert np.abs(rotated - plain @ U.T).max() <= 1e-12


def test_stream_determinism_and_independence():
    rho = diagonal_density([0.25, 0.25, 0.25, 0.25])
    a = sample_gap(rho, derive_rng(308, 0, 4), size=8)
    b = sample_gap(rho, derive_rng(308, 0, 4), size=8)
    c = sample_gap(rho, derive_rng(308, 0, 5), size=8)
    assert np.array_equal(a, b)
    assert np.abs(a - c).max() > 1e-3


def test_haar_fourth_moment_at_uniform_rho():
    rng = derive_rng(309)
    rho = diagonal_density([0.25] * 4)
    psi = sample_gap(rho, rng, size=200_000)
    m = np.abs(psi[:, 0]) ** 4
    se = m.std() / np.sqrt(m.size)
    assert abs(m.mean() - 0.1) <= 4.0 * se


def test_resampling_oracle_requires_large_batch():
    rho = diagonal_density([0.5, 0.5])
    with pytest.raises(ValueError):
        sample_gap_resampling_oracle(rho, derive_rng(310), batch=10)


def test_oracle_and_mixture_sampler_agree():
    rng = derive_rng(311)
    rho = diagonal_density([0.3, 0.3, 0.2, 0.2])
    direct = np.abs(sample_gap(rho, rng, size=40_000)[:, 0]) ** 2
    oracle = np.array(
        [
            np.abs(sample_gap_resampling_oracle(rho, rng, batch=1000)[0]) ** 2
            for _ in range(1500)
        ]
    )
    assert stats.ks_2samp(direct, oracle).pvalue > 1e-3


def test_empirical_density_rank_one_cases():
    rng = derive_rng(312)
    psi = rng.standard_normal(4) + 1j * rng.standard_normal(4)
    psi /= np.linalg.norm(psi)
    single = empirical_density_matrix(psi)
    assert np.abs(single - np.outer(psi, psi.conj())).max() <= 1e-14
    repeated = empirical_density_matrix(np.tile(psi, (10, 1)))
    assert np.abs(repeated - single).max() <= 1e-14


def test_empirical_density_rejects_unnormalized():
    with pytest.raises(ValueError):
        empirical_density_matrix(np.array([[2.0, 0.0]]))


def test_fidelity_improves_at_root_n_rate():
    rng = derive_rng(313)
    rho = random_density(8, rng, p_max_limit=0.25)
    target = rho.matrix()
    small = sample_gap(rho, derive_rng(314), size=20_000)
    large = sample_gap(rho, derive_rng(315), size=80_000)
    d_small = trace_norm(empirical_density_matrix(small) - target)
    d_large = trace_norm(empirical_density_matrix(large) - target)
    ratio = d_small / d_large
    assert 1.4 <= ratio <= 2.6
