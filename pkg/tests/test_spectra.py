"""Eigenvalue grouping, gap statistics, and the contributing set."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gaplab.sampling import derive_rng
from gaplab.scenarios import random_hamiltonian
from gaplab.spectra import contributing_set, gap_count, group_eigenvalues, spectral_stats


def simple_spectrum(raw_values, tol=1e-9):
    raw = np.asarray(raw_values, dtype=float)
    return group_eigenvalues(raw, np.eye(raw.size), tol)


def test_grouping_keeps_separated_values_apart():
    spec = simple_spectrum([0.0, 1.0, 2.0])
    assert [b.shape[1] for b in spec.blocks] == [1, 1, 1]
    assert list(spec.values) == [0.0, 1.0, 2.0]


def test_grouping_chains_transitively():
    # 0 and 2e-10 differ by more than the tolerance but are linked through 1e-10.
    spec = simple_spectrum([0.0, 1e-10, 2e-10, 1.0], tol=1.5e-10)
    assert spec.values.size == 2
    assert spec.multiplicities[0] == 3
    assert spec.values[0] == pytest.approx(1e-10, abs=1e-25)


def test_grouping_blocks_are_orthonormal():
    rng = derive_rng(200)
    raw = np.array([0.0, 0.0, 0.0, 2.0, 2.0, 5.0])
    X = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    Q, _ = np.linalg.qr(X)
    spec = group_eigenvalues(raw, Q, 1e-9)
    assert [b.shape[1] for b in spec.blocks] == [3, 2, 1]
    for b in spec.blocks:
        assert np.abs(b.conj().T @ b - np.eye(b.shape[1])).max() <= 1e-10


def test_stats_two_levels():
    s = spectral_stats(simple_spectrum([0.0, 1.0]))
    assert (s.n_distinct, s.max_degeneracy, s.max_gap_degeneracy) == (2, 1, 1)


def test_stats_three_levels_gap_degeneracy():
    s = spectral_stats(simple_spectrum([0.0, 1.0, 2.0]))
    assert (s.n_distinct, s.max_degeneracy, s.max_gap_degeneracy) == (3, 1, 2)


def test_stats_uneven_four_levels():
    # Ordered gaps of {0,1,2,4}: +-1 twice, +-2 twice, +-3, +-4.
    s = spectral_stats(simple_spectrum([0.0, 1.0, 2.0, 4.0]))
    assert s.max_gap_degeneracy == 2


def test_stats_with_multiplicities():
    rng = derive_rng(201)
    spec = random_hamiltonian(6, [2, 3, 1], rng)
    s = spectral_stats(spec)
    assert s.n_distinct == 3
    assert s.max_degeneracy == 3


def test_window_count_worked_example():
    spec = simple_spectrum([0.0, 1.0, 2.0])
    # Window [1, 2.5) captures the two +1 gaps and the +2 gap.
    assert gap_count(spec, 1.5) == 3
    assert gap_count(spec, 0.5) == 2


def test_window_count_limits_and_monotonicity():
    rng = derive_rng(202)
    for trial in range(10):
        d = int(rng.integers(3, 9))
        spec = simple_spectrum(np.sort(rng.standard_normal(d)) * 3.0)
        s = spectral_stats(spec)
        diameter = spec.values[-1] - spec.values[0]
        counts = [gap_count(spec, k) for k in np.linspace(1e-9, 2.2 * diameter, 12)]
        assert all(a <= b for a, b in zip(counts, counts[1:]))
        assert counts[0] == s.max_gap_degeneracy
        assert counts[-1] == d * (d - 1)
        assert all(c >= s.max_gap_degeneracy for c in counts)


def test_contributing_single_projector():
    spec = simple_spectrum([0.0, 1.0, 2.0])
    P0 = spec.blocks[1] @ spec.blocks[1].conj().T
    cs = contributing_set(spec, P0)
    assert cs.n_distinct == 1
    assert list(cs.indices) == [1]
    assert cs.values[0] == pytest.approx(1.0)
    assert cs.gap_count(1.0) == 0


def test_contributing_identity_keeps_everything():
    rng = derive_rng(203)
    spec = random_hamiltonian(7, [2, 2, 3], rng)
    cs = contributing_set(spec, np.eye(7))
    assert cs.n_distinct == 3
    assert list(cs.indices) == [0, 1, 2]


def test_contributing_two_block_coupling():
    spec = simple_spectrum([0.0, 1.0, 2.0, 3.0])
    v0 = spec.blocks[0][:, 0]
    v2 = spec.blocks[2][:, 0]
    B = np.outer(v0, v2.conj()) + np.outer(v2, v0.conj())
    cs = contributing_set(spec, B)
    assert list(cs.indices) == [0, 2]
    assert cs.max_gap_degeneracy == 1


def test_contributing_never_exceeds_absolute_stats():
    rng = derive_rng(204)
    for trial in range(8):
        spec = random_hamiltonian(8, [1, 2, 2, 3], rng)
        X = rng.standard_normal((8, 8)) + 1j * rng.standard_normal((8, 8))
        B = (X + X.conj().T) / 2
        s = spectral_stats(spec)
        cs = contributing_set(spec, B)
        assert cs.n_distinct <= s.n_distinct
        assert cs.max_degeneracy <= s.max_degeneracy
        assert cs.max_gap_degeneracy <= s.max_gap_degeneracy
        assert cs.gap_count(1.0) <= gap_count(spec, 1.0)


@settings(max_examples=60, deadline=None)
@given(
    values=st.lists(
        st.floats(min_value=-50, max_value=50, allow_nan=False),
        min_size=2,
        max_size=8,
        unique=True,
    ),
    k1=st.floats(min_value=1e-6, max_value=40.0),
    k2=st.floats(min_value=1e-6, max_value=40.0),
)
def test_window_count_monotone_property(values, k1, k2):
    spec = simple_spectrum(sorted(values))
    lo, hi = sorted((k1, k2))
    assert gap_count(spec, lo) <= gap_count(spec, hi)
