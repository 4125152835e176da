import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from tamedspde.errors import ConfigurationError
from tamedspde.noise import (
    NoiseSource,
    block_sum,
    coarsen,
    dump_path,
    load_path,
    sample_path,
    standard_normals,
    truncate_modes,
)


def test_deterministic_per_key():
    a = sample_path(7, 3, 64, 4)
    b = sample_path(7, 3, 64, 4)
    np.testing.assert_array_equal(a.increments, b.increments)
    assert not np.array_equal(a.increments, sample_path(7, 4, 64, 4).increments)
    assert not np.array_equal(a.increments, sample_path(8, 3, 64, 4).increments)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 50), st.integers(1, 40), st.integers(0, 3))
def test_any_window_regenerates_identically(start, count, mode):
    full = standard_normals(11, 2, mode, 0, 100)
    np.testing.assert_array_equal(standard_normals(11, 2, mode, start, count),
                                  full[start:start + count])


def test_increment_variance_and_mode_independence():
    n = 10**4
    p = sample_path(0, 0, n, 2, T=2.0)
    var = np.var(p.increments[0], ddof=1)
    assert abs(var / (2.0 / n) - 1) < 0.05
    r = np.corrcoef(p.increments[0], p.increments[1])[0, 1]
    assert abs(r) < 3 / np.sqrt(n)
    assert stats.kstest(p.increments[0] / np.sqrt(2.0 / n), "norm").pvalue > 1e-3


def test_values_start_at_zero():
    p = sample_path(1, 0, 16, 2)
    w = p.values()
    assert w.shape == (2, 17) and not np.any(w[:, 0])
    np.testing.assert_allclose(w[:, -1], p.increments.sum(axis=-1))


def test_coarsen_identity_and_total():
    p = sample_path(5, 0, 64, 3)
    np.testing.assert_array_equal(coarsen(p, 64).increments, p.increments)
    np.testing.assert_allclose(coarsen(p, 1).increments[:, 0], p.increments.sum(axis=-1), rtol=1e-13)


def test_coarsen_half_is_exact_pair_sum():
    p = sample_path(5, 0, 64, 3)
    half = coarsen(p, 32).increments
    np.testing.assert_array_equal(half, p.increments[:, 0::2] + p.increments[:, 1::2])


def test_nested_coarsening_is_exact():
    p = sample_path(2, 1, 2**10, 2)
    direct = coarsen(p, 2**4).increments
    nested = coarsen(coarsen(coarsen(p, 2**8), 2**6), 2**4).increments
    np.testing.assert_array_equal(direct, nested)
    # a coarse path read back at a finer grid uses the stored fine table
    np.testing.assert_array_equal(coarsen(coarsen(p, 4), 2**7).increments,
                                  coarsen(p, 2**7).increments)


def test_coarsen_rejects_non_divisor():
    with pytest.raises(ConfigurationError):
        coarsen(sample_path(0, 0, 12, 1), 5)


def test_block_sum_non_dyadic():
    x = np.arange(12.0)
    np.testing.assert_array_equal(block_sum(x, 3), [3, 12, 21, 30])


def test_truncation_is_a_prefix():
    big = sample_path(3, 0, 32, 6)
    small = sample_path(3, 0, 32, 2)
    np.testing.assert_array_equal(truncate_modes(big, 2).increments, small.increments)
    assert truncate_modes(big, 6) is big
    np.testing.assert_array_equal(truncate_modes(big, 1).increments, big.increments[:1])
    with pytest.raises(ConfigurationError):
        truncate_modes(big, 7)


def test_source_chunks_match_full_table():
    src = NoiseSource(9, [0, 5, 2], 64, 3, T=0.5)
    full = src.path().increments
    pieces = np.concatenate([src.increments(3, 16, a, a + 4) for a in (0, 4, 8, 12)], axis=-1)
    np.testing.assert_array_equal(pieces, block_sum(full, 4))
    one = sample_path(9, 5, 64, 3, T=0.5).increments
    np.testing.assert_array_equal(full[1], one)


def test_dump_load_round_trip(tmp_path):
    p = sample_path(123, 4, 10, 3, T=1.5)
    buf = io.BytesIO()
    dump_path(p, buf)
    q = load_path(io.BytesIO(buf.getvalue()))
    assert (q.seed, q.sample_index, q.n, q.k, q.T) == (123, 4, 10, 3, 1.5)
    np.testing.assert_array_equal(q.increments, p.increments)
    dump_path(p, tmp_path / "w.bin")
    np.testing.assert_array_equal(load_path(tmp_path / "w.bin").increments, p.increments)
    assert (tmp_path / "w.bin").stat().st_size == 40 + 8 * 30


def test_truncated_payload_rejected():
    buf = io.BytesIO()
    dump_path(sample_path(0, 0, 4, 1), buf)
    with pytest.raises(ConfigurationError):
        load_path(io.BytesIO(buf.getvalue()[:-8]))


def test_invalid_arguments():
    with pytest.raises(ConfigurationError):
        sample_path(0, 0, 0, 1)
    with pytest.raises(ConfigurationError):
        sample_path(0, 0, 4, 1, T=0.0)
