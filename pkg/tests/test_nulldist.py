from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from charncp.errors import NullTableError, ParameterError
from charncp.nulldist import (
    NullTable,
    build_table,
    cache_path,
    load_or_build,
    p_value,
    simulate_sheet_sup,
    tucked_sheet,
)

from oracles import dense_pillow_sups, pillow_covariance

NODE_PAIRS = [
    ((4, 4), (4, 4)),
    ((4, 8), (12, 8)),
    ((8, 8), (8, 8)),
    ((2, 14), (6, 3)),
    ((12, 5), (12, 10)),
]


def tiny_table(values, grid=32, seed=0):
    v = np.sort(np.asarray(values, dtype=float))
    return NullTable(v, grid, v.size, seed)


class TestTuckedSheet:
    def test_boundaries_are_exactly_zero(self, rng):
        g = tucked_sheet(32, rng, size=20)
        assert g.shape == (20, 33, 33)
        for edge in (g[:, 0, :], g[:, -1, :], g[:, :, 0], g[:, :, -1]):
            assert np.all(edge == 0.0)

    def test_covariance_at_nodes(self, rng):
        m, reps = 16, 100_000
        g = tucked_sheet(m, rng, size=reps)
        for (i1, j1), (i2, j2) in NODE_PAIRS:
            prod = g[:, i1, j1] * g[:, i2, j2]
            se = prod.std() / np.sqrt(reps)
            target = pillow_covariance(i1 / m, j1 / m, i2 / m, j2 / m)
            assert abs(prod.mean() - target) < 4 * se

    def test_equals_tucking_of_free_sheet(self):
        # The centred-cell construction must equal the textbook tuck of the free sheet.
        m = 20
        z = np.random.default_rng(3).standard_normal((m, m))
        w = np.zeros((m + 1, m + 1))
        w[1:, 1:] = np.cumsum(np.cumsum(z, 0), 1) / m
        s = np.arange(m + 1) / m
        tucked = w - s[:, None] * w[-1][None, :] - s[None, :] * w[:, -1][:, None] + np.outer(s, s) * w[-1, -1]
        g = tucked_sheet(m, np.random.default_rng(3))
        np.testing.assert_allclose(g, tucked, atol=1e-13)

    def test_grid_too_small(self, rng):
        with pytest.raises(ParameterError):
            tucked_sheet(8, rng)

    def test_single_sup_is_positive(self, rng):
        assert simulate_sheet_sup(16, rng) > 0


class TestBuildTable:
    def test_deterministic(self):
        assert build_table(16, 1000, seed=5) == build_table(16, 1000, seed=5)
        assert build_table(16, 1000, seed=5) != build_table(16, 1000, seed=6)

    def test_thread_count_does_not_matter(self):
        assert build_table(16, 3000, seed=9, threads=1) == build_table(16, 3000, seed=9, threads=4)

    def test_sorted_and_sized(self):
        t = build_table(16, 1234, seed=1)
        assert t.sorted_sups.size == 1234
        assert np.all(np.diff(t.sorted_sups) >= 0)

    def test_minimums(self):
        with pytest.raises(ParameterError):
            build_table(16, 999)
        with pytest.raises(ParameterError):
            build_table(15, 1000)

    def test_cumsum_matches_cholesky_oracle(self, small_table):
        dense = dense_pillow_sups(32, 20_000, np.random.default_rng(11))
        assert abs(small_table.quantile(0.95) - np.quantile(dense, 0.95)) < 0.05

    def test_coarse_grid_underestimates(self, small_table):
        # The grid maximum can only miss peaks between nodes.
        fine = build_table(128, 2000, seed=7)
        assert small_table.quantile(0.95) < fine.quantile(0.95)


class TestPValue:
    def test_add_one_rule(self):
        t = tiny_table([0.5, 1.0, 1.5, 2.0])
        assert p_value(t, 3.0) == pytest.approx(1 / 5)
        assert p_value(t, 0.0) == pytest.approx(1.0)
        assert p_value(t, 1.0) == pytest.approx(4 / 5)  # ties count as "at least"
        assert p_value(t, 1.2) == pytest.approx(3 / 5)

    def test_method_matches_function(self, small_table):
        assert small_table.p_value(0.8) == p_value(small_table, 0.8)

    @settings(max_examples=100, deadline=None)
    @given(st.floats(0, 3), st.floats(0, 3))
    def test_monotone(self, a, b):
        t = tiny_table(np.linspace(0.1, 2.5, 50))
        lo, hi = sorted((a, b))
        assert p_value(t, hi) <= p_value(t, lo)
        assert 0 < p_value(t, hi) <= 1

    def test_critical_value_rejects_at_level(self, small_table):
        c = small_table.critical_value(0.05)
        assert small_table.p_value(c + 1e-9) <= 0.05 + 1 / small_table.replications


class TestPersistence:
    def test_round_trip_is_byte_identical(self, small_table, tmp_path):
        path = small_table.save(tmp_path / "t.bin")
        back = NullTable.load(path)
        assert back == small_table
        assert back.to_bytes() == small_table.to_bytes() == path.read_bytes()

    def test_rejects_garbage(self, tmp_path):
        with pytest.raises(NullTableError):
            NullTable.from_bytes(b"not a table")
        good = tiny_table([1.0, 2.0]).to_bytes()
        with pytest.raises(NullTableError):
            NullTable.from_bytes(good[:-3])
        with pytest.raises(NullTableError):
            NullTable.load(tmp_path / "missing.bin")

    def test_invariants(self):
        with pytest.raises(NullTableError):
            NullTable(np.array([2.0, 1.0]), 32, 2, 0)
        with pytest.raises(NullTableError):
            NullTable(np.array([1.0, 2.0]), 32, 3, 0)

    def test_quantiles_csv(self, small_table):
        lines = small_table.quantiles_csv().splitlines()
        assert lines[0] == "quantile,value"
        assert [ln.split(",")[0] for ln in lines[1:]] == ["0.9", "0.95", "0.99"]

    def test_cache_round_trip(self, tmp_path, monkeypatch):
        monkeypatch.setenv("CHARNCP_CACHE_DIR", str(tmp_path))
        first = load_or_build(16, 1000, 3)
        assert cache_path(16, 1000, 3).parent == tmp_path
        assert cache_path(16, 1000, 3).exists()
        assert load_or_build(16, 1000, 3) == first
