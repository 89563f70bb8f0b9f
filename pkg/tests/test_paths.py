import itertools
import json
import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from trimoment import paths as pa


def _brute_gamma(k):
    return {p for p in pa.brute_force_closed_paths(k, -(k // 2) - 1, 0, 1)
            if max(p) == 0 and all(abs(a - b) == 1 for a, b in zip(p, p[1:]))}


def _brute_minus(k):
    return {p for p in pa.brute_force_closed_paths(k, -(k // 2) - 1, 0, 1)
            if max(p) == 0 and any(a == b for a, b in zip(p, p[1:]))}


def _closed(steps):
    # walk out and retrace, giving a closed path of any parity
    return list(itertools.accumulate([0] + steps + [-s for s in reversed(steps)]))


class TestEnumerateGamma:
    def test_k4_matches_listing(self):
        want = {
            (0, -1, 0, -1, 0), (0, -1, -2, -1, 0), (-1, 0, -1, 0, -1),
            (-1, -2, -1, 0, -1), (-1, 0, -1, -2, -1), (-2, -1, 0, -1, -2),
        }
        assert set(pa.enumerate_gamma(4)) == want

    def test_k2_and_odd(self):
        assert set(pa.enumerate_gamma(2)) == {(0, -1, 0), (-1, 0, -1)}
        assert pa.enumerate_gamma(3) == ()
        assert pa.enumerate_gamma(7) == ()

    @pytest.mark.parametrize("k", [2, 4, 6, 8, 10, 12])
    def test_central_binomial_count(self, k):
        assert len(pa.enumerate_gamma(k)) == math.comb(k, k // 2)

    @pytest.mark.parametrize("k", range(1, 9))
    def test_brute_force(self, k):
        assert set(pa.enumerate_gamma(k)) == _brute_gamma(k)

    def test_lexicographic_order(self):
        out = pa.enumerate_gamma(8)
        assert list(out) == sorted(out)

    @pytest.mark.parametrize("k", [2, 4, 6, 8, 10])
    def test_crossings_sum_and_no_flats(self, k):
        for g in pa.enumerate_gamma(k):
            s = pa.level_stats(g)
            assert sum(s.crossings.values()) == k
            assert not s.flats

    @pytest.mark.parametrize("k", [2, 4, 6, 8, 10])
    def test_weighted_level_sum(self, k):
        total = sum(i * c for g in pa.enumerate_gamma(k) for i, c in pa.level_stats(g).crossings.items())
        assert total == -k * 2 ** (k - 1)

    @pytest.mark.parametrize("k", [2, 4, 6, 8, 10])
    def test_square_level_sum(self, k):
        total = sum(c * c for g in pa.enumerate_gamma(k) for c in pa.level_stats(g).crossings.values())
        assert total == k * 2 ** k


class TestEnumerateMinus:
    def test_small(self):
        assert pa.enumerate_gamma_minus(1) == ((0, 0),)
        assert pa.enumerate_gamma_minus(2) == ((0, 0, 0),)

    @pytest.mark.parametrize("k", range(1, 8))
    def test_brute_force(self, k):
        assert set(pa.enumerate_gamma_minus(k)) == _brute_minus(k)

    @pytest.mark.parametrize("k", [4, 6, 8, 10])
    def test_two_flat_count(self, k):
        assert len(pa.enumerate_gamma_2flat(k)) == k * 2 ** (k - 3)

    def test_two_flat_filter(self):
        for p in pa.enumerate_gamma_2flat(6):
            s = pa.level_stats(p)
            assert list(s.flats.values()) == [2]


class TestLevelStats:
    def test_worked_example(self):
        s = pa.level_stats((-2, -2, -3, -2, -2, -1, 0, 1, 1, 0, -1, -2, -1, -2))
        assert s.crossings == {-3: 2, -2: 4, -1: 2, 0: 2}
        assert s.flats == {-2: 2, 1: 1}

    def test_intro_path(self):
        s = pa.level_stats((0, -1, 0, -1, 0))
        assert s.crossings == {-1: 4}
        assert not s.flats

    def test_single_flat(self):
        s = pa.level_stats((0, 0))
        assert s.flats == {0: 1}
        assert not s.crossings

    @given(st.lists(st.sampled_from([-1, 0, 1]), min_size=1, max_size=6), st.integers(-3, 3))
    def test_shift_equivariance(self, steps, shift):
        path = _closed(steps)
        base = pa.level_stats(path)
        moved = pa.level_stats([j + shift for j in path])
        assert moved.crossings == {i + shift: c for i, c in base.crossings.items()}
        assert moved.flats == {i + shift: c for i, c in base.flats.items()}

    @given(st.lists(st.sampled_from([-1, 0, 1]), min_size=1, max_size=6))
    def test_counts_add_to_length(self, steps):
        path = _closed(steps)
        s = pa.level_stats(path)
        assert sum(s.crossings.values()) + sum(s.flats.values()) == 2 * len(steps)

    def test_rejects_big_step(self):
        with pytest.raises(ValueError):
            pa.validate_path((0, 2, 0), w=1)


class TestColoredStats:
    def test_alternating(self):
        s = pa.colored_stats((0, -1, 0, -1, 0), (1, 2, 1, 2))
        assert s.colored == {(-1, 1): 2, (-1, 2): 2}

    def test_step_trace(self):
        s = pa.colored_stats((0, -1, -2, -1, 0), (1, 1, 2, 2))
        assert s.colored == {(-1, 1): 1, (-2, 1): 1, (-2, 2): 1, (-1, 2): 1}

    def test_single_color_reduces(self):
        for g in pa.enumerate_gamma(6):
            s = pa.colored_stats(g, (1,) * 6)
            assert {i: c for (i, _), c in s.colored.items()} == pa.level_stats(g).crossings

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            pa.colored_stats((0, -1, 0), (1,))


class TestPairs:
    def test_mixed_parity_empty(self):
        assert pa.enumerate_gamma_pairs(2, 3) == ()

    @pytest.mark.parametrize("k,l", [(1, 1), (1, 3), (3, 3), (3, 5), (5, 5)])
    def test_odd_count(self, k, l):
        want = k * l * math.comb(k - 1, (k - 1) // 2) * math.comb(l - 1, (l - 1) // 2)
        assert len(pa.enumerate_gamma_pairs(k, l)) == want

    @pytest.mark.parametrize("k,l", [(2, 2), (2, 4), (4, 4)])
    def test_even_brute_force(self, k, l):
        lo = -(k + l)
        A = [p for p in pa.brute_force_closed_paths(k, lo, 0) if all(abs(a - b) == 1 for a, b in zip(p, p[1:]))]
        B = [p for p in pa.brute_force_closed_paths(l, lo, 0) if all(abs(a - b) == 1 for a, b in zip(p, p[1:]))]
        want = {(a, b) for a in A for b in B
                if max(max(a), max(b)) == 0
                and set(pa.level_stats(a).crossings) & set(pa.level_stats(b).crossings)}
        assert set(pa.enumerate_gamma_pairs(k, l)) == want

    def test_k2_l2_count(self):
        # both paths cross -1/2: the two paths of length 2 paired in all orders
        assert len(pa.enumerate_gamma_pairs(2, 2)) == 4

    def test_odd_brute_force(self):
        lo = -4
        fam = [p for p in pa.brute_force_closed_paths(3, lo, 0)
               if sum(a == b for a, b in zip(p, p[1:])) == 1]
        want = {(a, b) for a in fam for b in fam
                if max(max(a), max(b)) == 0 and pa.level_stats(a).flats.keys() == pa.level_stats(b).flats.keys()}
        assert set(pa.enumerate_gamma_pairs(3, 3)) == want


class TestBand:
    @pytest.mark.parametrize("k", range(1, 8))
    def test_w1_is_union(self, k):
        assert set(pa.enumerate_gamma_band(k, 1)) == set(pa.enumerate_gamma(k)) | set(pa.enumerate_gamma_minus(k))

    def test_k2_w2(self):
        want = {(a, b, a) for a in range(-2, 1) for b in range(-2, 1) if abs(a - b) <= 2 and max(a, b) == 0}
        assert set(pa.enumerate_gamma_band(2, 2)) == want

    def test_k1(self):
        assert pa.enumerate_gamma_band(1, 3) == ((0, 0),)

    @pytest.mark.parametrize("k,w", [(3, 2), (4, 2), (3, 3), (5, 2)])
    def test_brute_force(self, k, w):
        want = {p for p in pa.brute_force_closed_paths(k, -w * k, 0, w) if max(p) == 0}
        assert set(pa.enumerate_gamma_band(k, w)) == want


def test_json_round_trip():
    g = pa.enumerate_gamma(4)
    assert [tuple(p) for p in json.loads(pa.paths_to_json(g))] == list(g)
    pairs = pa.enumerate_gamma_pairs(1, 1)
    assert json.loads(pa.paths_to_json(pairs)) == [[list(a), list(b)] for a, b in pairs]
