import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from jumpmilstein import (JumpTimes, build_grid, draw_brownian, draw_jump_times, make_path_randomness,
                          restrict, underline_t)
from jumpmilstein.randomness import (DET, JUMP, CouplingError, dump_randomness, load_randomness, pad_batch,
                                     path_streams)

jump_lists = st.lists(st.floats(1e-6, 1.0, allow_nan=False), max_size=8, unique=True).map(
    lambda xs: JumpTimes(np.sort(np.array(xs, dtype=float)), 1.0))


class TestJumpTimes:
    def test_no_jumps_when_first_arrival_beyond_horizon(self):
        rng = np.random.default_rng(0)
        jt = draw_jump_times(1e-9, 1.0, rng)
        assert jt.count == 0

    def test_sorted_and_inside_horizon(self):
        for s in range(50):
            jt = draw_jump_times(20.0, 1.5, np.random.default_rng(s))
            assert np.all(np.diff(jt.times) > 0)
            assert np.all((jt.times > 0) & (jt.times <= 1.5))

    def test_poisson_mean(self):
        lam, T, n = 2.0, 1.0, 100_000
        counts = np.array([draw_jump_times(lam, T, path_streams(123, i)[0]).count for i in range(n)])
        assert abs(counts.mean() - lam * T) <= 3 * np.sqrt(lam * T / n)

    def test_inter_arrivals_exponential(self):
        rng = np.random.default_rng(2024)
        jt = draw_jump_times(5.0, 2000.0, rng)
        gaps = np.diff(np.r_[0.0, jt.times])[:10_000]
        assert len(gaps) == 10_000
        assert stats.kstest(gaps, "expon", args=(0, 1 / 5.0)).pvalue > 0.001

    def test_rejects_bad_rate(self):
        with pytest.raises(ValueError):
            draw_jump_times(0.0, 1.0, np.random.default_rng(0))


class TestGrid:
    def test_equidistant(self):
        g = build_grid(4, 1.0, JumpTimes(np.array([]), 1.0))
        np.testing.assert_array_equal(g.taus, [0, 0.25, 0.5, 0.75, 1.0])
        assert not g.is_jump.any()

    def test_one_jump(self):
        g = build_grid(2, 1.0, JumpTimes(np.array([0.3]), 1.0))
        np.testing.assert_array_equal(g.taus, [0, 0.3, 0.5, 1.0])
        np.testing.assert_array_equal(g.tags, [DET, JUMP, DET, DET])
        np.testing.assert_array_equal(g.det_index, [0, -1, 1, 2])

    def test_single_interval(self):
        g = build_grid(1, 1.0, JumpTimes(np.array([0.2, 0.7]), 1.0))
        np.testing.assert_array_equal(g.taus, [0, 0.2, 0.7, 1.0])

    def test_tie_gives_one_jump_point(self):
        g = build_grid(4, 1.0, JumpTimes(np.array([0.5, 1.0]), 1.0))
        np.testing.assert_array_equal(g.taus, [0, 0.25, 0.5, 0.75, 1.0])
        np.testing.assert_array_equal(g.tags, [DET, DET, JUMP, DET, JUMP])
        np.testing.assert_array_equal(g.det_index, [0, 1, 2, 3, 4])

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 64), jump_lists)
    def test_invariants(self, M, jumps):
        g = build_grid(M, 1.0, jumps)
        assert g.taus[0] == 0.0 and g.taus[-1] == 1.0
        assert np.all(np.diff(g.taus) > 0)
        assert np.diff(g.taus).max() <= g.delta * (1 + 1e-12)
        assert set(np.arange(M + 1)) <= set(g.det_index[g.det_index >= 0])
        assert set(jumps.times) <= set(g.taus[g.is_jump])
        assert g.is_jump.sum() == jumps.count
        # no jump strictly inside any interval
        for a, b in zip(g.taus[:-1], g.taus[1:]):
            assert not np.any((jumps.times > a) & (jumps.times < b))

    @settings(max_examples=100, deadline=None)
    @given(st.integers(1, 32), jump_lists)
    def test_refinement_nests(self, M, jumps):
        coarse, fine = build_grid(M, 1.0, jumps), build_grid(2 * M, 1.0, jumps)
        assert set(coarse.taus) <= set(fine.taus)


class TestUnderline:
    def test_examples(self):
        assert underline_t(0.3, 4, 1.0) == 0.25
        assert underline_t(0.5, 4, 1.0) == 0.5
        assert underline_t(1.0, 4, 1.0) == 1.0

    def test_domain(self):
        with pytest.raises(ValueError):
            underline_t(1.1, 4, 1.0)
        with pytest.raises(ValueError):
            underline_t(-0.1, 4, 1.0)

    @given(st.floats(0, 3, allow_nan=False), st.integers(1, 1000))
    def test_largest_grid_point_below(self, t, M):
        u = underline_t(t, M, 3.0)
        assert u <= t < u + 3.0 / M or u == 3.0


class TestBrownian:
    def test_zero_length_interval(self):
        dw = draw_brownian(np.array([0.0, 0.5, 0.5, 1.0]), np.random.default_rng(0))
        assert dw[1] == 0.0

    def test_terminal_variance_and_independence(self):
        rng = np.random.default_rng(7)
        times = np.array([0.0, 0.2, 0.45, 1.0])
        dw = np.array([draw_brownian(times, rng) for _ in range(100_000)])
        assert abs(dw.sum(axis=1).var() - 1.0) <= 0.02
        corr = np.corrcoef(dw.T)
        assert np.max(np.abs(corr[np.triu_indices(3, 1)])) < 0.01

    def test_master_grid_variance(self):
        W_T = np.array([make_path_randomness(1.0, 1.0, 8, 5, i).W[-1] for i in range(20_000)])
        assert abs(W_T.var() - 1.0) <= 0.05


class TestRestriction:
    def setup_method(self):
        self.pr = make_path_randomness(3.0, 1.0, 64, 11, 4)

    def test_master_lengths_sum_to_horizon(self):
        assert abs(np.diff(self.pr.master.taus).sum() - 1.0) <= 1e-12

    def test_identity(self):
        noise = restrict(self.pr, self.pr.master)
        np.testing.assert_array_equal(noise.dW, self.pr.dW)
        assert noise.dN.sum() == self.pr.jump_times.count

    def test_sums_of_master_increments(self):
        for M in (1, 2, 8, 32):
            grid = build_grid(M, 1.0, self.pr.jump_times)
            noise = restrict(self.pr, grid)
            pos = noise.master_index
            for k in range(len(grid) - 1):
                assert noise.dW[k] == pytest.approx(self.pr.dW[pos[k]:pos[k + 1]].sum(), abs=1e-15)
                assert noise.W[k + 1] - noise.W[k] == pytest.approx(noise.dW[k], abs=1e-14)
            assert noise.W[-1] == self.pr.W[-1]
            assert np.all(noise.dN <= 1)
            assert noise.dN.sum() == self.pr.jump_times.count

    def test_missing_point(self):
        with pytest.raises(CouplingError):
            restrict(self.pr, build_grid(3, 1.0, self.pr.jump_times))
        foreign = JumpTimes(np.r_[self.pr.jump_times.times, 0.123456789], 1.0)
        with pytest.raises(CouplingError):
            restrict(self.pr, build_grid(8, 1.0, JumpTimes(np.sort(foreign.times), 1.0)))

    def test_determinism(self):
        a = make_path_randomness(2.0, 1.0, 128, 99, 3)
        b = make_path_randomness(2.0, 1.0, 128, 99, 3)
        assert dump_randomness(a, 2.0) == dump_randomness(b, 2.0)
        c = make_path_randomness(2.0, 1.0, 128, 99, 4)
        assert dump_randomness(a, 2.0) != dump_randomness(c, 2.0)

    def test_dump_round_trip(self):
        blob = dump_randomness(self.pr, 3.0)
        back, lam = load_randomness(blob)
        assert lam == 3.0
        np.testing.assert_array_equal(back.jump_times.times, self.pr.jump_times.times)
        np.testing.assert_array_equal(back.dW, self.pr.dW)
        np.testing.assert_array_equal(back.master.taus, self.pr.master.taus)
        assert (back.seed, back.path_index, back.M_ref) == (11, 4, 64)
        with pytest.raises(ValueError):
            load_randomness(b"XXXX" + blob[4:])


class TestPaddedBatch:
    def test_selection_matches_per_path_restriction(self):
        paths = [make_path_randomness(4.0, 1.0, 32, 1, i) for i in range(12)]
        batch = pad_batch(paths)
        for M in (1, 4, 32):
            cols, times, W, is_jump = batch.select(M)
            for b, pr in enumerate(paths):
                grid = build_grid(M, 1.0, pr.jump_times)
                noise = restrict(pr, grid)
                # padding repeats the previous point; dropping repeats recovers the grid
                keep = np.r_[True, np.diff(times[b]) > 0] | is_jump[b]
                np.testing.assert_array_equal(times[b][keep], grid.taus)
                np.testing.assert_array_equal(W[b][keep], noise.W)
                np.testing.assert_array_equal(is_jump[b][keep], grid.is_jump)
                assert is_jump[b].sum() == pr.jump_times.count

    def test_jump_counts(self):
        paths = [make_path_randomness(4.0, 1.0, 16, 2, i) for i in range(5)]
        batch = pad_batch(paths)
        np.testing.assert_array_equal(batch.jump_counts()[:, -1], [p.jump_times.count for p in paths])

    def test_mismatched_paths(self):
        with pytest.raises(CouplingError):
            pad_batch([make_path_randomness(1.0, 1.0, 16, 0, 0), make_path_randomness(1.0, 1.0, 32, 0, 1)])
