"""Poisson jump times, jump-adapted grids and coupled Brownian increments.

Each sample path owns two Philox streams derived from ``(seed, path_index)``:
one for the exponential inter-arrival times and one for the Brownian
increments. Brownian increments are drawn once on the master grid (finest
deterministic grid merged with the jump times); every coarser grid obtains
its increments by restriction, so all resolutions see the same (W, N).
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

DET = 0
JUMP = 1


class CouplingError(LookupError):
    pass


def path_streams(seed: int, path_index: int) -> tuple[np.random.Generator, np.random.Generator]:
    """Independent (jump, brownian) generators for one path."""
    ss = np.random.SeedSequence(entropy=seed, spawn_key=(path_index,))
    jump_ss, bm_ss = ss.spawn(2)
    return (np.random.Generator(np.random.Philox(jump_ss)),
            np.random.Generator(np.random.Philox(bm_ss)))


@dataclass(frozen=True)
class JumpTimes:
    times: np.ndarray
    T: float

    @property
    def count(self) -> int:
        return len(self.times)


def draw_jump_times(lam: float, T: float, rng: np.random.Generator) -> JumpTimes:
    if not (lam > 0 and T > 0):
        raise ValueError("lambda and T must be positive")
    scale = 1.0 / lam
    chunk = max(8, int(lam * T * 1.5) + 8)
    arrivals = np.cumsum(rng.exponential(scale, chunk))
    while arrivals[-1] <= T:
        more = arrivals[-1] + np.cumsum(rng.exponential(scale, chunk))
        arrivals = np.concatenate([arrivals, more])
    return JumpTimes(arrivals[arrivals <= T].copy(), float(T))


def underline_t(t: float, M: int, T: float) -> float:
    """Largest point m*T/M of the equidistant grid not exceeding t."""
    if not 0.0 <= t <= T:
        raise ValueError(f"t={t} outside [0, {T}]")
    m = min(int(np.floor(t * M / T)), M)
    # guard against rounding pushing m*T/M above t
    while m > 0 and m * T / M > t:
        m -= 1
    return m * T / M


@dataclass(frozen=True)
class AdaptedGrid:
    """Sorted union of {m T / M} and the jump times.

    ``det_index[n]`` is m for the point m T / M and -1 for a pure jump
    point. A jump landing exactly on m T / M gives one point tagged JUMP
    that keeps its det_index.
    """

    taus: np.ndarray
    tags: np.ndarray
    det_index: np.ndarray
    M: int
    T: float

    @property
    def delta(self) -> float:
        return self.T / self.M

    @property
    def is_jump(self) -> np.ndarray:
        return self.tags == JUMP

    def __len__(self) -> int:
        return len(self.taus)


def build_grid(M: int, T: float, jumps: JumpTimes) -> AdaptedGrid:
    if M < 1:
        raise ValueError("M must be >= 1")
    m = np.arange(M + 1)
    # m / M is the same float for every nested resolution, so shared points match bit for bit
    det = (m / M) * T
    nus = np.asarray(jumps.times, dtype=float)
    nus = nus[(nus > 0) & (nus <= T)]
    on_det = np.isin(nus, det)
    extra = nus[~on_det]
    taus = np.concatenate([det, extra])
    det_index = np.concatenate([m, np.full(len(extra), -1)])
    tags = np.concatenate([np.isin(det, nus).astype(np.int8) * JUMP,
                           np.full(len(extra), JUMP, dtype=np.int8)])
    order = np.argsort(taus, kind="stable")
    return AdaptedGrid(taus[order], tags[order].astype(np.int8), det_index[order], int(M), float(T))


def draw_brownian(times: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Independent N(0, dt_i) increments over consecutive ``times``."""
    dt = np.diff(np.asarray(times, dtype=float))
    if np.any(dt < 0):
        raise ValueError("times must be sorted")
    return rng.standard_normal(len(dt)) * np.sqrt(dt)


@dataclass(frozen=True)
class PathRandomness:
    """Driving noise of one path on its master grid."""

    jump_times: JumpTimes
    master: AdaptedGrid
    dW: np.ndarray
    seed: int
    path_index: int

    @property
    def W(self) -> np.ndarray:
        return np.concatenate([[0.0], np.cumsum(self.dW)])

    @property
    def M_ref(self) -> int:
        return self.master.M

    @property
    def T(self) -> float:
        return self.master.T


def make_path_randomness(lam: float, T: float, M_ref: int, seed: int,
                         path_index: int) -> PathRandomness:
    jump_rng, bm_rng = path_streams(seed, path_index)
    jumps = draw_jump_times(lam, T, jump_rng)
    master = build_grid(M_ref, T, jumps)
    dW = draw_brownian(master.taus, bm_rng)
    return PathRandomness(jumps, master, dW, int(seed), int(path_index))


@dataclass(frozen=True)
class RestrictedNoise:
    """Brownian values, increments and jump counts on a sub-grid."""

    grid: AdaptedGrid
    master_index: np.ndarray
    W: np.ndarray
    dW: np.ndarray
    dN: np.ndarray


def master_positions(pr: PathRandomness, grid: AdaptedGrid) -> np.ndarray:
    """Index into the master grid of every point of ``grid``."""
    master = pr.master
    if pr.M_ref % grid.M:
        raise CouplingError(f"M={grid.M} does not divide M_ref={pr.M_ref}")
    ratio = pr.M_ref // grid.M
    pos = np.empty(len(grid), dtype=np.int64)
    det_lookup = np.full(pr.M_ref + 1, -1, dtype=np.int64)
    det_lookup[master.det_index[master.det_index >= 0]] = np.flatnonzero(master.det_index >= 0)
    is_det = grid.det_index >= 0
    pos[is_det] = det_lookup[grid.det_index[is_det] * ratio]
    jump_only = ~is_det
    if np.any(jump_only):
        mj = np.flatnonzero(master.is_jump)
        k = np.searchsorted(master.taus[mj], grid.taus[jump_only])
        k = np.minimum(k, len(mj) - 1) if len(mj) else k
        if len(mj) == 0 or np.any(master.taus[mj][k] != grid.taus[jump_only]):
            raise CouplingError("grid contains a jump time missing from the master grid")
        pos[jump_only] = mj[k]
    if np.any(pos < 0):
        raise CouplingError("grid point missing from the master grid")
    return pos


def restrict(pr: PathRandomness, grid: AdaptedGrid) -> RestrictedNoise:
    pos = master_positions(pr, grid)
    W = pr.W[pos]
    # coarse increments as direct partial sums of the master increments
    dW = np.add.reduceat(pr.dW, pos[:-1]) if len(pos) > 1 else np.empty(0)
    jumps_before = np.cumsum(pr.master.is_jump.astype(np.int64))
    dN = np.diff(jumps_before[pos])
    return RestrictedNoise(grid, pos, W, dW, dN)


@dataclass
class PaddedBatch:
    """Master grids of several paths aligned column by column.

    Every fine interval j of the shared deterministic grid gets K_j jump
    slots, K_j being the largest number of jumps any path of the batch has
    in that interval. ``real`` marks the slots a path actually uses. Any
    resolution M dividing M_ref is a column subset; ``select(M)`` fills the
    unused slots of that subset with the previous selected point, which
    turns them into zero-length steps.
    """

    raw_times: np.ndarray
    raw_W: np.ndarray
    real: np.ndarray
    is_jump: np.ndarray
    det_cols: np.ndarray
    jump_slot_cols: np.ndarray
    M_ref: int
    T: float
    path_indices: np.ndarray

    def __post_init__(self):
        self.times, self.W = self._fill(np.arange(self.raw_times.shape[1]))

    @property
    def shape(self) -> tuple[int, int]:
        return self.raw_times.shape

    def columns_for(self, M: int) -> np.ndarray:
        if self.M_ref % M:
            raise CouplingError(f"M={M} does not divide M_ref={self.M_ref}")
        cols = np.union1d(self.det_cols[:: self.M_ref // M], self.jump_slot_cols)
        return cols.astype(np.int64)

    def _fill(self, cols):
        real = self.real[:, cols]
        n = len(cols)
        src = np.maximum.accumulate(np.where(real, np.arange(n), 0), axis=1)
        rows = np.arange(real.shape[0])[:, None]
        return self.raw_times[:, cols][rows, src], self.raw_W[:, cols][rows, src]

    def select(self, M: int):
        """(cols, times, W, is_jump) of resolution M."""
        cols = self.columns_for(M)
        times, W = self._fill(cols)
        return cols, times, W, self.is_jump[:, cols]

    def jump_counts(self) -> np.ndarray:
        """N_t at every column (right-continuous)."""
        return np.cumsum(self.is_jump, axis=1)


def pad_batch(paths: list[PathRandomness]) -> PaddedBatch:
    M_ref, T = paths[0].M_ref, paths[0].T
    if any(p.M_ref != M_ref or p.T != T for p in paths):
        raise CouplingError("paths in one batch must share M_ref and T")
    det_times = (np.arange(M_ref + 1) / M_ref) * T
    per_path = []
    K = np.zeros(M_ref, dtype=np.int64)
    for p in paths:
        nus = p.jump_times.times
        interval = np.searchsorted(det_times, nus, side="left") - 1
        rank = np.zeros(len(nus), dtype=np.int64)
        if len(nus):
            starts = np.r_[0, np.flatnonzero(np.diff(interval)) + 1]
            rank = np.arange(len(nus)) - np.repeat(starts, np.diff(np.r_[starts, len(nus)]))
            np.maximum.at(K, interval, rank + 1)
        per_path.append((interval, rank))
    det_cols = np.r_[0, np.cumsum(K + 1)]
    L = int(det_cols[-1]) + 1
    slot_mask = np.ones(L, dtype=bool)
    slot_mask[det_cols] = False
    jump_slot_cols = np.flatnonzero(slot_mask)

    B = len(paths)
    times = np.zeros((B, L))
    W = np.zeros((B, L))
    real = np.zeros((B, L), dtype=bool)
    real[:, det_cols] = True
    is_jump = np.zeros((B, L), dtype=bool)
    for b, (p, (interval, rank)) in enumerate(zip(paths, per_path)):
        master = p.master
        Wp = p.W
        dpos = np.flatnonzero(master.det_index >= 0)
        times[b, det_cols] = master.taus[dpos]
        W[b, det_cols] = Wp[dpos]
        if len(interval):
            jpos = np.flatnonzero(master.is_jump)
            cols = det_cols[interval] + 1 + rank
            times[b, cols] = master.taus[jpos]
            W[b, cols] = Wp[jpos]
            # a jump on a det point lives in its slot; the det column after
            # it is then a zero-length step
            is_jump[b, cols] = True
            real[b, cols] = True
    return PaddedBatch(times, W, real, is_jump, det_cols.astype(np.int64), jump_slot_cols,
                       M_ref, T, np.array([p.path_index for p in paths]))


_MAGIC = b"JMPR"
_VERSION = 1
_HEADER = struct.Struct("<4sIdddQQQQ")


def dump_randomness(pr: PathRandomness, lam: float) -> bytes:
    """Serialise one path's noise (little-endian float64 payload).

    Header: magic, version, T, lambda, reserved, seed, path index, M_ref,
    jump count; then jump times, then master-grid increments.
    """
    head = _HEADER.pack(_MAGIC, _VERSION, pr.T, float(lam), 0.0, pr.seed, pr.path_index,
                        pr.M_ref, pr.jump_times.count)
    body = (np.asarray(pr.jump_times.times, dtype="<f8").tobytes()
            + np.asarray(pr.dW, dtype="<f8").tobytes())
    return head + body


def load_randomness(blob: bytes) -> tuple[PathRandomness, float]:
    magic, version, T, lam, _, seed, index, M_ref, n_jumps = _HEADER.unpack_from(blob)
    if magic != _MAGIC or version != _VERSION:
        raise ValueError("not a path randomness dump of a supported version")
    off = _HEADER.size
    times = np.frombuffer(blob, dtype="<f8", count=n_jumps, offset=off).astype(float)
    off += 8 * n_jumps
    jumps = JumpTimes(times, T)
    master = build_grid(M_ref, T, jumps)
    dW = np.frombuffer(blob, dtype="<f8", count=len(master) - 1, offset=off).astype(float)
    return PathRandomness(jumps, master, dW, int(seed), int(index)), lam
