"""Hamming match cores driven by a LOAD / RUNNING / TRANSPORT / CLEAR controller.

Each core holds one reference descriptor and a best-distance register. While
candidates stream past, a core updates only on a strictly smaller distance,
so the first of several equally good candidates wins.
"""

from __future__ import annotations

import csv
import enum
import math
import os
from dataclasses import dataclass, field

import numpy as np

from .brief import BITS, DescriptorSet

TRACE = "trace"
STEREO = "stereo"
CSV_HEADER = ["kind", "xa", "ya", "xb", "yb", "distance", "disparity"]


class EmptyInputError(ValueError):
    pass


@dataclass(frozen=True)
class MatchConfig:
    hamming_threshold: int = 32
    epipolar_epsilon: int = 1
    max_disparity: int = 128
    cores_per_group: int = 8

    def __post_init__(self):
        if not 0 < self.hamming_threshold <= BITS:
            raise ValueError(f"hamming_threshold must be in 1..{BITS}, got {self.hamming_threshold}")
        if self.epipolar_epsilon < 0:
            raise ValueError("epipolar_epsilon must be >= 0")
        if self.max_disparity <= 0:
            raise ValueError("max_disparity must be > 0")
        if self.cores_per_group < 1:
            raise ValueError("cores_per_group must be >= 1")


@dataclass(frozen=True)
class MatchPair:
    a: tuple[int, int]
    b: tuple[int, int]
    distance: int
    kind: str
    disparity: int | None = None


def hamming(a: int, b: int) -> int:
    return (a ^ b).bit_count()


def hamming_matrix(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Pairwise distances between (n, 2) and (m, 2) uint64 word arrays."""
    x = a[:, None, :] ^ b[None, :, :]
    return np.bitwise_count(x).sum(axis=2, dtype=np.int64)


class State(enum.Enum):
    LOAD = "LOAD"
    RUNNING = "RUNNING"
    TRANSPORT = "TRANSPORT"
    CLEAR = "CLEAR"


@dataclass
class Iteration:
    first_ref: int
    active_cores: int
    disabled_cores: int


@dataclass
class MatchRun:
    best_index: np.ndarray  # per reference, index into the candidate stream
    best_distance: np.ndarray
    iterations: list[Iteration] = field(default_factory=list)
    states: list[State] = field(default_factory=list)


class MatchExecutor:
    """A group of ``cores`` match cores and the controller that feeds them."""

    def __init__(self, cores: int, chunk: int = 256):
        if cores < 1:
            raise ValueError("need at least one match core")
        self.cores = cores
        self.chunk = chunk
        self._clear()

    def _clear(self):
        self.ref = np.zeros((self.cores, 2), dtype=np.uint64)
        self.enabled = np.zeros(self.cores, dtype=bool)
        self.best_dist = np.full(self.cores, BITS + 1, dtype=np.int64)
        self.best_index = np.full(self.cores, -1, dtype=np.int64)

    def _load(self, refs: np.ndarray):
        n = len(refs)
        self.ref[:n] = refs
        self.enabled[:n] = True

    def _running(self, candidates: np.ndarray):
        live = self.enabled
        for start in range(0, len(candidates), self.chunk):
            block = candidates[start : start + self.chunk]
            d = hamming_matrix(self.ref[live], block)
            j = d.argmin(axis=1)  # first occurrence within the block
            dj = d[np.arange(len(j)), j]
            better = dj < self.best_dist[live]
            idx = np.nonzero(live)[0][better]
            self.best_dist[idx] = dj[better]
            self.best_index[idx] = start + j[better]

    def _transport(self) -> tuple[np.ndarray, np.ndarray]:
        live = self.enabled
        return self.best_index[live].copy(), self.best_dist[live].copy()

    def run(self, refs: DescriptorSet, candidates: DescriptorSet) -> MatchRun:
        if len(candidates) == 0:
            raise EmptyInputError("candidate stream is empty")
        out_idx = np.empty(len(refs), dtype=np.int64)
        out_dist = np.empty(len(refs), dtype=np.int64)
        result = MatchRun(out_idx, out_dist)
        for first in range(0, len(refs), self.cores):
            batch = refs.words[first : first + self.cores]
            result.states.append(State.LOAD)
            self._load(batch)
            result.states.append(State.RUNNING)
            self._running(candidates.words)
            result.states.append(State.TRANSPORT)
            idx, dist = self._transport()
            out_idx[first : first + len(batch)] = idx
            out_dist[first : first + len(batch)] = dist
            result.iterations.append(Iteration(first, len(batch), self.cores - len(batch)))
            result.states.append(State.CLEAR)
            self._clear()
        return result


def match_batch(refs: DescriptorSet, candidates: DescriptorSet, cores: int | None = None) -> list[tuple[int, int]]:
    """One controller cycle: at most ``cores`` references against the full stream.

    Returns ``(candidate index, distance)`` per reference.
    """
    cores = len(refs) if cores is None else cores
    if len(refs) > cores:
        raise ValueError(f"{len(refs)} references do not fit in {cores} cores")
    run = MatchExecutor(max(cores, 1)).run(refs, candidates)
    return list(zip(run.best_index.tolist(), run.best_distance.tolist()))


def run_matcher(refs: DescriptorSet, candidates: DescriptorSet, cfg: MatchConfig) -> MatchRun:
    return MatchExecutor(cfg.cores_per_group).run(refs, candidates)


def _pairs(refs: DescriptorSet, candidates: DescriptorSet, cfg: MatchConfig, kind: str) -> list[MatchPair]:
    if len(refs) == 0 or len(candidates) == 0:
        return []
    run = run_matcher(refs, candidates, cfg)
    axy = refs.xy().tolist()
    bxy = candidates.xy().tolist()
    out = []
    for i, (j, d) in enumerate(zip(run.best_index.tolist(), run.best_distance.tolist())):
        # threshold check
        if d > cfg.hamming_threshold:
            continue
        a, b = tuple(axy[i]), tuple(bxy[j])
        if kind == TRACE:
            out.append(MatchPair(a, b, d, TRACE))
            continue
        # parallel check, then the disparity search range
        disparity = a[0] - b[0]
        if abs(a[1] - b[1]) > cfg.epipolar_epsilon or not 0 <= disparity <= cfg.max_disparity:
            continue
        out.append(MatchPair(a, b, d, STEREO, disparity))
    return out


def trace_match(prev_left: DescriptorSet, cur_left: DescriptorSet, cfg: MatchConfig = MatchConfig()) -> list[MatchPair]:
    """Current-left references against previous-left candidates."""
    return _pairs(cur_left, prev_left, cfg, TRACE)


def stereo_match(cur_left: DescriptorSet, cur_right: DescriptorSet, cfg: MatchConfig = MatchConfig()) -> list[MatchPair]:
    """Left references against right candidates of the same frame."""
    return _pairs(cur_left, cur_right, cfg, STEREO)


def iteration_count(n_refs: int, cores: int) -> int:
    return math.ceil(n_refs / cores)


def write_matches_csv(path: str | os.PathLike, matches: list[MatchPair]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(CSV_HEADER)
        for m in matches:
            disp = "" if m.disparity is None else m.disparity
            out.writerow([m.kind, m.a[0], m.a[1], m.b[0], m.b[1], m.distance, disp])


def read_matches_csv(path: str | os.PathLike) -> list[MatchPair]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for r in rows:
        disp = None if r["disparity"] == "" else int(r["disparity"])
        out.append(MatchPair((int(r["xa"]), int(r["ya"])), (int(r["xb"]), int(r["yb"])), int(r["distance"]), r["kind"], disp))
    return out
