"""Binocular frame pipeline over a five-section multi-buffer.

Extraction of frame k and matching of frame k-1 share one step. At step k
the buffer is read in three roles and written in two:

    RP  previous left  (frame k-2)
    RL  current left   (frame k-1)
    RR  current right  (frame k-1)
    WL, WR             frame k left / right

A frame's left result lives for two reads (RL then RP), its right result
for one (RR). With five sections that forces the write pair to move by three
sections per step (two sections counter-clockwise), starting at sections 0
and 1 for frame 1.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .brief import DescriptorSet, Extraction, SamplePattern, extract
from .image import GrayImage, read_pgm
from .matcher import MatchConfig, MatchPair, stereo_match, trace_match
from .surf import DEFAULT_TABLE, DEFAULT_THRESHOLD, ScaleTable

SECTIONS = 5
STRIDE = 3
READ_ROLES = ("RP", "RL", "RR")
WRITE_ROLES = ("WL", "WR")


class SequenceError(ValueError):
    pass


@dataclass(frozen=True)
class FrameBundle:
    frame_index: int
    left: GrayImage
    right: GrayImage

    def __post_init__(self):
        if self.left.shape != self.right.shape:
            raise SequenceError(
                f"frame {self.frame_index}: left {self.left.shape} and right {self.right.shape} differ"
            )


def _left_section(frame: int) -> int:
    return (STRIDE * (frame - 1)) % SECTIONS


def _right_section(frame: int) -> int:
    return (STRIDE * (frame - 1) + 1) % SECTIONS


@dataclass(frozen=True)
class BufferSchedule:
    frame_index: int
    reads: dict[str, int]
    writes: dict[str, int]
    # which frame's result each role carries; None before the sequence has one
    read_frames: dict[str, int | None]

    def sections(self) -> list[int]:
        return list(self.reads.values()) + list(self.writes.values())


def schedule_sections(frame_index: int) -> BufferSchedule:
    if frame_index < 1:
        raise ValueError(f"frame_index must be >= 1, got {frame_index}")
    k = frame_index
    reads = {"RP": _left_section(k - 2), "RL": _left_section(k - 1), "RR": _right_section(k - 1)}
    writes = {"WL": _left_section(k), "WR": _right_section(k)}
    read_frames = {
        "RP": k - 2 if k - 2 >= 1 else None,
        "RL": k - 1 if k - 1 >= 1 else None,
        "RR": k - 1 if k - 1 >= 1 else None,
    }
    return BufferSchedule(k, reads, writes, read_frames)


class BufferConflict(RuntimeError):
    pass


class MultiBuffer:
    """Five sections, each holding one tagged extraction result."""

    def __init__(self):
        self.sections: list[tuple[str, DescriptorSet] | None] = [None] * SECTIONS
        self.pending: dict[int, int] = {}  # section -> reads still owed before reuse

    def write(self, section: int, tag: str, data: DescriptorSet, reads_owed: int):
        if self.pending.get(section, 0):
            held = self.sections[section][0]
            raise BufferConflict(f"section {section} still owes {self.pending[section]} read(s) of {held}")
        self.sections[section] = (tag, data)
        self.pending[section] = reads_owed

    def read(self, section: int, tag: str) -> DescriptorSet:
        slot = self.sections[section]
        if slot is None or slot[0] != tag:
            raise BufferConflict(f"section {section} holds {slot[0] if slot else None}, expected {tag}")
        self.pending[section] -= 1
        return slot[1]


@dataclass
class FrameResult:
    frame_index: int
    left_features: DescriptorSet
    right_features: DescriptorSet
    trace: list[MatchPair] | None
    stereo: list[MatchPair]
    schedule: BufferSchedule  # the step whose reads produced this result
    left_keypoints: int = 0
    right_keypoints: int = 0
    dropped: tuple[int, int] = (0, 0)


def process_sequence(
    frames: Iterable[FrameBundle],
    cfg: MatchConfig,
    pattern: SamplePattern,
    threshold: int = DEFAULT_THRESHOLD,
    table: ScaleTable = DEFAULT_TABLE,
) -> Iterator[FrameResult]:
    """Extract every frame, then match it one step later through the ring buffer.

    Frame k's result is yielded after frame k+1 has been pulled from
    ``frames`` and before frame k+2 is.
    """
    buf = MultiBuffer()
    shape = None
    stats: dict[int, tuple[Extraction, Extraction]] = {}
    k = 0
    for expected, bundle in enumerate(frames, start=1):
        if bundle.frame_index != expected:
            raise SequenceError(f"frame {bundle.frame_index} arrived where frame {expected} was due")
        if shape is None:
            shape = bundle.left.shape
        elif bundle.left.shape != shape:
            raise SequenceError(f"frame {bundle.frame_index}: size {bundle.left.shape} differs from {shape}")
        k = expected
        sched = schedule_sections(k)
        if k >= 2:
            yield _match_step(buf, sched, cfg, stats.pop(k - 1))
        left = extract(bundle.left, pattern, threshold, table)
        right = extract(bundle.right, pattern, threshold, table)
        # left is read as RL at k+1 and as RP at k+2; right only as RR at k+1
        buf.write(sched.writes["WL"], f"{k}L", left.descriptors, 2)
        buf.write(sched.writes["WR"], f"{k}R", right.descriptors, 1)
        stats[k] = (left, right)
    if k:
        yield _match_step(buf, schedule_sections(k + 1), cfg, stats.pop(k))


def _match_step(buf: MultiBuffer, sched: BufferSchedule, cfg: MatchConfig, ext: tuple[Extraction, Extraction]) -> FrameResult:
    frame = sched.read_frames["RL"]
    cur_left = buf.read(sched.reads["RL"], f"{frame}L")
    cur_right = buf.read(sched.reads["RR"], f"{frame}R")
    trace = None
    if sched.read_frames["RP"] is not None:
        prev_left = buf.read(sched.reads["RP"], f"{frame - 1}L")
        trace = trace_match(prev_left, cur_left, cfg)
    stereo = stereo_match(cur_left, cur_right, cfg)
    left, right = ext
    return FrameResult(
        frame,
        cur_left,
        cur_right,
        trace,
        stereo,
        sched,
        left_keypoints=len(left.descriptors),
        right_keypoints=len(right.descriptors),
        dropped=(left.dropped, right.dropped),
    )


def compute_disparity_map(stereo: list[MatchPair]) -> list[tuple[int, int, int]]:
    """``(x, y, disparity)`` at each left reference point."""
    return [(m.a[0], m.a[1], m.a[0] - m.b[0]) for m in stereo]


def read_manifest(path: str | os.PathLike) -> list[tuple[Path, Path]]:
    base = Path(path).parent
    pairs = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 2:
                raise SequenceError(f"{path}:{lineno}: expected 'left.pgm right.pgm', got {line!r}")
            pairs.append(tuple(base / p if not Path(p).is_absolute() else Path(p) for p in parts))
    return pairs


def load_frames(manifest: list[tuple[Path, Path]]) -> Iterator[FrameBundle]:
    """Lazily read PGM pairs so only the frames in flight are held in memory."""
    for k, (lp, rp) in enumerate(manifest, start=1):
        imgs = []
        for p in (lp, rp):
            try:
                imgs.append(read_pgm(p))
            except (OSError, ValueError) as exc:
                raise SequenceError(f"frame {k}: cannot read {p}: {exc}") from None
        yield FrameBundle(k, imgs[0], imgs[1])
