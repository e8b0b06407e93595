import numpy as np
import pytest

from stereofeat.brief import default_pattern, extract
from stereofeat.image import GrayImage
from stereofeat.matcher import MatchConfig, MatchPair, STEREO, stereo_match, trace_match
from stereofeat.pipeline import (
    SECTIONS,
    BufferConflict,
    FrameBundle,
    MultiBuffer,
    SequenceError,
    compute_disparity_map,
    process_sequence,
    schedule_sections,
)
from stereofeat.synthetic import shift_left, textured_scene

PATTERN = default_pattern()
CFG = MatchConfig()


def simulate(frames: int):
    """Replay the schedule and record, per section, what it holds at every step."""
    holds: dict[int, str] = {}
    log = []
    for k in range(1, frames + 1):
        sched = schedule_sections(k)
        reads = {}
        for role, sec in sched.reads.items():
            frame = sched.read_frames[role]
            if frame is not None:
                reads[role] = holds[sec]
        for role, sec in sched.writes.items():
            holds[sec] = f"{k}{role[1]}"
        log.append((sched, reads))
    return log


def test_t3_assignment():
    sched, reads = simulate(3)[2]
    assert reads == {"RP": "1L", "RL": "2L", "RR": "2R"}
    assert sched.read_frames == {"RP": 1, "RL": 2, "RR": 2}
    assert set(sched.writes) == {"WL", "WR"}


def test_frame_one_sections():
    assert schedule_sections(1).writes == {"WL": 0, "WR": 1}


@pytest.mark.parametrize("k", range(1, 31))
def test_reads_and_writes_disjoint(k):
    sched = schedule_sections(k)
    assert sorted(sched.sections()) == list(range(SECTIONS))
    assert not set(sched.reads.values()) & set(sched.writes.values())


def test_ten_frame_simulation():
    log = simulate(10)
    for k, (sched, reads) in enumerate(log, start=1):
        # each role sees exactly the frame it is meant to
        if k >= 2:
            assert reads["RL"] == f"{k - 1}L" and reads["RR"] == f"{k - 1}R"
        if k >= 3:
            assert reads["RP"] == f"{k - 2}L"
    # period five
    for k in range(1, 6):
        a, b = schedule_sections(k), schedule_sections(k + 5)
        assert (a.reads, a.writes) == (b.reads, b.writes)
    # over one period every section takes every role once
    for role in ("RP", "RL", "RR", "WL", "WR"):
        secs = [{**schedule_sections(k).reads, **schedule_sections(k).writes}[role] for k in range(1, 6)]
        assert sorted(secs) == list(range(SECTIONS))


def test_no_premature_overwrite():
    # a left result written at step k is read at k+1 (RL) and k+2 (RP); a right one at k+1 (RR)
    for k in range(1, 11):
        w = schedule_sections(k).writes
        assert schedule_sections(k + 1).reads["RL"] == w["WL"]
        assert schedule_sections(k + 2).reads["RP"] == w["WL"]
        assert schedule_sections(k + 1).reads["RR"] == w["WR"]
        assert w["WL"] not in schedule_sections(k + 1).writes.values()
        assert w["WL"] not in schedule_sections(k + 2).writes.values()
        assert w["WR"] not in schedule_sections(k + 1).writes.values()


def test_schedule_rejects_frame_zero():
    with pytest.raises(ValueError):
        schedule_sections(0)


def test_multibuffer_detects_conflicts():
    buf = MultiBuffer()
    empty = extract(GrayImage(np.full((100, 100), 9, np.uint8)), PATTERN).descriptors
    buf.write(0, "1L", empty, 2)
    with pytest.raises(BufferConflict):
        buf.write(0, "2L", empty, 2)
    with pytest.raises(BufferConflict):
        buf.read(0, "9L")
    buf.read(0, "1L")
    buf.read(0, "1L")
    buf.write(0, "2L", empty, 2)


@pytest.fixture(scope="module")
def scene_pair():
    left = textured_scene(240, 200, seed=9)
    return left, shift_left(left, 10)


def test_single_frame_sequence(scene_pair):
    left, right = scene_pair
    res = list(process_sequence([FrameBundle(1, left, right)], CFG, PATTERN))
    assert len(res) == 1
    assert res[0].frame_index == 1 and res[0].trace is None and res[0].stereo


def test_three_identical_frames(scene_pair):
    left, right = scene_pair
    res = list(process_sequence([FrameBundle(k, left, right) for k in (1, 2, 3)], CFG, PATTERN))
    assert [r.frame_index for r in res] == [1, 2, 3]
    assert res[0].trace is None
    for r in res[1:]:
        assert len(r.trace) == len(r.left_features)
        assert all(m.distance == 0 and m.a == m.b for m in r.trace)
    assert res[1].trace == res[2].trace


def test_sequence_equals_direct_calls():
    frames = [textured_scene(200, 200, seed=s) for s in (20, 21, 22, 23, 24)]
    bundles = [FrameBundle(k, f, shift_left(f, 4)) for k, f in enumerate(frames, start=1)]
    res = list(process_sequence(bundles, CFG, PATTERN))
    left = [extract(b.left, PATTERN).descriptors for b in bundles]
    right = [extract(b.right, PATTERN).descriptors for b in bundles]
    for i, r in enumerate(res):
        assert r.left_features == left[i] and r.right_features == right[i]
        assert r.stereo == stereo_match(left[i], right[i], CFG)
        if i:
            assert r.trace == trace_match(left[i - 1], left[i], CFG)
        assert r.schedule.read_frames["RL"] == i + 1


def test_results_stream_one_frame_behind():
    pulled = []

    def frames():
        for k in range(1, 5):
            pulled.append(k)
            img = textured_scene(120, 120, seed=k)
            yield FrameBundle(k, img, img)

    for r in process_sequence(frames(), CFG, PATTERN):
        # result k arrives after frame k+1 was read but before frame k+2
        assert max(pulled) <= r.frame_index + 1
        assert max(pulled) == min(r.frame_index + 1, 4)


def test_dimension_mismatch_names_frame():
    a = textured_scene(120, 120, seed=1)
    b = textured_scene(130, 120, seed=1)
    bundles = [FrameBundle(1, a, a), FrameBundle(2, b, b)]
    with pytest.raises(SequenceError, match="frame 2"):
        list(process_sequence(bundles, CFG, PATTERN))
    with pytest.raises(SequenceError, match="frame 3"):
        FrameBundle(3, a, b)


def test_disparity_map():
    pair = MatchPair((100, 50), (90, 50), 3, STEREO, 10)
    assert compute_disparity_map([pair]) == [(100, 50, 10)]
    assert compute_disparity_map([]) == []


def test_shift_sequence_disparities(scene_pair):
    left, right = scene_pair
    res = list(process_sequence([FrameBundle(1, left, right), FrameBundle(2, left, right)], CFG, PATTERN))
    for r in res:
        disp = compute_disparity_map(r.stereo)
        assert disp
        assert sum(d == 10 for _, _, d in disp) >= 0.9 * len(disp)
