"""Homography ground truth, recall / 1-precision curves and the throughput model."""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass

import numpy as np

from .brief import BITS, DescriptorSet
from .matcher import MatchConfig, MatchPair, run_matcher

DEFAULT_TOLERANCE = 3.0


class ProjectionError(ArithmeticError):
    pass


class EvaluationError(ValueError):
    pass


@dataclass(frozen=True)
class Homography:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=np.float64).reshape(3, 3)
        if m[2, 2] == 0:
            raise ValueError("homography h22 must be nonzero")
        m = m / m[2, 2]
        if abs(np.linalg.det(m)) <= 1e-9:
            raise ValueError("homography is singular")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @classmethod
    def identity(cls) -> Homography:
        return cls(np.eye(3))

    @classmethod
    def translation(cls, dx: float, dy: float) -> Homography:
        return cls(np.array([[1.0, 0.0, dx], [0.0, 1.0, dy], [0.0, 0.0, 1.0]]))

    def inverse(self) -> Homography:
        return Homography(np.linalg.inv(self.matrix))


def project(h: Homography, x: float, y: float) -> tuple[float, float]:
    m = h.matrix
    w = m[2, 0] * x + m[2, 1] * y + m[2, 2]
    if abs(w) <= 1e-9:
        raise ProjectionError(f"({x}, {y}) projects to infinity")
    return (
        float((m[0, 0] * x + m[0, 1] * y + m[0, 2]) / w),
        float((m[1, 0] * x + m[1, 1] * y + m[1, 2]) / w),
    )


def _project_many(h: Homography, pts: np.ndarray) -> np.ndarray:
    pts = np.asarray(pts, dtype=np.float64).reshape(-1, 2)
    hom = np.column_stack([pts, np.ones(len(pts))]) @ h.matrix.T
    w = hom[:, 2]
    if np.any(np.abs(w) <= 1e-9):
        raise ProjectionError("a point projects to infinity")
    return hom[:, :2] / w[:, None]


def read_homography(path: str | os.PathLike) -> Homography:
    with open(path) as fh:
        vals = fh.read().split()
    if len(vals) != 9:
        raise ValueError(f"{path}: expected 9 numbers, found {len(vals)}")
    return Homography(np.array([float(v) for v in vals]).reshape(3, 3))


def write_homography(path: str | os.PathLike, h: Homography) -> None:
    with open(path, "w") as fh:
        for row in h.matrix:
            fh.write(" ".join(repr(float(v)) for v in row) + "\n")


def classify_matches(matches: list[MatchPair], h: Homography, tol_px: float = DEFAULT_TOLERANCE) -> tuple[int, int]:
    """(correct, false) counts; correct iff the projected ``a`` lands within ``tol_px`` of ``b``."""
    if not matches:
        return 0, 0
    a = np.array([m.a for m in matches], dtype=np.float64)
    b = np.array([m.b for m in matches], dtype=np.float64)
    err = np.linalg.norm(_project_many(h, a) - b, axis=1)
    correct = int(np.count_nonzero(err <= tol_px))
    return correct, len(matches) - correct


def count_correspondences(features_a: DescriptorSet, features_b: DescriptorSet, h: Homography, tol: float = DEFAULT_TOLERANCE) -> int:
    """Keypoints of A whose projection lies within ``tol`` of some keypoint of B."""
    if len(features_a) == 0 or len(features_b) == 0:
        return 0
    pa = _project_many(h, features_a.xy())
    pb = features_b.xy().astype(np.float64)
    count = 0
    for start in range(0, len(pa), 512):
        d = np.linalg.norm(pa[start : start + 512, None, :] - pb[None, :, :], axis=2)
        count += int(np.count_nonzero(d.min(axis=1) <= tol))
    return count


@dataclass(frozen=True)
class EvalPoint:
    threshold: int
    recall: float
    one_minus_precision: float


def recall_precision(correct: int, false: int, correspondences: int) -> tuple[float, float]:
    if correspondences <= 0:
        raise EvaluationError("recall is undefined without correspondences")
    emitted = correct + false
    return correct / correspondences, (false / emitted if emitted else 0.0)


def recall_precision_curve(
    features_a: DescriptorSet,
    features_b: DescriptorSet,
    h: Homography,
    correspondence_tol: float = DEFAULT_TOLERANCE,
    thresholds=range(0, BITS + 1, 4),
    cores: int = 8,
) -> list[EvalPoint]:
    """Sweep the Hamming threshold of A -> B matching.

    The per-reference argmin does not depend on the threshold, so the matcher
    runs once and each point filters its output.
    """
    n_corr = count_correspondences(features_a, features_b, h, correspondence_tol)
    if n_corr == 0:
        raise EvaluationError("no ground-truth correspondences between the feature sets")
    thresholds = [int(t) for t in thresholds]
    for t in thresholds:
        if not 0 <= t <= BITS:
            raise ValueError(f"threshold {t} outside 0..{BITS}")
    if len(features_b) == 0:
        return [EvalPoint(t, 0.0, 0.0) for t in thresholds]
    run = run_matcher(features_a, features_b, MatchConfig(cores_per_group=cores))
    a = features_a.xy()
    b = features_b.xy()[run.best_index]
    err = np.linalg.norm(_project_many(h, a) - b, axis=1)
    good = err <= correspondence_tol
    points = []
    for t in thresholds:
        kept = run.best_distance <= t
        correct = int(np.count_nonzero(kept & good))
        false = int(np.count_nonzero(kept & ~good))
        r, omp = recall_precision(correct, false, n_corr)
        points.append(EvalPoint(t, r, omp))
    return points


def write_curve_csv(path: str | os.PathLike, points: list[EvalPoint]) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["threshold", "recall", "one_minus_precision"])
        for p in points:
            out.writerow([p.threshold, repr(p.recall), repr(p.one_minus_precision)])


def read_curve_csv(path: str | os.PathLike) -> list[EvalPoint]:
    with open(path, newline="") as fh:
        return [
            EvalPoint(int(r["threshold"]), float(r["recall"]), float(r["one_minus_precision"]))
            for r in csv.DictReader(fh)
        ]


def throughput_model(clock_hz: int, width: int, height: int, cameras: int) -> int:
    """Frames per second when every camera stream consumes one pixel per clock."""
    for name, v in (("clock_hz", clock_hz), ("width", width), ("height", height), ("cameras", cameras)):
        if v <= 0:
            raise ValueError(f"{name} must be positive, got {v}")
    return int(clock_hz) // (int(width) * int(height) * int(cameras))
