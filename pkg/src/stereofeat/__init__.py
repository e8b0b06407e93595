"""Software model of a binocular SURF/BRIEF feature extraction and matching pipeline."""

from .brief import Descriptor, DescriptorSet, SamplePattern, default_pattern, describe, extract, gen_pattern, mean9
from .evaluation import Homography, classify_matches, project, recall_precision_curve, throughput_model
from .image import GrayImage, IntegralImage, Rect, box_sum, compute_integral, pack_coord, unpack_coord
from .matcher import MatchConfig, MatchPair, hamming, match_batch, stereo_match, trace_match
from .pipeline import FrameBundle, compute_disparity_map, process_sequence, schedule_sections
from .surf import Keypoint, ScaleTable, build_response_stack, detect, hessian_response, nms

__all__ = [
    "Descriptor",
    "DescriptorSet",
    "FrameBundle",
    "GrayImage",
    "Homography",
    "IntegralImage",
    "Keypoint",
    "MatchConfig",
    "MatchPair",
    "Rect",
    "SamplePattern",
    "ScaleTable",
    "box_sum",
    "build_response_stack",
    "classify_matches",
    "compute_disparity_map",
    "compute_integral",
    "default_pattern",
    "describe",
    "detect",
    "extract",
    "gen_pattern",
    "hamming",
    "hessian_response",
    "match_batch",
    "mean9",
    "nms",
    "pack_coord",
    "process_sequence",
    "project",
    "recall_precision_curve",
    "schedule_sections",
    "stereo_match",
    "throughput_model",
    "trace_match",
    "unpack_coord",
]
