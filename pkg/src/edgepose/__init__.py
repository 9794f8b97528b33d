"""Edge-map pre-processing and benchmark scoring for 6D pose estimation.

The package groups four concerns: Canny edge extraction and RGB+edge
composites (:mod:`edgepose.imaging`), pose accuracy metrics and a PnP
solver (:mod:`edgepose.pose_metrics`, :mod:`edgepose.pnp`), detection
precision/recall (:mod:`edgepose.detect_metrics`), and BOP-style dataset
I/O plus report rendering (:mod:`edgepose.dataset_io`,
:mod:`edgepose.report`). The ``edgepose`` CLI wires them together.
"""

from .dataset_io import (
    DatasetIndex,
    EstimateRecord,
    GroundTruthRecord,
    load_bop_ground_truth,
    load_detections,
    load_ply_model,
    load_pose_estimates,
)
from .detect_metrics import BBox, MatchResult, iou, match_detections, precision, recall
from .errors import (
    BehindCameraError,
    DegenerateGeometryError,
    DimensionError,
    EdgePoseError,
    EvaluationError,
    FormatError,
    InitializationError,
    InsufficientDataError,
)
from .imaging import (
    EdgeMap,
    GradientField,
    Image,
    canny,
    composite_rgb_edges,
    gaussian_blur,
    load_png,
    save_png,
    sobel_gradients,
    to_grayscale,
)
from .pnp import CameraIntrinsics, Correspondence, PnPResult, project_points, solve_pnp
from .pose_metrics import (
    ModelPoints,
    Pose,
    PoseScore,
    add,
    add_recall,
    add_s,
    model_diameter,
    score_pose,
)
from .report import ReportTable

__version__ = "0.1.0"

__all__ = [
    "BBox",
    "BehindCameraError",
    "CameraIntrinsics",
    "Correspondence",
    "DatasetIndex",
    "DegenerateGeometryError",
    "DimensionError",
    "EdgeMap",
    "EdgePoseError",
    "EstimateRecord",
    "EvaluationError",
    "FormatError",
    "GradientField",
    "GroundTruthRecord",
    "Image",
    "InitializationError",
    "InsufficientDataError",
    "MatchResult",
    "ModelPoints",
    "PnPResult",
    "Pose",
    "PoseScore",
    "ReportTable",
    "add",
    "add_recall",
    "add_s",
    "canny",
    "composite_rgb_edges",
    "gaussian_blur",
    "iou",
    "load_bop_ground_truth",
    "load_detections",
    "load_ply_model",
    "load_png",
    "load_pose_estimates",
    "match_detections",
    "model_diameter",
    "precision",
    "project_points",
    "recall",
    "save_png",
    "score_pose",
    "sobel_gradients",
    "solve_pnp",
    "to_grayscale",
]
