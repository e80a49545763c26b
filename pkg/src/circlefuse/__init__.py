"""circlefuse: circle-detection post-processing for whole-slide images.

Tiles slide space into half-overlapping patches, ingests per-model circle
detections, de-duplicates them with circle-NMS, fuses the ensemble with
weighted circle fusion, scores results with cIoU-based mAP/AR, exports
consensus-categorized GeoJSON, and serves a human-in-the-loop review API.
"""

from .geometry import Circle, ciou, ciou_one_to_many, intersection_area
from .tiling import Patch, SlideGeometry, TilingConfig, from_slide_coords, generate_patches, to_slide_coords
from .backends import (
    BackendError,
    Detection,
    DetectionFile,
    DetectionFileError,
    ModelRun,
    assemble,
    detection_sort_key,
    infer_remote,
    load_detection_file,
    remote_model_run,
)
from .suppression import nms, soft_nms
from .fusion import (
    DEFAULT_COLOR_MAP,
    FusedDetection,
    WcfConfig,
    categorize,
    fused_document,
    parse_fused_document,
    wcf,
)
from .evaluation import EvalConfig, EvalReport, average_precision, evaluate, match_at_threshold
from .synthetic import (
    GroundTruthSet,
    SynthConfig,
    generate_ground_truth,
    read_ground_truth,
    simulate_ensemble,
    simulate_model,
    write_ground_truth,
)
from .geojson_io import ImportResult, export_geojson, import_geojson, read_geojson, write_geojson
from .pipeline import BackendConfig, PipelineResult, fuse_runs, run_pipeline
from .bench import BenchResult, bench_table1, paired_sign_test
from .review import EditOp, ReviewState, create_app, replay

__version__ = "0.1.0"

__all__ = [
    "Circle",
    "ciou",
    "ciou_one_to_many",
    "intersection_area",
    "Patch",
    "SlideGeometry",
    "TilingConfig",
    "generate_patches",
    "to_slide_coords",
    "from_slide_coords",
    "Detection",
    "DetectionFile",
    "DetectionFileError",
    "BackendError",
    "ModelRun",
    "assemble",
    "detection_sort_key",
    "infer_remote",
    "load_detection_file",
    "remote_model_run",
    "nms",
    "soft_nms",
    "WcfConfig",
    "FusedDetection",
    "wcf",
    "categorize",
    "DEFAULT_COLOR_MAP",
    "fused_document",
    "parse_fused_document",
    "EvalConfig",
    "EvalReport",
    "match_at_threshold",
    "average_precision",
    "evaluate",
    "SynthConfig",
    "GroundTruthSet",
    "generate_ground_truth",
    "simulate_model",
    "simulate_ensemble",
    "write_ground_truth",
    "read_ground_truth",
    "ImportResult",
    "export_geojson",
    "import_geojson",
    "read_geojson",
    "write_geojson",
    "BackendConfig",
    "PipelineResult",
    "run_pipeline",
    "fuse_runs",
    "BenchResult",
    "bench_table1",
    "paired_sign_test",
    "EditOp",
    "ReviewState",
    "create_app",
    "replay",
    "__version__",
]
