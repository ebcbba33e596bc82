"""Surface-based detection of vessel-wall lesions on synthetic vessel trees."""

from vascuscan._core import (
    Mesh,
    Model,
    VascuscanError,
    default_thresholds,
    detect,
    effective_lr,
    extract_mesh,
    froc,
    geodesic_knn,
    label_mesh,
    load_checkpoint,
    load_ply,
    make_ball,
    phantom,
    plan_inference,
    predict,
    save_ply,
)

__all__ = [
    "Mesh",
    "Model",
    "VascuscanError",
    "default_thresholds",
    "detect",
    "effective_lr",
    "extract_mesh",
    "froc",
    "geodesic_knn",
    "label_mesh",
    "load_checkpoint",
    "load_ply",
    "make_ball",
    "phantom",
    "plan_inference",
    "predict",
    "save_ply",
]
