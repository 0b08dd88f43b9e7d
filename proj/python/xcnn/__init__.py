"""Explainable CNN: a classifier that emits a per-pixel heatmap as part of
its forward pass, plus the tools to train it and inspect the maps."""

from ._xcnn import (
    BoundingBox,
    ConfigError,
    ContractError,
    Dataset,
    FormatError,
    Model,
    NumericalError,
    ShapeError,
    TrainMetrics,
    build_model,
    dataset_from_arrays,
    deletion_score,
    gradcheck_suite,
    load_cifar10,
    load_mnist,
    load_model,
    localize,
    mi_diagnostic,
    mutual_information,
    render_heatmap,
    set_blas_threads,
)

__all__ = [
    "BoundingBox",
    "ConfigError",
    "ContractError",
    "Dataset",
    "FormatError",
    "Model",
    "NumericalError",
    "ShapeError",
    "TrainMetrics",
    "build_model",
    "dataset_from_arrays",
    "deletion_score",
    "gradcheck_suite",
    "load_cifar10",
    "load_mnist",
    "load_model",
    "localize",
    "mi_diagnostic",
    "mutual_information",
    "render_heatmap",
    "set_blas_threads",
]

__version__ = "0.1.0"
