"""Structured multi-output kernel regression.

Matrices follow the C++ convention: one sample per column.
"""

from ._s2vr import (
    DataError,
    DegenerateError,
    Error,
    FormatError,
    GeometryError,
    IoError,
    Model,
    ModeError,
    ParameterError,
    RenderError,
    ShapeError,
    SolverError,
    TrainConfig,
    align_weights,
    alignment,
    bandwidth_grid,
    center_kernel,
    cobb_angles,
    consistency_gap,
    fit,
    fit_baseline,
    gaussian_kernel,
    generate_spine,
    hog,
    laplacian,
    objective,
    pearson,
    read_annotations,
    read_features,
    render,
    rrmse,
    solve,
    solve_nonneg_qp,
    target_kernel,
)

__all__ = [name for name in dir() if not name.startswith("_")]
