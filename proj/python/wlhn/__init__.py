"""Poincare-ball geometry, Weisfeiler-Leman hierarchies and the WL hyperbolic network."""

from ._core import (
    NonFiniteError,
    PrecisionError,
    distance,
    distance_from_origin,
    embed,
    exp_map,
    generate,
    log_map,
    mobius_add,
    pearson,
    reflect_to_origin,
    run_cli,
    sarkar_embed,
    train,
    wl_colors,
    wl_correlation,
)

__version__ = "0.1.0"

__all__ = [
    "NonFiniteError",
    "PrecisionError",
    "distance",
    "distance_from_origin",
    "embed",
    "exp_map",
    "generate",
    "log_map",
    "mobius_add",
    "pearson",
    "reflect_to_origin",
    "run_cli",
    "sarkar_embed",
    "train",
    "wl_colors",
    "wl_correlation",
]
