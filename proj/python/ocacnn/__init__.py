"""Python access to the ocacnn C++ core."""

from ._core import (
    ConfigError,
    DataError,
    Error,
    NumericalError,
    ShapeError,
    auroc,
    evaluate,
    extract_features,
    gen_data,
    gradcheck,
    protocol,
    reconstruct,
    resolved_config,
    score,
    train,
)

__all__ = [
    "ConfigError",
    "DataError",
    "Error",
    "NumericalError",
    "ShapeError",
    "auroc",
    "evaluate",
    "extract_features",
    "gen_data",
    "gradcheck",
    "protocol",
    "reconstruct",
    "resolved_config",
    "score",
    "train",
]
