"""Experiment plumbing: configuration, binary files, cross-validation, reports, selftest and CLI."""
from .config import RunConfig, parse_config_text, read_config_file
from .crossval import MetricsReport, emit_report, partition_folds, read_metrics_csv, run_crossval
from .formats import (
    BadMagicError,
    FormatError,
    ShapeMismatchError,
    TruncatedError,
    UnsupportedVersionError,
    decode_checkpoint,
    decode_dataset,
    encode_checkpoint,
    encode_dataset,
    read_checkpoint,
    read_dataset,
    write_checkpoint,
    write_dataset,
)
from .selftest import selftest
from .cli import main

__all__ = [
    "RunConfig", "parse_config_text", "read_config_file",
    "MetricsReport", "run_crossval", "emit_report", "partition_folds", "read_metrics_csv",
    "FormatError", "BadMagicError", "TruncatedError", "ShapeMismatchError", "UnsupportedVersionError",
    "encode_dataset", "decode_dataset", "encode_checkpoint", "decode_checkpoint",
    "read_dataset", "write_dataset", "read_checkpoint", "write_checkpoint", "selftest", "main",
]
