"""Synthetic multipath RF signal matrices for Wi-Fi CSI, FMCW and impulse radio."""
from .dataset import (
    Dataset,
    Environment,
    NormStats,
    apply_norm,
    build_dataset,
    fit_norm_stats,
    normalize_dataset,
)
from .radio import VARIANT_CODES, VARIANTS, ConfigError, RadioConfig
from .scene import (
    ActivityClassSpec,
    EnvSpec,
    Path,
    Scene,
    Trajectory,
    default_class_specs,
    sample_environment,
    trajectory_delay,
)
from .simulate import SignalMatrix, ir_pulse, simulate, simulate_fmcw, simulate_ir, simulate_wifi, slow_times

__all__ = [
    "RadioConfig", "ConfigError", "VARIANTS", "VARIANT_CODES",
    "Path", "Scene", "Trajectory", "EnvSpec", "ActivityClassSpec",
    "sample_environment", "trajectory_delay", "default_class_specs",
    "SignalMatrix", "simulate", "simulate_wifi", "simulate_fmcw", "simulate_ir", "ir_pulse", "slow_times",
    "Dataset", "Environment", "NormStats", "build_dataset", "normalize_dataset",
    "fit_norm_stats", "apply_norm",
]
