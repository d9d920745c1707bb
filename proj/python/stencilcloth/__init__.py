"""Mass-spring cloth simulation with a trainable stencil-convolution step."""

from ._core import (
    Checkpoint,
    ConfigError,
    EvalReport,
    IoError,
    NetworkParams,
    NumericsError,
    Scene,
    Trajectory,
    channel_order_hash,
    evaluate,
    export_obj,
    forward_impulse,
    gradient_check,
    load_checkpoint,
    load_scene,
    load_trajectory,
    params_fingerprint,
    parse_scene,
    rollout,
    save_checkpoint,
    save_trajectory,
    simulate,
    total_force,
    train,
)

__all__ = [
    "Checkpoint",
    "ConfigError",
    "EvalReport",
    "IoError",
    "NetworkParams",
    "NumericsError",
    "Scene",
    "Trajectory",
    "channel_order_hash",
    "evaluate",
    "export_obj",
    "forward_impulse",
    "gradient_check",
    "load_checkpoint",
    "load_scene",
    "load_trajectory",
    "params_fingerprint",
    "parse_scene",
    "rollout",
    "save_checkpoint",
    "save_trajectory",
    "simulate",
    "total_force",
    "train",
]

__version__ = "0.1.0"
