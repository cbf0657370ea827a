"""Python bindings for the sparse-stem JEPA library."""

from ._core import (
    CheckpointError,
    ConfigError,
    DataError,
    DegeneracyError,
    DimensionError,
    GeometryError,
    ScheduleConfig,
    blockwise_mask,
    default_config,
    desk_config,
    ema_at,
    encoder_parameter_count,
    foreground_split,
    lr_at,
    mask_contiguity,
    masked_count,
    masked_loss,
    pca,
    pretrain,
    random_mask,
    read_checkpoint_meta,
    sinusoidal_positions,
    smooth_l1,
    sparse_conv2d,
    sparse_max_blur_pool,
    validate_config,
    wd_at,
)

__all__ = [name for name in dir() if not name.startswith("_")]
