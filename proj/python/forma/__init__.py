"""Image tampering localization with a selective-scan encoder.

The heavy lifting lives in the C++ extension; this package re-exports the
operations and the inference model.
"""

from ._core import (
    DimensionError,
    DomainError,
    IoError,
    Model,
    NumericError,
    UsageError,
    complexity,
    cross_merge,
    cross_scan,
    dice_loss,
    f1_iou,
    focal_loss,
    pixel_shuffle,
    pixel_unshuffle,
    s6_scan,
    srm_apply,
    synth_tamper,
)

__all__ = [
    "DimensionError",
    "DomainError",
    "IoError",
    "Model",
    "NumericError",
    "UsageError",
    "complexity",
    "cross_merge",
    "cross_scan",
    "dice_loss",
    "f1_iou",
    "focal_loss",
    "pixel_shuffle",
    "pixel_unshuffle",
    "s6_scan",
    "srm_apply",
    "synth_tamper",
]
