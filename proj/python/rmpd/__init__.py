"""Region-based multi-scale prediction-difference saliency maps."""

from ._rmpd import (
    BackendError,
    Classifier,
    IoError,
    ProtocolError,
    interchange_available,
    ladder_scale_seed,
    load_image,
    load_saliency,
    pixelwise,
    pixelwise_call_budget,
    regional,
    regional_call_budget,
    save_image,
    segment,
    sweep,
    tabular,
)

__all__ = [
    "BackendError",
    "Classifier",
    "IoError",
    "ProtocolError",
    "interchange_available",
    "ladder_scale_seed",
    "load_image",
    "load_saliency",
    "pixelwise",
    "pixelwise_call_budget",
    "regional",
    "regional_call_budget",
    "save_image",
    "segment",
    "sweep",
    "tabular",
]
