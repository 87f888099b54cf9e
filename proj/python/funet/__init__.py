from ._funet import (
    FunetError,
    Model,
    dwt2d,
    generate_sample,
    idwt2d,
    make_dataset,
    max_pool2d,
    metrics,
    wavelet_attention,
)

__all__ = [
    "FunetError",
    "Model",
    "dwt2d",
    "generate_sample",
    "idwt2d",
    "make_dataset",
    "max_pool2d",
    "metrics",
    "wavelet_attention",
]
