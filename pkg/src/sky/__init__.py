"""
Sky model: sparse images on the centered grid, DC component and SNR.
"""

from .model import (
    SkyImage,
    DEFAULT_PIXEL_SCALE,
    SNR_CAP_DB,
    pixel_coordinates,
    origin_index,
    random_sparse_sky,
    dc_component,
    snr_db,
    raised_cosine_window,
    vignette,
)

__all__ = [
    "SkyImage",
    "DEFAULT_PIXEL_SCALE",
    "SNR_CAP_DB",
    "pixel_coordinates",
    "origin_index",
    "random_sparse_sky",
    "dc_component",
    "snr_db",
    "raised_cosine_window",
    "vignette",
]
