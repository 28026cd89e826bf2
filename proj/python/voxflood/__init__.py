"""Volumetric instance segmentation by tile-wise flood filling.

Arrays are indexed (z, y, x).
"""

from ._core import (
    BackendError,
    DataError,
    InputError,
    base64_decode,
    base64_encode,
    classical_reference,
    connected_components,
    distance_transform,
    evaluate,
    generate_phantom,
    merge_stacks,
    otsu_threshold,
    presets,
    segment,
)

__all__ = [
    "BackendError",
    "DataError",
    "InputError",
    "base64_decode",
    "base64_encode",
    "classical_reference",
    "connected_components",
    "distance_transform",
    "evaluate",
    "generate_phantom",
    "merge_stacks",
    "otsu_threshold",
    "presets",
    "segment",
]
