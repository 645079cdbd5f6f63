"""Image-level normalization and vectorization.

Two normalization variants feed the feature channels: SN standardizes each
image to zero mean and unit variance; LN suppresses slowly varying
illumination by normalizing every pixel against its local window mean and
standard deviation, then rescaling the result to [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import uniform_filter

VARIANCE_FLOOR = 1e-12


@dataclass(frozen=True)
class NormalizationMode:
    """Which normalization runs before feature extraction."""

    variant: str = "none"  # one of: none, sn, ln
    ln_window: int = 7

    def __post_init__(self):
        if self.variant not in ("none", "sn", "ln"):
            raise ValueError(f"unknown normalization variant {self.variant!r}")
        if self.ln_window < 3 or self.ln_window % 2 == 0:
            raise ValueError("ln_window must be odd and >= 3")

    def apply(self, image: np.ndarray) -> np.ndarray:
        if self.variant == "sn":
            return per_image_standardize(image)
        if self.variant == "ln":
            return luminous_normalize(image, self.ln_window)
        return np.asarray(image, dtype=np.float64)


def per_image_standardize(image: np.ndarray) -> np.ndarray:
    """Shift and scale one image to zero mean, unit population std.

    A (near-)constant image maps to all zeros rather than dividing by a
    vanishing standard deviation.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.size == 0:
        raise ValueError("image is empty")
    std = image.std()
    if std < VARIANCE_FLOOR:
        return np.zeros_like(image)
    return (image - image.mean()) / std


def luminous_normalize(image: np.ndarray, ln_window: int = 7) -> np.ndarray:
    """Local-contrast normalization against a square window, output in [0, 1].

    Each pixel becomes (p - local_mean) / (local_std + eps) over its
    ln_window x ln_window neighborhood (reflect padding at the borders),
    and the result is affinely rescaled to span [0, 1]. Constant images
    come back constant.
    """
    image = np.asarray(image, dtype=np.float64)
    if image.size == 0:
        raise ValueError("image is empty")
    if ln_window < 3 or ln_window % 2 == 0:
        raise ValueError("ln_window must be odd and >= 3")
    local_mean = uniform_filter(image, size=ln_window, mode="reflect")
    local_sq = uniform_filter(image * image, size=ln_window, mode="reflect")
    local_var = np.maximum(local_sq - local_mean * local_mean, 0.0)
    out = (image - local_mean) / (np.sqrt(local_var) + VARIANCE_FLOOR)
    lo, hi = out.min(), out.max()
    if hi - lo < VARIANCE_FLOOR:
        return np.zeros_like(image)
    return (out - lo) / (hi - lo)


def vectorize(image: np.ndarray) -> np.ndarray:
    """Flatten an image column-wise (column-major order) to a H*W vector."""
    return np.asarray(image).flatten(order="F")


def unvectorize(vector: np.ndarray, shape: tuple[int, int]) -> np.ndarray:
    """Inverse of vectorize: reshape a H*W vector back to (H, W)."""
    return np.asarray(vector).reshape(shape, order="F")
