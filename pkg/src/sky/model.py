"""
Discretized sky images on the centered N1 x N1 grid.

Pixel (s1, s2) with s1, s2 in {-N1/2, ..., N1/2 - 1} is stored row-major at
index (s1 + N1/2) * N1 + (s2 + N1/2). The pixel scale is L / N1.
"""

import logging
from dataclasses import dataclass
from typing import Optional, Union

import numpy as np

logger = logging.getLogger(__name__)

DEFAULT_PIXEL_SCALE = 0.1
SNR_CAP_DB = 300.0


@dataclass(frozen=True)
class SkyImage:
    """
    Nonnegative intensity image x in R^N, N = N1^2.

    Attributes:
        side: Grid side N1 (even)
        values: Flat row-major pixel values
        fov: Field of view L; defaults to N1 * 0.1
        seed: Generator seed when drawn at random
    """
    side: int
    values: np.ndarray
    fov: Optional[float] = None
    seed: Optional[int] = None

    def __post_init__(self):
        """Validate grid and intensities."""
        if self.side <= 0 or self.side % 2:
            raise ValueError(f"Grid side must be a positive even integer, got {self.side}")

        values = np.array(self.values, dtype=np.float64).ravel()
        if values.size != self.side ** 2:
            raise ValueError(
                f"Expected {self.side ** 2} pixel values for N1={self.side}, got {values.size}"
            )
        if np.any(values < 0) or not np.all(np.isfinite(values)):
            raise ValueError("Sky intensities must be finite and nonnegative")

        fov = self.fov if self.fov is not None else self.side * DEFAULT_PIXEL_SCALE
        if fov <= 0:
            raise ValueError(f"Field of view must be positive, got {fov}")

        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "fov", float(fov))

    @classmethod
    def zeros(cls, side: int, fov: Optional[float] = None) -> "SkyImage":
        return cls(side=side, values=np.zeros(side * side), fov=fov)

    @property
    def pixel_count(self) -> int:
        return self.side * self.side

    @property
    def pixel_size(self) -> float:
        """Pixel scale Delta = L / N1."""
        return self.fov / self.side

    @property
    def varpi(self) -> float:
        """Quadrature constant L^2 / sqrt(N)."""
        return self.fov ** 2 / self.side

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.values)

    @property
    def sparsity(self) -> int:
        return int(np.count_nonzero(self.values))

    def as_grid(self) -> np.ndarray:
        """Values as an (N1, N1) array, first axis s1."""
        return self.values.reshape(self.side, self.side)

    def with_values(self, values: np.ndarray) -> "SkyImage":
        return SkyImage(side=self.side, values=values, fov=self.fov, seed=self.seed)


def pixel_coordinates(side: int) -> np.ndarray:
    """Integer grid coordinates (s1, s2) of every pixel, shape (N, 2)."""
    axis = np.arange(side) - side // 2
    s1, s2 = np.meshgrid(axis, axis, indexing="ij")
    return np.column_stack([s1.ravel(), s2.ravel()])


def origin_index(side: int) -> int:
    """Flat index of the grid origin (0, 0)."""
    return (side // 2) * side + side // 2


def random_sparse_sky(
    side: int,
    sparsity: int,
    seed: int,
    fov: Optional[float] = None,
) -> SkyImage:
    """
    Draw a K-sparse image with unit intensities on a uniform random support.

    Args:
        side: Grid side N1
        sparsity: Number of nonzero pixels K
        seed: Generator seed
        fov: Field of view L

    Returns:
        SkyImage with exactly K pixels equal to 1

    Raises:
        ValueError: If K is outside [0, N]
    """
    n = side * side
    if sparsity < 0 or sparsity > n:
        raise ValueError(f"Sparsity must be within [0, {n}], got {sparsity}")

    rng = np.random.default_rng(seed)
    values = np.zeros(n)
    values[rng.choice(n, size=sparsity, replace=False)] = 1.0
    return SkyImage(side=side, values=values, fov=fov, seed=seed)


def dc_component(img: SkyImage) -> float:
    """Zero-frequency coefficient of the unitary 2-D DFT: sum / N1."""
    return float(img.values.sum() / img.side)


def snr_db(truth: Union[SkyImage, np.ndarray], estimate: np.ndarray) -> float:
    """
    Reconstruction SNR 20 log10(||x|| / ||x - x_est||), capped at 300 dB.

    Raises:
        ValueError: If lengths differ or the truth is all-zero
    """
    x = truth.values if isinstance(truth, SkyImage) else np.asarray(truth, dtype=np.float64)
    estimate = np.asarray(estimate)
    if x.shape != estimate.shape:
        raise ValueError(f"Length mismatch: truth {x.shape} vs estimate {estimate.shape}")

    signal = np.linalg.norm(x)
    if signal == 0:
        raise ValueError("SNR is undefined for an all-zero truth image")

    error = np.linalg.norm(x - estimate)
    if error == 0:
        return SNR_CAP_DB
    return float(min(20.0 * np.log10(signal / error), SNR_CAP_DB))


def raised_cosine_window(side: int, taper: float = 0.25) -> np.ndarray:
    """
    Separable raised-cosine antenna gain g on the grid.

    g is 1 in the interior and rolls off to exactly 0 on the frontier
    pixels; ``taper`` is the fraction of the half-width used by the roll-off.

    Returns:
        Flat (N,) array of gains in [0, 1]
    """
    if not 0.0 < taper <= 1.0:
        raise ValueError(f"taper must lie in (0, 1], got {taper}")

    half = (side - 1) / 2
    edge = half - np.abs(np.arange(side) - half)  # 0 on the frontier
    ramp = np.clip(edge / (taper * half), 0.0, 1.0)
    profile = 0.5 - 0.5 * np.cos(np.pi * ramp)
    return np.outer(profile, profile).ravel()


def vignette(img: SkyImage, gain: np.ndarray) -> SkyImage:
    """Apply the vignetting g^2 f to an image."""
    gain = np.asarray(gain, dtype=np.float64)
    if gain.shape != img.values.shape:
        raise ValueError(f"Gain shape {gain.shape} does not match image {img.values.shape}")
    return img.with_values(gain ** 2 * img.values)
