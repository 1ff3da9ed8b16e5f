"""
Fourier operators: centered unitary 2-D DFT and non-uniform visibility
sampling.

Frequencies are expressed in grid units chi, so that the visibility of
image x at chi is

    v(chi) = Delta^2 * sum_s x_s exp(-i 2 pi chi . s / N1)

with s the centered integer pixel coordinates. ``NUDFT`` evaluates this sum
directly; ``NUFFT`` uses a factor-2 oversampled FFT, Kaiser-Bessel
interpolation and deapodization, and its adjoint is the exact transpose of
that pipeline.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
from scipy import sparse
from scipy.special import i0

from src.errors import ConfigurationError, DimensionMismatchError
from src.geometry.synthesis import BatchGeometry
from src.operators.base import LinearOp, vstack
from src.sky.model import DEFAULT_PIXEL_SCALE

logger = logging.getLogger(__name__)

DEFAULT_UV_FILL = 0.45
BAND_MARGIN = 0.45
NUDFT_CHUNK_ROWS = 4096


def _check_square(length: int) -> int:
    side = int(round(np.sqrt(length)))
    if side * side != length:
        raise DimensionMismatchError(f"Length {length} is not a square number of pixels")
    return side


def centered_axis(side: int) -> np.ndarray:
    return np.arange(side) - side // 2


def dft2(values: np.ndarray, inverse: bool = False) -> np.ndarray:
    """
    Centered unitary 2-D DFT of a flat row-major image (or its inverse).

    Raises:
        DimensionMismatchError: If the length is not N1^2
    """
    values = np.asarray(values)
    side = _check_square(values.size)
    grid = np.fft.ifftshift(values.reshape(side, side))
    if inverse:
        out = np.fft.ifft2(grid, norm="ortho")
    else:
        out = np.fft.fft2(grid, norm="ortho")
    return np.fft.fftshift(out).ravel()


class DFT2(LinearOp):
    """Unitary centered 2-D DFT F = F1 (x) F1 on N1 x N1 grids."""

    def __init__(self, side: int):
        self.side = side
        n = side * side
        super().__init__((n, n), name="F")

    def _apply(self, x):
        return dft2(x)

    def _apply_adjoint(self, y):
        return dft2(y, inverse=True)


@dataclass(frozen=True)
class VisibilityPlan:
    """
    Per-batch antenna positions and visibility frequencies in grid units.

    Row (j, k) of batch b samples the frequency chi_k - chi_j, so that
    unvec of one batch is the interferometric matrix. Rows are ordered
    batch-major, then j * Q + k.

    Attributes:
        side: Image grid side N1
        positions: (B, Q, 2) antenna positions in grid units
        pixel_size: Pixel scale Delta
        scale: Grid units per wavelength used to rescale physical baselines
        include_dc_rows: Keep the Q diagonal (zero-frequency) rows per batch;
            when False each batch has Q(Q-1) rows in (j, k) order, j != k
    """
    side: int
    positions: np.ndarray
    pixel_size: float = DEFAULT_PIXEL_SCALE
    scale: float = 1.0
    include_dc_rows: bool = True

    def __post_init__(self):
        positions = np.array(self.positions, dtype=np.float64)
        if positions.ndim != 3 or positions.shape[2] != 2:
            raise ValueError(f"positions must have shape (B, Q, 2), got {positions.shape}")
        if self.side <= 0 or self.side % 2:
            raise ValueError(f"Grid side must be a positive even integer, got {self.side}")
        if self.pixel_size <= 0:
            raise ValueError(f"pixel_size must be positive, got {self.pixel_size}")

        positions.setflags(write=False)
        object.__setattr__(self, "positions", positions)

        norms = np.linalg.norm(self.frequencies, axis=1)
        limit = BAND_MARGIN * self.side
        if norms.size and norms.max() > limit * (1 + 1e-12):
            raise ConfigurationError(
                f"Visibility frequency {norms.max():.3f} exceeds in-band limit {limit:.3f}"
            )

    @classmethod
    def from_batches(
        cls,
        batches: Sequence[BatchGeometry],
        side: int,
        pixel_size: float = DEFAULT_PIXEL_SCALE,
        fill: float = DEFAULT_UV_FILL,
        include_dc_rows: bool = True,
    ) -> "VisibilityPlan":
        """
        Rescale physical baselines so the longest maps to fill * N1 / 2.

        Args:
            batches: Synthesized batch geometries
            side: Grid side N1
            pixel_size: Pixel scale Delta
            fill: Fraction of the half band used by the longest baseline
            include_dc_rows: Keep diagonal rows

        Returns:
            VisibilityPlan
        """
        if not batches:
            raise ValueError("At least one batch is required")
        if not 0 < fill <= 2 * BAND_MARGIN:
            raise ConfigurationError(f"uv fill fraction must lie in (0, 0.9], got {fill}")

        positions = np.stack([batch.positions for batch in batches])
        longest = max(
            (np.linalg.norm(batch.baselines, axis=1).max() for batch in batches if len(batch.baselines)),
            default=0.0,
        )
        scale = fill * (side / 2) / longest if longest > 0 else 1.0

        plan = cls(
            side=side,
            positions=positions * scale,
            pixel_size=pixel_size,
            scale=float(scale),
            include_dc_rows=include_dc_rows,
        )
        logger.info(
            f"Visibility plan: B={plan.num_batches}, Q={plan.num_antennas}, N1={side}, "
            f"scale={scale:.6g} grid units per wavelength"
        )
        return plan

    @property
    def num_batches(self) -> int:
        return int(self.positions.shape[0])

    @property
    def num_antennas(self) -> int:
        return int(self.positions.shape[1])

    @property
    def rows_per_batch(self) -> int:
        q = self.num_antennas
        return q * q if self.include_dc_rows else q * (q - 1)

    @property
    def num_rows(self) -> int:
        """Total visibility rows: B * Q^2, or V when diagonal rows are dropped."""
        return self.num_batches * self.rows_per_batch

    @property
    def num_offdiagonal(self) -> int:
        """Visibility count V = Q(Q-1)B."""
        q = self.num_antennas
        return q * (q - 1) * self.num_batches

    @property
    def pixel_count(self) -> int:
        return self.side * self.side

    @property
    def fov(self) -> float:
        return self.pixel_size * self.side

    @property
    def varpi(self) -> float:
        """Quadrature constant L^2 / sqrt(N)."""
        return self.fov ** 2 / self.side

    @cached_property
    def frequencies(self) -> np.ndarray:
        """(num_rows, 2) grid-unit frequencies chi_k - chi_j."""
        p = self.positions
        freq = p[:, None, :, :] - p[:, :, None, :]  # [b, j, k] = p_k - p_j
        freq = freq.reshape(-1, 2)
        if not self.include_dc_rows:
            freq = freq[self._full_offdiagonal_mask()]
        freq.setflags(write=False)
        return freq

    @cached_property
    def offdiagonal_mask(self) -> np.ndarray:
        """True for rows with j != k."""
        if self.include_dc_rows:
            mask = self._full_offdiagonal_mask()
        else:
            mask = np.ones(self.num_rows, dtype=bool)
        mask.setflags(write=False)
        return mask

    def _full_offdiagonal_mask(self) -> np.ndarray:
        q = self.num_antennas
        return np.tile(~np.eye(q, dtype=bool).ravel(), self.num_batches)

    def batch_slice(self, b: int) -> slice:
        """Rows of the 0-based batch ``b``."""
        q2 = self.rows_per_batch
        return slice(b * q2, (b + 1) * q2)

    def subset(self, batch_indices: Sequence[int]) -> "VisibilityPlan":
        """Plan restricted to the given 0-based batches."""
        return VisibilityPlan(
            side=self.side,
            positions=self.positions[list(batch_indices)],
            pixel_size=self.pixel_size,
            scale=self.scale,
            include_dc_rows=self.include_dc_rows,
        )

    def metadata(self) -> dict:
        return {
            "side": self.side,
            "num_batches": self.num_batches,
            "num_antennas": self.num_antennas,
            "pixel_size": self.pixel_size,
            "scale": self.scale,
            "include_dc_rows": self.include_dc_rows,
        }


class NUDFT(LinearOp):
    """
    Exact visibility operator by direct summation (image -> visibilities).

    Uses the separability of the exponential: one (rows x N1) factor per axis.
    """

    def __init__(self, plan: VisibilityPlan, chunk_rows: int = NUDFT_CHUNK_ROWS):
        self.plan = plan
        self.chunk_rows = chunk_rows
        self._axis = centered_axis(plan.side)
        super().__init__((plan.num_rows, plan.pixel_count), name="GF[nudft]")

    def _factors(self, rows: slice):
        chi = self.plan.frequencies[rows]
        phase = -2j * np.pi / self.plan.side
        ea = np.exp(phase * np.outer(chi[:, 0], self._axis))
        eb = np.exp(phase * np.outer(chi[:, 1], self._axis))
        return ea, eb

    def _apply(self, x):
        side = self.plan.side
        grid = x.reshape(side, side)
        out = np.empty(self.shape[0], dtype=np.complex128)
        for start in range(0, self.shape[0], self.chunk_rows):
            rows = slice(start, min(start + self.chunk_rows, self.shape[0]))
            ea, eb = self._factors(rows)
            out[rows] = np.einsum("ri,ij,rj->r", ea, grid, eb, optimize=True)
        return self.plan.pixel_size ** 2 * out

    def _apply_adjoint(self, y):
        side = self.plan.side
        grid = np.zeros((side, side), dtype=np.complex128)
        for start in range(0, self.shape[0], self.chunk_rows):
            rows = slice(start, min(start + self.chunk_rows, self.shape[0]))
            ea, eb = self._factors(rows)
            grid += (ea.conj().T * y[rows]) @ eb.conj()
        return self.plan.pixel_size ** 2 * grid.ravel()


@dataclass(frozen=True)
class KaiserBesselKernel:
    """
    Kaiser-Bessel gridding kernel phi(t) = I0(beta sqrt(1 - (2t/J)^2)), |t| <= J/2.

    Attributes:
        width: Kernel support J in oversampled grid cells
        oversampling: Grid oversampling factor
        beta: Shape parameter; defaults to pi J (1 - 1/(2 sigma)) 0.98
    """
    width: int = 7
    oversampling: float = 2.0
    beta: Optional[float] = None

    def __post_init__(self):
        if self.width < 2:
            raise ValueError(f"Kernel width must be >= 2, got {self.width}")
        if self.oversampling < 1.5:
            raise ValueError(f"Oversampling must be >= 1.5, got {self.oversampling}")
        if self.beta is None:
            beta = np.pi * self.width * (1 - 1 / (2 * self.oversampling)) * 0.98
            object.__setattr__(self, "beta", float(beta))

    def evaluate(self, t: np.ndarray) -> np.ndarray:
        """Kernel values at offsets t (grid cells); 0 outside the support."""
        t = np.asarray(t, dtype=np.float64)
        arg = 1.0 - (2.0 * t / self.width) ** 2
        inside = arg >= 0
        out = np.zeros_like(t)
        out[inside] = i0(self.beta * np.sqrt(arg[inside]))
        return out

    def fourier(self, f: np.ndarray) -> np.ndarray:
        """Continuous Fourier transform of the kernel at f (cycles per cell)."""
        f = np.asarray(f, dtype=np.float64)
        z = self.beta ** 2 - (np.pi * self.width * f) ** 2
        out = np.empty_like(f)
        pos = z > 0
        root = np.sqrt(np.abs(z))
        out[pos] = self.width * np.sinh(root[pos]) / root[pos]
        neg = z < 0
        out[neg] = self.width * np.sin(root[neg]) / root[neg]
        out[z == 0] = self.width
        return out


class NUFFT(LinearOp):
    """
    Gridded visibility operator: oversampled FFT + Kaiser-Bessel interpolation.

    Forward: deapodize, zero-pad onto the K = sigma * N1 grid, FFT, then
    interpolate with a sparse (rows x K^2) matrix of J^2 kernel weights per
    row. Adjoint: the exact transpose of each step.
    """

    def __init__(self, plan: VisibilityPlan, kernel: Optional[KaiserBesselKernel] = None):
        self.plan = plan
        self.kernel = kernel or KaiserBesselKernel()
        side = plan.side
        self.grid_size = int(round(self.kernel.oversampling * side))
        if self.grid_size < side + 1:
            raise ConfigurationError("Oversampled grid must be larger than the image grid")

        chi = plan.frequencies
        if chi.size and np.abs(chi).max() > side / 2:
            raise ConfigurationError(
                f"Frequency {np.abs(chi).max():.3f} out of band (|chi| <= {side / 2})"
            )

        axis = centered_axis(side)
        self._pad_index = np.mod(axis, self.grid_size)
        deapod = 1.0 / self.kernel.fourier(axis / self.grid_size)
        self._deapodization = np.outer(deapod, deapod)
        self._interp = self._build_interpolation(chi)
        self._interp_adjoint = self._interp.conj().T.tocsr()

        super().__init__((plan.num_rows, plan.pixel_count), name="GF[nufft]")
        logger.debug(
            f"NUFFT: K={self.grid_size}, J={self.kernel.width}, beta={self.kernel.beta:.4f}, "
            f"nnz={self._interp.nnz}"
        )

    def _build_interpolation(self, chi: np.ndarray) -> sparse.csr_matrix:
        j = self.kernel.width
        grid = self.grid_size
        u = chi * grid / self.plan.side  # frequency in oversampled cells
        start = np.floor(u - j / 2).astype(np.int64) + 1
        offsets = np.arange(j)
        k1 = start[:, 0, None] + offsets  # (rows, J)
        k2 = start[:, 1, None] + offsets
        w1 = self.kernel.evaluate(u[:, 0, None] - k1)
        w2 = self.kernel.evaluate(u[:, 1, None] - k2)

        rows = len(chi)
        data = (w1[:, :, None] * w2[:, None, :]).reshape(rows, -1)
        cols = (np.mod(k1, grid)[:, :, None] * grid + np.mod(k2, grid)[:, None, :]).reshape(rows, -1)
        indptr = np.arange(0, rows * j * j + 1, j * j)
        matrix = sparse.csr_matrix(
            (data.ravel(), cols.ravel(), indptr), shape=(rows, grid * grid)
        )
        # kernel offsets wrapping onto the same cell are summed
        matrix.sum_duplicates()
        return matrix

    def _apply(self, x):
        side, grid = self.plan.side, self.grid_size
        padded = np.zeros((grid, grid), dtype=np.complex128)
        padded[np.ix_(self._pad_index, self._pad_index)] = x.reshape(side, side) * self._deapodization
        spectrum = np.fft.fft2(padded)
        return self.plan.pixel_size ** 2 * (self._interp @ spectrum.ravel())

    def _apply_adjoint(self, y):
        side, grid = self.plan.side, self.grid_size
        gridded = (self._interp_adjoint @ y).reshape(grid, grid)
        image = grid * grid * np.fft.ifft2(gridded)
        image = image[np.ix_(self._pad_index, self._pad_index)] * self._deapodization
        return self.plan.pixel_size ** 2 * image.ravel()


def make_visibility_operator(
    plan: VisibilityPlan,
    backend: str = "nufft",
    kernel: Optional[KaiserBesselKernel] = None,
    workers: int = 1,
) -> LinearOp:
    """
    Image -> visibility operator GF for a plan.

    With ``workers > 1`` and several batches the operator is a stack of
    per-batch operators applied on a thread pool; it agrees with the
    single-operator form to round-off and does not depend on ``workers``.

    Args:
        plan: Visibility plan
        backend: "nufft" (gridded) or "nudft" (exact oracle)
        kernel: Kaiser-Bessel parameters for the gridded backend
        workers: Threads for per-batch application

    Returns:
        LinearOp of shape (plan.num_rows, N)
    """
    if backend not in ("nufft", "nudft"):
        raise ConfigurationError(f"Unknown visibility backend: {backend!r}")

    def build(p: VisibilityPlan) -> LinearOp:
        return NUFFT(p, kernel) if backend == "nufft" else NUDFT(p)

    if workers <= 1 or plan.num_batches == 1:
        return build(plan)
    op = vstack([build(plan.subset([b])) for b in range(plan.num_batches)], workers)
    op.name = f"GF[{backend}]"
    return op


def spectrum_interpolator(visibility_op: LinearOp, side: int) -> LinearOp:
    """G = (GF) F*: spectrum -> visibilities."""
    dft = DFT2(side)
    return LinearOp(
        (visibility_op.shape[0], dft.shape[1]),
        forward=lambda k: visibility_op.forward(dft.adjoint(k)),
        adjoint=lambda y: dft.forward(visibility_op.adjoint(y)),
        name="G",
    )


def nudft(plan: VisibilityPlan, values: np.ndarray) -> np.ndarray:
    """Exact visibilities of a flat image."""
    return NUDFT(plan).forward(np.asarray(values))


def nufft(plan: VisibilityPlan, values: np.ndarray, kernel: Optional[KaiserBesselKernel] = None) -> np.ndarray:
    """Gridded visibilities of a flat image."""
    return NUFFT(plan, kernel).forward(np.asarray(values))


def dirty_map(visibility_op: LinearOp, visibilities: np.ndarray) -> np.ndarray:
    """Adjoint of the visibility operator applied to visibilities (real part)."""
    return np.real(visibility_op.adjoint(visibilities))
