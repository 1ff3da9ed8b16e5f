"""
Imaging models built from the operator algebra.

    MROP:           z = M D G F x
    IROP, centered: z = M_1 D S0* S0 G F x   (diagonal rows removed, Gamma = 1)

plus the interferometric-matrix oracle I_b = Gamma_b D_x Gamma_b^* and DC
centering of measurement vectors.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import TYPE_CHECKING, List, Optional

import numpy as np
from scipy.linalg import block_diag

from src.errors import ConfigurationError, DimensionMismatchError, ResourceGuardError
from src.operators.base import LinearOp, adjoint_of, chain, real_input
from src.operators.fourier import (
    DFT2,
    KaiserBesselKernel,
    VisibilityPlan,
    make_visibility_operator,
    spectrum_interpolator,
)
from src.operators.rop import BlockROP, Modulation, OffDiagonalSelector
from src.sky.model import SkyImage, pixel_coordinates

if TYPE_CHECKING:
    from src.acquisition.sketches import SketchEnsemble

logger = logging.getLogger(__name__)

DEFAULT_MATRIX_BUDGET = 10 ** 8


@dataclass
class SensingModel:
    """
    Plan, sketches and visibility backend bundled into imaging operators.

    Operators are built on first access and cached; all of them are
    reentrant and may be shared between threads. ``workers`` threads apply
    the per-batch visibility and ROP blocks.
    """
    plan: VisibilityPlan
    sketches: "SketchEnsemble"
    backend: str = "nufft"
    kernel: Optional[KaiserBesselKernel] = None
    visibility: Optional[LinearOp] = field(default=None, repr=False)
    workers: int = 1

    def __post_init__(self):
        if not self.plan.include_dc_rows:
            raise ConfigurationError("Sensing models need the full Q x Q rows of every batch (include_dc_rows=True)")
        if self.sketches.num_batches != self.plan.num_batches:
            raise DimensionMismatchError(
                f"Sketches cover {self.sketches.num_batches} batches, plan has {self.plan.num_batches}"
            )
        if self.sketches.num_antennas != self.plan.num_antennas:
            raise DimensionMismatchError(
                f"Sketches have Q={self.sketches.num_antennas}, plan has Q={self.plan.num_antennas}"
            )
        if self.visibility is None:
            self.visibility = make_visibility_operator(self.plan, self.backend, self.kernel, self.workers)

    @cached_property
    def dft(self) -> DFT2:
        return DFT2(self.plan.side)

    @cached_property
    def interpolation(self) -> LinearOp:
        """G: spectrum -> visibilities."""
        return spectrum_interpolator(self.visibility, self.plan.side)

    @cached_property
    def rop(self) -> BlockROP:
        return BlockROP(self.sketches, self.workers)

    @cached_property
    def modulation(self) -> Modulation:
        return Modulation(self.sketches.modulations, self.sketches.num_projections)

    @cached_property
    def integration(self) -> Modulation:
        """All-ones aggregation (M = 1)."""
        return Modulation(np.ones((self.plan.num_batches, 1)), self.sketches.num_projections)

    @cached_property
    def selector(self) -> OffDiagonalSelector:
        return OffDiagonalSelector(self.plan.num_antennas, self.plan.num_batches)

    @cached_property
    def hollow_visibility(self) -> LinearOp:
        """G0 F: image -> off-diagonal visibilities (V rows)."""
        return chain(self.selector, self.visibility)

    def mrop(self) -> LinearOp:
        """Real-domain MROP imaging operator M D G F."""
        op = chain(self.modulation, self.rop, self.visibility)
        op = real_input(op)
        op.name = "MDGF"
        return op

    def irop(self) -> LinearOp:
        """Real-domain uncentered IROP operator (Gamma = 1) with diagonal rows."""
        op = real_input(chain(self.integration, self.rop, self.visibility))
        op.name = "RGF"
        return op

    def irop_centered(self) -> LinearOp:
        """Real-domain centered IROP operator R G0 F (diagonal rows removed)."""
        embed = adjoint_of(self.selector)
        op = real_input(chain(self.integration, self.rop, embed, self.selector, self.visibility))
        op.name = "RG0F"
        return op

    def dc_template(self, integrated: bool = False) -> np.ndarray:
        """
        Measurements of the pure-DC spectrum e_0 (image F* e_0 = 1/N1).

        Args:
            integrated: Use the all-ones aggregation instead of Gamma
        """
        side = self.plan.side
        constant = np.full(side * side, 1.0 / side)
        op = self.irop() if integrated else self.mrop()
        return op.forward(constant)

    def operators(self) -> List[LinearOp]:
        """Every building block and composition, for adjoint testing."""
        return [
            self.dft,
            self.visibility,
            self.interpolation,
            self.rop,
            self.modulation,
            self.selector,
            self.hollow_visibility,
            chain(self.rop, self.visibility),
            self.mrop(),
            self.irop(),
            self.irop_centered(),
        ]


def build_sensing_model(
    plan: VisibilityPlan,
    sketches: "SketchEnsemble",
    backend: str = "nufft",
    kernel: Optional[KaiserBesselKernel] = None,
) -> SensingModel:
    return SensingModel(plan=plan, sketches=sketches, backend=backend, kernel=kernel)


def forward_mrop(model: SensingModel, img: SkyImage) -> np.ndarray:
    """Noiseless MROP measurements z = M D G F x, length P * M."""
    return model.mrop().forward(img.values)


def forward_irop_centered(model: SensingModel, img: SkyImage) -> np.ndarray:
    """Centered IROP measurements z = R G0 F x, length P."""
    return model.irop_centered().forward(img.values)


def center_measurements(z: np.ndarray, dc_estimate: float, dc_template: np.ndarray) -> np.ndarray:
    """Subtract the DC contribution: z^c = z - x0 * template."""
    z = np.asarray(z)
    if z.shape != dc_template.shape:
        raise DimensionMismatchError(f"Template shape {dc_template.shape} does not match z {z.shape}")
    return z - dc_estimate * dc_template


def steering_matrix(positions: np.ndarray, side: int, pixels: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Unit-modulus steering phases exp(+i 2 pi chi_q . s_n / N1).

    Args:
        positions: (Q, 2) antenna positions in grid units
        side: Grid side N1
        pixels: Flat pixel indices to include (all when omitted)

    Returns:
        (Q, n) complex matrix
    """
    coords = pixel_coordinates(side)
    if pixels is not None:
        coords = coords[pixels]
    return np.exp(2j * np.pi * (positions @ coords.T) / side)


def interferometric_matrix(
    img: SkyImage,
    positions: np.ndarray,
    pixel_size: float,
    budget: int = DEFAULT_MATRIX_BUDGET,
) -> np.ndarray:
    """
    Gram-form interferometric matrix Gamma D_x Gamma^* of one batch.

    Gamma_qn = Delta exp(+i 2 pi chi_q . s_n / N1); entry (j, k) equals the
    visibility at chi_k - chi_j.

    Raises:
        ResourceGuardError: If Q * N exceeds the budget
    """
    q = positions.shape[0]
    if q * img.pixel_count > budget:
        raise ResourceGuardError(
            f"Interferometric matrix needs Q*N = {q * img.pixel_count} > budget {budget}"
        )
    gamma = pixel_size * steering_matrix(positions, img.side)
    matrix = (gamma * img.values) @ gamma.conj().T
    return 0.5 * (matrix + matrix.conj().T)


def batch_interferometric_matrix(
    img: SkyImage,
    plan: VisibilityPlan,
    batch: int,
    budget: int = DEFAULT_MATRIX_BUDGET,
) -> np.ndarray:
    """Interferometric matrix of the 0-based ``batch`` of a plan."""
    if img.side != plan.side:
        raise DimensionMismatchError(f"Image side {img.side} does not match plan side {plan.side}")
    return interferometric_matrix(img, plan.positions[batch], plan.pixel_size, budget)


def block_interferometric_matrix(img: SkyImage, plan: VisibilityPlan) -> np.ndarray:
    """Block-diagonal total interferometric matrix diag(I_1, ..., I_B)."""
    blocks = [batch_interferometric_matrix(img, plan, b) for b in range(plan.num_batches)]
    return block_diag(*blocks)


def hollow(matrix: np.ndarray) -> np.ndarray:
    """Copy of a square matrix with its diagonal set to zero."""
    out = np.array(matrix, copy=True)
    np.fill_diagonal(out, 0.0)
    return out
