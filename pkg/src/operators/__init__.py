"""
Operator algebra: DFT, visibility sampling, rank-one projections,
modulations, post-sensing baselines and imaging models.
"""

from .base import (
    LinearOp,
    AdjointReport,
    adjoint_of,
    chain,
    vstack,
    real_input,
    scaled,
    dot_test,
)
from .fourier import (
    DFT2,
    NUDFT,
    NUFFT,
    KaiserBesselKernel,
    VisibilityPlan,
    dft2,
    nudft,
    nufft,
    dirty_map,
    make_visibility_operator,
    spectrum_interpolator,
)
from .rop import (
    BlockROP,
    Modulation,
    OffDiagonalSelector,
    rop_block,
    rop_block_adjoint,
    modulation_op,
)
from .models import (
    SensingModel,
    build_sensing_model,
    forward_mrop,
    forward_irop_centered,
    center_measurements,
    steering_matrix,
    interferometric_matrix,
    batch_interferometric_matrix,
    block_interferometric_matrix,
    hollow,
)
from .postsensing import (
    GaussianProjection,
    gaussian_postsensing,
    averaging_matrix,
    averaging_operator,
    baseline_dependent_averaging,
    add_visibility_noise,
)

__all__ = [
    "LinearOp",
    "AdjointReport",
    "adjoint_of",
    "chain",
    "vstack",
    "real_input",
    "scaled",
    "dot_test",
    "DFT2",
    "NUDFT",
    "NUFFT",
    "KaiserBesselKernel",
    "VisibilityPlan",
    "dft2",
    "nudft",
    "nufft",
    "dirty_map",
    "make_visibility_operator",
    "spectrum_interpolator",
    "BlockROP",
    "Modulation",
    "OffDiagonalSelector",
    "rop_block",
    "rop_block_adjoint",
    "modulation_op",
    "SensingModel",
    "build_sensing_model",
    "forward_mrop",
    "forward_irop_centered",
    "center_measurements",
    "steering_matrix",
    "interferometric_matrix",
    "batch_interferometric_matrix",
    "block_interferometric_matrix",
    "hollow",
    "GaussianProjection",
    "gaussian_postsensing",
    "averaging_matrix",
    "averaging_operator",
    "baseline_dependent_averaging",
    "add_visibility_noise",
]
