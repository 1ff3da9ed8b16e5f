"""
Basis-pursuit denoising with an l2 fidelity ball.

    minimize ||x||_1  subject to  ||z - A x||_2 <= eps  (and x >= 0)

solved by lambda-continuation over LASSO subproblems, each one handled by
FISTA with adaptive (function-value) momentum restart.
"""

import json
import logging
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

import numpy as np

from src.errors import SolverDivergenceError
from src.operators.base import LinearOp, real_input

logger = logging.getLogger(__name__)

LIPSCHITZ_SAFETY = 1.05
DIVERGENCE_PATIENCE = 10
REFINEMENT_FACTOR = 4


@dataclass
class SolverConfig:
    """Solver parameters."""
    epsilon: float = 1e-2
    max_outer: int = 30
    max_inner: int = 2000
    rel_tol: float = 1e-6
    nonneg: bool = True
    power_iters: int = 50
    seed: int = 0

    def __post_init__(self):
        """Validate parameters."""
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        for name in ("max_outer", "max_inner", "power_iters"):
            if getattr(self, name) < 1:
                raise ValueError(f"{name} must be >= 1, got {getattr(self, name)}")
        if self.rel_tol <= 0:
            raise ValueError(f"rel_tol must be positive, got {self.rel_tol}")


@dataclass
class OuterStep:
    """One continuation step."""
    step: int
    lam: float
    residual: float
    inner_iterations: int
    feasible: bool
    refinement: bool = False


@dataclass
class SolverResult:
    """Outcome of solve_bpdn."""
    estimate: np.ndarray
    residual: float
    lam: float
    inner_iterations: int
    outer_iterations: int
    converged: bool
    lipschitz: float = 0.0
    history: List[OuterStep] = field(default_factory=list)

    def to_dict(self) -> Dict[str, Any]:
        """Summary without the estimate vector."""
        return {
            "residual": self.residual,
            "lam": self.lam,
            "inner_iterations": self.inner_iterations,
            "outer_iterations": self.outer_iterations,
            "converged": self.converged,
            "lipschitz": self.lipschitz,
            "nonzeros": int(np.count_nonzero(self.estimate)),
        }

    def write_diagnostics(self, path: Union[str, Path]) -> Path:
        """Stream the continuation history as JSON lines."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", encoding="utf-8") as handle:
            for step in self.history:
                handle.write(json.dumps(asdict(step)) + "\n")
        return path


def _as_real_domain(A: LinearOp) -> LinearOp:
    return A if A.real_domain else real_input(A)


def estimate_lipschitz(A: LinearOp, power_iters: int = 50, seed: int = 0) -> float:
    """
    Estimate sigma_max(A)^2 by power iteration on A* A.

    Args:
        A: Operator
        power_iters: Maximum iterations
        seed: Seed of the random start

    Returns:
        Estimate of the largest eigenvalue of A* A (0 for a zero operator)
    """
    rng = np.random.default_rng(seed)
    n = A.shape[1]
    x = rng.standard_normal(n)
    if not A.real_domain:
        x = x + 1j * rng.standard_normal(n)
    x /= np.linalg.norm(x)

    estimate = 0.0
    for i in range(power_iters):
        y = A.adjoint(A.forward(x))
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            logger.warning(f"{A.name}: zero operator, Lipschitz constant is 0")
            return 0.0
        previous, estimate = estimate, norm
        x = y / norm
        if i > 0 and abs(estimate - previous) <= 1e-12 * estimate:
            break

    return estimate


def _prox(v: np.ndarray, threshold: float, nonneg: bool) -> np.ndarray:
    if nonneg:
        return np.maximum(v - threshold, 0.0)
    return np.sign(v) * np.maximum(np.abs(v) - threshold, 0.0)


def _run_fista(
    A: LinearOp,
    z: np.ndarray,
    lam: float,
    x_init: np.ndarray,
    cfg: SolverConfig,
    lipschitz: float,
    max_inner: int,
) -> Tuple[np.ndarray, np.ndarray, int]:
    """FISTA on lam ||x||_1 + 0.5 ||z - A x||^2; returns (x, A x, iterations)."""
    step = 1.0 / lipschitz

    def objective(x, ax):
        return lam * np.abs(x).sum() + 0.5 * np.linalg.norm(z - ax) ** 2

    x = x_init.copy()
    ax = A.forward(x)
    y, ay = x, ax
    t = 1.0
    obj = objective(x, ax)
    increases = 0

    for iteration in range(1, max_inner + 1):
        grad = A.adjoint(ay - z)
        x_new = _prox(y - step * grad, lam * step, cfg.nonneg)
        ax_new = A.forward(x_new)
        obj_new = objective(x_new, ax_new)

        if obj_new > obj * (1 + 1e-12):
            increases += 1
            if increases >= DIVERGENCE_PATIENCE:
                raise SolverDivergenceError(
                    f"Objective increased {increases} consecutive times at lambda={lam:.3e}"
                )
            t_new = 1.0
            y, ay = x_new, ax_new
        else:
            increases = 0
            t_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * t * t))
            momentum = (t - 1.0) / t_new
            y = x_new + momentum * (x_new - x)
            ay = ax_new + momentum * (ax_new - ax)

        change = np.linalg.norm(x_new - x)
        x, ax, t, obj = x_new, ax_new, t_new, obj_new
        if change <= cfg.rel_tol * max(np.linalg.norm(x), np.finfo(float).tiny):
            return x, ax, iteration

    return x, ax, max_inner


def fista_lasso(
    A: LinearOp,
    z: np.ndarray,
    lam: float,
    x_init: Optional[np.ndarray] = None,
    cfg: Optional[SolverConfig] = None,
    lipschitz: Optional[float] = None,
) -> np.ndarray:
    """
    Approximate minimizer of lam ||x||_1 + 0.5 ||z - A x||_2^2.

    Args:
        A: Operator (restricted to real inputs if needed)
        z: Measurements
        lam: Regularization weight (> 0)
        x_init: Warm start (zeros when omitted)
        cfg: Solver configuration
        lipschitz: Step-size constant; estimated when omitted

    Returns:
        Real estimate x

    Raises:
        SolverDivergenceError: If the objective keeps increasing
    """
    if lam <= 0:
        raise ValueError(f"lambda must be positive, got {lam}")
    cfg = cfg or SolverConfig()
    A = _as_real_domain(A)
    if lipschitz is None:
        lipschitz = LIPSCHITZ_SAFETY * estimate_lipschitz(A, cfg.power_iters, cfg.seed)
    if lipschitz <= 0:
        return np.zeros(A.shape[1])

    x0 = np.zeros(A.shape[1]) if x_init is None else np.asarray(x_init, dtype=np.float64)
    x, _, _ = _run_fista(A, np.asarray(z), lam, x0, cfg, lipschitz, cfg.max_inner)
    return x


def solve_bpdn(A: LinearOp, z: np.ndarray, cfg: Optional[SolverConfig] = None) -> SolverResult:
    """
    Solve BPDN with an l2 fidelity radius by lambda-continuation.

    lambda starts at 0.9 ||A* z||_inf and halves each outer step; the first
    lambda whose solution is feasible gets one refinement pass with a 4x
    inner budget.

    Args:
        A: Imaging operator
        z: Measurements
        cfg: Solver configuration

    Returns:
        SolverResult; converged is False if no feasible lambda was reached
    """
    cfg = cfg or SolverConfig()
    A = _as_real_domain(A)
    z = np.asarray(z)
    if z.shape != (A.shape[0],):
        raise ValueError(f"Measurement length {z.shape} does not match operator rows {A.shape[0]}")

    n = A.shape[1]
    x = np.zeros(n)
    lam_max = float(np.max(np.abs(A.adjoint(z)))) if z.size else 0.0
    lam = 0.9 * lam_max
    residual = float(np.linalg.norm(z))

    if residual <= cfg.epsilon:
        logger.info(f"Zero estimate already feasible (||z|| = {residual:.3e})")
        step = OuterStep(0, lam, residual, 0, True)
        return SolverResult(x, residual, lam, 0, 0, True, 0.0, [step])

    lipschitz = LIPSCHITZ_SAFETY * estimate_lipschitz(A, cfg.power_iters, cfg.seed)
    if lipschitz <= 0 or lam <= 0:
        logger.warning("Operator annihilates the measurements; returning zero estimate")
        return SolverResult(x, residual, lam, 0, 0, False, lipschitz)

    history: List[OuterStep] = []
    inner_total = 0

    for outer in range(1, cfg.max_outer + 1):
        x, ax, iterations = _run_fista(A, z, lam, x, cfg, lipschitz, cfg.max_inner)
        inner_total += iterations
        residual = float(np.linalg.norm(z - ax))
        feasible = residual <= cfg.epsilon
        history.append(OuterStep(outer, lam, residual, iterations, feasible))
        logger.debug(f"outer {outer}: lambda={lam:.3e} residual={residual:.3e} inner={iterations}")

        if feasible:
            refined, ax_ref, iterations = _run_fista(
                A, z, lam, x, cfg, lipschitz, REFINEMENT_FACTOR * cfg.max_inner
            )
            inner_total += iterations
            residual_ref = float(np.linalg.norm(z - ax_ref))
            history.append(OuterStep(outer, lam, residual_ref, iterations, residual_ref <= cfg.epsilon, True))
            if residual_ref <= cfg.epsilon:
                x, residual = refined, residual_ref
            return SolverResult(x, residual, lam, inner_total, outer, True, lipschitz, history)

        if outer < cfg.max_outer:
            lam *= 0.5

    logger.warning(
        f"BPDN not converged after {cfg.max_outer} continuation steps (residual {residual:.3e} > {cfg.epsilon:.3e})"
    )
    return SolverResult(x, residual, lam, inner_total, cfg.max_outer, False, lipschitz, history)
