"""
Monte Carlo phase transitions of sparse recovery from MROP measurements.

Every cell (K, P, M) of a two-axis grid runs S independent trials: draw a
K-sparse sky, sketches and modulations from seeds derived from
(master_seed, cell, trial), form noiseless measurements with the imaging
operator, solve BPDN and count a success when the SNR reaches the
threshold. Trials run in a process pool and are aggregated in grid order,
so the diagram does not depend on the schedule.
"""

import hashlib
import logging
from concurrent.futures import ProcessPoolExecutor, as_completed
from dataclasses import asdict, dataclass, field
from itertools import product
from typing import Callable, Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

import numpy as np
from tqdm import tqdm

from src.acquisition.sketches import SketchDistribution, SketchEnsemble, rademacher
from src.analysis.consistency import fit_loglog_slope
from src.errors import ConfigurationError, SolverDivergenceError
from src.operators.base import LinearOp
from src.operators.fourier import KaiserBesselKernel, VisibilityPlan, make_visibility_operator
from src.operators.models import SensingModel
from src.seeding import derive_seed, make_rng
from src.sky.model import SNR_CAP_DB, random_sparse_sky, snr_db
from src.solver.bpdn import SolverConfig, solve_bpdn

logger = logging.getLogger(__name__)

AXES = ("K", "P", "M")
DEFAULT_THRESHOLD_DB = 40.0

CellKey = Tuple[int, int, int, int]  # (K, P, M, trial)

# Visibility operators built in this process, keyed by TrialSetup.cache_key
_VISIBILITY_CACHE: Dict[str, LinearOp] = {}


@dataclass(frozen=True)
class TrialSetup:
    """
    Everything a trial needs besides its cell and seeds.

    Attributes:
        plan: Visibility plan shared by all trials
        solver: BPDN configuration
        threshold_db: Success threshold on the reconstruction SNR
        backend: Visibility backend ("nufft" or "nudft")
        kernel: Gridding kernel for the NUFFT backend
        model: "mrop" or "irop" (Gamma = 1, uncentered)
        distribution: Sketch distribution
    """
    plan: VisibilityPlan
    solver: SolverConfig = field(default_factory=SolverConfig)
    threshold_db: float = DEFAULT_THRESHOLD_DB
    backend: str = "nufft"
    kernel: Optional[KaiserBesselKernel] = None
    model: str = "mrop"
    distribution: SketchDistribution = SketchDistribution.PHASE

    def __post_init__(self):
        if self.model not in ("mrop", "irop"):
            raise ConfigurationError(f"Unknown imaging model: {self.model!r}")

    @property
    def cache_key(self) -> str:
        """Digest of the plan and visibility backend."""
        digest = hashlib.sha256()
        digest.update(np.ascontiguousarray(self.plan.positions).tobytes())
        digest.update(f"{self.plan.side}|{self.plan.pixel_size!r}|{self.backend}|{self.kernel}".encode())
        return digest.hexdigest()

    def visibility(self) -> LinearOp:
        """
        Visibility operator of the plan, built once per process.

        Trials apply it serially; sweeps parallelize over trials instead.
        """
        key = self.cache_key
        if key not in _VISIBILITY_CACHE:
            _VISIBILITY_CACHE[key] = make_visibility_operator(self.plan, self.backend, self.kernel)
        return _VISIBILITY_CACHE[key]


@dataclass
class TrialRecord:
    """Outcome of one trial."""
    K: int
    P: int
    M: int
    trial: int
    snr_db: float
    success: bool
    converged: bool
    residual: float
    outer_iterations: int = 0

    @property
    def key(self) -> CellKey:
        return (self.K, self.P, self.M, self.trial)

    def to_dict(self) -> Dict[str, object]:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: Mapping[str, object]) -> "TrialRecord":
        return cls(
            K=int(data["K"]),
            P=int(data["P"]),
            M=int(data["M"]),
            trial=int(data["trial"]),
            snr_db=float(data["snr_db"]),
            success=bool(data["success"]),
            converged=bool(data["converged"]),
            residual=float(data["residual"]),
            outer_iterations=int(data.get("outer_iterations", 0)),
        )


def trial_seeds(master_seed: int, K: int, P: int, M: int, trial: int) -> Dict[str, int]:
    """Sky, sketch and modulation seeds of one trial."""
    cell = [K, P, M]
    return {
        stream: derive_seed(master_seed, "cell", cell, trial, stream)
        for stream in ("sky", "sketch", "modulation")
    }


def trial_snr(truth: np.ndarray, estimate: np.ndarray) -> float:
    """SNR of a trial; an all-zero truth scores the cap iff the estimate is zero."""
    if not np.any(truth):
        return SNR_CAP_DB if not np.any(estimate) else -SNR_CAP_DB
    return snr_db(truth, estimate)


def run_trial(setup: TrialSetup, K: int, P: int, M: int, trial: int, master_seed: int) -> TrialRecord:
    """
    Run one reconstruction trial.

    Non-convergence and solver divergence count as failures.
    """
    plan = setup.plan
    seeds = trial_seeds(master_seed, K, P, M, trial)

    sky = random_sparse_sky(plan.side, K, seeds["sky"], fov=plan.fov)
    sketches = SketchEnsemble.draw(
        plan.num_antennas, P, plan.num_batches, M, seeds["sketch"], setup.distribution
    )
    if setup.model == "irop":
        sketches = sketches.integrated()
    else:
        gamma = rademacher(make_rng(seeds["modulation"]), (plan.num_batches, M))
        sketches = sketches.with_modulations(gamma)

    model = SensingModel(plan, sketches, backend=setup.backend, visibility=setup.visibility())
    op = model.irop() if setup.model == "irop" else model.mrop()
    z = op.forward(sky.values)

    try:
        result = solve_bpdn(op, z, setup.solver)
    except SolverDivergenceError as e:
        logger.warning(f"Trial (K={K}, P={P}, M={M}, t={trial}) diverged: {e}")
        return TrialRecord(K, P, M, trial, -SNR_CAP_DB, False, False, float("nan"))

    snr = trial_snr(sky.values, result.estimate)
    success = result.converged and snr >= setup.threshold_db
    if not result.converged:
        logger.debug(f"Trial (K={K}, P={P}, M={M}, t={trial}) not converged")
    return TrialRecord(K, P, M, trial, snr, success, result.converged, result.residual, result.outer_iterations)


def _run_task(args) -> TrialRecord:
    return run_trial(*args)


@dataclass
class PhaseDiagram:
    """
    Success rates over a two-axis grid with the third axis fixed.

    ``rates[i, j]`` is the success rate at axis1_values[i], axis2_values[j].
    """
    fixed_axis: str
    fixed_value: int
    axis1: str
    axis1_values: List[int]
    axis2: str
    axis2_values: List[int]
    trials: int
    threshold_db: float
    master_seed: int
    rates: np.ndarray
    records: List[TrialRecord] = field(default_factory=list, repr=False)

    def __post_init__(self):
        if self.rates.shape != (len(self.axis1_values), len(self.axis2_values)):
            raise ValueError(f"Rate grid shape {self.rates.shape} does not match the axes")
        if np.any((self.rates < 0) | (self.rates > 1)):
            raise ValueError("Success rates must lie in [0, 1]")

    def rows(self) -> List[Dict[str, object]]:
        """One CSV row per cell: axis1, axis2, rate, S."""
        return [
            {self.axis1: a, self.axis2: b, "rate": float(self.rates[i, j]), "S": self.trials}
            for i, a in enumerate(self.axis1_values)
            for j, b in enumerate(self.axis2_values)
        ]

    def to_dict(self) -> Dict[str, object]:
        return {
            "fixed_axis": self.fixed_axis,
            "fixed_value": self.fixed_value,
            "axis1": self.axis1,
            "axis1_values": list(self.axis1_values),
            "axis2": self.axis2,
            "axis2_values": list(self.axis2_values),
            "trials": self.trials,
            "threshold_db": self.threshold_db,
            "master_seed": self.master_seed,
            "rates": self.rates.tolist(),
        }


def _cell_values(fixed: str, fixed_value: int, axis1: str, a: int, axis2: str, b: int) -> Tuple[int, int, int]:
    values = {fixed: fixed_value, axis1: a, axis2: b}
    return values["K"], values["P"], values["M"]


def _check_grids(fixed: str, grids: Mapping[str, Sequence[int]]) -> Tuple[str, str]:
    if fixed not in AXES:
        raise ConfigurationError(f"Fixed axis must be one of {AXES}, got {fixed!r}")
    axes = list(grids)
    if len(axes) != 2 or fixed in axes or not set(axes) <= set(AXES):
        raise ConfigurationError(f"Grids must name the two axes other than {fixed}, got {axes}")
    for name in axes:
        values = list(grids[name])
        if not values:
            raise ConfigurationError(f"Grid for {name} is empty")
        low = 0 if name == "K" else 1
        if min(values) < low:
            raise ConfigurationError(f"Grid for {name} has values below {low}: {values}")
    return axes[0], axes[1]


def phase_transition_sweep(
    fixed: str,
    fixed_value: int,
    grids: Mapping[str, Sequence[int]],
    trials: int,
    setup: TrialSetup,
    master_seed: int,
    workers: int = 1,
    completed: Optional[Iterable[TrialRecord]] = None,
    on_record: Optional[Callable[[TrialRecord], None]] = None,
    progress: bool = True,
) -> PhaseDiagram:
    """
    Run the Monte Carlo sweep.

    Args:
        fixed: Name of the fixed axis ("K", "P" or "M")
        fixed_value: Its value
        grids: Values of the two other axes, in (axis1, axis2) order
        trials: Trials S per cell
        setup: Shared trial setup
        master_seed: Master seed
        workers: Worker processes (trials run inline when 1)
        completed: Records from a previous run; their trials are skipped
        on_record: Called in this process with every new record
        progress: Show a progress bar

    Returns:
        PhaseDiagram aggregated in grid order
    """
    if trials < 1:
        raise ConfigurationError(f"trials must be >= 1, got {trials}")
    axis1, axis2 = _check_grids(fixed, grids)
    values1, values2 = list(grids[axis1]), list(grids[axis2])

    records: Dict[CellKey, TrialRecord] = {r.key: r for r in (completed or [])}
    tasks = []
    for a, b in product(values1, values2):
        K, P, M = _cell_values(fixed, fixed_value, axis1, a, axis2, b)
        for t in range(trials):
            if (K, P, M, t) not in records:
                tasks.append((setup, K, P, M, t, master_seed))

    if records:
        logger.info(f"Resuming sweep: {len(records)} trials done, {len(tasks)} remaining")

    def accept(record: TrialRecord):
        records[record.key] = record
        if on_record is not None:
            on_record(record)

    with tqdm(total=len(tasks), desc="phase diagram", disable=not progress) as bar:
        if workers <= 1:
            for task in tasks:
                accept(_run_task(task))
                bar.update(1)
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(_run_task, task) for task in tasks]
                for future in as_completed(futures):
                    accept(future.result())
                    bar.update(1)

    rates = np.zeros((len(values1), len(values2)))
    ordered: List[TrialRecord] = []
    for i, a in enumerate(values1):
        for j, b in enumerate(values2):
            K, P, M = _cell_values(fixed, fixed_value, axis1, a, axis2, b)
            cell = [records[(K, P, M, t)] for t in range(trials)]
            rates[i, j] = sum(r.success for r in cell) / trials
            ordered.extend(cell)

    diagram = PhaseDiagram(
        fixed_axis=fixed,
        fixed_value=fixed_value,
        axis1=axis1,
        axis1_values=values1,
        axis2=axis2,
        axis2_values=values2,
        trials=trials,
        threshold_db=setup.threshold_db,
        master_seed=master_seed,
        rates=rates,
        records=ordered,
    )
    logger.info(f"✓ Phase diagram {axis1} x {axis2} ({fixed}={fixed_value}): {rates.size} cells, S={trials}")
    return diagram


def compression_factor(P: int, M: int, Q: int, B: int) -> float:
    """Percentage of visibilities saved: 100 (1 - PM / (Q(Q-1)B))."""
    if min(P, M, B) < 1 or Q < 2:
        raise ValueError(f"Need P, M, B >= 1 and Q >= 2, got P={P}, M={M}, Q={Q}, B={B}")
    return 100.0 * (1.0 - P * M / (Q * (Q - 1) * B))


@dataclass
class FrontierPoint:
    """Level crossing along axis2 at one axis1 value (None when never reached)."""
    axis1_value: int
    crossing: Optional[float]


def transition_frontier(diagram: PhaseDiagram, level: float = 0.5) -> List[FrontierPoint]:
    """
    Crossing of ``level`` along axis2 for every axis1 value, by linear
    interpolation between neighbouring cells.

    The first cell reaching the level counts; a row already at the level in
    its first cell crosses at the first axis2 value.
    """
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie in (0, 1), got {level}")

    axis2 = np.asarray(diagram.axis2_values, dtype=np.float64)
    points = []
    for i, value in enumerate(diagram.axis1_values):
        rates = diagram.rates[i]
        crossing = None
        above = np.flatnonzero(rates >= level)
        if above.size:
            j = int(above[0])
            if j == 0:
                crossing = float(axis2[0])
            else:
                r0, r1 = rates[j - 1], rates[j]
                crossing = float(axis2[j - 1] + (level - r0) * (axis2[j] - axis2[j - 1]) / (r1 - r0))
        points.append(FrontierPoint(value, crossing))
    return points


def frontier_slope(points: Sequence[FrontierPoint], scale: float = 1.0) -> float:
    """Log-log slope of the frontier (crossing * scale against axis1)."""
    found = [p for p in points if p.crossing is not None and p.axis1_value > 0]
    return fit_loglog_slope([p.axis1_value for p in found], [p.crossing * scale for p in found])


def monotonicity_violations(diagram: PhaseDiagram, flips: int = 1) -> List[str]:
    """
    Lines of the diagram along which the success rate falls as PM grows.

    Each line runs along a P or M axis with the other axes fixed. A line
    is flagged when its summed rate drops exceed ``flips`` trials' worth,
    so ``flips`` isolated sampling flips per line are tolerated.

    Returns:
        Labels such as ``"M=2"`` naming the fixed value of each flagged line
    """
    if flips < 0:
        raise ValueError(f"flips must be nonnegative, got {flips}")

    slack = flips / diagram.trials + 1e-12
    lines = []
    if diagram.axis1 in ("P", "M"):
        lines += [(f"{diagram.axis2}={v}", diagram.rates[:, j]) for j, v in enumerate(diagram.axis2_values)]
    if diagram.axis2 in ("P", "M"):
        lines += [(f"{diagram.axis1}={v}", diagram.rates[i]) for i, v in enumerate(diagram.axis1_values)]

    violations = [label for label, rates in lines if np.clip(-np.diff(rates), 0.0, None).sum() > slack]
    if violations:
        logger.warning(f"Success rate decreases with PM along {', '.join(violations)}")
    return violations
