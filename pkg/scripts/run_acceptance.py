#!/usr/bin/env python3
"""
Acceptance runner for the compressive imaging toolkit.

Runs the acceptance slices and prints a stats summary. The property suites,
solver oracle and consistency slice take seconds to minutes; the reduced
sample-complexity sweep and the full-size phase-transition slice are opt-in.

Usage:
    python scripts/run_acceptance.py [--seed 0] [--threads 8] [--scaling] [--full-size]
"""

import argparse
import json
import logging
import os
import sys
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np
from dotenv import load_dotenv

# Add project root to path
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from src.acquisition.sketches import SketchEnsemble, rademacher
from src.analysis.consistency import measure_acquisition_consistency
from src.analysis.equivalence import random_plan
from src.analysis.phase import TrialSetup, frontier_slope, phase_transition_sweep, transition_frontier
from src.analysis.suites import ADJOINT_TRIALS, run_validation
from src.cli.config import ExperimentConfig, resolve_threads
from src.cli.main import ExperimentRunner
from src.operators.models import SensingModel
from src.seeding import derive_seed, make_rng
from src.sky.model import random_sparse_sky, snr_db
from src.solver import SolverConfig, dense_operator, exhaustive_support_search, solve_bpdn

# Configure logging
logging.basicConfig(
    level=os.getenv("LOG_LEVEL", "INFO").upper(),
    format="%(asctime)s - %(levelname)s - %(message)s",
    datefmt="%Y-%m-%d %H:%M:%S"
)
logger = logging.getLogger(__name__)

SOLVER_ORACLE_SNR_DB = 80.0
CONSISTENCY_SLOPE = (-0.65, -0.35)
SCALING_SLOPE = (0.6, 1.4)
FULL_SIZE_SUCCESS_AT_300 = 0.9
FULL_SIZE_SUCCESS_AT_50 = 0.1


@dataclass
class AcceptanceStats:
    """Outcome of an acceptance run."""
    slices_run: int = 0
    slices_passed: int = 0
    seconds: Dict[str, float] = field(default_factory=dict)
    details: Dict[str, Any] = field(default_factory=dict)
    failures: List[str] = field(default_factory=list)

    def record(self, name: str, passed: bool, seconds: float, detail: Any):
        self.slices_run += 1
        self.slices_passed += int(passed)
        self.seconds[name] = round(seconds, 2)
        self.details[name] = detail
        if not passed:
            self.failures.append(name)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "slices_run": self.slices_run,
            "slices_passed": self.slices_passed,
            "seconds": self.seconds,
            "details": self.details,
            "failures": self.failures,
        }


class AcceptanceRunner:
    """
    Orchestrates the acceptance slices.

    Slices:
    1. Property suites (adjoints, equivalences, NUFFT, Frobenius, concentration)
    2. Solver against exhaustive support enumeration
    3. Acquisition/imaging consistency over the sample count
    4. Reduced-size sample-complexity scaling (opt-in)
    5. Full-size phase-transition slice (opt-in)
    """

    def __init__(self, seed: int = 0, threads: int = 1):
        """
        Initialize the runner.

        Args:
            seed: Master seed
            threads: Worker count for the sweeps
        """
        self.seed = seed
        self.threads = threads
        self.stats = AcceptanceStats()

    def _timed(self, name: str, fn):
        logger.info(f"Running {name}...")
        start = time.perf_counter()
        try:
            passed, detail = fn()
        except Exception as e:
            logger.error(f"{name} raised: {e}")
            passed, detail = False, {"error": str(e)}
        self.stats.record(name, passed, time.perf_counter() - start, detail)
        marker = "✓" if passed else "✗"
        logger.info(f"{marker} {name}")

    def property_suites(self):
        plan = random_plan(5, 3, 16, derive_seed(self.seed, "acceptance-plan"))
        sketches = SketchEnsemble.draw(5, 6, 3, 2, derive_seed(self.seed, "acceptance-sketch"))
        model = SensingModel(plan, sketches, backend="nudft")
        report = run_validation(model, seed=self.seed, adjoint_trials=ADJOINT_TRIALS)
        return report.passed, report.to_dict()

    def solver_oracle(self, seeds: int = 20):
        worst = np.inf
        for s in range(seeds):
            rng = make_rng(self.seed, "solver-oracle", s)
            matrix = rng.standard_normal((20, 64)) / np.sqrt(20)
            truth = np.zeros(64)
            truth[rng.choice(64, 2, replace=False)] = 1.0
            z = matrix @ truth

            result = solve_bpdn(dense_operator(matrix), z, SolverConfig(epsilon=1e-6, max_outer=40, seed=s))
            oracle = exhaustive_support_search(matrix, z, 2)
            worst = min(worst, snr_db(oracle, result.estimate))
        return worst >= SOLVER_ORACLE_SNR_DB, {"worst_snr_db": worst, "seeds": seeds}

    def consistency(self):
        plan = random_plan(5, 4, 16, derive_seed(self.seed, "consistency-plan"))
        sky = random_sparse_sky(16, 5, derive_seed(self.seed, "consistency-sky"), fov=plan.fov)
        sketches = SketchEnsemble.draw(5, 6, 4, 3, derive_seed(self.seed, "consistency-sketch"))
        sketches = sketches.with_modulations(rademacher(make_rng(self.seed, "consistency-gamma"), (4, 3)))
        report = measure_acquisition_consistency(
            sky, plan, sketches, [1_000, 10_000, 100_000], seed=self.seed, workers=self.threads
        )
        low, high = CONSISTENCY_SLOPE
        return low <= report.slope <= high, report.to_dict()

    def _config(self, **sections) -> ExperimentConfig:
        return ExperimentConfig.model_validate({"seed": self.seed, **sections})

    def _sweep(self, config: ExperimentConfig):
        runner = ExperimentRunner(config, self.threads)
        plan = runner.build_plan(runner.build_layout())
        setup = TrialSetup(
            plan=plan,
            solver=config.solver.to_solver_config(derive_seed(self.seed, "solver")),
            threshold_db=config.sweep.threshold_db,
            backend=config.operator.backend,
            kernel=config.operator.kernel(),
        )
        sweep = config.sweep
        return phase_transition_sweep(
            sweep.fixed, sweep.fixed_value, sweep.grids, sweep.trials, setup, self.seed, workers=self.threads
        )

    def scaling(self):
        modulations = 4
        config = self._config(
            array={"generator": "random", "num_antennas": 10, "num_batches": 20},
            sky={"side": 32},
            sweep={
                "fixed": "M",
                "fixed_value": modulations,
                "grids": {"K": [2, 4, 6, 8, 10, 12], "P": [2, 4, 6, 8, 10, 12, 16, 20, 24]},
                "trials": 40,
            },
        )
        diagram = self._sweep(config)
        slope = frontier_slope(transition_frontier(diagram), scale=modulations)
        low, high = SCALING_SLOPE
        return low <= slope <= high, {"slope": slope, "rates": diagram.rates.tolist()}

    def full_size(self):
        config = self._config(
            sweep={"fixed": "K", "fixed_value": 25, "grids": {"P": [10, 25], "M": [5, 12]}, "trials": 20},
        )
        diagram = self._sweep(config)
        rate_50 = float(diagram.rates[0, 0])
        rate_300 = float(diagram.rates[1, 1])
        passed = rate_300 >= FULL_SIZE_SUCCESS_AT_300 and rate_50 <= FULL_SIZE_SUCCESS_AT_50
        return passed, {"rate_pm_50": rate_50, "rate_pm_300": rate_300}

    def run(self, scaling: bool = False, full_size: bool = False) -> AcceptanceStats:
        """Run the selected slices."""
        self._timed("property suites", self.property_suites)
        self._timed("solver oracle", self.solver_oracle)
        self._timed("acquisition consistency", self.consistency)
        if scaling:
            self._timed("sample-complexity scaling", self.scaling)
        if full_size:
            self._timed("phase transition (full size)", self.full_size)
        return self.stats


def main(argv: Optional[List[str]] = None) -> int:
    load_dotenv()
    parser = argparse.ArgumentParser(description="Run the acceptance slices")
    parser.add_argument("--seed", type=int, default=0, help="Master seed")
    parser.add_argument("--threads", type=int, help="Worker count (fallback: CRI_ROP_THREADS)")
    parser.add_argument("--scaling", action="store_true", help="Run the reduced-size scaling sweep")
    parser.add_argument("--full-size", action="store_true", help="Run the full-size phase-transition slice")
    parser.add_argument("--json", action="store_true", help="Print stats as JSON")
    args = parser.parse_args(argv)

    threads = resolve_threads(args.threads, ExperimentConfig())
    stats = AcceptanceRunner(args.seed, threads).run(args.scaling, args.full_size)

    if args.json:
        print(json.dumps(stats.to_dict(), indent=2, default=float))
    else:
        print("=" * 60)
        print(f"Slices passed: {stats.slices_passed}/{stats.slices_run}")
        for name, seconds in stats.seconds.items():
            status = "FAIL" if name in stats.failures else "ok"
            print(f"  {name:<35} {status:>4}  {seconds:>8.1f}s")
        print("=" * 60)
    return 0 if not stats.failures else 1


if __name__ == "__main__":
    sys.exit(main())
