"""
Command-line entry point.

Commands:
    validate       run the property suites (adjoints, oracle equivalences,
                   NUFFT accuracy, Frobenius identity, ROP concentration)
    reconstruct    simulate measurements of a sparse sky and recover it
    phase-diagram  Monte Carlo phase-transition sweep
    acquire        time-domain compressive acquisition with size accounting
    make-array     write a layout CSV and its uv-coverage plot

Exit codes: 0 success, 2 configuration error, 3 validation-suite failure,
4 resource guard, 1 anything else.

Usage:
    python -m src.cli validate --config experiment.toml
    python -m src.cli phase-diagram --config sweep.toml --threads 8 --resume
"""

import argparse
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

import numpy as np
from dotenv import load_dotenv

from src.acquisition.sensing import classical_acquire, compressive_acquire, size_accounting
from src.acquisition.signals import noise_covariance, simulate_observation
from src.acquisition.sketches import SketchEnsemble, rademacher
from src.analysis.equivalence import random_plan
from src.analysis.phase import (
    TrialRecord,
    TrialSetup,
    frontier_slope,
    monotonicity_violations,
    phase_transition_sweep,
    trial_snr,
    transition_frontier,
)
from src.analysis.suites import ADJOINT_TRIALS, run_validation
from src.cli.config import ExperimentConfig, RunManifest, StageTimer, load_config, resolve_threads
from src.data.store import ArtifactStore
from src.errors import ConfigurationError, ResourceGuardError, ValidationSuiteError
from src.geometry.layout import ArrayLayout, save_layout_csv
from src.geometry.synthesis import check_distinct_visibilities, synthesize_batches, uv_coverage
from src.operators.base import LinearOp, chain
from src.operators.fourier import VisibilityPlan
from src.operators.models import SensingModel
from src.operators.postsensing import add_visibility_noise, baseline_dependent_averaging, gaussian_postsensing
from src.seeding import derive_seed, make_rng
from src.sky.model import SkyImage, random_sparse_sky
from src.solver.bpdn import solve_bpdn

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_CONFIG = 2
EXIT_VALIDATION = 3
EXIT_RESOURCE = 4

VALIDATE_ANTENNAS = 5
VALIDATE_BATCHES = 3
VALIDATE_SIDE = 16
VALIDATE_PROJECTIONS = 6
VALIDATE_MODULATIONS = 2


def setup_logging(verbose: bool = False):
    """Configure root logging; LOG_LEVEL applies unless --verbose."""
    level = logging.DEBUG if verbose else os.getenv("LOG_LEVEL", "INFO").upper()
    logging.basicConfig(
        level=level,
        format="%(asctime)s - %(levelname)s - %(message)s",
        datefmt="%Y-%m-%d %H:%M:%S",
        force=True,
    )


class ExperimentRunner:
    """
    Runs one command against a validated configuration.

    Pipeline pieces (layout, plan, sky, sketches, imaging model) are built
    from derived seeds, so every artifact can be regenerated from the
    manifest alone.
    """

    def __init__(self, config: ExperimentConfig, threads: int = 1):
        """
        Initialize runner.

        Args:
            config: Validated experiment configuration
            threads: Worker count for parallel stages
        """
        self.config = config
        self.threads = threads
        self.store = ArtifactStore(config.output.directory)
        self.timer = StageTimer()
        self.seeds: Dict[str, Any] = {}
        self.outputs: List[str] = []

    # =========================================================================
    # Building Blocks
    # =========================================================================

    @property
    def master_seed(self) -> int:
        return self.config.seed

    def seed_for(self, stream: str, explicit: Optional[int] = None) -> int:
        """Explicit seed if configured, else derived from the master seed."""
        seed = explicit if explicit is not None else derive_seed(self.master_seed, stream)
        self.seeds[stream] = seed
        return seed

    def build_layout(self) -> ArrayLayout:
        return self.config.array.build_layout()

    def build_plan(self, layout: ArrayLayout) -> VisibilityPlan:
        sky = self.config.sky
        with self.timer.stage("plan"):
            batches = synthesize_batches(layout)
            plan = VisibilityPlan.from_batches(
                batches, sky.side, pixel_size=sky.pixel_size, fill=self.config.operator.uv_fill
            )
        return plan

    def build_sky(self, plan: VisibilityPlan) -> SkyImage:
        seed = self.seed_for("sky", self.config.sky.seed)
        return random_sparse_sky(plan.side, self.config.sky.sparsity, seed, fov=plan.fov)

    def build_sketches(self, plan: VisibilityPlan) -> SketchEnsemble:
        sensing = self.config.sensing
        sketches = SketchEnsemble.draw(
            plan.num_antennas,
            sensing.num_projections,
            plan.num_batches,
            sensing.num_modulations,
            self.seed_for("sketch", sensing.sketch_seed),
            sensing.distribution,
        )
        if self.config.operator.model == "irop":
            return sketches.integrated()
        gamma_seed = self.seed_for("modulation", sensing.modulation_seed)
        return sketches.with_modulations(
            rademacher(make_rng(gamma_seed), (plan.num_batches, sensing.num_modulations))
        )

    def build_model(self, plan: VisibilityPlan, sketches: SketchEnsemble) -> SensingModel:
        op = self.config.operator
        with self.timer.stage("operator"):
            return SensingModel(plan, sketches, backend=op.backend, kernel=op.kernel(), workers=self.threads)

    def imaging_operator(self, model: SensingModel) -> LinearOp:
        return model.irop() if self.config.operator.model == "irop" else model.mrop()

    def aggregation(self, model: SensingModel) -> LinearOp:
        """Visibilities -> measurements (M D, or R D for IROP)."""
        if self.config.operator.model == "irop":
            return chain(model.integration, model.rop)
        return chain(model.modulation, model.rop)

    def receiver_noise(self, num_antennas: int) -> np.ndarray:
        return noise_covariance(num_antennas, self.config.sensing.noise_sigma)

    def save(self, name: str) -> str:
        self.outputs.append(name)
        return name

    def write_manifest(self, command: str, results: Dict[str, Any]) -> Path:
        """Write manifest.json atomically with digests of every output."""
        manifest = RunManifest(
            command=command,
            config=self.config.snapshot(),
            master_seed=self.master_seed,
            seeds=self.seeds,
            stage_seconds=self.timer.seconds,
            outputs=self.store.digests(self.outputs),
            results=results,
        )
        path = self.store.write_json("manifest.json", manifest.model_dump(mode="json"))
        logger.info(f"✓ Manifest written to {path}")
        return path

    # =========================================================================
    # Commands
    # =========================================================================

    def validate(self) -> int:
        """
        Run the property suites on a desk-scale instance.

        Raises:
            ValidationSuiteError: Naming the first failing suite
        """
        op = self.config.operator
        plan = random_plan(
            VALIDATE_ANTENNAS, VALIDATE_BATCHES, VALIDATE_SIDE, self.seed_for("validate-plan")
        )
        sketches = SketchEnsemble.draw(
            VALIDATE_ANTENNAS, VALIDATE_PROJECTIONS, VALIDATE_BATCHES, VALIDATE_MODULATIONS,
            self.seed_for("validate-sketch"),
        )
        model = SensingModel(plan, sketches, backend=op.backend, kernel=op.kernel())

        with self.timer.stage("suites"):
            report = run_validation(
                model, seed=self.master_seed, adjoint_trials=ADJOINT_TRIALS,
                inject_adjoint_fault=op.inject_adjoint_fault,
            )

        for line in report.summary_lines():
            print(line)
        self.store.write_json(self.save("validation.json"), report.to_dict())
        self.write_manifest("validate", {"passed": report.passed})
        report.raise_for_failures()
        return EXIT_OK

    def _measurements(self, sky: SkyImage, plan: VisibilityPlan, model: SensingModel) -> np.ndarray:
        sensing = self.config.sensing
        if sensing.mode == "simulate":
            noise = self.receiver_noise(plan.num_antennas)
            with self.timer.stage("acquisition"):
                batches = simulate_observation(
                    sky, plan, sensing.num_samples, noise,
                    seed=self.seed_for("signal"), workers=self.threads, budget=sensing.sample_budget,
                )
                return compressive_acquire(batches, model.sketches, noise, self.threads)

        with self.timer.stage("forward"):
            if sensing.visibility_noise > 0:
                v = model.visibility.forward(sky.values)
                v = add_visibility_noise(v, sensing.visibility_noise, self.seed_for("noise"), plan.num_antennas)
                return self.aggregation(model).forward(v)
            return self.imaging_operator(model).forward(sky.values)

    def reconstruct(self) -> int:
        """Generate a sky, measure it, solve BPDN and report the SNR."""
        plan = self.build_plan(self.build_layout())
        sky = self.build_sky(plan)
        model = self.build_model(plan, self.build_sketches(plan))
        z = self._measurements(sky, plan, model)

        solver_cfg = self.config.solver.to_solver_config(self.seed_for("solver"))
        with self.timer.stage("solve"):
            result = solve_bpdn(self.imaging_operator(model), z, solver_cfg)

        snr = trial_snr(sky.values, result.estimate)
        estimate = sky.with_values(np.clip(result.estimate, 0.0, None))

        self.store.save_image("sky", sky)
        self.store.save_image("estimate", estimate)
        self.store.save_array("measurements", z, {"length": int(z.size)})
        self.store.save_plan("plan", plan)
        for name in ("sky", "estimate", "measurements", "plan"):
            self.save(f"{name}.bin")
        result.write_diagnostics(self.store.path(self.save("solver.jsonl")))
        if self.config.output.png:
            self.store.save_image_png(self.save("sky.png"), sky)
            self.store.save_image_png(self.save("estimate.png"), estimate)

        results = {"snr_db": snr, **result.to_dict(), "plan": plan.metadata()}
        self.write_manifest("reconstruct", results)
        status = "converged" if result.converged else "NOT converged"
        print(f"SNR {snr:.2f} dB ({status}, residual {result.residual:.3e})")
        return EXIT_OK

    def _sweep_key(self) -> Dict[str, Any]:
        snapshot = self.config.snapshot()
        snapshot.pop("output", None)
        snapshot.pop("threads", None)
        return snapshot

    def phase_diagram(self) -> int:
        """Run the sweep with checkpointing, then write CSVs, heatmap and manifest."""
        sweep = self.config.sweep
        op = self.config.operator
        plan = self.build_plan(self.build_layout())
        setup = TrialSetup(
            plan=plan,
            solver=self.config.solver.to_solver_config(derive_seed(self.master_seed, "solver")),
            threshold_db=sweep.threshold_db,
            backend=op.backend,
            kernel=op.kernel(),
            model=op.model,
            distribution=self.config.sensing.distribution,
        )

        key = self._sweep_key()
        completed = []
        if self.config.output.resume:
            completed = [TrialRecord.from_dict(r) for r in self.store.load_checkpoint(key)]
        else:
            self.store.clear_checkpoint(key)

        with self.timer.stage("sweep"):
            diagram = phase_transition_sweep(
                fixed=sweep.fixed,
                fixed_value=sweep.fixed_value,
                grids=sweep.grids,
                trials=sweep.trials,
                setup=setup,
                master_seed=self.master_seed,
                workers=self.threads,
                completed=completed,
                on_record=lambda record: self.store.append_checkpoint(key, record.to_dict()),
            )
        self.seeds["cells"] = "derive_seed(master, 'cell', [K, P, M], trial, stream)"

        frontier = transition_frontier(diagram)
        frontier_rows = [
            {diagram.axis1: p.axis1_value, f"{diagram.axis2}_50pct_linear": "" if p.crossing is None else p.crossing}
            for p in frontier
        ]
        self.store.write_csv(self.save("phase_diagram.csv"), diagram.rows())
        self.store.write_csv(self.save("frontier.csv"), frontier_rows)
        self.store.write_jsonl(self.save("trials.jsonl"), (r.to_dict() for r in diagram.records))
        if self.config.output.png:
            self.store.save_heatmap(
                self.save("phase_diagram.png"),
                diagram.rates,
                diagram.axis1, diagram.axis1_values,
                diagram.axis2, diagram.axis2_values,
                frontier=[p.crossing for p in frontier],
                title=f"{sweep.fixed}={sweep.fixed_value}, S={sweep.trials}",
            )

        results = diagram.to_dict()
        try:
            results["frontier_slope"] = frontier_slope(frontier)
        except ValueError:
            results["frontier_slope"] = None
        results["monotonicity_violations"] = monotonicity_violations(diagram)
        self.write_manifest("phase-diagram", results)
        print(f"Phase diagram: {diagram.rates.size} cells written to {self.store.root}")
        return EXIT_OK

    def acquire(self) -> int:
        """Time-domain compressive acquisition with optional post-sensing baselines."""
        sensing = self.config.sensing
        plan = self.build_plan(self.build_layout())
        sky = self.build_sky(plan)
        sketches = self.build_sketches(plan)
        noise = self.receiver_noise(plan.num_antennas)

        with self.timer.stage("simulation"):
            batches = simulate_observation(
                sky, plan, sensing.num_samples, noise,
                seed=self.seed_for("signal"), workers=self.threads, budget=sensing.sample_budget,
            )
        with self.timer.stage("compressive"):
            z = compressive_acquire(batches, sketches, noise, self.threads)
        self.store.save_array("measurements", z, {"P": sketches.num_projections, "M": sketches.num_modulations})
        self.save("measurements.bin")

        table = size_accounting(plan.num_antennas, plan.num_batches, sketches.num_projections, sketches.num_modulations)
        self.store.write_csv(self.save("size_accounting.csv"), table)

        if sensing.postsensing:
            with self.timer.stage("postsensing"):
                v = classical_acquire(batches, noise)
                gaussian = gaussian_postsensing(self.seed_for("gaussian"), v, sketches.measurement_count)
                averaged = baseline_dependent_averaging(
                    plan, v, sensing.averaging_threshold * plan.side, sensing.averaging_group
                )
            for name, values in (("visibilities", v), ("gaussian", gaussian), ("averaged", averaged)):
                self.store.save_array(name, values)
                self.save(f"{name}.bin")

        self.write_manifest("acquire", {"measurement_length": int(z.size), "size_accounting": table})
        print(f"Acquired {z.size} compressive measurements")
        return EXIT_OK

    def make_array(self) -> int:
        """Write the layout CSV and a uv-coverage plot."""
        layout = self.build_layout()
        batches = synthesize_batches(layout)
        save_layout_csv(layout, self.store.path(self.save("array.csv")))
        if self.config.output.png:
            self.store.save_uv_coverage(self.save("uv_coverage.png"), uv_coverage(batches))
        sky = self.config.sky
        plan = VisibilityPlan.from_batches(
            batches, sky.side, pixel_size=sky.pixel_size, fill=self.config.operator.uv_fill
        )
        collisions = check_distinct_visibilities(batches, scale=plan.scale)
        self.write_manifest("make-array", {"antennas": layout.num_antennas, "collisions": collisions.to_dict()})
        print(f"Wrote {layout.num_antennas} antennas to {self.store.path('array.csv')}")
        return EXIT_OK


COMMANDS = {
    "validate": ExperimentRunner.validate,
    "reconstruct": ExperimentRunner.reconstruct,
    "phase-diagram": ExperimentRunner.phase_diagram,
    "acquire": ExperimentRunner.acquire,
    "make-array": ExperimentRunner.make_array,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="TOML configuration file")
    common.add_argument("--seed", type=int, help="Master seed")
    common.add_argument("--out", type=Path, help="Output directory")
    common.add_argument("--threads", type=int, help="Worker count (fallback: CRI_ROP_THREADS)")
    common.add_argument(
        "--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE",
        help="Override a config key, e.g. --set sensing.num_projections=10",
    )
    common.add_argument("--verbose", "-v", action="store_true", help="Debug logging and tracebacks")

    parser = argparse.ArgumentParser(
        prog="cri-rop",
        description="Compressive radio interferometry with rank-one projections",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    validate = sub.add_parser("validate", parents=[common], help="Run the property suites")
    validate.add_argument("--inject-adjoint-fault", action="store_true", default=None,
                          help="Break one adjoint to exercise the failure path")

    for name, text in (("reconstruct", "Reconstruct a simulated sky"), ("phase-diagram", "Run a phase-transition sweep")):
        command = sub.add_parser(name, parents=[common], help=text)
        command.add_argument("--backend", choices=["nufft", "nudft"], help="Visibility backend")
        if name == "phase-diagram":
            command.add_argument("--resume", action=argparse.BooleanOptionalAction, default=None,
                                 help="Resume from the sweep checkpoint")

    sub.add_parser("acquire", parents=[common], help="Simulate compressive acquisition")
    sub.add_parser("make-array", parents=[common], help="Write a layout CSV and uv coverage")
    return parser


def _flags(args: argparse.Namespace) -> Dict[str, Any]:
    return {
        "seed": args.seed,
        "output.directory": str(args.out) if args.out is not None else None,
        "operator.backend": getattr(args, "backend", None),
        "operator.inject_adjoint_fault": getattr(args, "inject_adjoint_fault", None),
        "output.resume": getattr(args, "resume", None),
    }


def main(argv: Optional[Sequence[str]] = None) -> int:
    """Parse arguments, run the command and map errors to exit codes."""
    load_dotenv()
    args = build_parser().parse_args(argv)
    setup_logging(args.verbose)

    try:
        config = load_config(args.config, args.overrides, _flags(args))
        threads = resolve_threads(args.threads, config)
        runner = ExperimentRunner(config, threads)
        logger.info(f"Running {args.command} (seed {config.seed}, {threads} threads)")
        return COMMANDS[args.command](runner)
    except ConfigurationError as e:
        logger.error(f"Configuration error: {e}", exc_info=args.verbose)
        return EXIT_CONFIG
    except ValidationSuiteError as e:
        logger.error(f"Validation failed: {e}", exc_info=args.verbose)
        print(f"FAILED: {e.invariant}", file=sys.stderr)
        return EXIT_VALIDATION
    except ResourceGuardError as e:
        logger.error(f"Resource guard: {e}", exc_info=args.verbose)
        return EXIT_RESOURCE
    except Exception as e:
        logger.error(f"{args.command} failed: {e}", exc_info=args.verbose)
        return EXIT_FAILURE
