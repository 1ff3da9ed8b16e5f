"""
Artifact store for experiment outputs.

Provides persistence for measurement vectors, images, visibility plans,
CSV tables, JSON manifests, JSON-lines diagnostics, sweep checkpoints and
PNG figures, all under one output directory.
"""

import csv
import hashlib
import json
import logging
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Iterable, List, Mapping, Optional, Sequence, Union

import numpy as np

from src.errors import ConfigurationError
from src.operators.fourier import VisibilityPlan
from src.sky.model import SkyImage

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]

DTYPES = {
    "float64": np.dtype("<f8"),
    "complex128": np.dtype("<c16"),
}
DISPLAY_BLUR_SIGMA = 0.7


def file_digest(path: PathLike) -> str:
    """sha256 of a file's bytes."""
    digest = hashlib.sha256()
    with Path(path).open("rb") as handle:
        for block in iter(lambda: handle.read(1 << 20), b""):
            digest.update(block)
    return digest.hexdigest()


def _json_default(value: Any):
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, Path):
        return str(value)
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


class ArtifactStore:
    """
    File store rooted at one output directory.

    Provides operations for:
    - Arrays: flat little-endian binaries with JSON sidecars
    - Images and plans: arrays plus metadata
    - Tables: CSV with a header row
    - Manifests: JSON written atomically, JSON-lines logs
    - Checkpoints: per-sweep trial logs keyed by a deterministic digest
    - Figures: PNG images, heatmaps and uv coverage
    """

    def __init__(self, root: PathLike):
        """
        Initialize store.

        Args:
            root: Output directory (created on first write)
        """
        self.root = Path(root)

    def path(self, name: str) -> Path:
        return self.root / name

    def _prepare(self, name: str) -> Path:
        path = self.path(name)
        path.parent.mkdir(parents=True, exist_ok=True)
        return path

    # =========================================================================
    # Array Operations
    # =========================================================================

    def save_array(self, name: str, values: np.ndarray, metadata: Optional[Mapping[str, Any]] = None) -> Path:
        """
        Write ``name.bin`` (raw little-endian) and its ``name.json`` sidecar.

        Complex input is stored as complex128, everything else as float64.

        Returns:
            Path of the binary file
        """
        values = np.asarray(values).ravel()
        dtype = "complex128" if np.iscomplexobj(values) else "float64"
        path = self._prepare(f"{name}.bin")
        path.write_bytes(values.astype(DTYPES[dtype]).tobytes())

        sidecar = {
            "dtype": dtype,
            "length": int(values.size),
            "sha256": file_digest(path),
            "metadata": dict(metadata or {}),
        }
        self.write_json(f"{name}.json", sidecar)
        return path

    def load_array(self, name: str) -> np.ndarray:
        """
        Read an array written by save_array.

        Raises:
            ConfigurationError: If files are missing or the digest does not match
        """
        sidecar = self.read_array_metadata(name)
        path = self.path(f"{name}.bin")
        if not path.is_file():
            raise ConfigurationError(f"Array file not found: {path}")
        if file_digest(path) != sidecar["sha256"]:
            raise ConfigurationError(f"{path}: digest does not match its sidecar")

        values = np.frombuffer(path.read_bytes(), dtype=DTYPES[sidecar["dtype"]])
        if values.size != sidecar["length"]:
            raise ConfigurationError(f"{path}: expected {sidecar['length']} values, found {values.size}")
        return values.copy()

    def read_array_metadata(self, name: str) -> Dict[str, Any]:
        return self.read_json(f"{name}.json")

    # =========================================================================
    # Image and Plan Operations
    # =========================================================================

    def save_image(self, name: str, img: SkyImage) -> Path:
        return self.save_array(name, img.values, {"side": img.side, "fov": img.fov, "seed": img.seed})

    def load_image(self, name: str) -> SkyImage:
        meta = self.read_array_metadata(name)["metadata"]
        return SkyImage(side=int(meta["side"]), values=self.load_array(name), fov=meta["fov"], seed=meta.get("seed"))

    def save_plan(self, name: str, plan: VisibilityPlan) -> Path:
        """Store antenna positions (grid units) with the plan metadata."""
        return self.save_array(name, plan.positions, plan.metadata())

    def load_plan(self, name: str) -> VisibilityPlan:
        meta = self.read_array_metadata(name)["metadata"]
        positions = self.load_array(name).reshape(meta["num_batches"], meta["num_antennas"], 2)
        return VisibilityPlan(
            side=int(meta["side"]),
            positions=positions,
            pixel_size=float(meta["pixel_size"]),
            scale=float(meta["scale"]),
            include_dc_rows=bool(meta["include_dc_rows"]),
        )

    # =========================================================================
    # Table and Manifest Operations
    # =========================================================================

    def write_csv(self, name: str, rows: Sequence[Mapping[str, Any]], fieldnames: Optional[List[str]] = None) -> Path:
        """Write rows as UTF-8 CSV with a header row."""
        if fieldnames is None:
            if not rows:
                raise ValueError("fieldnames are required for an empty table")
            fieldnames = list(rows[0])
        path = self._prepare(name)
        with path.open("w", newline="", encoding="utf-8") as handle:
            writer = csv.DictWriter(handle, fieldnames=fieldnames)
            writer.writeheader()
            writer.writerows(rows)
        return path

    def read_csv(self, name: str) -> List[Dict[str, str]]:
        with self.path(name).open(newline="", encoding="utf-8") as handle:
            return list(csv.DictReader(handle))

    def write_json(self, name: str, data: Any) -> Path:
        """Write JSON atomically (temporary file, then replace)."""
        path = self._prepare(name)
        fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as handle:
                json.dump(data, handle, indent=2, sort_keys=True, default=_json_default)
                handle.write("\n")
            os.replace(tmp, path)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        return path

    def read_json(self, name: str) -> Any:
        path = self.path(name)
        if not path.is_file():
            raise ConfigurationError(f"JSON file not found: {path}")
        return json.loads(path.read_text(encoding="utf-8"))

    def append_jsonl(self, name: str, record: Mapping[str, Any]) -> None:
        path = self._prepare(name)
        with path.open("a", encoding="utf-8") as handle:
            handle.write(json.dumps(record, sort_keys=True, default=_json_default) + "\n")
            handle.flush()

    def write_jsonl(self, name: str, records: Iterable[Mapping[str, Any]]) -> Path:
        path = self._prepare(name)
        with path.open("w", encoding="utf-8") as handle:
            for record in records:
                handle.write(json.dumps(record, sort_keys=True, default=_json_default) + "\n")
        return path

    def read_jsonl(self, name: str) -> List[Dict[str, Any]]:
        """Records of a JSON-lines file; a truncated last line is ignored."""
        path = self.path(name)
        if not path.is_file():
            return []
        records = []
        for line_no, line in enumerate(path.read_text(encoding="utf-8").splitlines(), start=1):
            if not line.strip():
                continue
            try:
                records.append(json.loads(line))
            except json.JSONDecodeError:
                logger.warning(f"{path}:{line_no}: skipping unreadable record")
        return records

    def digests(self, names: Iterable[str]) -> Dict[str, str]:
        """sha256 of each named file that exists."""
        return {name: file_digest(self.path(name)) for name in names if self.path(name).is_file()}

    # =========================================================================
    # Checkpoint Operations
    # =========================================================================

    @staticmethod
    def _generate_cache_key(label: str, params: Optional[Mapping[str, Any]] = None) -> str:
        """Generate a deterministic key for a labelled parameter set."""
        key_parts = [label.lower().strip()]

        if params:
            # Sort for deterministic ordering
            sorted_params = sorted(params.items())
            key_parts.append(json.dumps(sorted_params, default=_json_default))

        key_string = "|".join(key_parts)
        return hashlib.sha256(key_string.encode()).hexdigest()

    def checkpoint_name(self, params: Mapping[str, Any]) -> str:
        return f"checkpoints/sweep-{self._generate_cache_key('sweep', params)[:16]}.jsonl"

    def load_checkpoint(self, params: Mapping[str, Any]) -> List[Dict[str, Any]]:
        """Trial records saved for the sweep identified by ``params``."""
        records = self.read_jsonl(self.checkpoint_name(params))
        if records:
            logger.info(f"Loaded {len(records)} checkpointed trials")
        return records

    def append_checkpoint(self, params: Mapping[str, Any], record: Mapping[str, Any]) -> None:
        self.append_jsonl(self.checkpoint_name(params), record)

    def clear_checkpoint(self, params: Mapping[str, Any]) -> None:
        self.path(self.checkpoint_name(params)).unlink(missing_ok=True)

    # =========================================================================
    # Figure Operations
    # =========================================================================

    @staticmethod
    def _pyplot():
        import matplotlib

        matplotlib.use("Agg")
        from matplotlib import pyplot as plt

        return plt

    def save_image_png(self, name: str, img: SkyImage, blur_sigma: float = DISPLAY_BLUR_SIGMA) -> Path:
        """
        Render an image; the Gaussian blur is applied for display only.
        """
        from scipy.ndimage import gaussian_filter

        plt = self._pyplot()
        grid = img.as_grid()
        if blur_sigma > 0:
            grid = gaussian_filter(grid, blur_sigma)
        half = img.fov / 2

        path = self._prepare(name)
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.imshow(grid.T, origin="lower", cmap="inferno", extent=(-half, half, -half, half))
        ax.set_xlabel("l")
        ax.set_ylabel("m")
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        return path

    def save_heatmap(
        self,
        name: str,
        rates: np.ndarray,
        axis1: str,
        axis1_values: Sequence[int],
        axis2: str,
        axis2_values: Sequence[int],
        frontier: Optional[Sequence[Optional[float]]] = None,
        title: str = "",
    ) -> Path:
        """Success-rate heatmap from black (0%) to white (100%), axis1 on the y axis."""
        plt = self._pyplot()
        path = self._prepare(name)
        fig, ax = plt.subplots(figsize=(6, 5))
        mesh = ax.imshow(np.asarray(rates), origin="lower", cmap="gray", vmin=0.0, vmax=1.0, aspect="auto")
        ax.set_xticks(range(len(axis2_values)), [str(v) for v in axis2_values])
        ax.set_yticks(range(len(axis1_values)), [str(v) for v in axis1_values])
        ax.set_xlabel(axis2)
        ax.set_ylabel(axis1)

        if frontier is not None:
            # crossings are in axis2 units; map to cell coordinates
            xs, ys = [], []
            for i, crossing in enumerate(frontier):
                if crossing is not None:
                    xs.append(np.interp(crossing, axis2_values, np.arange(len(axis2_values))))
                    ys.append(i)
            ax.plot(xs, ys, "r--", linewidth=1.5)

        fig.colorbar(mesh, ax=ax, label="success rate")
        if title:
            ax.set_title(title)
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        return path

    def save_uv_coverage(self, name: str, uv: np.ndarray) -> Path:
        """Scatter plot of a baseline cloud (wavelengths)."""
        plt = self._pyplot()
        uv = np.asarray(uv)
        path = self._prepare(name)
        fig, ax = plt.subplots(figsize=(5, 5))
        ax.scatter(uv[:, 0], uv[:, 1], s=0.5, c="k")
        ax.set_aspect("equal")
        ax.set_xlabel("u [wavelengths]")
        ax.set_ylabel("v [wavelengths]")
        fig.savefig(path, dpi=120, bbox_inches="tight")
        plt.close(fig)
        return path
