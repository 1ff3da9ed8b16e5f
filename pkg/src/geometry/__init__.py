"""
Array geometry: antenna layouts, Earth-rotation synthesis and baselines.
"""

from .layout import (
    ArrayLayout,
    make_vla_like,
    make_random_layout,
    load_layout_csv,
    save_layout_csv,
    resolve_layout,
)
from .synthesis import (
    BatchGeometry,
    CollisionReport,
    baseline_pairs,
    synthesize_batches,
    check_distinct_visibilities,
    uv_coverage,
)

__all__ = [
    "ArrayLayout",
    "make_vla_like",
    "make_random_layout",
    "load_layout_csv",
    "save_layout_csv",
    "resolve_layout",
    "BatchGeometry",
    "CollisionReport",
    "baseline_pairs",
    "synthesize_batches",
    "check_distinct_visibilities",
    "uv_coverage",
]
