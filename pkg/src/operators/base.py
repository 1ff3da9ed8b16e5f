"""
Matrix-free linear operators with explicit adjoints.

Every imaging map is a LinearOp: a shape, a forward and an adjoint. Operators
compose with ``@`` and stack with ``vstack``; ``dot_test`` checks that the
adjoint is consistent with the forward map.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Callable, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from src.errors import DimensionMismatchError

logger = logging.getLogger(__name__)

VectorMap = Callable[[np.ndarray], np.ndarray]


@lru_cache(maxsize=None)
def _shared_pool(workers: int) -> ThreadPoolExecutor:
    return ThreadPoolExecutor(max_workers=workers, thread_name_prefix="cri-rop-op")


def map_ordered(fn: Callable[[Any], Any], items: Iterable[Any], workers: int = 1) -> List[Any]:
    """``[fn(item) for item in items]``, run on a shared thread pool when workers > 1."""
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    return list(_shared_pool(workers).map(fn, items))


class LinearOp:
    """
    Linear map between C^n (or R^n) and C^m.

    Subclasses implement ``_apply`` and ``_apply_adjoint``; alternatively the
    two maps can be passed as callables. Operators with ``real_domain=True``
    accept real vectors and return the real part of their adjoint.
    """

    def __init__(
        self,
        shape: Tuple[int, int],
        forward: Optional[VectorMap] = None,
        adjoint: Optional[VectorMap] = None,
        name: str = "",
        real_domain: bool = False,
    ):
        """
        Initialize operator.

        Args:
            shape: (rows, cols)
            forward: Function computing A x (when not subclassing)
            adjoint: Function computing A* y (when not subclassing)
            name: Label used in reports
            real_domain: Domain is R^cols
        """
        self.shape = (int(shape[0]), int(shape[1]))
        self._forward_fn = forward
        self._adjoint_fn = adjoint
        self.name = name or type(self).__name__
        self.real_domain = real_domain

    def __repr__(self) -> str:
        domain = "R" if self.real_domain else "C"
        return f"{self.name}({self.shape[0]}x{self.shape[1]}, {domain})"

    def _apply(self, x: np.ndarray) -> np.ndarray:
        if self._forward_fn is None:
            raise NotImplementedError(f"{self.name} has no forward map")
        return self._forward_fn(x)

    def _apply_adjoint(self, y: np.ndarray) -> np.ndarray:
        if self._adjoint_fn is None:
            raise NotImplementedError(f"{self.name} has no adjoint map")
        return self._adjoint_fn(y)

    def forward(self, x: np.ndarray) -> np.ndarray:
        """Compute A x."""
        x = np.asarray(x)
        if x.shape != (self.shape[1],):
            raise DimensionMismatchError(
                f"{self.name}: expected input of length {self.shape[1]}, got shape {x.shape}"
            )
        return self._apply(x)

    def adjoint(self, y: np.ndarray) -> np.ndarray:
        """Compute A* y (real part when the domain is real)."""
        y = np.asarray(y)
        if y.shape != (self.shape[0],):
            raise DimensionMismatchError(
                f"{self.name}: expected adjoint input of length {self.shape[0]}, got shape {y.shape}"
            )
        out = self._apply_adjoint(y)
        if self.real_domain:
            return np.real(out).copy()
        return out

    def __matmul__(self, other):
        if isinstance(other, LinearOp):
            return chain(self, other)
        return self.forward(other)

    def to_dense(self) -> np.ndarray:
        """Materialize the matrix column by column (small operators only)."""
        cols = self.shape[1]
        dense = np.zeros(self.shape, dtype=np.complex128)
        for i in range(cols):
            e = np.zeros(cols)
            e[i] = 1.0
            dense[:, i] = self.forward(e)
        return dense


class ComposedOp(LinearOp):
    """Composition A_1 A_2 ... A_k (rightmost applied first)."""

    def __init__(self, ops: Sequence[LinearOp]):
        for left, right in zip(ops[:-1], ops[1:]):
            if left.shape[1] != right.shape[0]:
                raise DimensionMismatchError(
                    f"Cannot compose {left!r} with {right!r}"
                )
        self.ops = list(ops)
        super().__init__(
            shape=(ops[0].shape[0], ops[-1].shape[1]),
            name=" @ ".join(op.name for op in ops),
            real_domain=ops[-1].real_domain,
        )

    def _apply(self, x):
        for op in reversed(self.ops):
            x = op.forward(x)
        return x

    def _apply_adjoint(self, y):
        for op in self.ops:
            y = op.adjoint(y)
        return y


class StackedOp(LinearOp):
    """
    Vertical stack [A_1; A_2; ...] sharing one domain.

    With ``workers > 1`` the blocks are applied on a thread pool. The adjoint
    sums the block adjoints in stack order whatever the worker count, so
    results do not depend on it.
    """

    def __init__(self, ops: Sequence[LinearOp], workers: int = 1):
        cols = {op.shape[1] for op in ops}
        if len(cols) != 1:
            raise DimensionMismatchError(f"Stacked operators have different domains: {cols}")
        self.ops = list(ops)
        self.workers = max(1, int(workers))
        self._offsets = np.cumsum([0] + [op.shape[0] for op in ops])
        super().__init__(
            shape=(int(self._offsets[-1]), cols.pop()),
            name="vstack[" + ", ".join(op.name for op in ops) + "]",
            real_domain=all(op.real_domain for op in ops),
        )

    def _apply(self, x):
        return np.concatenate(map_ordered(lambda op: op.forward(x), self.ops, self.workers))

    def _apply_adjoint(self, y):
        blocks = zip(self.ops, self._offsets[:-1], self._offsets[1:])
        parts = map_ordered(lambda block: block[0].adjoint(y[block[1]:block[2]]), blocks, self.workers)
        out = parts[0]
        for part in parts[1:]:
            out = out + part
        return out


def chain(*ops: LinearOp) -> LinearOp:
    """Compose operators; ``chain(A, B)`` applies B first."""
    if not ops:
        raise ValueError("chain() needs at least one operator")
    if len(ops) == 1:
        return ops[0]
    return ComposedOp(ops)


def vstack(ops: Sequence[LinearOp], workers: int = 1) -> LinearOp:
    return StackedOp(ops, workers)


def real_input(op: LinearOp) -> LinearOp:
    """Restrict an operator to real inputs; its adjoint returns real vectors."""
    return LinearOp(
        op.shape,
        forward=lambda x: op.forward(np.asarray(x, dtype=np.float64)),
        adjoint=op.adjoint,
        name=op.name,
        real_domain=True,
    )


def adjoint_of(op: LinearOp) -> LinearOp:
    """The adjoint A* as an operator (complex domain)."""
    return LinearOp(
        (op.shape[1], op.shape[0]),
        forward=op.adjoint,
        adjoint=op.forward,
        name=f"{op.name}*",
    )


def scaled(op: LinearOp, factor: float) -> LinearOp:
    """The operator ``factor * op``; ``factor`` is real."""
    return LinearOp(
        op.shape,
        forward=lambda x: factor * op.forward(x),
        adjoint=lambda y: factor * op.adjoint(y),
        name=f"{factor:g}*{op.name}",
        real_domain=op.real_domain,
    )


@dataclass
class AdjointReport:
    """Outcome of a dot test."""
    name: str
    trials: int
    max_error: float
    tolerance: float
    errors: List[float] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.max_error <= self.tolerance

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "trials": self.trials,
            "max_error": self.max_error,
            "tolerance": self.tolerance,
            "passed": self.passed,
        }


def _random_vector(rng: np.random.Generator, n: int, real: bool) -> np.ndarray:
    if real:
        return rng.standard_normal(n)
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def dot_test(
    op: LinearOp,
    trials: int = 20,
    seed: int = 0,
    rtol: float = 1e-10,
) -> AdjointReport:
    """
    Check |<A u, v> - <u, A* v>| <= rtol ||u|| ||v|| ||A||_est on random pairs.

    For real-domain operators the real inner product is used.

    Args:
        op: Operator under test
        trials: Number of random (u, v) pairs
        seed: Generator seed
        rtol: Relative tolerance

    Returns:
        AdjointReport with the worst normalized error
    """
    rng = np.random.default_rng(seed)
    rows, cols = op.shape
    errors = []

    for _ in range(trials):
        u = _random_vector(rng, cols, op.real_domain)
        v = _random_vector(rng, rows, False)
        au = op.forward(u)
        atv = op.adjoint(v)

        lhs = np.vdot(v, au)
        rhs = np.vdot(atv, u)
        if op.real_domain:
            lhs, rhs = lhs.real, rhs.real

        norm_u, norm_v = np.linalg.norm(u), np.linalg.norm(v)
        op_norm = max(np.linalg.norm(au) / norm_u, np.linalg.norm(atv) / norm_v)
        scale = norm_u * norm_v * op_norm
        errors.append(float(abs(lhs - rhs) / scale) if scale > 0 else float(abs(lhs - rhs)))

    report = AdjointReport(op.name, trials, max(errors), rtol, errors)
    if not report.passed:
        logger.error(f"Adjoint test failed for {op.name}: error {report.max_error:.3e}")
    return report
