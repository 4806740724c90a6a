"""Box domains, tensor-product interior grids and interior-node quadrature.

Fields are plain 1-D float arrays over the interior nodes, flattened row-major
(C order) over the axes in declaration order: the ``m`` x-axes first, then the
``k`` y-axes. Dirichlet values on the boundary are implicitly zero and never
stored.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import BadDimension, BadExtent, BadGamma, DimensionMismatch, DomainSplit, NonFinite

MAX_TOTAL_DIM = 3


@dataclass(frozen=True)
class DomainSpec:
    """An axis-aligned box in R^(m+k) plus per-axis interior node counts."""

    m: int
    k: int
    gamma: float
    extents: tuple[tuple[float, float], ...]
    nodes: tuple[int, ...]

    def __post_init__(self):
        # normalise lists coming from JSON into hashable tuples
        object.__setattr__(self, "extents", tuple((float(a), float(b)) for a, b in self.extents))
        object.__setattr__(self, "nodes", tuple(int(n) for n in self.nodes))
        object.__setattr__(self, "gamma", float(self.gamma))

    @property
    def ndim(self) -> int:
        return self.m + self.k


def validate_domain(spec: DomainSpec) -> None:
    """Raise a :class:`~grushinpme.errors.DomainError` subclass if ``spec`` is unusable."""
    if spec.m < 1 or spec.k < 1 or spec.m + spec.k > MAX_TOTAL_DIM:
        raise BadDimension(f"need m >= 1, k >= 1, m + k <= {MAX_TOTAL_DIM}; got m={spec.m}, k={spec.k}")
    if len(spec.extents) != spec.ndim or len(spec.nodes) != spec.ndim:
        raise BadDimension(
            f"expected {spec.ndim} extents and node counts, got {len(spec.extents)} and {len(spec.nodes)}"
        )
    if not math.isfinite(spec.gamma) or spec.gamma < 0:
        raise BadGamma(f"gamma must be >= 0, got {spec.gamma}")
    for d, (a, b) in enumerate(spec.extents):
        if not (math.isfinite(a) and math.isfinite(b)) or a >= b:
            raise BadExtent(f"axis {d}: need a < b, got ({a}, {b})")
    for d, n in enumerate(spec.nodes):
        if n < 1:
            raise BadDimension(f"axis {d}: need at least one interior node, got {n}")
    if spec.m == 1:
        a, b = spec.extents[0]
        if a < 0 < b:
            raise DomainSplit(f"x-interval ({a}, {b}) contains 0; removing x=0 leaves two components")


@dataclass(frozen=True)
class Grid:
    spec: DomainSpec
    spacings: tuple[float, ...]
    coords: tuple[np.ndarray, ...]
    cell_volume: float
    shape: tuple[int, ...] = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "shape", tuple(len(c) for c in self.coords))

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    @property
    def box_volume(self) -> float:
        return math.prod(b - a for a, b in self.spec.extents)

    def flat_index(self, multi_index: Sequence[int]) -> int:
        return int(np.ravel_multi_index(tuple(multi_index), self.shape))

    def multi_index(self, flat: int) -> tuple[int, ...]:
        return tuple(int(i) for i in np.unravel_index(flat, self.shape))

    def node_coordinates(self) -> np.ndarray:
        """(N, m+k) array of interior node coordinates in flat order."""
        mesh = np.meshgrid(*self.coords, indexing="ij")
        return np.stack([g.ravel() for g in mesh], axis=1)

    def x_norm(self) -> np.ndarray:
        """Euclidean norm of the x-part of every node, in flat order."""
        xs = self.node_coordinates()[:, : self.spec.m]
        if self.spec.m == 1:
            return np.abs(xs[:, 0])
        return np.sqrt(np.sum(xs * xs, axis=1))

    def sample(self, func) -> np.ndarray:
        """Evaluate ``func(*coords)`` at the interior nodes, vectorised."""
        mesh = np.meshgrid(*self.coords, indexing="ij")
        return np.asarray(func(*mesh), dtype=float).ravel()


def build_grid(spec: DomainSpec) -> Grid:
    validate_domain(spec)
    spacings = []
    coords = []
    for (a, b), n in zip(spec.extents, spec.nodes):
        h = (b - a) / (n + 1)
        spacings.append(h)
        coords.append(a + (np.arange(n) + 1) * h)
    return Grid(spec, tuple(spacings), tuple(coords), math.prod(spacings))


def homogeneous_dimension(spec: DomainSpec) -> float:
    return spec.m + (1.0 + spec.gamma) * spec.k


def integrate(grid: Grid, values: np.ndarray) -> float:
    """Interior-node quadrature: ``cell_volume * sum(values)``."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.size,):
        raise DimensionMismatch(f"field has shape {values.shape}, grid has {grid.size} nodes")
    if not np.all(np.isfinite(values)):
        raise NonFinite("field contains NaN or Inf")
    return grid.cell_volume * float(np.sum(values))
