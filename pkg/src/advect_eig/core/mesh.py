"""Meshes on [0, 1] that resolve every retained potential piece.

Within a piece nodes are uniform; the piece widths themselves decay
geometrically toward a and b, so that decay is the grading. Symmetric
potentials get exactly mirrored node sets: the right half is 1 - (left half).
"""

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Any, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import CapExceeded, MeshError
from .potential import PiecewisePotential

UNIFORM = "uniform"
GRADED = "graded"
BOUNDARY = "boundary"

# Breakpoints closer than this are the same node
_MERGE_TOL = 1e-14


@dataclass(frozen=True, eq=False)
class Mesh:
    """Strictly increasing nodes with a provenance tag per node.

    ``offset`` is the index of ``nodes[0]`` in the mesh this one was
    restricted from (0 for a full mesh).
    """

    nodes: np.ndarray
    provenance: Tuple[str, ...]
    symmetric: bool = False
    offset: int = 0

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        if nodes.ndim != 1 or nodes.size < 2:
            raise MeshError("A mesh needs at least two nodes", nodes=int(nodes.size))
        if not np.all(np.diff(nodes) > 0):
            bad = int(np.argmin(np.diff(nodes)))
            raise MeshError(f"Nodes are not strictly increasing near index {bad}", nodes=int(nodes.size))
        if len(self.provenance) != nodes.size:
            raise MeshError("One provenance tag per node is required", nodes=int(nodes.size))
        nodes.setflags(write=False)
        object.__setattr__(self, "nodes", nodes)
        object.__setattr__(self, "provenance", tuple(self.provenance))

    @property
    def n_nodes(self) -> int:
        return int(self.nodes.size)

    def spacing(self) -> np.ndarray:
        return np.diff(self.nodes)

    def stats(self) -> Dict[str, Any]:
        h = self.spacing()
        return {"nodes": self.n_nodes, "h_min": float(h.min()), "h_max": float(h.max())}

    def index_of(self, x) -> int:
        """Index of the node equal to x (within rounding); MeshError if x is not a node."""
        x = float(x)
        i = int(np.searchsorted(self.nodes, x))
        for j in (i - 1, i):
            if 0 <= j < self.n_nodes and abs(self.nodes[j] - x) <= _MERGE_TOL:
                return j
        raise MeshError(f"{x!r} is not a mesh node", nodes=self.n_nodes)

    def contains(self, points: Iterable) -> bool:
        try:
            for p in points:
                self.index_of(p)
        except MeshError:
            return False
        return True

    def restrict(self, lo, hi) -> "Mesh":
        """The sub-mesh on [lo, hi]; both ends must be nodes."""
        i, j = self.index_of(lo), self.index_of(hi)
        if j - i < 2:
            raise MeshError(f"Sub-interval [{float(lo)}, {float(hi)}] holds fewer than three nodes",
                            nodes=j - i + 1)
        return Mesh(self.nodes[i:j + 1].copy(), self.provenance[i:j + 1], False, self.offset + i)

    def to_csv_rows(self) -> List[Tuple[int, float, str]]:
        return [(i, float(x), tag) for i, (x, tag) in enumerate(zip(self.nodes, self.provenance))]


def _merge(points: Sequence, priority: int = 0) -> List[Fraction]:
    """Sort and drop points within _MERGE_TOL of an earlier (higher priority) one."""
    ordered = sorted(points, key=float)
    kept: List = []
    for p in ordered:
        if kept and abs(float(p) - float(kept[-1])) <= _MERGE_TOL:
            continue
        kept.append(p)
    return kept


def _segments(breaks: Sequence, p_min: int, h_target: float) -> Tuple[np.ndarray, List[str], int]:
    nodes: List[np.ndarray] = []
    tags: List[str] = []
    for lo, hi in zip(breaks, breaks[1:]):
        lo_f, hi_f = float(lo), float(hi)
        width = hi_f - lo_f
        uniform = math.ceil(width / h_target - 1e-9)
        n = max(p_min + 1, uniform)
        tag = GRADED if p_min + 1 > uniform else UNIFORM
        nodes.append(lo_f + width * np.arange(n) / n)
        tags.extend([BOUNDARY] + [tag] * (n - 1))
    nodes.append(np.array([float(breaks[-1])]))
    tags.append(BOUNDARY)
    out = np.concatenate(nodes)
    return out, tags, out.size


def _count(breaks: Sequence, p_min: int, h_target: float) -> int:
    total = 1
    for lo, hi in zip(breaks, breaks[1:]):
        width = float(hi) - float(lo)
        total += max(p_min + 1, math.ceil(width / h_target - 1e-9))
    return total


def build_mesh(m: PiecewisePotential, p_min: Optional[int] = None, cap: Optional[int] = None,
               base_intervals: Optional[int] = None, breakpoints: Iterable = ()) -> Mesh:
    """Mesh resolving every piece of m with at least p_min interior nodes.

    ``breakpoints`` are extra points (coefficient kinks, test-function
    corners) that must be nodes. For mirrored potentials they are reflected
    into the left half so the mesh stays symmetric.

    Raises:
        CapExceeded: if more than ``cap`` nodes would be needed
    """
    from ..config import get_config
    cfg = get_config()
    p_min = cfg.p_min if p_min is None else p_min
    cap = cfg.mesh_cap if cap is None else cap
    base_intervals = cfg.base_intervals if base_intervals is None else base_intervals
    if p_min < 2:
        raise MeshError(f"p_min must be at least 2, got {p_min}")
    h_target = 1.0 / base_intervals
    extras = list(breakpoints)

    if m.has_mirror:
        half = Fraction(1, 2)
        own = [p for p in m.exact_boundaries() if p <= half] + [half]
        reflected = [e if e <= half else 1 - e for e in extras]
        breaks = _merge(own + [e for e in reflected if 0 < float(e) < 0.5])
        needed = 2 * _count(breaks, p_min, h_target) - 1
        if needed > cap:
            raise CapExceeded(needed, cap)
        left, tags, _ = _segments(breaks, p_min, h_target)
        nodes = np.concatenate([left, 1.0 - left[-2::-1]])
        provenance = tags + tags[-2::-1]
        return Mesh(nodes, tuple(provenance), symmetric=True)

    breaks = _merge(list(m.exact_boundaries()) + [e for e in extras if 0 < float(e) < 1])
    needed = _count(breaks, p_min, h_target)
    if needed > cap:
        raise CapExceeded(needed, cap)
    nodes, tags, _ = _segments(breaks, p_min, h_target)
    return Mesh(nodes, tuple(tags), symmetric=False)


def uniform_mesh(n_nodes: int, lo: float = 0.0, hi: float = 1.0) -> Mesh:
    """n_nodes equally spaced nodes on [lo, hi]."""
    if n_nodes < 3:
        raise MeshError(f"A uniform mesh needs at least three nodes, got {n_nodes}", nodes=n_nodes)
    nodes = lo + (hi - lo) * np.arange(n_nodes) / (n_nodes - 1)
    nodes[-1] = hi
    tags = [BOUNDARY] + [UNIFORM] * (n_nodes - 2) + [BOUNDARY]
    symmetric = lo == 0.0 and hi == 1.0 and n_nodes % 2 == 1
    if symmetric:
        half = nodes[: n_nodes // 2 + 1]
        nodes = np.concatenate([half, 1.0 - half[-2::-1]])
    return Mesh(nodes, tuple(tags), symmetric=symmetric)


def _bisect(nodes: np.ndarray, tags: Sequence[str]) -> Tuple[np.ndarray, List[str]]:
    mids = (nodes[:-1] + nodes[1:]) / 2.0
    out = np.empty(2 * nodes.size - 1)
    out[0::2] = nodes
    out[1::2] = mids
    new_tags: List[str] = []
    for i, tag in enumerate(tags):
        new_tags.append(tag)
        if i + 1 < len(tags):
            graded = GRADED in (tag, tags[i + 1])
            new_tags.append(GRADED if graded else UNIFORM)
    return out, new_tags


def refine(mesh: Mesh, cap: Optional[int] = None) -> Mesh:
    """Bisect every interval; used for Richardson estimates.

    Raises:
        CapExceeded: if the refined mesh would exceed ``cap`` nodes
    """
    if cap is None:
        from ..config import get_config
        cap = get_config().mesh_cap
    needed = 2 * mesh.n_nodes - 1
    if needed > cap:
        raise CapExceeded(needed, cap)
    if mesh.symmetric:
        half = mesh.n_nodes // 2 + 1
        left, tags = _bisect(mesh.nodes[:half], mesh.provenance[:half])
        nodes = np.concatenate([left, 1.0 - left[-2::-1]])
        return Mesh(nodes, tuple(tags + tags[-2::-1]), symmetric=True)
    nodes, tags = _bisect(mesh.nodes, mesh.provenance)
    return Mesh(nodes, tuple(tags), symmetric=False, offset=2 * mesh.offset)
