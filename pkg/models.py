import logging
from dataclasses import dataclass, field
from typing import Any, Dict, FrozenSet, Iterable, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np

from errors import InstanceValidationError, InvalidInputError
from linalg_core import as_matrix, identity, is_schur, matrix_power, spectral_norm

logger = logging.getLogger(__name__)


@dataclass(eq=False)
class SubsystemFamily:
    """Ordered subsystem matrices A_1..A_N (1-based indices)"""
    matrices: List[np.ndarray]
    names: Optional[List[str]] = None

    @classmethod
    def from_lists(cls, matrices: Sequence[Any], names: Optional[Sequence[str]] = None) -> 'SubsystemFamily':
        return cls(matrices=[as_matrix(m) for m in matrices],
                   names=list(names) if names is not None else None)

    @property
    def size(self) -> int:
        return len(self.matrices)

    @property
    def dimension(self) -> int:
        return self.matrices[0].shape[0] if self.matrices else 0

    @property
    def indices(self) -> range:
        return range(1, self.size + 1)

    def matrix(self, index: int) -> np.ndarray:
        if not 1 <= index <= self.size:
            raise InvalidInputError(f"Subsystem index {index} outside 1..{self.size}")
        return self.matrices[index - 1]

    def power(self, index: int, k: int) -> np.ndarray:
        return matrix_power(self.matrix(index), k)

    def to_dict(self) -> Dict[str, Any]:
        return {
            'dimension': self.dimension,
            'names': self.names,
            'matrices': [m.tolist() for m in self.matrices],
        }


@dataclass(frozen=True)
class DwellBounds:
    min_dwell: int
    max_dwell: int

    def dwells(self) -> range:
        return range(self.min_dwell, self.max_dwell + 1)

    def admits(self, dwell: int) -> bool:
        return self.min_dwell <= dwell <= self.max_dwell

    def to_dict(self) -> Dict[str, int]:
        return {'delta': self.min_dwell, 'Delta': self.max_dwell}


@dataclass(frozen=True)
class SwitchGraph:
    """Admissible switches as a directed graph on vertices 1..N"""
    n_vertices: int
    edges: FrozenSet[Tuple[int, int]] = field(default_factory=frozenset)

    @classmethod
    def from_edges(cls, n_vertices: int, edges: Iterable[Sequence[int]]) -> 'SwitchGraph':
        return cls(n_vertices=n_vertices, edges=frozenset((int(k), int(l)) for k, l in edges))

    def has_edge(self, k: int, l: int) -> bool:
        return (k, l) in self.edges

    def successors(self, k: int) -> List[int]:
        return sorted(l for (s, l) in self.edges if s == k)

    def sorted_edges(self) -> List[Tuple[int, int]]:
        return sorted(self.edges)

    def to_networkx(self) -> nx.DiGraph:
        g = nx.DiGraph()
        g.add_nodes_from(range(1, self.n_vertices + 1))
        g.add_edges_from(self.edges)
        return g


@dataclass(frozen=True, order=True)
class Path:
    """Vertex sequence w_0..w_n; length counts interior vertices only"""
    vertices: Tuple[int, ...]

    def __post_init__(self):
        if len(self.vertices) < 2:
            raise InvalidInputError(f"A path needs a source and a destination, got {self.vertices}")
        object.__setattr__(self, 'vertices', tuple(int(v) for v in self.vertices))

    @property
    def source(self) -> int:
        return self.vertices[0]

    @property
    def destination(self) -> int:
        return self.vertices[-1]

    @property
    def interior(self) -> Tuple[int, ...]:
        return self.vertices[1:-1]

    @property
    def length(self) -> int:
        return len(self.vertices) - 2

    def follows(self, graph: SwitchGraph) -> bool:
        return all(graph.has_edge(a, b) for a, b in zip(self.vertices, self.vertices[1:]))

    def to_list(self) -> List[int]:
        return list(self.vertices)

    def __str__(self) -> str:
        return ",".join(str(v) for v in self.vertices)


@dataclass(eq=False)
class ProblemInstance:
    family: SubsystemFamily
    bounds: DwellBounds
    graph: SwitchGraph
    allow_stable: bool = False

    def to_dict(self) -> Dict[str, Any]:
        return {
            'N': self.family.size,
            'd': self.family.dimension,
            'bounds': self.bounds.to_dict(),
            'edges': [list(e) for e in self.graph.sorted_edges()],
            'allow_stable': self.allow_stable,
        }


def collect_violations(family: SubsystemFamily, bounds: DwellBounds, graph: SwitchGraph,
                       allow_stable: bool = False) -> List[str]:
    """Every broken instance invariant, in a stable order; empty when valid"""
    violations = []

    if family.size < 2:
        violations.append(f"family needs at least 2 subsystems, got {family.size}")

    d = None
    shapes_ok = True
    for idx, m in enumerate(family.matrices, start=1):
        try:
            arr = as_matrix(m, square=True)
        except InvalidInputError as e:
            violations.append(f"A_{idx}: {e}")
            shapes_ok = False
            continue
        if d is None:
            d = arr.shape[0]
        elif arr.shape[0] != d:
            violations.append(f"A_{idx} is {arr.shape[0]}x{arr.shape[0]}, expected {d}x{d}")
            shapes_ok = False

    if bounds.min_dwell <= 0:
        violations.append(f"delta must be positive, got {bounds.min_dwell}")
    if bounds.min_dwell >= bounds.max_dwell:
        violations.append(f"delta ({bounds.min_dwell}) must be < Delta ({bounds.max_dwell})")

    if graph.n_vertices != family.size:
        violations.append(f"graph has {graph.n_vertices} vertices but family has {family.size} matrices")
    for k, l in graph.sorted_edges():
        if not (1 <= k <= family.size and 1 <= l <= family.size):
            violations.append(f"edge ({k},{l}) references an index outside 1..{family.size}")
        elif k == l:
            violations.append(f"edge ({k},{l}) is a self-loop")

    if shapes_ok and not allow_stable:
        for idx, m in enumerate(family.matrices, start=1):
            if is_schur(m):
                violations.append(f"A_{idx} is Schur stable but all subsystems must be unstable")

    return violations


def validate_instance(family: SubsystemFamily, bounds: DwellBounds, graph: SwitchGraph,
                      allow_stable: bool = False) -> ProblemInstance:
    """
    Check every instance invariant.

    Returns:
        the validated ProblemInstance
    Raises:
        InstanceValidationError listing all violations
    """
    violations = collect_violations(family, bounds, graph, allow_stable)
    if violations:
        for v in violations:
            logger.error(f"Instance violation: {v}")
        raise InstanceValidationError(violations)
    logger.info(f"Instance validated: N={family.size}, d={family.dimension}, "
                f"delta={bounds.min_dwell}, Delta={bounds.max_dwell}, {len(graph.edges)} edges")
    return ProblemInstance(family=family, bounds=bounds, graph=graph, allow_stable=allow_stable)


def family_bound_M(family: SubsystemFamily) -> float:
    """M = max over subsystems of the spectral norm"""
    if family.size == 0:
        raise InvalidInputError("Empty subsystem family")
    return max(spectral_norm(m) for m in family.matrices)


def _check_vertex(graph: SwitchGraph, v: int):
    if not 1 <= v <= graph.n_vertices:
        raise InvalidInputError(f"Vertex {v} outside 1..{graph.n_vertices}")


def enumerate_paths(graph: SwitchGraph, u: int, v: int, max_interior: int) -> List[Path]:
    """
    All u -> v paths with pairwise-distinct interiors avoiding u and v.

    Args:
        graph: switch digraph
        u, v: distinct endpoints
        max_interior: maximum number of interior vertices
    Returns:
        paths sorted lexicographically by vertex sequence
    """
    if u == v:
        raise InvalidInputError(f"Path endpoints must differ, got u = v = {u}")
    _check_vertex(graph, u)
    _check_vertex(graph, v)
    if max_interior < 0:
        raise InvalidInputError(f"max_interior must be nonnegative, got {max_interior}")

    g = graph.to_networkx()
    found = nx.all_simple_paths(g, source=u, target=v, cutoff=max_interior + 1)
    return sorted(Path(tuple(p)) for p in found)


def enumerate_cycles(graph: SwitchGraph, i: int, max_interior: int) -> List[Path]:
    """Closed paths i -> ... -> i with 1..max_interior distinct interior vertices"""
    _check_vertex(graph, i)
    if max_interior < 1:
        return []

    g = graph.to_networkx()
    cycles = []
    for w in graph.successors(i):
        for p in nx.all_simple_paths(g, source=w, target=i, cutoff=max_interior):
            cycles.append(Path((i,) + tuple(p)))
    return sorted(cycles)


def interior_product(family: SubsystemFamily, path: Path, b: int) -> np.ndarray:
    """A_{w_{n-1}}^b ... A_{w_1}^b; identity for a length-0 path"""
    result = identity(family.dimension)
    for w in path.interior:
        result = family.power(w, b) @ result
    return result
