"""
Chain engine.
delta-chains over finite grids: chain graphs, chain recurrence, chain
transitivity/mixing, the bounded chain length between grid cells and the
explicit epsilon-chains assembled from recurrence witnesses.
"""
import logging
import math
from collections import deque
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, List, Optional, Protocol, Sequence, Tuple

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph
from scipy.spatial import cKDTree

from config import CHAIN_TOLERANCE, EXACT_BOUND_NODE_LIMIT
from exceptions import (
    ChainNotFound,
    ChainStepViolated,
    InvalidSpec,
    NotChainTransitive,
    ParamOutOfRange,
    WitnessInequalityViolated,
)

logger = logging.getLogger(__name__)

METRICS = ("torus", "circle", "interval")


class MapLike(Protocol):
    def evaluate(self, x: Any) -> Any: ...

    def evaluate_inverse(self, x: Any) -> Any: ...

    def iterate(self, x: Any, n: int) -> Any: ...

    def distance(self, x: Any, y: Any) -> float: ...


def below(error: float, delta: float) -> bool:
    """The strict delta-condition at the engine's absolute tolerance."""
    return delta - error > CHAIN_TOLERANCE


def wrapped_distance(a: np.ndarray, b: np.ndarray, metric: str) -> np.ndarray:
    diff = np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float))
    if metric in ("torus", "circle"):
        diff = np.minimum(diff, 1.0 - diff)
    return np.linalg.norm(np.atleast_1d(diff), axis=-1)


# ========= TYPES =========

@dataclass(frozen=True, eq=False)
class GridSystem:
    points: np.ndarray
    images: np.ndarray
    metric: str
    mesh: float
    lipschitz: Optional[float] = None
    evaluate: Optional[Callable[[np.ndarray], np.ndarray]] = None

    def __post_init__(self):
        if self.metric not in METRICS:
            raise InvalidSpec(f"metric must be one of {METRICS}, got {self.metric}")
        if self.mesh <= 0:
            raise ParamOutOfRange("mesh", self.mesh, "> 0")
        if self.points.ndim != 2 or self.points.shape != self.images.shape:
            raise InvalidSpec("points and images must be (n, d) arrays of equal shape")
        if len(np.unique(self.points, axis=0)) != len(self.points):
            raise InvalidSpec("grid representatives must be pairwise distinct")

    @classmethod
    def from_map(cls, points: np.ndarray, evaluate: Callable[[np.ndarray], np.ndarray], metric: str,
                 mesh: float, lipschitz: Optional[float] = None) -> "GridSystem":
        points = np.atleast_2d(np.asarray(points, dtype=float))
        images = np.atleast_2d(np.asarray(evaluate(points), dtype=float)).reshape(points.shape)
        return cls(points, images, metric, mesh, lipschitz, evaluate)

    @property
    def size(self) -> int:
        return len(self.points)

    @cached_property
    def tree(self) -> cKDTree:
        if self.metric == "interval":
            return cKDTree(self.points)
        return cKDTree(_into_box(self.points), boxsize=1.0)

    def distance(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return wrapped_distance(a, b, self.metric)

    def nearest(self, x: np.ndarray) -> int:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        if self.metric != "interval":
            x = _into_box(x)
        _, idx = self.tree.query(x)
        return int(idx)


def _into_box(x: np.ndarray) -> np.ndarray:
    x = np.mod(x, 1.0)
    return np.where(x >= 1.0, 0.0, x)


@dataclass(frozen=True, eq=False)
class ChainGraph:
    base: GridSystem
    delta: float
    adjacency: sparse.csr_matrix

    @property
    def edge_count(self) -> int:
        return int(self.adjacency.nnz)

    def successors(self, i: int) -> np.ndarray:
        return self.adjacency.indices[self.adjacency.indptr[i]:self.adjacency.indptr[i + 1]]

    def has_edge(self, i: int, j: int) -> bool:
        return bool(j in self.successors(i))

    def true_space_delta(self) -> Optional[float]:
        """delta' such that every grid delta-chain is a delta'-chain of the underlying map."""
        if self.base.lipschitz is None:
            return None
        return self.delta + self.base.lipschitz * self.base.mesh + self.base.mesh


@dataclass(frozen=True, eq=False)
class Chain:
    nodes: Tuple[Any, ...]
    delta: float
    step_errors: Tuple[float, ...]

    def __post_init__(self):
        if not self.nodes:
            raise InvalidSpec("a chain needs at least one point")
        if len(self.step_errors) != len(self.nodes) - 1:
            raise InvalidSpec("one step error per transition is required")
        for i, err in enumerate(self.step_errors):
            if not below(err, self.delta):
                raise ChainStepViolated(i, err, self.delta)

    @property
    def length(self) -> int:
        return len(self.nodes) - 1


def make_chain(system: MapLike, nodes: Sequence[Any], delta: float) -> Chain:
    errors = tuple(float(system.distance(system.evaluate(a), b)) for a, b in zip(nodes, nodes[1:]))
    return Chain(tuple(nodes), delta, errors)


def validate_chain(system: MapLike, chain: Chain) -> bool:
    """Re-check every step of a chain against the map, ignoring the stored errors."""
    for a, b in zip(chain.nodes, chain.nodes[1:]):
        if not below(float(system.distance(system.evaluate(a), b)), chain.delta):
            return False
    return True


# ========= GRAPH =========

def build_chain_graph(system: GridSystem, delta: float) -> ChainGraph:
    """Edges i -> j exactly when d(T(rep_i), rep_j) < delta."""
    if delta <= 0:
        raise ParamOutOfRange("delta", delta, "> 0")
    images = system.images if system.metric == "interval" else _into_box(system.images)
    neighbours = system.tree.query_ball_point(images, r=delta, workers=-1)
    counts = np.fromiter((len(nb) for nb in neighbours), dtype=np.int64, count=system.size)
    rows = np.repeat(np.arange(system.size), counts)
    cols = np.fromiter((j for nb in neighbours for j in nb), dtype=np.int64, count=int(counts.sum()))
    keep = delta - system.distance(system.images[rows], system.points[cols]) > CHAIN_TOLERANCE
    rows, cols = rows[keep], cols[keep]
    adjacency = sparse.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)),
                                  shape=(system.size, system.size))
    adjacency.sort_indices()
    logger.info("[Chain] %d nodes, %d edges at delta=%.4g", system.size, adjacency.nnz, delta)
    return ChainGraph(system, float(delta), adjacency)


def _components(graph: ChainGraph) -> Tuple[int, np.ndarray]:
    return csgraph.connected_components(graph.adjacency, directed=True, connection="strong")


def chain_recurrent_nodes(graph: ChainGraph) -> frozenset:
    _, labels = _components(graph)
    sizes = np.bincount(labels)
    self_loops = graph.adjacency.diagonal() > 0
    return frozenset(np.flatnonzero((sizes[labels] > 1) | self_loops).tolist())


def transitive_closure(graph: ChainGraph) -> np.ndarray:
    """reach[i, j] iff a path of at least one edge leads from i to j (dense; small graphs)."""
    a = graph.adjacency.toarray() > 0
    reach = a.copy()
    while True:
        grown = reach | ((reach.astype(np.int64) @ a.astype(np.int64)) > 0)
        if (grown == reach).all():
            return reach
        reach = grown


def cycle_gcd(graph: ChainGraph) -> Optional[int]:
    levels = csgraph.shortest_path(graph.adjacency, unweighted=True, indices=0)
    coo = graph.adjacency.tocoo()
    if coo.nnz == 0 or not np.isfinite(levels).all():
        return None
    diffs = np.abs(levels[coo.row] + 1 - levels[coo.col]).astype(np.int64)
    g = int(np.gcd.reduce(diffs))
    return g or None


def chain_analysis(graph: ChainGraph) -> dict:
    n_comp, _ = _components(graph)
    transitive = n_comp == 1 and (graph.base.size > 1 or graph.adjacency.nnz > 0)
    g = cycle_gcd(graph) if transitive else None
    return {"chain_transitive": bool(transitive), "chain_mixing": bool(transitive and g == 1), "cycle_gcd": g}


def shortest_path_nodes(graph: ChainGraph, source: int, target: int, min_length: int = 1) -> Optional[List[int]]:
    """
    Breadth-first search over (node, min(steps, min_length)) states, successors
    taken in increasing index order.
    """
    start = (source, 0)
    parent = {start: None}
    queue = deque([start])
    goal = None
    while queue:
        state = queue.popleft()
        node, steps = state
        if node == target and steps == min_length:
            goal = state
            break
        for nxt in graph.successors(node):
            child = (int(nxt), min(steps + 1, min_length))
            if child not in parent:
                parent[child] = state
                queue.append(child)
    if goal is None:
        return None
    path = []
    while goal is not None:
        path.append(goal[0])
        goal = parent[goal]
    return path[::-1]


def _grid_chain(graph: ChainGraph, path: List[int]) -> Chain:
    base = graph.base
    errors = tuple(float(base.distance(base.images[i], base.points[j])) for i, j in zip(path, path[1:]))
    return Chain(tuple(base.points[i] for i in path), graph.delta, errors)


def find_chain(graph: ChainGraph, source: int, target: int) -> Optional[Chain]:
    path = shortest_path_nodes(graph, source, target, min_length=1)
    return None if path is None else _grid_chain(graph, path)


def chain_bound(graph: ChainGraph) -> int:
    """
    N = 2 + max over ordered node pairs of the shortest path length (0 on the
    diagonal), by breadth-first search from every node in chunks of 256 sources.
    """
    n_comp, _ = _components(graph)
    if n_comp != 1:
        raise NotChainTransitive(n_comp)
    n = graph.base.size
    if n > EXACT_BOUND_NODE_LIMIT:
        logger.info("[Chain] exact bound over %d nodes, %d search chunks", n, math.ceil(n / 256))
    worst = 0.0
    for chunk in np.array_split(np.arange(n), max(1, math.ceil(n / 256))):
        dist = csgraph.shortest_path(graph.adjacency, unweighted=True, indices=chunk)
        worst = max(worst, float(dist.max()))
    return 2 + int(worst)


def hub_bound(graph: ChainGraph, hub: int = 0) -> int:
    """Cheap upper bound on chain_bound: d(i, j) <= d(i, hub) + d(hub, j)."""
    n_comp, _ = _components(graph)
    if n_comp != 1:
        raise NotChainTransitive(n_comp)
    out = csgraph.shortest_path(graph.adjacency, unweighted=True, indices=hub)
    into = csgraph.shortest_path(graph.adjacency.T.tocsr(), unweighted=True, indices=hub)
    return 2 + int(out.max() + into.max())


def lemma_chain(graph: ChainGraph, system: MapLike, a: Any, b: Any) -> Chain:
    """
    A delta-chain from the point a to the point b through grid representatives:
    a, rep(T a), ..., rep_v, b with T(rep_v) nearest to b. Length lies in [2, N].
    """
    base = graph.base
    u = base.nearest(system.evaluate(a))
    v = int(np.argmin(base.distance(base.images, np.asarray(b, dtype=float))))
    path = shortest_path_nodes(graph, u, v, min_length=0)
    if path is None:
        raise ChainNotFound(f"grid node {v} is unreachable from {u} at delta={graph.delta}")
    nodes = [np.asarray(a, dtype=float)] + [base.points[i] for i in path] + [np.asarray(b, dtype=float)]
    try:
        return make_chain(system, nodes, graph.delta)
    except ChainStepViolated as e:
        raise ChainNotFound(f"grid too coarse for delta={graph.delta}: {e.detail}")


# ========= LEMMA CHAINS =========

@dataclass(frozen=True)
class BarycenterChainWitness:
    k: int
    l: int
    p: Any
    q: Any
    z: Any
    m: int


@dataclass(frozen=True)
class RecurrenceWitness:
    v: Any
    n: int
    m: int


def _require(index: int, value: float, epsilon: float, what: str) -> None:
    if not value < epsilon:
        raise WitnessInequalityViolated(index, f"{what} = {value:.6g} is not below epsilon = {epsilon:.6g}")


def _orbit(system: MapLike, x: Any, steps: range) -> List[Any]:
    return [system.iterate(x, j) for j in steps]


def assemble_barycenter_chain(system: MapLike, x: Any, y: Any, epsilon: float, w: BarycenterChainWitness) -> Chain:
    """
    x, ..., T^(k-1)x, p, z, ..., T^(m-1)z, T^-1 q, T^-l y, ..., y

    Hypotheses: 0 d(T^k x, p), 1 d(T^-l y, q), 2 d(z, T p), 3 d(T^m z, T^-1 q),
    and 4 d(T p, T^-1 q) when m = 0.
    """
    d = system.distance
    t_inv_q = system.evaluate_inverse(w.q)
    _require(0, d(system.iterate(x, w.k), w.p), epsilon, "d(T^k x, p)")
    _require(1, d(system.iterate(y, -w.l), w.q), epsilon, "d(T^-l y, q)")
    if w.m > 0:
        _require(2, d(w.z, system.evaluate(w.p)), epsilon, "d(z, T p)")
        _require(3, d(system.iterate(w.z, w.m), t_inv_q), epsilon, "d(T^m z, T^-1 q)")
    else:
        _require(4, d(system.evaluate(w.p), t_inv_q), epsilon, "d(T p, T^-1 q)")

    nodes = _orbit(system, x, range(w.k))
    nodes.append(w.p)
    nodes += _orbit(system, w.z, range(w.m))
    nodes.append(t_inv_q)
    nodes += _orbit(system, y, range(-w.l, 1))
    return make_chain(system, nodes, epsilon)


def assemble_supath_chain(system: MapLike, x: Any, y: Any, epsilon: float, su_path: Sequence[Any],
                          witnesses: Sequence[RecurrenceWitness], k: int, l: int) -> Chain:
    """
    x, ..., T^(k-1)x, z_0, ..., T^(n_1 - 1) z_0, v_1, T^(-m_1) z_1, ..., z_1, ..., z_m, T^-l y, ..., y

    Hypotheses: 0 d(T^k x, z_0); 2i-1 d(T^(n_i) z_(i-1), v_i); 2i d(T^(-m_i) z_i, T v_i);
    2m+1 d(T z_m, T^-l y).
    """
    if len(witnesses) != len(su_path) - 1:
        raise InvalidSpec("one recurrence witness per su-path step is required")
    d = system.distance
    _require(0, d(system.iterate(x, k), su_path[0]), epsilon, "d(T^k x, z_0)")
    for i, rw in enumerate(witnesses, start=1):
        _require(2 * i - 1, d(system.iterate(su_path[i - 1], rw.n), rw.v), epsilon, f"d(T^n_{i} z_{i - 1}, v_{i})")
        _require(2 * i, d(system.iterate(su_path[i], -rw.m), system.evaluate(rw.v)), epsilon,
                 f"d(T^-m_{i} z_{i}, T v_{i})")
    last = len(su_path) - 1
    _require(2 * last + 1, d(system.evaluate(su_path[-1]), system.iterate(y, -l)), epsilon, "d(T z_m, T^-l y)")

    nodes = _orbit(system, x, range(k))
    for i, z in enumerate(su_path):
        if i > 0:
            nodes += _orbit(system, z, range(-witnesses[i - 1].m, 0))
        if i < last:
            nodes += _orbit(system, z, range(witnesses[i].n))
            nodes.append(witnesses[i].v)
        else:
            nodes.append(z)
    nodes += _orbit(system, y, range(-l, 1))
    return make_chain(system, nodes, epsilon)
