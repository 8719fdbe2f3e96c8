"""
Property suite module.
System-agnostic checkers and constructors: barycenter witnesses, su-paths,
gluing orbits, average shadowing and mesh-level transitivity/mixing verdicts.
"""
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import sparse

from components import symbolic_dynamics as sd
from components.chain_engine import ChainGraph, GridSystem, build_chain_graph, chain_bound, lemma_chain, wrapped_distance
from config import CHAIN_TOLERANCE, DEFAULT_CAP, ORBIT_CONSISTENCY_TOLERANCE
from exceptions import InvalidSpec, NotMixing, NotShadowingCapable, ParamOutOfRange, RelationOracleUnavailable

logger = logging.getLogger(__name__)

RELATIONS = ("stable", "unstable")


# ========= SYSTEM INTERFACE =========

class DynSystem(ABC):
    """
    A homeomorphism T of a compact metric space, seen through finite samples.

    Points are whatever the backend uses (EpPoint, Fraction, numpy vector);
    `coords` maps them to float rows so that vectorised code can compare orbits.
    """
    name: str = "system"
    family: str = "generic"
    metric: str = "interval"
    exact_orbits: bool = False
    shadowing_capable: bool = False
    has_relation_oracle: bool = False

    @abstractmethod
    def evaluate(self, x: Any) -> Any:
        ...

    @abstractmethod
    def evaluate_inverse(self, x: Any) -> Any:
        ...

    @abstractmethod
    def distance(self, x: Any, y: Any) -> float:
        ...

    def iterate(self, x: Any, n: int) -> Any:
        step = self.evaluate if n >= 0 else self.evaluate_inverse
        for _ in range(abs(n)):
            x = step(x)
        return x

    def same(self, x: Any, y: Any) -> bool:
        return self.distance(x, y) == 0.0

    def coords(self, x: Any) -> np.ndarray:
        return np.atleast_1d(np.asarray(x, dtype=float))

    def coords_distance(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        return wrapped_distance(a, b, self.metric)

    def trajectory(self, x: Any, start: int, stop: int) -> np.ndarray:
        """Rows coords(T^j x) for j in [start, stop]."""
        cur = self.iterate(x, start)
        rows = [self.coords(cur)]
        for _ in range(stop - start):
            cur = self.evaluate(cur)
            rows.append(self.coords(cur))
        return np.vstack(rows)

    def sample(self, mesh: float) -> np.ndarray:
        """A finite mesh-dense set of points, as coordinate rows."""
        raise NotImplementedError(f"{self.name} has no sampler")

    def candidates(self, mesh: float) -> List[Any]:
        return list(self.sample(mesh))

    def evaluate_coords(self, pts: np.ndarray) -> np.ndarray:
        """T applied to coordinate rows; vector backends override with one array call."""
        return np.vstack([self.coords(self.evaluate(p)) for p in pts])

    def grid(self, mesh: float) -> GridSystem:
        return GridSystem.from_map(np.asarray(self.sample(mesh), dtype=float), self.evaluate_coords, self.metric, mesh)

    def cell_index(self, pts: np.ndarray, mesh: float) -> np.ndarray:
        dim = pts.shape[1]
        cells = max(1, int(np.ceil(np.sqrt(dim) / (2.0 * mesh))))
        unit = pts if self.metric == "interval" else np.mod(pts, 1.0)
        idx = np.clip(np.floor(unit * cells).astype(np.int64), 0, cells - 1)
        return np.ravel_multi_index(idx.T, (cells,) * dim)

    def cell_graph(self, mesh: float) -> sparse.csr_matrix:
        """Occupied cells of side about 2*mesh/sqrt(d); U -> V when a sample of U maps into V."""
        pts = np.asarray(self.sample(mesh / 4.0), dtype=float)
        src = self.cell_index(pts, mesh)
        dst = self.cell_index(self.evaluate_coords(pts), mesh)
        occupied, inverse = np.unique(np.concatenate([src, dst]), return_inverse=True)
        rows, cols = inverse[:len(src)], inverse[len(src):]
        n = len(occupied)
        adjacency = sparse.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(n, n))
        adjacency.data[:] = 1
        return adjacency

    def periodic_points(self, max_period: int) -> List[Any]:
        return []

    def stable_related(self, x: Any, y: Any) -> bool:
        """y in W^s(x)."""
        raise RelationOracleUnavailable(self.name)

    def unstable_related(self, x: Any, y: Any) -> bool:
        raise RelationOracleUnavailable(self.name)

    def parse_point(self, text: str) -> Any:
        return np.array([float(v) for v in text.split()])

    def format_point(self, x: Any) -> str:
        return " ".join(repr(float(v)) for v in self.coords(x))

    # shadowing-capable backends override the three hooks below
    def lemma_graph(self, delta: float) -> ChainGraph:
        raise NotShadowingCapable(self.name)

    def shadowing_delta(self, epsilon: float) -> float:
        raise NotShadowingCapable(self.name)

    def shadow_points(self, points: np.ndarray, delta: float, origin: int = 0):
        raise NotShadowingCapable(self.name)

    def certificate_margin(self, inconsistency: float) -> float:
        return 0.0

    def inverse_defect(self, mesh: float) -> float:
        """max d(T(T^-1 x), x) over the sample at mesh."""
        return max(self.distance(self.evaluate(self.evaluate_inverse(p)), p) for p in self.candidates(mesh))


# ========= WITNESS TYPES =========

@dataclass(frozen=True, eq=False)
class BarycenterWitness:
    p: Any
    q: Any
    epsilon: float
    n1: int
    n2: int
    m: int
    N: int
    x0: Any
    method: str = "search"
    orbit: Optional[np.ndarray] = None

    @property
    def constructive(self) -> bool:
        return self.method in ("trivial", "bridge", "shadowing", "gluing")


@dataclass(frozen=True, eq=False)
class GluingWitness:
    segments: Tuple[Tuple[Any, int], ...]
    gaps: Tuple[int, ...]
    x: Any
    epsilon: float
    N: int
    orbit: Optional[np.ndarray] = None

    @property
    def starts(self) -> List[int]:
        starts = [0]
        for (_, n), gap in zip(self.segments, self.gaps):
            starts.append(starts[-1] + n + gap)
        return starts


@dataclass(frozen=True, eq=False)
class SuPath:
    nodes: Tuple[Any, ...]
    relation: Tuple[str, ...]

    def __post_init__(self):
        if len(self.relation) != len(self.nodes) - 1:
            raise InvalidSpec("one relation tag per su-path step is required")
        for tag in self.relation:
            if tag not in RELATIONS:
                raise InvalidSpec(f"relation must be one of {RELATIONS}, got {tag}")


@dataclass(frozen=True)
class AverageShadowingReport:
    is_avg_pseudo_orbit: bool
    avg_shadowed_by_y: Optional[bool]
    asymptotic_average: float
    max_window_average: float
    min_window: int


@dataclass(frozen=True)
class TransitivityReport:
    transitive_at_mesh: bool
    one_sided_transitive_at_mesh: bool
    mixing_at_mesh: bool
    mixing_from: Optional[int]
    cells: int
    mesh: float
    horizon: int


@dataclass(frozen=True, eq=False)
class ShadowSearchResult:
    found: bool
    certified_none: bool
    best_point: np.ndarray
    best_deviation: float
    candidates: int


@dataclass(frozen=True)
class GridShadowingResult:
    holds: bool
    delta: float
    min_separation: float
    offending_node: Optional[int] = None


@dataclass(frozen=True, eq=False)
class ExpansivityResult:
    expansive: bool
    c: float
    counterexample: Optional[Tuple[Any, Any]] = None


# ========= BARYCENTER =========

def _trivial_barycenter(sys: DynSystem, p: Any, q: Any, epsilon: float, n1: int, n2: int) -> Optional[BarycenterWitness]:
    p_traj = sys.trajectory(p, 0, n2)
    q_traj = sys.trajectory(q, 0, n2)
    if np.all(sys.coords_distance(p_traj, q_traj) < epsilon):
        return BarycenterWitness(p, q, epsilon, n1, n2, 0, 1, p, "trivial")
    return None


def _sft_trajectory_check(sys: DynSystem, p: Any, q: Any, epsilon: float, n1: int, n2: int) -> Optional[BarycenterWitness]:
    if sys.same(p, q) or all(sys.distance(sys.iterate(p, i), sys.iterate(q, i)) < epsilon for i in range(n2 + 1)):
        return BarycenterWitness(p, q, epsilon, n1, n2, 0, 1, p, "trivial")
    return None


def _bridge_barycenter(sys: DynSystem, p: sd.EpPoint, q: sd.EpPoint, epsilon: float,
                       n1: int, n2: int, n_cap: int) -> Optional[BarycenterWitness]:
    """
    x0 = p up to position r, a bridge word, then q shifted by m from position
    m - r on: agreement on [-r, r] around every traced time.
    """
    sft = sys.sft
    r = sd.agreement_radius(epsilon)
    s = sft.alphabet_size
    n_mix = sd.mixing_time(sft)
    bound = n_mix + 2 * r if n_mix is not None else None
    limit = min(n_cap, 2 * r + 2 * s * s + 2 * s)
    powers = sd.reachability_powers(sft, max(1, limit - 2 * r))
    for m in range(0, limit + 1):
        target = sd.shift_apply(q, -m)
        if m <= 2 * r:
            if p.window(m - r, r) != target.window(m - r, r):
                continue
            x0 = sd.splice_points(p, r, (), target)
        else:
            word = sd.bridge_word(sft, p.symbol_at(r), q.symbol_at(-r), m - 2 * r, powers)
            if word is None:
                continue
            x0 = sd.splice_points(p, r, word, target)
        N = bound if bound is not None and bound >= m else max(m, 1)
        logger.debug("[Barycenter] bridge witness at m=%d (r=%d)", m, r)
        return BarycenterWitness(p, q, epsilon, n1, n2, m, N, x0, "bridge")
    return None


def _shadowing_barycenter(sys: DynSystem, p: Any, q: Any, epsilon: float, n1: int, n2: int) -> BarycenterWitness:
    """Backward orbit of p, a bounded delta-chain into q, forward orbit of q, then shadow."""
    delta = sys.shadowing_delta(epsilon)
    graph = sys.lemma_graph(delta)
    N = chain_bound(graph)
    chain = lemma_chain(graph, sys, sys.coords(p), sys.coords(q))
    m = chain.length
    points = np.vstack([
        sys.trajectory(p, -n1, 0),
        np.vstack(chain.nodes[1:]),
        sys.trajectory(q, 1, n2) if n2 > 0 else np.empty((0, len(sys.coords(p)))),
    ])
    result = sys.shadow_points(points, delta, origin=n1)
    logger.debug("[Barycenter] shadowed %d-point pseudo-orbit, m=%d, N=%d, max error %.3e",
                 len(points), m, N, result.max_error)
    return BarycenterWitness(p, q, epsilon, n1, n2, m, N, result.z0, "shadowing", result.orbit)


def _exhaustive_barycenter(sys: DynSystem, p: Any, q: Any, epsilon: float, n1: int, n2: int,
                           n_cap: int, mesh: float) -> Optional[BarycenterWitness]:
    """Minimal (m, x0) over the candidate pool; windowed distances vectorised per candidate."""
    p_back = sys.trajectory(p, -n1, 0)
    q_fwd = sys.trajectory(q, 0, n2)
    windows = np.arange(n_cap + 1)[:, None] + np.arange(n2 + 1)[None, :]
    best: Optional[Tuple[int, int]] = None
    pool = sys.candidates(mesh)
    for idx, x in enumerate(pool):
        if not np.all(sys.coords_distance(sys.trajectory(x, -n1, 0), p_back) < epsilon):
            continue
        fwd = sys.trajectory(x, 0, n_cap + n2)
        ok = np.all(sys.coords_distance(fwd[windows], q_fwd[None, :, :]) < epsilon, axis=1)
        hits = np.flatnonzero(ok)
        if len(hits) and (best is None or hits[0] < best[0]):
            best = (int(hits[0]), idx)
    if best is None:
        logger.info("[Barycenter] no witness among %d candidates with m <= %d", len(pool), n_cap)
        return None
    m, idx = best
    return BarycenterWitness(p, q, epsilon, n1, n2, m, n_cap, pool[idx], "search")


def check_barycenter(sys: DynSystem, p: Any, q: Any, epsilon: float, n1: int = 10, n2: int = 10,
                     n_cap: int = DEFAULT_CAP, mesh: float = 1e-3) -> Optional[BarycenterWitness]:
    """
    Search or construct a barycenter witness for (p, q) at epsilon.

    Args:
        sys: the system
        p, q: points of sys
        epsilon: tracing precision
        n1, n2: lengths of the backward trace of p and forward trace of q
        n_cap: bound on the transition time m searched
        mesh: candidate pool resolution for sampled continuum systems

    Returns:
        a witness, or None when no witness exists within the cap
    """
    if epsilon <= 0:
        raise ParamOutOfRange("epsilon", epsilon, "> 0")
    for name, value in (("n1", n1), ("n2", n2)):
        if value < 1:
            raise ParamOutOfRange(name, value, ">= 1")
    if sys.family == "sft":
        trivial = _sft_trajectory_check(sys, p, q, epsilon, n1, n2)
        return trivial or _bridge_barycenter(sys, p, q, epsilon, n1, n2, n_cap)
    trivial = _trivial_barycenter(sys, p, q, epsilon, n1, n2)
    if trivial is not None:
        return trivial
    if sys.shadowing_capable:
        return _shadowing_barycenter(sys, p, q, epsilon, n1, n2)
    return _exhaustive_barycenter(sys, p, q, epsilon, n1, n2, n_cap, mesh)


def _orbit_margin(sys: DynSystem, orbit: np.ndarray) -> Optional[float]:
    steps = sys.coords_distance(np.vstack([sys.coords(sys.evaluate(row)) for row in orbit[:-1]]), orbit[1:]) \
        if len(orbit) > 1 else np.zeros(0)
    worst = float(steps.max(initial=0.0))
    if worst > ORBIT_CONSISTENCY_TOLERANCE:
        return None
    return sys.certificate_margin(worst)


def verify_barycenter_witness(sys: DynSystem, w: BarycenterWitness) -> bool:
    """Re-evaluate both tracing families from p, q and x0 (or the stored orbit)."""
    if w.m < 0 or w.m > w.N or w.n1 < 1 or w.n2 < 1 or w.epsilon <= 0:
        return False
    eps = w.epsilon
    if w.orbit is not None:
        if len(w.orbit) != w.n1 + w.m + w.n2 + 1:
            return False
        margin = _orbit_margin(sys, w.orbit)
        if margin is None or not np.all(sys.coords_distance(w.orbit[w.n1], sys.coords(w.x0)) <= ORBIT_CONSISTENCY_TOLERANCE):
            return False
        eps = w.epsilon - margin
        back = w.orbit[:w.n1 + 1]
        fwd = w.orbit[w.n1 + w.m:]
    elif sys.family == "sft":
        for i in range(-w.n1, 1):
            if not sys.distance(sys.iterate(w.x0, i), sys.iterate(w.p, i)) < eps:
                return False
        for i in range(w.n2 + 1):
            if not sys.distance(sys.iterate(w.x0, i + w.m), sys.iterate(w.q, i)) < eps:
                return False
        return True
    else:
        back = sys.trajectory(w.x0, -w.n1, 0)
        fwd = sys.trajectory(w.x0, w.m, w.m + w.n2)
    return bool(np.all(sys.coords_distance(back, sys.trajectory(w.p, -w.n1, 0)) < eps)
                and np.all(sys.coords_distance(fwd, sys.trajectory(w.q, 0, w.n2)) < eps))


# ========= ACCESSIBILITY =========

def _related(sys: DynSystem, a: Any, b: Any) -> Optional[str]:
    if sys.stable_related(a, b):
        return "stable"
    if sys.unstable_related(a, b):
        return "unstable"
    return None


def _pool_index(sys: DynSystem, pool: Sequence[Any], x: Any) -> int:
    for i, z in enumerate(pool):
        if sys.same(z, x):
            return i
    raise InvalidSpec("point is not in the pool")


def check_accessible(sys: DynSystem, x: Any, y: Any, pool: Sequence[Any], max_len: int) -> Optional[SuPath]:
    """Breadth-first search for an su-path from x to y inside the pool."""
    if not sys.has_relation_oracle:
        raise RelationOracleUnavailable(sys.name)
    pool = list(pool)
    src, dst = _pool_index(sys, pool, x), _pool_index(sys, pool, y)
    if src == dst:
        return SuPath((pool[src],), ())
    parent: Dict[int, Tuple[Optional[int], Optional[str]]] = {src: (None, None)}
    frontier = [src]
    for _ in range(max_len):
        nxt = []
        for i in frontier:
            for j in range(len(pool)):
                if j in parent:
                    continue
                tag = _related(sys, pool[i], pool[j])
                if tag is None:
                    continue
                parent[j] = (i, tag)
                if j == dst:
                    nodes, tags = [j], []
                    while parent[nodes[-1]][0] is not None:
                        prev, t = parent[nodes[-1]]
                        tags.append(t)
                        nodes.append(prev)
                    return SuPath(tuple(pool[k] for k in reversed(nodes)), tuple(reversed(tags)))
                nxt.append(j)
        frontier = nxt
        if not frontier:
            break
    return None


def verify_supath(sys: DynSystem, path: SuPath) -> bool:
    for a, b, tag in zip(path.nodes, path.nodes[1:], path.relation):
        ok = sys.stable_related(a, b) if tag == "stable" else sys.unstable_related(a, b)
        if not ok:
            return False
    return True


# ========= GLUING =========

def gluing_bound(sys: DynSystem, epsilon: float) -> int:
    """The uniform bound N(epsilon) on gluing gaps."""
    if sys.family == "sft":
        n_mix = sd.mixing_time(sys.sft)
        if n_mix is None:
            raise NotMixing()
        return n_mix + 2 * sd.agreement_radius(epsilon)
    if not sys.shadowing_capable:
        raise NotShadowingCapable(sys.name)
    return chain_bound(sys.lemma_graph(sys.shadowing_delta(epsilon)))


def _sft_gluing(sys: DynSystem, segments: List[Tuple[sd.EpPoint, int]], epsilon: float) -> GluingWitness:
    n_mix = sd.mixing_time(sys.sft)
    if n_mix is None:
        raise NotMixing()
    r = sd.agreement_radius(epsilon)
    gap = n_mix + 2 * r
    specs, start = [], 0
    for x_i, n_i in segments:
        specs.append(sd.OrbitSegmentSpec(sd.shift_apply(x_i, -start), start - r, start + n_i + r))
        start += n_i + gap
    z = sd.specification_trace(sys.sft, specs, n_mix)
    return GluingWitness(tuple(segments), (gap,) * (len(segments) - 1), z, epsilon, gap)


def _shadowing_gluing(sys: DynSystem, segments: List[Tuple[Any, int]], epsilon: float) -> GluingWitness:
    delta = sys.shadowing_delta(epsilon)
    graph = sys.lemma_graph(delta)
    N = chain_bound(graph)
    blocks, gaps = [], []
    for i, (x_i, n_i) in enumerate(segments):
        traj = sys.trajectory(x_i, 0, n_i)
        if i > 0:
            chain = lemma_chain(graph, sys, blocks[-1][-1], traj[0])
            gaps.append(chain.length)
            if chain.length > 1:
                blocks.append(np.vstack(chain.nodes[1:-1]))
        blocks.append(traj)
    result = sys.shadow_points(np.vstack(blocks), delta, origin=0)
    logger.info("[Glue] %d segments, gaps %s, N=%d, max error %.3e", len(segments), gaps, N, result.max_error)
    return GluingWitness(tuple(segments), tuple(gaps), result.z0, epsilon, N, result.orbit)


def gluing_orbit(sys: DynSystem, segments: Sequence[Tuple[Any, int]], epsilon: float) -> GluingWitness:
    """
    One point tracing every orbit segment (x_i, n_i) within epsilon with gaps
    at most N(epsilon): bridge words on mixing SFTs, shadowed delta-chains on
    shadowing-capable systems.
    """
    segments = [(x, int(n)) for x, n in segments]
    if not segments:
        raise InvalidSpec("at least one orbit segment is required")
    if any(n < 0 for _, n in segments):
        raise InvalidSpec("segment lengths must be nonnegative")
    if sys.family == "sft":
        return _sft_gluing(sys, segments, epsilon)
    if not sys.shadowing_capable:
        raise NotShadowingCapable(sys.name)
    return _shadowing_gluing(sys, segments, epsilon)


def verify_gluing_witness(sys: DynSystem, gw: GluingWitness) -> bool:
    if len(gw.gaps) != len(gw.segments) - 1 or any(g < 1 or g > gw.N for g in gw.gaps):
        return False
    eps = gw.epsilon
    starts = gw.starts
    if gw.orbit is not None:
        total = starts[-1] + gw.segments[-1][1] + 1
        if len(gw.orbit) != total:
            return False
        margin = _orbit_margin(sys, gw.orbit)
        if margin is None:
            return False
        eps -= margin
        for (x_i, n_i), s_i in zip(gw.segments, starts):
            if not np.all(sys.coords_distance(gw.orbit[s_i:s_i + n_i + 1], sys.trajectory(x_i, 0, n_i)) <= eps):
                return False
        return True
    for (x_i, n_i), s_i in zip(gw.segments, starts):
        for j in range(n_i + 1):
            if sys.distance(sys.iterate(gw.x, s_i + j), sys.iterate(x_i, j)) > eps:
                return False
    return True


def barycenter_from_gluing(sys: DynSystem, p: Any, q: Any, epsilon: float, ell: int) -> BarycenterWitness:
    """
    Glue (T^(-ell N) p, ell N) with (q, ell N) and move the glue point forward
    by ell N: the result traces p backward and q forward with m = the gap.
    """
    if ell < 1:
        raise ParamOutOfRange("ell", ell, ">= 1")
    N = gluing_bound(sys, epsilon)
    span = ell * N
    gw = gluing_orbit(sys, [(sys.iterate(p, -span), span), (q, span)], epsilon)
    m = gw.gaps[0]
    if gw.orbit is not None:
        x0 = gw.orbit[span].copy()
    else:
        x0 = sys.iterate(gw.x, span)
    return BarycenterWitness(p, q, epsilon, span, span, m, N, x0, "gluing", gw.orbit)


# ========= AVERAGE SHADOWING =========

def average_shadowing_check(sys: DynSystem, seq: Sequence[Any], delta: float, y: Optional[Any] = None,
                            epsilon: Optional[float] = None, min_window: Optional[int] = None) -> AverageShadowingReport:
    """
    Window averages of the step errors d(T x_j, x_(j+1)) over every window of
    length n >= min_window fitting the sequence; the tracing limsup is
    replaced by the largest prefix average over the last half of the horizon.

    min_window defaults to the number of steps, so only the full-horizon
    average is judged; pass min_window=1 to judge every window, single steps
    included.
    """
    if len(seq) < 2:
        raise InvalidSpec("sequence needs at least two points")
    steps = np.array([sys.distance(sys.evaluate(a), b) for a, b in zip(seq, seq[1:])])
    total = len(steps)
    n0 = total if min_window is None else max(1, min(int(min_window), total))
    cum = np.concatenate([[0.0], np.cumsum(steps)])
    worst = 0.0
    for n in range(n0, total + 1):
        worst = max(worst, float(((cum[n:] - cum[:-n]) / n).max()))

    shadowed = None
    if y is not None:
        if epsilon is None:
            raise InvalidSpec("epsilon is required with y")
        devs, cur = [], y
        for x in seq:
            devs.append(sys.distance(cur, x))
            cur = sys.evaluate(cur)
        prefix = np.cumsum(devs) / np.arange(1, len(devs) + 1)
        shadowed = bool(prefix[len(devs) // 2:].max() < epsilon)
    return AverageShadowingReport(bool(worst < delta), shadowed, float(steps.mean()), worst, n0)


# ========= MESH-LEVEL TRANSITIVITY =========

def empirical_transitivity(sys: DynSystem, mesh: float, horizon: int) -> TransitivityReport:
    """
    Reachability in the cell graph at mesh: U -> V within [0, horizon]
    (one-sided), in either direction (two-sided), and eventually at every
    time up to the horizon (mixing).
    """
    adjacency = sys.cell_graph(mesh).astype(np.float32)
    n = adjacency.shape[0]
    has_preimage = np.asarray(adjacency.sum(axis=0)).ravel() > 0
    reach = np.eye(n, dtype=bool)
    ever = reach.copy()
    mixing_from = None
    for step in range(1, horizon + 1):
        reach = np.asarray(adjacency.T @ reach.T.astype(np.float32)).T > 0
        ever |= reach
        if reach.all():
            if mixing_from is None:
                mixing_from = step
            if has_preimage.all():
                break
        else:
            mixing_from = None
    one_sided = bool(ever.all())
    two_sided = bool((ever | ever.T).all())
    logger.info("[Transitivity] %d cells at mesh %.4g: two-sided=%s mixing_from=%s", n, mesh, two_sided, mixing_from)
    return TransitivityReport(two_sided and n > 0, one_sided, mixing_from is not None, mixing_from, n, mesh, horizon)


# ========= SHADOWING AT RESOLUTION =========

def exhaustive_shadow_search(sys: DynSystem, seq: Sequence[Any], epsilon: float, mesh: float) -> ShadowSearchResult:
    """
    Best initial point on the mesh-grid for tracing seq. For isometries a best
    deviation above epsilon + mesh certifies that no epsilon-shadow exists.
    """
    cand = np.asarray(sys.sample(mesh), dtype=float)
    targets = [sys.coords(x) for x in seq]
    cur = cand.copy()
    worst = np.zeros(len(cand))
    for t in targets:
        worst = np.maximum(worst, sys.coords_distance(cur, t[None, :]))
        cur = sys.evaluate_coords(cur)
    best = int(np.argmin(worst))
    found = bool(worst[best] < epsilon)
    certified = bool(not found and worst[best] - mesh >= epsilon)
    return ShadowSearchResult(found, certified, cand[best], float(worst[best]), len(cand))


def _min_separation(grid: GridSystem) -> float:
    if grid.size < 2:
        return float("inf")
    dist, _ = grid.tree.query(grid.points if grid.metric == "interval" else np.mod(grid.points, 1.0), k=2)
    return float(dist[:, 1].min())


def check_grid_shadowing(sys: DynSystem, delta: Optional[float] = None, mesh: float = 1e-3) -> GridShadowingResult:
    """
    For delta below half the minimal separation of the representatives, every
    delta-pseudo-orbit on them must follow T exactly.
    """
    grid = sys.grid(mesh)
    sep = _min_separation(grid)
    if delta is None:
        delta = sep / 4.0
    if not delta < sep / 2.0:
        return GridShadowingResult(False, delta, sep)
    graph = build_chain_graph(grid, delta)
    for i in range(grid.size):
        for j in graph.successors(i):
            if float(grid.distance(grid.images[i], grid.points[j])) > CHAIN_TOLERANCE:
                return GridShadowingResult(False, delta, sep, i)
    return GridShadowingResult(True, delta, sep)


def check_expansive(sys: DynSystem, c: Optional[float] = None, horizon: int = 50, mesh: float = 1e-3) -> ExpansivityResult:
    """
    Looks for two distinct representatives whose orbits stay within c for
    |n| <= horizon. Nearest-neighbour pairs are tried.
    """
    grid = sys.grid(mesh)
    pool = sys.candidates(mesh)
    sep = _min_separation(grid)
    if c is None:
        c = 2.0 * sep
    _, nn = grid.tree.query(grid.points if grid.metric == "interval" else np.mod(grid.points, 1.0), k=2)
    for i, j in enumerate(nn[:, 1]):
        a, b = pool[i], pool[int(j)]
        gap = sys.coords_distance(sys.trajectory(a, -horizon, horizon), sys.trajectory(b, -horizon, horizon))
        if gap.max() <= c:
            return ExpansivityResult(False, c, (a, b))
    return ExpansivityResult(True, c)


def is_distal_at_resolution(sys: DynSystem, horizon: int = 200, mesh: float = 1e-3) -> bool:
    """Nearest-neighbour pairs keep at least the minimal separation over |n| <= horizon."""
    grid = sys.grid(mesh)
    pool = sys.candidates(mesh)
    sep = _min_separation(grid)
    _, nn = grid.tree.query(grid.points if grid.metric == "interval" else np.mod(grid.points, 1.0), k=2)
    for i, j in enumerate(nn[:, 1]):
        gap = sys.coords_distance(sys.trajectory(pool[i], -horizon, horizon), sys.trajectory(pool[int(j)], -horizon, horizon))
        if gap.min() < sep * (1 - 1e-9):
            return False
    return True
