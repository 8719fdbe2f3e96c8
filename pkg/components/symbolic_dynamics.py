"""
Symbolic dynamics module.
Shifts of finite type over eventually periodic points: structure deciders,
asymptotic relations, su-intersection witnesses and specification tracing.
"""
import logging
import math
from dataclasses import dataclass
from functools import reduce
from typing import Dict, List, Optional, Sequence, Tuple

import networkx as nx
import numpy as np
from scipy import sparse

from exceptions import (
    AlphabetMismatch,
    EmptyRowOrColumn,
    GapTooSmall,
    InvalidSpec,
    NonSquare,
    NotMixing,
    ParamOutOfRange,
    ParseError,
)

logger = logging.getLogger(__name__)

Word = Tuple[int, ...]


# ========= TYPES =========

@dataclass(frozen=True)
class SftSystem:
    alphabet_size: int
    adjacency: Tuple[Tuple[int, ...], ...]
    first_symbol: int = 0

    @property
    def symbols(self) -> range:
        return range(self.first_symbol, self.first_symbol + self.alphabet_size)

    @property
    def matrix(self) -> np.ndarray:
        return np.array(self.adjacency, dtype=np.int64)

    def index(self, symbol: int) -> int:
        i = symbol - self.first_symbol
        if not 0 <= i < self.alphabet_size:
            raise AlphabetMismatch(f"symbol {symbol} is outside the alphabet {list(self.symbols)}")
        return i

    def admissible(self, a: int, b: int) -> bool:
        return self.adjacency[self.index(a)][self.index(b)] == 1

    def check_point(self, x: "EpPoint") -> None:
        """Raise AlphabetMismatch unless every seam of x is an admissible transition."""
        lo = x.offset - len(x.left) - 1
        hi = x.end + len(x.right) + 1
        for k in range(lo, hi):
            a, b = x.symbol_at(k), x.symbol_at(k + 1)
            if not self.admissible(a, b):
                raise AlphabetMismatch(f"transition {a}->{b} at position {k} is not admissible")


@dataclass(frozen=True)
class EpPoint:
    """
    Eventually periodic bi-infinite sequence.

    Positions offset .. offset+len(core)-1 carry the core; the left period
    repeats to the left of it (its last letter sits at offset-1) and the
    right period repeats from offset+len(core) on.
    """
    left: Word
    core: Word
    right: Word
    offset: int = 0

    @property
    def end(self) -> int:
        return self.offset + len(self.core)

    @property
    def is_periodic(self) -> bool:
        return not self.core and self.left == self.right and self.offset == 0

    def left_pattern(self, k: int) -> int:
        return self.left[(k - self.offset) % len(self.left)]

    def right_pattern(self, k: int) -> int:
        return self.right[(k - self.end) % len(self.right)]

    def symbol_at(self, k: int) -> int:
        if k < self.offset:
            return self.left_pattern(k)
        if k >= self.end:
            return self.right_pattern(k)
        return self.core[k - self.offset]

    def window(self, lo: int, hi: int) -> Word:
        return tuple(self.symbol_at(k) for k in range(lo, hi + 1))

    def __str__(self) -> str:
        return format_point(self)


@dataclass(frozen=True)
class OrbitSegmentSpec:
    base: EpPoint
    start: int
    end: int

    def __post_init__(self):
        if self.start > self.end:
            raise InvalidSpec(f"segment start {self.start} exceeds end {self.end}")


# ========= CONSTRUCTION =========

def build_sft(matrix: Sequence[Sequence[int]], first_symbol: int = 0) -> SftSystem:
    """
    Validate a 0/1 adjacency matrix and wrap it as an SftSystem.

    Args:
        matrix: square 0/1 matrix, rows are sources
        first_symbol: label of row 0 (Example-style alphabets start at 1)
    """
    arr = np.asarray(matrix)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1] or arr.shape[0] == 0:
        raise NonSquare(arr.shape)
    if not np.isin(arr, (0, 1)).all():
        raise AlphabetMismatch("adjacency entries must be 0 or 1")
    for i, row in enumerate(arr):
        if not row.any():
            raise EmptyRowOrColumn(i + first_symbol, "row")
    for j, col in enumerate(arr.T):
        if not col.any():
            raise EmptyRowOrColumn(j + first_symbol, "column")
    adjacency = tuple(tuple(int(v) for v in row) for row in arr)
    return SftSystem(alphabet_size=arr.shape[0], adjacency=adjacency, first_symbol=first_symbol)


def _primitive_root(word: Word) -> Word:
    n = len(word)
    for d in range(1, n + 1):
        if n % d == 0 and word[:d] * (n // d) == word:
            return word[:d]
    return word


def canonicalize(x: EpPoint) -> EpPoint:
    """Primitive periods, maximal tails, minimal core; fully periodic points get offset 0."""
    left, right = _primitive_root(x.left), _primitive_root(x.right)
    x = EpPoint(left, x.core, right, x.offset)
    l, r = len(left), len(right)
    span = l * r // math.gcd(l, r)

    a = x.offset
    while a < x.end + span and x.symbol_at(a) == x.left_pattern(a):
        a += 1
    if a >= x.end + span:
        # the left pattern continues forever: periodic point
        period = tuple(x.right_pattern(k) for k in range(r))
        return EpPoint(period, (), period, 0)

    b = x.end
    while b > a and x.symbol_at(b - 1) == x.right_pattern(b - 1):
        b -= 1
    b = max(a, b)

    new_left = tuple(x.left_pattern(a + i) for i in range(l))
    new_right = tuple(x.right_pattern(b + i) for i in range(r))
    core = tuple(x.symbol_at(k) for k in range(a, b))
    return EpPoint(new_left, core, new_right, a)


def make_point(left: Sequence[int], core: Sequence[int], right: Sequence[int], offset: int = 0) -> EpPoint:
    if not left or not right:
        raise AlphabetMismatch("left and right periods must be nonempty words")
    return canonicalize(EpPoint(tuple(left), tuple(core), tuple(right), offset))


def periodic_point(word: Sequence[int], phase: int = 0) -> EpPoint:
    """The periodic point with x_k = word[(k + phase) % len(word)]."""
    w = tuple(word)
    rotated = w[phase % len(w):] + w[:phase % len(w)]
    return canonicalize(EpPoint(rotated, (), rotated, 0))


def splice_points(left_src: EpPoint, cut: int, bridge: Sequence[int], right_src: EpPoint) -> EpPoint:
    """
    The point equal to left_src up to position cut, then the bridge word,
    then right_src from position cut + len(bridge) + 1 on.
    """
    bridge = tuple(bridge)
    resume = cut + len(bridge) + 1
    lo = min(left_src.offset, cut + 1)
    hi = max(right_src.end, resume)
    core = []
    for k in range(lo, hi):
        if k <= cut:
            core.append(left_src.symbol_at(k))
        elif k < resume:
            core.append(bridge[k - cut - 1])
        else:
            core.append(right_src.symbol_at(k))
    new_left = tuple(left_src.left_pattern(lo + i) for i in range(len(left_src.left)))
    new_right = tuple(right_src.right_pattern(hi + i) for i in range(len(right_src.right)))
    return canonicalize(EpPoint(new_left, tuple(core), new_right, lo))


# ========= TEXT FORMAT =========

def _format_word(word: Word) -> str:
    if all(0 <= s < 10 for s in word):
        return "".join(str(s) for s in word)
    return ",".join(str(s) for s in word)


def _parse_word(text: str) -> Word:
    text = text.strip()
    if not text:
        return ()
    if "," in text:
        return tuple(int(s) for s in text.split(","))
    return tuple(int(s) for s in text)


def format_point(x: EpPoint) -> str:
    text = f"({_format_word(x.left)})^inf.{_format_word(x.core)}.({_format_word(x.right)})^inf"
    return text if x.offset == 0 else f"{text}@{x.offset}"


def parse_point(text: str) -> EpPoint:
    """
    Parse `(12)^inf.3.(34)^inf`, optionally suffixed with `@offset`.
    A bare `(12)^inf` is the periodic point with x_0 = 1.
    """
    raw = text.strip()
    offset = 0
    if "@" in raw:
        raw, _, off = raw.partition("@")
        offset = int(off)

    def tail(part: str) -> Word:
        part = part.strip()
        if not (part.startswith("(") and part.endswith(")^inf")):
            raise ParseError(0, f"malformed periodic tail '{part}' in '{text}'")
        return _parse_word(part[1:-5])

    try:
        parts = raw.split(".")
        if len(parts) == 1:
            word = tail(parts[0])
            return canonicalize(EpPoint(word, (), word, offset))
        if len(parts) != 3:
            raise ParseError(0, f"expected left.core.right, got '{text}'")
        return make_point(tail(parts[0]), _parse_word(parts[1]), tail(parts[2]), offset)
    except ValueError as e:
        raise ParseError(0, f"bad symbol in '{text}': {e}")


# ========= METRIC & SHIFT =========

def _horizon(*points: EpPoint) -> int:
    periods = [len(p.left) for p in points] + [len(p.right) for p in points]
    span = reduce(lambda a, b: a * b // math.gcd(a, b), periods, 1)
    reach = max(max(abs(p.offset), abs(p.end)) for p in points)
    return reach + span + 1


def _check_same(sft: Optional[SftSystem], *points: EpPoint) -> None:
    if sft is not None:
        for p in points:
            sft.check_point(p)


def sft_distance(x: EpPoint, y: EpPoint, sft: Optional[SftSystem] = None) -> float:
    """Return 2^(-k*) where k* is the least |k| with x_k != y_k; 0 when x == y."""
    _check_same(sft, x, y)
    for k in range(_horizon(x, y) + 1):
        if x.symbol_at(k) != y.symbol_at(k) or x.symbol_at(-k) != y.symbol_at(-k):
            return 2.0 ** (-k)
    return 0.0


def shift_apply(x: EpPoint, n: int) -> EpPoint:
    if n == 0:
        return x
    return canonicalize(EpPoint(x.left, x.core, x.right, x.offset - n))


def asymptotic_related(x: EpPoint, y: EpPoint, direction: str = "forward", sft: Optional[SftSystem] = None) -> Optional[int]:
    """
    Smallest K >= 0 with x_k = y_k for all k >= K (forward) or all k <= -K (backward).
    None when the tails never synchronise.
    """
    _check_same(sft, x, y)
    if direction not in ("forward", "backward"):
        raise ParamOutOfRange("direction", direction, "forward or backward")
    sign = 1 if direction == "forward" else -1
    h = _horizon(x, y)
    # beyond h both points are periodic with a common period dividing the span
    for k in range(h, 2 * h + 1):
        if x.symbol_at(sign * k) != y.symbol_at(sign * k):
            return None
    last = -1
    for k in range(h):
        if x.symbol_at(sign * k) != y.symbol_at(sign * k):
            last = k
    return last + 1


# ========= STRUCTURE =========

def transition_graph(sft: SftSystem) -> nx.DiGraph:
    graph = nx.from_numpy_array(sft.matrix, create_using=nx.DiGraph)
    return nx.relabel_nodes(graph, {i: i + sft.first_symbol for i in range(sft.alphabet_size)})


def graph_period(graph: nx.DiGraph) -> Optional[int]:
    """gcd of closed-walk lengths of a strongly connected digraph, from BFS levels."""
    if graph.number_of_nodes() == 0 or not nx.is_strongly_connected(graph):
        return None
    root = next(iter(graph.nodes))
    level = nx.single_source_shortest_path_length(graph, root)
    g = 0
    for u, v in graph.edges:
        g = math.gcd(g, abs(level[u] + 1 - level[v]))
    return g or None


def sft_structure(sft: SftSystem) -> Dict[str, object]:
    graph = transition_graph(sft)
    irreducible = nx.is_strongly_connected(graph)
    period = graph_period(graph) if irreducible else None
    mixing = bool(irreducible and period == 1)
    logger.debug("[SFT] irreducible=%s period=%s mixing=%s", irreducible, period, mixing)
    return {"irreducible": irreducible, "period": period, "mixing": mixing, "transitive": irreducible}


def mixing_time(sft: SftSystem) -> Optional[int]:
    """Least N with A^n > 0 for all n >= N, searched up to the Wielandt bound."""
    s = sft.alphabet_size
    cap = max(1, s * s - 2 * s + 2)
    a = sft.matrix.astype(bool)
    power = a.copy()
    for n in range(1, cap + 1):
        if power.all():
            return n
        power = (power.astype(np.int64) @ a.astype(np.int64)) > 0
    return None


def reachability_powers(sft: SftSystem, max_length: int) -> List[np.ndarray]:
    """Boolean exact-length reachability: powers[t][i, j] iff a walk of t edges joins i to j."""
    a = sft.matrix
    powers = [np.eye(sft.alphabet_size, dtype=bool)]
    for _ in range(max_length):
        powers.append((powers[-1].astype(np.int64) @ a) > 0)
    return powers


def bridge_word(sft: SftSystem, source: int, target: int, length: int,
                powers: Optional[List[np.ndarray]] = None) -> Optional[Word]:
    """
    Lexicographically smallest interior word w with source -> w -> target a path
    of exactly `length` edges, or None.
    """
    i, j = sft.index(source), sft.index(target)
    if length == 0:
        return () if i == j else None
    if powers is None or len(powers) <= length:
        powers = reachability_powers(sft, length)
    if not powers[length][i, j]:
        return None
    word = []
    current = i
    for remaining in range(length - 1, 0, -1):
        for nxt in range(sft.alphabet_size):
            if sft.adjacency[current][nxt] and powers[remaining][nxt, j]:
                word.append(nxt + sft.first_symbol)
                current = nxt
                break
    return tuple(word)


def enumerate_periodic(sft: SftSystem, max_period: int) -> List[EpPoint]:
    """All periodic points of period <= max_period, ordered by period then word."""
    points = []
    s = sft.alphabet_size
    for n in range(1, max_period + 1):
        stack: List[Word] = [(i,) for i in range(s)]
        found = []
        while stack:
            word = stack.pop()
            if len(word) == n:
                if sft.adjacency[word[-1]][word[0]] and _primitive_root(word) == word:
                    found.append(word)
                continue
            for nxt in range(s - 1, -1, -1):
                if sft.adjacency[word[-1]][nxt]:
                    stack.append(word + (nxt,))
        for word in sorted(found):
            symbols = tuple(w + sft.first_symbol for w in word)
            points.append(EpPoint(symbols, (), symbols, 0))
    return points


def trace_counts(sft: SftSystem, max_period: int) -> List[int]:
    a = sft.matrix
    power = np.eye(sft.alphabet_size, dtype=np.int64)
    counts = []
    for _ in range(max_period):
        power = power @ a
        counts.append(int(np.trace(power)))
    return counts


def cylinder_graph(sft: SftSystem, radius: int) -> Tuple[List[Word], sparse.csr_matrix]:
    """
    Cylinders of length 2*radius + 1 with the shift transitions between them
    (higher block presentation).
    """
    length = 2 * radius + 1
    words: List[Word] = [(i,) for i in range(sft.alphabet_size)]
    for _ in range(length - 1):
        words = [w + (n,) for w in words for n in range(sft.alphabet_size) if sft.adjacency[w[-1]][n]]
    index = {w: k for k, w in enumerate(words)}
    rows, cols = [], []
    for k, w in enumerate(words):
        for n in range(sft.alphabet_size):
            if sft.adjacency[w[-1]][n]:
                rows.append(k)
                cols.append(index[w[1:] + (n,)])
    adjacency = sparse.csr_matrix((np.ones(len(rows), dtype=np.int8), (rows, cols)), shape=(len(words), len(words)))
    labelled = [tuple(s + sft.first_symbol for s in w) for w in words]
    return labelled, adjacency


# ========= SU-INTERSECTION =========

def su_search_bound(sft: SftSystem, a: EpPoint, b: EpPoint) -> Tuple[int, int]:
    """First and last N swept by su_intersect."""
    start = max(1, a.end, -b.offset + 1)
    span = len(a.right) * len(b.left) // math.gcd(len(a.right), len(b.left))
    s = sft.alphabet_size
    return start, start + max(s * span + s, span * (s + 1) + s * s)


def su_intersect(sft: SftSystem, a: EpPoint, b: EpPoint) -> Optional[EpPoint]:
    """
    A point z in W^s(a) ∩ W^u(b): z_k = b_k for k <= -N, z_k = a_k for k >= N,
    joined by a bridge of 2N edges. None is certified over a full residue sweep.
    """
    _check_same(sft, a, b)
    if a == b:
        return a
    first, last = su_search_bound(sft, a, b)
    powers = reachability_powers(sft, 2 * last)
    for n in range(first, last + 1):
        word = bridge_word(sft, b.symbol_at(-n), a.symbol_at(n), 2 * n, powers)
        if word is not None:
            logger.debug("[SFT] su-intersection found at N=%d", n)
            return splice_points(b, -n, word, a)
    logger.debug("[SFT] no su-intersection for N in [%d, %d]", first, last)
    return None


def tail_points(x: EpPoint) -> Tuple[EpPoint, EpPoint]:
    """The periodic points x is backward and forward asymptotic to, aligned with x."""
    backward = canonicalize(EpPoint(x.left, (), x.left, x.offset))
    forward = canonicalize(EpPoint(x.right, (), x.right, x.end))
    return backward, forward


def orbit(x: EpPoint) -> List[EpPoint]:
    if not x.is_periodic:
        raise AlphabetMismatch("only periodic points have finite orbits")
    return [shift_apply(x, i) for i in range(len(x.right))]


def weak_su_intersect(sft: SftSystem, a: EpPoint, b: EpPoint) -> Optional[Tuple[EpPoint, EpPoint, EpPoint]]:
    """
    W^s(closure O(a)) ∩ W^u(closure O(b)) for eventually periodic a, b.

    The stable sets over the orbit closure of a are those of the periodic
    orbits at both ends of a (likewise for b), so the check is a finite
    disjunction. Returns (a', b', z) or None.
    """
    _check_same(sft, a, b)
    sources = {p for t in tail_points(a) for p in orbit(t)}
    targets = {p for t in tail_points(b) for p in orbit(t)}
    for a_prime in sorted(sources, key=format_point):
        for b_prime in sorted(targets, key=format_point):
            z = su_intersect(sft, a_prime, b_prime)
            if z is not None:
                return a_prime, b_prime, z
    return None


def first_su_failure(sft: SftSystem, max_period: int) -> Optional[Tuple[EpPoint, EpPoint]]:
    """First ordered pair of periodic points without su-intersection, or None."""
    points = enumerate_periodic(sft, max_period)
    for a in points:
        for b in points:
            if su_intersect(sft, a, b) is None:
                return a, b
    return None


# ========= SPECIFICATION =========

def agreement_radius(epsilon: float) -> int:
    """Smallest r >= 0 such that agreement on [-r, r] forces distance 2^-(r+1) < epsilon."""
    r = 0
    while 2.0 ** (-(r + 1)) >= epsilon:
        r += 1
    return r


def specification_trace(sft: SftSystem, segments: List[OrbitSegmentSpec], gap: int) -> EpPoint:
    """
    One point agreeing with every segment's base on [start, end].

    Consecutive segments are joined with a bridge of exactly the gap between
    them; the tails continue the first and last base points, which are
    admissible already.
    """
    n_mix = mixing_time(sft)
    if n_mix is None:
        raise NotMixing()
    if gap < n_mix:
        raise GapTooSmall(0, gap, n_mix)
    if not segments:
        raise InvalidSpec("at least one orbit segment is required")
    ordered = sorted(segments, key=lambda seg: seg.start)
    for i in range(1, len(ordered)):
        actual = ordered[i].start - ordered[i - 1].end
        if actual < gap:
            raise GapTooSmall(i, actual, gap)

    z = ordered[0].base
    for prev, seg in zip(ordered, ordered[1:]):
        length = seg.start - prev.end
        word = bridge_word(sft, z.symbol_at(prev.end), seg.base.symbol_at(seg.start), length)
        # length >= mixing time, so A^length > 0 and the bridge always exists
        z = splice_points(z, prev.end, word, seg.base)
    logger.debug("[SFT] traced %d segments", len(ordered))
    return z
