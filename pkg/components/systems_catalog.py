"""
Systems catalog module.
Concrete DynSystem backends (shifts of finite type, hyperbolic toral maps and
the finite/countable model systems) with their known property profiles.
"""
import logging
import math
from fractions import Fraction
from typing import Any, Dict, List, Optional

import numpy as np
from pydantic import BaseModel
from scipy import optimize, sparse

from components import hyperbolic_shadowing as hs
from components import symbolic_dynamics as sd
from components.chain_engine import ChainGraph, GridSystem, build_chain_graph
from components.property_suite import DynSystem
from config import LADDER_N_MAX
from exceptions import InvalidSpec, ParamOutOfRange, UnknownKind

logger = logging.getLogger(__name__)

EXAMPLE3_MATRIX = ((0, 1, 0, 0), (1, 0, 1, 0), (0, 1, 0, 1), (0, 0, 1, 0))
GOLDEN_MEAN_MATRIX = ((1, 1), (1, 0))
CAT_MATRIX = ((2, 1), (1, 1))

KINDS = ("example3_sft", "full_shift", "golden_mean_sft", "ladder", "cat_map", "toral",
         "rotation", "morse_smale_circle", "cantor_identity")


# ========= SPECS =========

def parse_fraction(text: Any) -> Fraction:
    try:
        return Fraction(str(text).strip())
    except (ValueError, ZeroDivisionError):
        raise InvalidSpec(f"not a rational number: {text!r}")


class SystemSpec(BaseModel):
    kind: str
    s: Optional[int] = None
    matrix: Optional[List[List[int]]] = None
    alpha: Optional[str] = None
    k: Optional[int] = None
    depth: Optional[int] = None
    n_max: Optional[int] = None
    amplitude: Optional[float] = None

    def check(self) -> "SystemSpec":
        """Raise UnknownKind / ParamOutOfRange / InvalidSpec for an unusable spec."""
        if self.kind not in KINDS:
            raise UnknownKind(self.kind)
        if self.kind == "full_shift" and (self.s is None or self.s < 1):
            raise ParamOutOfRange("s", self.s, "positive integer")
        if self.kind == "toral" and not self.matrix:
            raise InvalidSpec("toral systems need a matrix")
        if self.kind == "rotation":
            if self.alpha is None:
                raise InvalidSpec("rotation needs alpha")
            alpha = parse_fraction(self.alpha)
            if not 0 <= alpha < 1:
                raise ParamOutOfRange("alpha", self.alpha, "[0, 1)")
        if self.kind == "morse_smale_circle":
            if self.k is None or self.k < 1:
                raise ParamOutOfRange("k", self.k, "positive integer")
            if self.amplitude is not None and not 0 < self.amplitude < 1:
                raise ParamOutOfRange("amplitude", self.amplitude, "(0, 1)")
        if self.kind == "cantor_identity" and (self.depth is None or not 1 <= self.depth <= 16):
            raise ParamOutOfRange("depth", self.depth, "integer in [1, 16]")
        if self.kind == "ladder" and self.n_max is not None and self.n_max < 3:
            raise ParamOutOfRange("n_max", self.n_max, "integer >= 3")
        return self

    @property
    def label(self) -> str:
        params = {k: v for k, v in self.model_dump(exclude_none=True).items() if k != "kind"}
        if not params:
            return self.kind
        return self.kind + "(" + ", ".join(f"{k}={v}" for k, v in sorted(params.items())) + ")"


class FactEntry(BaseModel):
    value: bool
    provenance: str
    anchor: str


class FactSheet(BaseModel):
    kind: str
    entries: Dict[str, FactEntry]


# ========= SHIFTS OF FINITE TYPE =========

class SftDyn(DynSystem):
    family = "sft"
    exact_orbits = True
    shadowing_capable = True
    has_relation_oracle = True

    def __init__(self, sft: sd.SftSystem, name: str = "sft"):
        self.sft = sft
        self.name = name

    def evaluate(self, x: sd.EpPoint) -> sd.EpPoint:
        return sd.shift_apply(x, 1)

    def evaluate_inverse(self, x: sd.EpPoint) -> sd.EpPoint:
        return sd.shift_apply(x, -1)

    def iterate(self, x: sd.EpPoint, n: int) -> sd.EpPoint:
        return sd.shift_apply(x, n)

    def distance(self, x: sd.EpPoint, y: sd.EpPoint) -> float:
        return sd.sft_distance(x, y)

    def same(self, x: sd.EpPoint, y: sd.EpPoint) -> bool:
        return x == y

    def candidates(self, mesh: float) -> List[sd.EpPoint]:
        return sd.enumerate_periodic(self.sft, 4)

    def periodic_points(self, max_period: int) -> List[sd.EpPoint]:
        return sd.enumerate_periodic(self.sft, max_period)

    def cell_graph(self, mesh: float) -> sparse.csr_matrix:
        _, adjacency = sd.cylinder_graph(self.sft, sd.agreement_radius(mesh))
        return adjacency

    def stable_related(self, x: sd.EpPoint, y: sd.EpPoint) -> bool:
        return sd.asymptotic_related(x, y, "forward", self.sft) is not None

    def unstable_related(self, x: sd.EpPoint, y: sd.EpPoint) -> bool:
        return sd.asymptotic_related(x, y, "backward", self.sft) is not None

    def parse_point(self, text: str) -> sd.EpPoint:
        x = sd.parse_point(text)
        self.sft.check_point(x)
        return x

    def format_point(self, x: sd.EpPoint) -> str:
        return sd.format_point(x)


# ========= TORAL AUTOMORPHISMS =========

class ToralDyn(DynSystem):
    family = "toral"
    metric = "torus"
    exact_orbits = True
    shadowing_capable = True
    has_relation_oracle = True

    def __init__(self, toral: hs.ToralAuto, name: str = "toral"):
        self.toral = toral
        self.name = name
        self._graphs: Dict[float, ChainGraph] = {}

    @property
    def constant(self) -> float:
        return hs.shadowing_constant(self.toral)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return self.toral.evaluate(x)

    def evaluate_inverse(self, x: np.ndarray) -> np.ndarray:
        return self.toral.evaluate_inverse(x)

    def evaluate_coords(self, pts: np.ndarray) -> np.ndarray:
        return self.toral.evaluate(pts)

    def iterate(self, x: np.ndarray, n: int) -> np.ndarray:
        return hs.exact_iterate(self.toral, x, n)

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(hs.torus_distance(x, y))

    def same(self, x: np.ndarray, y: np.ndarray) -> bool:
        return bool(np.array_equal(np.asarray(x, dtype=float), np.asarray(y, dtype=float)))

    def trajectory(self, x: np.ndarray, start: int, stop: int) -> np.ndarray:
        back, forward = max(0, -start), max(0, stop)
        rows = hs.exact_orbit(self.toral, x, back, forward)
        return rows[start + back:stop + back + 1]

    def _cells(self, mesh: float) -> int:
        return max(1, math.ceil(math.sqrt(self.toral.dim) / (2.0 * mesh)))

    def sample(self, mesh: float) -> np.ndarray:
        return self.centers(self._cells(mesh))

    def centers(self, cells: int) -> np.ndarray:
        axis = (np.arange(cells) + 0.5) / cells
        mesh = np.meshgrid(*([axis] * self.toral.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def grid(self, mesh: Optional[float] = None, cells: Optional[int] = None) -> GridSystem:
        """Cell centres; `cells` per axis overrides the count derived from mesh."""
        if cells is None:
            cells = self._cells(mesh)
        d = self.toral.dim
        return GridSystem.from_map(self.centers(cells), self.toral.evaluate, "torus",
                                   math.sqrt(d) / (2.0 * cells), float(np.linalg.norm(self.toral.matrix, 2)))

    def lemma_graph(self, delta: float) -> ChainGraph:
        if delta not in self._graphs:
            cells = math.ceil(math.sqrt(self.toral.dim) / (0.94 * delta))
            self._graphs[delta] = build_chain_graph(self.grid(cells=cells), delta)
        return self._graphs[delta]

    def shadowing_delta(self, epsilon: float) -> float:
        return min(0.999 * epsilon / self.constant, 0.2)

    def shadow_points(self, points: np.ndarray, delta: float, origin: int = 0) -> hs.ShadowResult:
        return hs.shadow(self.toral, hs.build_pseudo_orbit(self.toral, points, delta, origin))

    def certificate_margin(self, inconsistency: float) -> float:
        return self.constant * inconsistency

    def stable_related(self, x: np.ndarray, y: np.ndarray) -> bool:
        return hs.leaf_related(self.toral, x, y, "stable")

    def unstable_related(self, x: np.ndarray, y: np.ndarray) -> bool:
        return hs.leaf_related(self.toral, x, y, "unstable")

    def periodic_points(self, max_period: int) -> List[np.ndarray]:
        """Dyadic points of denominator <= 4 with exact period <= max_period."""
        found = []
        for point in self.centers(4) - 0.125:
            orbit = hs.exact_orbit(self.toral, point, 0, max_period)
            if any(np.array_equal(orbit[j], orbit[0]) for j in range(1, max_period + 1)):
                found.append(orbit[0])
        return found


# ========= LADDER =========

def _ladder_index(x: Fraction) -> int:
    if x <= Fraction(1, 2):
        return 2 - int(1 / x)
    return int(1 / (1 - x)) - 2


def _ladder_point(k: int) -> Fraction:
    if k <= 0:
        return Fraction(1, 2 - k)
    return 1 - Fraction(1, k + 2)


def _ladder_values(ks: np.ndarray) -> np.ndarray:
    ks = ks.astype(float)
    with np.errstate(divide="ignore"):
        return np.where(ks <= 0, 1.0 / (2.0 - ks), 1.0 - 1.0 / (ks + 2.0))


class LadderSystem(DynSystem):
    """
    X = {0, 1} ∪ {1/n : n >= 2} ∪ {1 - 1/n : n >= 3} with 0, 1 fixed and every
    other point sent to its right neighbour. Points are exact Fractions;
    n_max only bounds the enumeration used for samples and candidate pools.
    """
    family = "ladder"
    exact_orbits = True
    has_relation_oracle = True

    def __init__(self, n_max: int = LADDER_N_MAX):
        self.n_max = n_max
        self.name = "ladder"

    def check_member(self, x: Fraction) -> Fraction:
        x = Fraction(x)
        if x in (0, 1):
            return x
        if 0 < x <= Fraction(1, 2) and x.numerator == 1 and x.denominator >= 2:
            return x
        if Fraction(1, 2) < x < 1 and (1 - x).numerator == 1 and (1 - x).denominator >= 3:
            return x
        raise InvalidSpec(f"{x} is not a point of the ladder space")

    def iterate(self, x: Fraction, n: int) -> Fraction:
        if x in (0, 1):
            return x
        return _ladder_point(_ladder_index(x) + n)

    def evaluate(self, x: Fraction) -> Fraction:
        return self.iterate(x, 1)

    def evaluate_inverse(self, x: Fraction) -> Fraction:
        return self.iterate(x, -1)

    def distance(self, x: Fraction, y: Fraction) -> float:
        return float(abs(Fraction(x) - Fraction(y)))

    def same(self, x: Fraction, y: Fraction) -> bool:
        return Fraction(x) == Fraction(y)

    def coords(self, x: Fraction) -> np.ndarray:
        return np.array([float(x)])

    def trajectory(self, x: Fraction, start: int, stop: int) -> np.ndarray:
        count = stop - start + 1
        if x in (0, 1):
            return np.full((count, 1), float(x))
        ks = _ladder_index(x) + np.arange(start, stop + 1)
        return _ladder_values(ks)[:, None]

    def enumeration(self) -> List[Fraction]:
        pts = {Fraction(0), Fraction(1)}
        pts.update(Fraction(1, n) for n in range(2, self.n_max + 1))
        pts.update(1 - Fraction(1, n) for n in range(3, self.n_max + 1))
        return sorted(pts)

    def candidates(self, mesh: float) -> List[Fraction]:
        return self.enumeration()

    def sample(self, mesh: float) -> np.ndarray:
        return np.array([[float(p)] for p in self.enumeration()])

    def evaluate_coords(self, pts: np.ndarray) -> np.ndarray:
        x = np.asarray(pts, dtype=float).ravel()
        fixed = (x == 0.0) | (x == 1.0)
        safe = np.where(fixed, 0.5, x)
        with np.errstate(divide="ignore"):
            ks = np.where(safe <= 0.5, 2 - np.rint(1.0 / safe), np.rint(1.0 / (1.0 - safe)) - 2)
        return np.where(fixed, x, _ladder_values(ks + 1)).reshape(-1, 1)

    def periodic_points(self, max_period: int) -> List[Fraction]:
        return [Fraction(0), Fraction(1)]

    def stable_related(self, x: Fraction, y: Fraction) -> bool:
        # forward orbits of every point but 0 converge to 1
        return (Fraction(x) == 0) == (Fraction(y) == 0)

    def unstable_related(self, x: Fraction, y: Fraction) -> bool:
        return (Fraction(x) == 1) == (Fraction(y) == 1)

    def parse_point(self, text: str) -> Fraction:
        return self.check_member(parse_fraction(text))

    def format_point(self, x: Fraction) -> str:
        return str(Fraction(x))


# ========= CIRCLE MAPS =========

class RotationSystem(DynSystem):
    """Rotation by a rational alpha; large denominators stand in for irrational angles."""
    family = "rotation"
    metric = "circle"
    has_relation_oracle = True

    def __init__(self, alpha: Fraction):
        self.alpha = Fraction(alpha)
        self.name = f"rotation({self.alpha})"

    @property
    def irrational_proxy(self) -> bool:
        return self.alpha.denominator >= 10 ** 6

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return hs.into_unit_box(np.asarray(x, dtype=float) + float(self.alpha))

    def evaluate_inverse(self, x: np.ndarray) -> np.ndarray:
        return hs.into_unit_box(np.asarray(x, dtype=float) - float(self.alpha))

    def evaluate_coords(self, pts: np.ndarray) -> np.ndarray:
        return self.evaluate(pts)

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(hs.torus_distance(np.atleast_1d(x), np.atleast_1d(y)))

    def sample(self, mesh: float) -> np.ndarray:
        return (np.arange(math.ceil(1.0 / mesh)) / math.ceil(1.0 / mesh))[:, None]

    def stable_related(self, x: np.ndarray, y: np.ndarray) -> bool:
        return self.same(x, y)

    def unstable_related(self, x: np.ndarray, y: np.ndarray) -> bool:
        return self.same(x, y)


class MorseSmaleCircle(DynSystem):
    """
    x -> x + a/(2 pi k) sin(2 pi k x) on the circle: repellers at j/k,
    attractors at (2j+1)/(2k).
    """
    family = "morse_smale"
    metric = "circle"
    has_relation_oracle = True

    def __init__(self, k: int, amplitude: float = 0.5):
        self.k = k
        self.amplitude = amplitude
        self.name = f"morse_smale_circle({k})"

    def _lift(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x + self.amplitude / (2 * math.pi * self.k) * np.sin(2 * math.pi * self.k * x)

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return hs.into_unit_box(self._lift(x))

    def evaluate_coords(self, pts: np.ndarray) -> np.ndarray:
        return self.evaluate(pts)

    def _invert(self, y: float) -> float:
        reach = self.amplitude / (2 * math.pi * self.k) + 1e-12
        return optimize.brentq(lambda x: float(self._lift(x)) - y, y - reach, y + reach, xtol=1e-15)

    def evaluate_inverse(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return hs.into_unit_box(np.vectorize(self._invert)(x))

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(hs.torus_distance(np.atleast_1d(x), np.atleast_1d(y)))

    def sample(self, mesh: float) -> np.ndarray:
        n = math.ceil(1.0 / mesh)
        return (np.arange(n) / n)[:, None]

    def repellers(self) -> List[float]:
        return [j / self.k for j in range(self.k)]

    def attractors(self) -> List[float]:
        return [(2 * j + 1) / (2 * self.k) for j in range(self.k)]

    def periodic_points(self, max_period: int) -> List[np.ndarray]:
        return [np.array([v]) for v in sorted(self.repellers() + self.attractors())]

    def _limit(self, x: np.ndarray, forward: bool) -> float:
        v = float(np.mod(np.atleast_1d(x)[0], 1.0)) * 2 * self.k
        nearest = round(v)
        if abs(v - nearest) < 1e-12:
            return (nearest % (2 * self.k)) / (2 * self.k)
        cell = math.floor(v)
        # odd half-cell indices are attractors
        odd = cell if cell % 2 == 1 else cell + 1
        even = cell if cell % 2 == 0 else cell + 1
        target = odd if forward else even
        return (target % (2 * self.k)) / (2 * self.k)

    def stable_related(self, x: np.ndarray, y: np.ndarray) -> bool:
        return self._limit(x, True) == self._limit(y, True)

    def unstable_related(self, x: np.ndarray, y: np.ndarray) -> bool:
        return self._limit(x, False) == self._limit(y, False)


# ========= CANTOR SET =========

class CantorIdentity(DynSystem):
    """Identity on the 2^depth left endpoints of the depth-level ternary Cantor intervals."""
    family = "cantor_identity"
    exact_orbits = True
    has_relation_oracle = True

    def __init__(self, depth: int):
        self.depth = depth
        self.name = f"cantor_identity({depth})"

    @property
    def resolution(self) -> float:
        return 3.0 ** (-self.depth) / 2.0

    def points(self) -> np.ndarray:
        values = [0.0]
        for level in range(1, self.depth + 1):
            values = values + [v + 2.0 * 3.0 ** (-level) for v in values]
        return np.array(sorted(values))[:, None]

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        return np.array(x, dtype=float, copy=True)

    def evaluate_inverse(self, x: np.ndarray) -> np.ndarray:
        return np.array(x, dtype=float, copy=True)

    def evaluate_coords(self, pts: np.ndarray) -> np.ndarray:
        return np.array(pts, dtype=float, copy=True)

    def iterate(self, x: np.ndarray, n: int) -> np.ndarray:
        return np.array(x, dtype=float, copy=True)

    def distance(self, x: np.ndarray, y: np.ndarray) -> float:
        return float(np.abs(np.atleast_1d(x) - np.atleast_1d(y)).max())

    def sample(self, mesh: float) -> np.ndarray:
        return self.points()

    def stable_related(self, x: np.ndarray, y: np.ndarray) -> bool:
        return self.same(x, y)

    def unstable_related(self, x: np.ndarray, y: np.ndarray) -> bool:
        return self.same(x, y)


# ========= FACTORY =========

def make_system(spec: SystemSpec) -> DynSystem:
    spec.check()
    kind = spec.kind
    if kind == "example3_sft":
        return SftDyn(sd.build_sft(EXAMPLE3_MATRIX, first_symbol=1), "example3_sft")
    if kind == "full_shift":
        return SftDyn(sd.build_sft(np.ones((spec.s, spec.s), dtype=int)), spec.label)
    if kind == "golden_mean_sft":
        return SftDyn(sd.build_sft(GOLDEN_MEAN_MATRIX), "golden_mean_sft")
    if kind == "ladder":
        return LadderSystem(spec.n_max or LADDER_N_MAX)
    if kind == "cat_map":
        return ToralDyn(hs.build_toral(CAT_MATRIX), "cat_map")
    if kind == "toral":
        return ToralDyn(hs.build_toral(spec.matrix), spec.label)
    if kind == "rotation":
        system = RotationSystem(parse_fraction(spec.alpha))
        if not system.irrational_proxy:
            logger.info("[Catalog] rotation by %s has a small denominator: rational dynamics", system.alpha)
        return system
    if kind == "morse_smale_circle":
        return MorseSmaleCircle(spec.k, spec.amplitude or 0.5)
    return CantorIdentity(spec.depth)


def _fact(value: bool, provenance: str, anchor: str) -> FactEntry:
    return FactEntry(value=value, provenance=provenance, anchor=anchor)


_SFT_MIXING = {
    "shadowing": _fact(True, "analytic", "every shift of finite type has shadowing"),
    "transitive": _fact(True, "analytic", "irreducible adjacency matrix"),
    "mixing": _fact(True, "analytic", "aperiodic adjacency matrix"),
    "chain_transitive": _fact(True, "analytic", "transitive systems are chain transitive"),
    "barycenter_on_Per": _fact(True, "analytic", "mixing shifts glue any two periodic orbits"),
    "su_intersecting_on_Per": _fact(True, "derived", "bridge words exist at every length beyond the mixing time"),
    "expansive": _fact(True, "analytic", "distinct sequences differ at some coordinate"),
}

_FACTS: Dict[str, Dict[str, FactEntry]] = {
    "example3_sft": {
        "shadowing": _fact(True, "analytic", "shift of finite type, hence shadowing"),
        "transitive": _fact(True, "analytic", "the 4-symbol path-graph matrix is irreducible"),
        "mixing": _fact(False, "analytic", "irreducible but not aperiodic: all cycles have even length"),
        "chain_transitive": _fact(True, "analytic", "transitive systems are chain transitive"),
        "barycenter_on_Per": _fact(True, "analytic", "backward trace of p and forward trace of q join with a parity-matched bridge"),
        "su_intersecting_on_Per": _fact(False, "derived", "(12)^inf against its shift: every bridge has even length across classes"),
        "su_intersecting_on_X": _fact(False, "analytic", "the parity obstruction blocks W^s(a) ∩ W^u(b)"),
        "expansive": _fact(True, "analytic", "distinct sequences differ at some coordinate"),
    },
    "full_shift": _SFT_MIXING,
    "golden_mean_sft": _SFT_MIXING,
    "ladder": {
        "shadowing": _fact(True, "analytic", "monotone transit between two fixed points; checked at resolution"),
        "transitive": _fact(True, "analytic", "two-sided transitivity: every pair of points lies on a common ordered transit"),
        "mixing": _fact(False, "derived", "no orbit returns from near 1 to near 0"),
        "chain_transitive": _fact(False, "derived", "small chains cannot leave a neighbourhood of the fixed point 1"),
        "barycenter_on_Per": _fact(False, "analytic", "backward trace near 1 cannot be followed by a forward trace near 0"),
    },
    "cat_map": {
        "shadowing": _fact(True, "analytic", "hyperbolic toral automorphisms are Anosov"),
        "transitive": _fact(True, "analytic", "transitive Anosov diffeomorphism"),
        "mixing": _fact(True, "analytic", "hyperbolic toral automorphisms are mixing"),
        "chain_transitive": _fact(True, "analytic", "transitive systems are chain transitive"),
        "barycenter_on_Per": _fact(True, "derived", "gluing orbit construction on shadowed chains"),
        "su_intersecting_on_X": _fact(True, "analytic", "stable and unstable lines have irrational slopes and always cross"),
        "expansive": _fact(True, "analytic", "hyperbolic linear maps are expansive"),
    },
    "rotation": {
        "shadowing": _fact(False, "analytic", "irrational rotations are chain transitive without shadowing"),
        "transitive": _fact(True, "analytic", "irrational rotations are minimal"),
        "chain_transitive": _fact(True, "analytic", "minimal isometry"),
        "expansive": _fact(False, "analytic", "isometries are never expansive"),
    },
    "morse_smale_circle": {
        "transitive": _fact(False, "analytic", "orbits flow from repellers to attractors"),
        "chain_transitive": _fact(False, "analytic", "chain recurrent set is the finite fixed-point set"),
        "barycenter_on_Per": _fact(False, "analytic", "no point stays near an attractor in the past and reaches a repeller in the future"),
    },
    "cantor_identity": {
        "shadowing": _fact(True, "analytic", "identity on a totally disconnected space; checked at resolution"),
        "transitive": _fact(False, "trivial", "the identity fixes every open set"),
        "chain_transitive": _fact(False, "analytic", "gaps of the Cantor set block small chains"),
        "su_intersecting_on_X": _fact(False, "analytic", "distal: W^s(a) = W^u(a) = {a}"),
        "expansive": _fact(False, "trivial", "neighbouring points never separate under the identity"),
        "distal": _fact(True, "trivial", "the identity is distal"),
    },
}


def expected_facts(spec: SystemSpec) -> FactSheet:
    spec.check()
    entries = _FACTS.get(spec.kind)
    if entries is None:
        # generic hyperbolic toral matrix shares the cat map profile
        entries = _FACTS["cat_map"]
    return FactSheet(kind=spec.kind, entries=dict(entries))
