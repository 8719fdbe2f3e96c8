"""
Hyperbolic shadowing module.
Linear Anosov models on the d-torus: stable/unstable splitting, constructive
shadowing of pseudo-orbits, expansivity and su-intersection on the torus.
"""
import logging
import math
from dataclasses import dataclass
from decimal import ROUND_FLOOR, Decimal, localcontext
from fractions import Fraction
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg

from config import (
    LEAF_TOLERANCE,
    ORBIT_CONSISTENCY_TOLERANCE,
    SPLIT_TOLERANCE,
    SU_DECAY_WINDOW,
    UNIT_CIRCLE_TOLERANCE,
)
from exceptions import (
    ChainStepViolated,
    EigenvalueOnUnitCircle,
    LiftAmbiguous,
    NonSquare,
    NotUnimodular,
    ParamOutOfRange,
)

logger = logging.getLogger(__name__)

IntMatrix = Tuple[Tuple[int, ...], ...]

# nearest lift first, then its eight neighbours
LIFT_SHIFTS = ((0, 0), (-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 1), (1, -1), (1, 0), (1, 1))


# ========= TYPES =========

@dataclass(frozen=True, eq=False)
class ToralAuto:
    matrix: np.ndarray
    inverse: np.ndarray
    stable_basis: np.ndarray
    unstable_basis: np.ndarray
    projector: np.ndarray
    lambda_s: float
    lambda_u_inv: float
    mode: str
    condition: float
    kappa: float
    stable_sum: float
    unstable_sum: float

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def stable_dim(self) -> int:
        return self.stable_basis.shape[1]

    @property
    def stable_block(self) -> np.ndarray:
        return self.projector[:self.stable_dim] @ self.matrix @ self.stable_basis

    @property
    def unstable_block(self) -> np.ndarray:
        return self.projector[self.stable_dim:] @ self.matrix @ self.unstable_basis

    def evaluate(self, x: np.ndarray) -> np.ndarray:
        """One float step on points of shape (d,) or (n, d)."""
        return into_unit_box(np.asarray(x, dtype=float) @ self.matrix.T)

    def evaluate_inverse(self, x: np.ndarray) -> np.ndarray:
        return into_unit_box(np.asarray(x, dtype=float) @ self.inverse.T)


@dataclass(frozen=True, eq=False)
class PseudoOrbit:
    points: np.ndarray
    delta: float
    origin: int = 0

    @property
    def length(self) -> int:
        return len(self.points) - 1


@dataclass(frozen=True, eq=False)
class ShadowResult:
    z0: np.ndarray
    orbit: np.ndarray
    errors: np.ndarray
    bound: float

    @property
    def max_error(self) -> float:
        return float(self.errors.max()) if len(self.errors) else 0.0


@dataclass(frozen=True, eq=False)
class TwoSidedLimitResult:
    z0: np.ndarray
    shadow: ShadowResult
    steps_decay: bool
    decay_verified: bool


# ========= TORUS HELPERS =========

def into_unit_box(x: np.ndarray) -> np.ndarray:
    x = np.mod(x, 1.0)
    return np.where(x >= 1.0, 0.0, x)


def nearest_lift(v: np.ndarray) -> np.ndarray:
    """Representative of v mod Z^d in (-1/2, 1/2]."""
    v = np.asarray(v, dtype=float)
    return v - np.ceil(v - 0.5)


def torus_distance(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.norm(nearest_lift(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)), axis=-1)


def _int_rows(m: np.ndarray) -> IntMatrix:
    return tuple(tuple(int(v) for v in row) for row in m)


def _int_matmul(a: IntMatrix, b: IntMatrix) -> IntMatrix:
    cols = list(zip(*b))
    return tuple(tuple(sum(x * y for x, y in zip(row, col)) for col in cols) for row in a)


def int_matrix_power(m: IntMatrix, n: int) -> IntMatrix:
    size = len(m)
    result = tuple(tuple(int(i == j) for j in range(size)) for i in range(size))
    base = m
    while n > 0:
        if n & 1:
            result = _int_matmul(result, base)
        base = _int_matmul(base, base)
        n >>= 1
    return result


def exact_orbit(t: ToralAuto, x: Sequence[float], back: int, forward: int) -> np.ndarray:
    """
    T^j(x) for j in [-back, forward], iterated exactly on the dyadic rationals
    the float coordinates of x represent. Row i holds T^(i - back)(x).
    """
    ratios = [Fraction(float(v)) for v in x]
    den = max(r.denominator for r in ratios)
    start = [int(r * den) % den for r in ratios]

    def run(rows: IntMatrix, steps: int) -> List[List[float]]:
        out, cur = [], list(start)
        for _ in range(steps):
            cur = [sum(a * c for a, c in zip(row, cur)) % den for row in rows]
            out.append([c / den for c in cur])
        return out

    backward = run(_int_rows(t.inverse), back)[::-1]
    forward_part = run(_int_rows(t.matrix), forward)
    origin = [[c / den for c in start]]
    return np.array(backward + origin + forward_part, dtype=float).reshape(back + forward + 1, len(ratios))


def exact_iterate(t: ToralAuto, x: Sequence[float], n: int) -> np.ndarray:
    ratios = [Fraction(float(v)) for v in x]
    den = max(r.denominator for r in ratios)
    nums = [int(r * den) % den for r in ratios]
    rows = int_matrix_power(_int_rows(t.matrix if n >= 0 else t.inverse), abs(n))
    return np.array([(sum(a * c for a, c in zip(row, nums)) % den) / den for row in rows])


# ========= CONSTRUCTION =========

def _geometric_sum(block: np.ndarray, first: int) -> Tuple[float, float]:
    """sum_{m >= first} ||block^m||_inf and the largest ||block^m|| / rho^m seen."""
    rho = max(abs(np.linalg.eigvals(block)))
    total, transient = 0.0, 1.0
    power = np.linalg.matrix_power(block, first)
    for m in range(first, 100_000):
        norm = np.linalg.norm(power, np.inf)
        total += norm
        if rho > 0:
            transient = max(transient, norm / rho ** m)
        if norm < 1e-17:
            break
        power = power @ block
    return total, transient


def build_toral(matrix: Sequence[Sequence[int]]) -> ToralAuto:
    """
    Validate an integer matrix as a hyperbolic toral automorphism and compute
    its splitting, rates and shadowing constants.
    """
    arr = np.asarray(matrix, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
        raise NonSquare(arr.shape)
    if not np.array_equal(arr, np.round(arr)):
        raise NotUnimodular("non-integer entries")
    det = int(round(np.linalg.det(arr)))
    if abs(det) != 1:
        raise NotUnimodular(det)

    eigvals, eigvecs = np.linalg.eig(arr)
    moduli = np.abs(eigvals)
    on_circle = np.abs(moduli - 1.0) < UNIT_CIRCLE_TOLERANCE
    if on_circle.any():
        raise EigenvalueOnUnitCircle(float(moduli[on_circle][0]))

    int_matrix = arr.astype(np.int64)
    inverse = np.rint(np.linalg.inv(arr)).astype(np.int64)
    if not np.array_equal(int_matrix @ inverse, np.eye(len(arr), dtype=np.int64)):
        raise NotUnimodular(det)

    real = np.all(np.abs(eigvals.imag) < SPLIT_TOLERANCE)
    if real and np.linalg.cond(eigvecs.real) < 1e8:
        mode = "eigen"
        vecs = eigvecs.real / np.linalg.norm(eigvecs.real, axis=0)
        stable = vecs[:, moduli < 1]
        unstable = vecs[:, moduli > 1]
    else:
        mode = "schur"
        _, zs, sdim = linalg.schur(arr, output="real", sort="iuc")
        _, zu, udim = linalg.schur(arr, output="real", sort="ouc")
        stable, unstable = zs[:, :sdim], zu[:, :udim]

    basis = np.hstack([stable, unstable])
    condition = float(np.linalg.cond(basis))
    projector = np.linalg.inv(basis)
    lambda_s = float(moduli[moduli < 1].max())
    lambda_u_inv = float((1.0 / moduli[moduli > 1]).max())

    ks = stable.shape[1]
    b_s = projector[:ks] @ arr @ stable
    b_u_inv = np.linalg.inv(projector[ks:] @ arr @ unstable)
    if mode == "eigen":
        stable_sum = 1.0 / (1.0 - lambda_s)
        unstable_sum = 1.0 / (1.0 - lambda_u_inv)
    else:
        stable_sum, transient_s = _geometric_sum(b_s, 0)
        unstable_sum, transient_u = _geometric_sum(b_u_inv, 1)
        logger.info("[Toral] non-diagonalizable splitting, transient factors %.3g / %.3g", transient_s, transient_u)

    row_norm = float(np.linalg.norm(projector, axis=1).max())
    kappa = row_norm * max(ks, unstable.shape[1])
    t = ToralAuto(int_matrix, inverse, stable, unstable, projector, lambda_s, lambda_u_inv,
                  mode, condition, kappa, stable_sum, unstable_sum)
    logger.info("[Toral] built %dx%d (%s), lambda_s=%.6f, cond=%.3g", len(arr), len(arr), mode, lambda_s, condition)
    return t


def hyperbolic_split(t: ToralAuto, v: Sequence[float]) -> Tuple[np.ndarray, np.ndarray]:
    coeffs = t.projector @ np.asarray(v, dtype=float)
    ks = t.stable_dim
    return t.stable_basis @ coeffs[:ks], t.unstable_basis @ coeffs[ks:]


def shadowing_constant(t: ToralAuto) -> float:
    """
    C with d(z_n, x_n) <= C * delta for the shadow of any delta-pseudo-orbit.
    Max-norm in splitting coordinates, converted to the Euclidean torus metric by kappa.
    """
    return t.kappa * (t.stable_sum + t.unstable_sum)


def expansivity_constant(t: ToralAuto) -> float:
    return 0.25 / t.kappa


# ========= PSEUDO-ORBITS =========

def step_errors(t: ToralAuto, points: np.ndarray) -> np.ndarray:
    points = np.asarray(points, dtype=float)
    return torus_distance(t.evaluate(points[:-1]), points[1:])


def build_pseudo_orbit(t: ToralAuto, points: np.ndarray, delta: Optional[float] = None, origin: int = 0) -> PseudoOrbit:
    """
    Validate a delta-pseudo-orbit. With delta omitted the realised maximum step
    error is used (strictly above it).
    """
    points = into_unit_box(np.atleast_2d(np.asarray(points, dtype=float)))
    errors = step_errors(t, points)
    worst = float(errors.max()) if len(errors) else 0.0
    if delta is None:
        delta = np.nextafter(worst, np.inf)
    for i, err in enumerate(errors):
        if not err < delta and err > ORBIT_CONSISTENCY_TOLERANCE:
            raise ChainStepViolated(i, float(err), delta)
    return PseudoOrbit(points, float(delta), origin)


def random_pseudo_orbit(t: ToralAuto, length: int, delta: float, rng: np.random.Generator,
                        start: Optional[np.ndarray] = None) -> PseudoOrbit:
    """Each step lands at T(x_j) plus a random kick of norm below delta."""
    x = rng.random(t.dim) if start is None else into_unit_box(np.asarray(start, dtype=float))
    points = [x]
    for _ in range(length):
        kick = rng.normal(size=t.dim)
        kick *= 0.999 * delta * rng.random() / np.linalg.norm(kick)
        points.append(into_unit_box(t.evaluate(points[-1]) + kick))
    return build_pseudo_orbit(t, np.array(points), delta)


def orbit_inconsistency(t: ToralAuto, orbit: np.ndarray) -> float:
    """Largest d(T z_j, z_(j+1)) along a stored orbit."""
    if len(orbit) < 2:
        return 0.0
    return float(step_errors(t, orbit).max())


def shadow(t: ToralAuto, po: PseudoOrbit) -> ShadowResult:
    """
    Bounded solution of w_(n+1) = A w_n - e_n: stable coordinates summed forward
    from w^s_0 = 0, unstable coordinates summed backward from w^u_N = 0.
    """
    x = po.points
    n = len(x) - 1
    ks = t.stable_dim
    lifts = nearest_lift(x[1:] - x[:-1] @ t.matrix.T)
    norms = np.linalg.norm(lifts, axis=1) if n else np.zeros(0)
    bad = np.flatnonzero(norms >= 0.25)
    if len(bad):
        raise LiftAmbiguous(int(bad[0]), float(norms[bad[0]]))

    coeffs = lifts @ t.projector.T
    b_s = t.stable_block
    b_u_inv = np.linalg.inv(t.unstable_block)
    w_s = np.zeros((n + 1, ks))
    w_u = np.zeros((n + 1, t.dim - ks))
    for j in range(n):
        w_s[j + 1] = b_s @ w_s[j] - coeffs[j, :ks]
    for j in range(n - 1, -1, -1):
        w_u[j] = b_u_inv @ (w_u[j + 1] + coeffs[j, ks:])

    correction = w_s @ t.stable_basis.T + w_u @ t.unstable_basis.T
    orbit = into_unit_box(x + correction)
    errors = torus_distance(orbit, x)
    bound = shadowing_constant(t) * po.delta
    logger.debug("[Shadow] %d steps, max error %.3e, bound %.3e", n, errors.max(), bound)
    return ShadowResult(orbit[po.origin].copy(), orbit, errors, bound)


def _split_quarters(values: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    n = len(values)
    idx = np.arange(n)
    outer = (idx < n / 4) | (idx > 3 * (n - 1) / 4)
    return values[outer], values[~outer]


def check_two_sided_limit(t: ToralAuto, po: PseudoOrbit, horizon: int) -> TwoSidedLimitResult:
    """
    Shadow the window [origin - horizon, origin + horizon] and compare the
    outer quarters against the centre, both for the step errors and for the
    realised shadow errors.
    """
    lo = max(0, po.origin - horizon)
    hi = min(len(po.points), po.origin + horizon + 1)
    window = PseudoOrbit(po.points[lo:hi], po.delta, po.origin - lo)
    result = shadow(t, window)

    steps = step_errors(t, window.points)
    quiet = ORBIT_CONSISTENCY_TOLERANCE
    if result.max_error <= quiet:
        return TwoSidedLimitResult(result.z0, result, True, True)
    step_outer, step_centre = _split_quarters(steps)
    err_outer, err_centre = _split_quarters(result.errors)
    steps_decay = bool(len(step_centre) and step_outer.max(initial=0.0) < step_centre.max())
    decay = steps_decay and bool(err_outer.max(initial=0.0) < err_centre.max(initial=0.0))
    return TwoSidedLimitResult(result.z0, result, steps_decay, decay)


def splice_pseudo_orbit(t: ToralAuto, forward_point: np.ndarray, backward_point: np.ndarray, half: int) -> PseudoOrbit:
    """T^j(backward_point) for j in [-half, -1] followed by T^j(forward_point) for j in [0, half]."""
    past = exact_orbit(t, backward_point, half, 0)[:-1]
    future = exact_orbit(t, forward_point, 0, half)
    points = np.vstack([past, future])
    jump = float(torus_distance(t.evaluate(past[-1]), future[0]))
    return PseudoOrbit(points, np.nextafter(jump, np.inf), half)


# ========= EXPANSIVITY =========

def separation_time(t: ToralAuto, x: Optional[np.ndarray] = None, y: Optional[np.ndarray] = None,
                    c: Optional[float] = None, max_iter: int = SU_DECAY_WINDOW,
                    direction: str = "both", difference: Optional[np.ndarray] = None) -> Optional[int]:
    """
    First signed time n with d(T^n x, T^n y) > c, iterating the displacement
    in splitting coordinates. `difference` gives the displacement directly.
    """
    if c is None:
        c = expansivity_constant(t)
    if difference is None:
        difference = nearest_lift(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
    coeffs = t.projector @ np.asarray(difference, dtype=float)
    ks = t.stable_dim
    cs_f, cu_f = coeffs[:ks], coeffs[ks:]
    cs_b, cu_b = cs_f.copy(), cu_f.copy()
    b_s, b_u = t.stable_block, t.unstable_block
    b_s_inv, b_u_inv = np.linalg.inv(b_s), np.linalg.inv(b_u)

    def gap(cs, cu) -> float:
        return float(np.linalg.norm(nearest_lift(t.stable_basis @ cs + t.unstable_basis @ cu)))

    if direction != "backward" and gap(cs_f, cu_f) > c:
        return 0
    for n in range(1, max_iter + 1):
        if direction in ("both", "forward"):
            cs_f, cu_f = b_s @ cs_f, b_u @ cu_f
            if gap(cs_f, cu_f) > c:
                return n
        if direction in ("both", "backward"):
            cs_b, cu_b = b_s_inv @ cs_b, b_u_inv @ cu_b
            if gap(cs_b, cu_b) > c:
                return -n
    return None


# ========= LEAVES =========

def leaf_related(t: ToralAuto, x: Sequence[float], y: Sequence[float], direction: str = "stable",
                 steps: int = SU_DECAY_WINDOW, tolerance: float = LEAF_TOLERANCE) -> bool:
    """
    y in W^s(x) (forward iterates) or W^u(x) (backward iterates) over a window
    of `steps` steps. The wrapped displacement T^n y - T^n x must collapse
    below `tolerance`, and from the step it last entered the ball of radius
    1/4 it must stay under the geometric envelope at rate lambda_s
    (lambda_u_inv backward). Displacements far along a leaf wrap around the
    torus first and enter the ball only after a few iterates.
    """
    if direction not in ("stable", "unstable"):
        raise ParamOutOfRange("direction", direction, "stable or unstable")
    step = (t.matrix if direction == "stable" else t.inverse).astype(float)
    rate = t.lambda_s if direction == "stable" else t.lambda_u_inv
    # non-diagonalizable splittings have transients the envelope does not cover
    spread = 1.01 * t.condition if t.mode == "eigen" else math.inf
    w = nearest_lift(np.asarray(y, dtype=float) - np.asarray(x, dtype=float))
    entry: Optional[Tuple[int, float]] = None
    for n in range(steps + 1):
        d = float(np.linalg.norm(w))
        if entry is not None and d > spread * entry[1] * rate ** (n - entry[0]) + tolerance:
            entry = None
        if d <= tolerance:
            return True
        if entry is None and d < 0.25:
            entry = (n, d)
        w = nearest_lift(step @ w)
    return False


# ========= SU-INTERSECTION =========

def su_intersect_toral(t: ToralAuto, a: Sequence[float], b: Sequence[float]) -> np.ndarray:
    """
    Intersection z of a + E^s with b' + E^u, b' ranging over the lift of b
    nearest to a and its eight neighbours; the lift whose z lies closest to
    the midpoint of a and b' wins. With orthogonal E^s and E^u this is the
    nearest lift.
    """
    if t.dim != 2:
        raise NonSquare((t.dim, t.dim))
    a = np.asarray(a, dtype=float)
    gap = nearest_lift(np.asarray(b, dtype=float) - a)
    v_s, v_u = t.stable_basis[:, 0], t.unstable_basis[:, 0]
    gaps = gap + np.array(LIFT_SHIFTS, dtype=float)
    s, u = np.linalg.solve(np.column_stack([v_s, -v_u]), gaps.T)
    # z - (a + b') / 2 = (s v_s + u v_u) / 2
    best = int(np.argmin(np.linalg.norm(np.outer(s, v_s) + np.outer(u, v_u), axis=1)))
    return into_unit_box(a + s[best] * v_s)


def _frac(x: Decimal) -> Decimal:
    return x - x.to_integral_value(rounding=ROUND_FLOOR)


def _wrapped(x: Sequence[Decimal], y: Sequence[Decimal]) -> Decimal:
    total = Decimal(0)
    for xi, yi in zip(x, y):
        d = _frac(xi - yi)
        d = min(d, 1 - d)
        total += d * d
    return total.sqrt()


def _apply(rows: IntMatrix, v: Sequence[Decimal]) -> List[Decimal]:
    return [_frac(sum(Decimal(a) * c for a, c in zip(row, v))) for row in rows]


def _eigenvector(m: IntMatrix, lam: Decimal) -> Tuple[Decimal, Decimal]:
    (a, b), (c, d) = m
    if b != 0:
        v = (Decimal(b), lam - a)
    else:
        v = (lam - d, Decimal(c))
    norm = (v[0] * v[0] + v[1] * v[1]).sqrt()
    return v[0] / norm, v[1] / norm


def verify_su_witness(t: ToralAuto, a: Sequence[float], b: Sequence[float], z: Sequence[float],
                      power: int = 1, steps: int = SU_DECAY_WINDOW) -> bool:
    """
    High-precision check that z lies in W^s(a) and W^u(b) for A^power:
    d(T^n z, T^n a) and d(T^-n z, T^-n b) follow the geometric envelopes over
    the window, and the float z matches the exact intersection.
    """
    if t.dim != 2:
        raise NonSquare((t.dim, t.dim))
    m = _int_rows(t.matrix)
    growth = math.log10(1.0 / t.lambda_u_inv)
    digits = 40 + int(math.ceil(steps * power * growth))
    with localcontext() as ctx:
        ctx.prec = digits
        (p, q), (r, s) = m
        trace, det = Decimal(p + s), Decimal(p * s - q * r)
        root = (trace * trace - 4 * det).sqrt()
        lam_s, lam_u = (trace - root) / 2, (trace + root) / 2
        if abs(lam_s) > abs(lam_u):
            lam_s, lam_u = lam_u, lam_s
        v_s, v_u = _eigenvector(m, lam_s), _eigenvector(m, lam_u)

        a_d = [Decimal(float(v)) for v in a]
        b_d = [Decimal(float(v)) for v in b]
        near = [_frac(bi - ai + Decimal("0.5")) - Decimal("0.5") for ai, bi in zip(a_d, b_d)]
        det_vu = -v_s[0] * v_u[1] + v_u[0] * v_s[1]
        z_d = [Decimal(float(v)) for v in z]
        for k0, k1 in LIFT_SHIFTS:
            gap = [near[0] + k0, near[1] + k1]
            coef_s = (-gap[0] * v_u[1] + v_u[0] * gap[1]) / det_vu
            coef_u = (v_s[0] * gap[1] - v_s[1] * gap[0]) / det_vu
            z_exact = [ai + coef_s * vi for ai, vi in zip(a_d, v_s)]
            if _wrapped(z_exact, z_d) <= Decimal("1e-9"):
                break
        else:
            return False

        rate_s, rate_u = abs(lam_s) ** power, 1 / abs(lam_u) ** power
        forward = int_matrix_power(m, power)
        backward = int_matrix_power(_int_rows(t.inverse), power)
        start_s = abs(coef_s)
        start_u = abs(coef_u)
        slack = Decimal(10) ** (-(digits - 20 - int(steps * power * growth)))
        zf, af = list(z_exact), list(a_d)
        zb, bb = list(z_exact), [ai + gi for ai, gi in zip(a_d, gap)]
        for n in range(1, steps + 1):
            zf, af = _apply(forward, zf), _apply(forward, af)
            zb, bb = _apply(backward, zb), _apply(backward, bb)
            if _wrapped(zf, af) > start_s * rate_s ** n * Decimal("1.000001") + slack:
                return False
            if _wrapped(zb, bb) > start_u * rate_u ** n * Decimal("1.000001") + slack:
                return False
    return True
