import numpy as np
import pytest

from components import hyperbolic_shadowing as hs
from components.systems_catalog import CAT_MATRIX
from exceptions import (
    ChainStepViolated,
    EigenvalueOnUnitCircle,
    LiftAmbiguous,
    NonSquare,
    NotUnimodular,
    ParamOutOfRange,
)

CAT = hs.build_toral(CAT_MATRIX)
# companion matrix of x^3 - x - 1: one expanding real root, a contracting complex pair
TRIBONACCI_LIKE = [[0, 1, 0], [0, 0, 1], [1, 1, 0]]
SKEWED = [[3, 1], [2, 1]]


def _dense_bvp_shadow(t, po):
    """
    Reference shadow: solve w_(j+1) - A w_j = -e_j for all j with the stable part
    of w_0 and the unstable part of w_N pinned to zero, as one dense linear system.
    """
    x = po.points
    n, d = len(x) - 1, t.dim
    lifts = hs.nearest_lift(x[1:] - x[:-1] @ t.matrix.T)
    rows = []
    rhs = []
    for j in range(n):
        row = np.zeros((d, d * (n + 1)))
        row[:, d * j:d * (j + 1)] = -t.matrix
        row[:, d * (j + 1):d * (j + 2)] = np.eye(d)
        rows.append(row)
        rhs.append(-lifts[j])
    ks = t.stable_dim
    start = np.zeros((ks, d * (n + 1)))
    start[:, :d] = t.projector[:ks]
    end = np.zeros((d - ks, d * (n + 1)))
    end[:, d * n:] = t.projector[ks:]
    system = np.vstack(rows + [start, end])
    vector = np.concatenate(rhs + [np.zeros(ks), np.zeros(d - ks)])
    w = np.linalg.solve(system, vector).reshape(n + 1, d)
    return hs.into_unit_box(x + w)


# ========= CONSTRUCTION =========

def test_cat_map_constants():
    assert CAT.mode == "eigen"
    assert CAT.dim == 2
    assert CAT.stable_dim == 1
    assert CAT.lambda_s == pytest.approx((3 - 5 ** 0.5) / 2)
    assert CAT.kappa == pytest.approx(1.0)
    assert hs.shadowing_constant(CAT) == pytest.approx(1 + 5 ** 0.5)
    assert hs.expansivity_constant(CAT) == pytest.approx(0.25)


@pytest.mark.parametrize("matrix, error", [
    ([[2, 1, 0], [1, 1, 0]], NonSquare),
    ([[2, 0], [0, 1]], NotUnimodular),
    ([[1, 1], [0, 1]], EigenvalueOnUnitCircle),
    ([[0, -1], [1, 0]], EigenvalueOnUnitCircle),
])
def test_build_toral_rejects(matrix, error):
    with pytest.raises(error):
        hs.build_toral(matrix)


def test_splitting_reconstructs_vectors():
    rng = np.random.default_rng(3)
    for _ in range(10):
        v = rng.normal(size=2)
        s, u = hs.hyperbolic_split(CAT, v)
        assert np.allclose(s + u, v)
        assert np.linalg.norm(CAT.matrix @ s) < np.linalg.norm(s) + 1e-12


def test_complex_stable_pair_uses_schur_mode():
    t = hs.build_toral(TRIBONACCI_LIKE)
    assert t.mode == "schur"
    assert t.stable_dim == 2
    assert t.stable_sum > 1.0


# ========= EXACT ORBITS =========

def test_exact_orbit_of_period_three_point():
    orbit = hs.exact_orbit(CAT, [0.5, 0.5], 0, 3)
    assert np.array_equal(orbit[0], orbit[3])
    assert np.array_equal(orbit[1], [0.5, 0.0])
    assert np.array_equal(hs.exact_iterate(CAT, [0.5, 0.5], 3), [0.5, 0.5])
    assert np.array_equal(hs.exact_iterate(CAT, [0.5, 0.5], -3), [0.5, 0.5])


def test_exact_orbit_rows_are_ordered_in_time():
    orbit = hs.exact_orbit(CAT, [0.25, 0.125], 2, 2)
    assert np.array_equal(orbit[2], [0.25, 0.125])
    assert np.allclose(CAT.evaluate(orbit[:-1]), orbit[1:])


# ========= SHADOWING =========

def test_build_pseudo_orbit_rejects_large_steps():
    points = np.array([[0.1, 0.1], [0.5, 0.5]])
    with pytest.raises(ChainStepViolated):
        hs.build_pseudo_orbit(CAT, points, delta=0.01)


def test_true_orbit_shadows_itself():
    orbit = hs.exact_orbit(CAT, [0.1, 0.2], 0, 50)
    result = hs.shadow(CAT, hs.build_pseudo_orbit(CAT, orbit, delta=1e-6))
    assert result.max_error < 1e-9


@pytest.mark.parametrize("seed", [0, 1, 2, 3, 4])
def test_shadow_within_bound(seed):
    rng = np.random.default_rng(seed)
    po = hs.random_pseudo_orbit(CAT, 500, 1e-4, rng)
    result = hs.shadow(CAT, po)
    assert result.max_error <= result.bound
    assert hs.orbit_inconsistency(CAT, result.orbit) < 1e-9


def test_shadow_matches_dense_solution():
    rng = np.random.default_rng(9)
    po = hs.random_pseudo_orbit(CAT, 40, 1e-3, rng)
    result = hs.shadow(CAT, po)
    reference = _dense_bvp_shadow(CAT, po)
    assert np.max(hs.torus_distance(result.orbit, reference)) < 1e-9


def test_shadow_in_schur_mode():
    t = hs.build_toral(TRIBONACCI_LIKE)
    rng = np.random.default_rng(21)
    po = hs.random_pseudo_orbit(t, 200, 1e-4, rng)
    result = hs.shadow(t, po)
    assert result.max_error <= result.bound
    assert hs.orbit_inconsistency(t, result.orbit) < 1e-9


def test_shadow_refuses_ambiguous_lift():
    x0 = np.array([0.1, 0.1])
    x1 = hs.into_unit_box(CAT.evaluate(x0) + np.array([0.4, 0.0]))
    with pytest.raises(LiftAmbiguous) as exc:
        hs.shadow(CAT, hs.PseudoOrbit(np.vstack([x0, x1]), 1.0, 0))
    assert exc.value.index == 0


def test_two_sided_limit_shadow_decays_from_the_splice():
    po = hs.splice_pseudo_orbit(CAT, np.array([0.31, 0.305]), np.array([0.3, 0.3]), 100)
    assert po.origin == 100
    result = hs.check_two_sided_limit(CAT, po, 100)
    assert result.steps_decay
    assert result.decay_verified
    assert result.shadow.errors[0] < 1e-12
    assert result.shadow.errors[-1] < 1e-12


def test_splice_shadow_is_the_su_intersection():
    p, q = np.array([0.3, 0.3]), np.array([0.31, 0.305])
    result = hs.shadow(CAT, hs.splice_pseudo_orbit(CAT, q, p, 100))
    assert hs.torus_distance(result.z0, hs.su_intersect_toral(CAT, q, p)) < 1e-8


def test_constant_drift_does_not_decay():
    # dyadic points and kick keep every float step exact
    kick = np.array([2.0 ** -13, 0.0])
    points = [np.array([0.25, 0.5])]
    for _ in range(200):
        points.append(hs.into_unit_box(CAT.evaluate(points[-1]) + kick))
    po = hs.build_pseudo_orbit(CAT, np.array(points))
    po = hs.PseudoOrbit(po.points, po.delta, 100)
    result = hs.check_two_sided_limit(CAT, po, 100)
    assert not result.steps_decay
    assert not result.decay_verified


# ========= EXPANSIVITY & SU =========

def test_separation_time_cases():
    assert hs.separation_time(CAT, np.array([0.0, 0.0]), np.array([0.4, 0.0])) == 0
    n = hs.separation_time(CAT, np.array([0.0, 0.0]), np.array([1e-6, 0.0]))
    assert n is not None
    assert 0 < abs(n) <= 60
    assert hs.separation_time(CAT, np.array([0.2, 0.3]), np.array([0.2, 0.3])) is None


def test_su_intersection_is_verified():
    rng = np.random.default_rng(17)
    for _ in range(5):
        a, b = rng.random(2), rng.random(2)
        z = hs.su_intersect_toral(CAT, a, b)
        assert hs.verify_su_witness(CAT, a, b, z)


def test_su_witness_rejects_wrong_point():
    a, b = np.array([0.1, 0.7]), np.array([0.6, 0.2])
    z = hs.su_intersect_toral(CAT, a, b)
    assert not hs.verify_su_witness(CAT, a, b, hs.into_unit_box(z + np.array([0.01, 0.0])))


def test_su_intersect_needs_dimension_two():
    with pytest.raises(NonSquare):
        hs.su_intersect_toral(hs.build_toral(TRIBONACCI_LIKE), [0, 0, 0], [0.5, 0.5, 0.5])


def test_close_pairs_separate_beyond_expansivity_constant():
    rng = np.random.default_rng(11)
    c = hs.expansivity_constant(CAT)
    for _ in range(1000):
        x = rng.random(2)
        angle = rng.uniform(0, 2 * np.pi)
        y = hs.into_unit_box(x + 10 ** rng.uniform(-9, -0.7) * np.array([np.cos(angle), np.sin(angle)]))
        assert hs.separation_time(CAT, x, y, c=c, max_iter=60) is not None


@pytest.mark.parametrize("power", [1, 2, 3, 4, 5])
def test_su_witness_holds_for_iterates(power):
    rng = np.random.default_rng(23)
    for _ in range(3):
        a, b = rng.random(2), rng.random(2)
        assert hs.verify_su_witness(CAT, a, b, hs.su_intersect_toral(CAT, a, b), power=power)


def test_su_intersection_sits_closest_to_the_midpoint():
    t = hs.build_toral(SKEWED)
    v_s, v_u = t.stable_basis[:, 0], t.unstable_basis[:, 0]
    rng = np.random.default_rng(5)
    for _ in range(20):
        a, b = rng.random(2), rng.random(2)
        z = hs.su_intersect_toral(t, a, b)
        best, best_spread = None, np.inf
        for k in hs.LIFT_SHIFTS:
            lift = a + hs.nearest_lift(b - a) + np.array(k, dtype=float)
            s = np.linalg.solve(np.column_stack([v_s, -v_u]), lift - a)[0]
            spread = np.linalg.norm(a + s * v_s - (a + lift) / 2)
            if spread < best_spread:
                best, best_spread = a + s * v_s, spread
        assert hs.torus_distance(z, best) < 1e-12
        assert hs.verify_su_witness(t, a, b, z)


def test_cat_map_midpoint_choice_is_the_nearest_lift():
    rng = np.random.default_rng(8)
    v_s = CAT.stable_basis[:, 0]
    for _ in range(20):
        a, b = rng.random(2), rng.random(2)
        gap = hs.nearest_lift(b - a)
        expected = hs.into_unit_box(a + (v_s @ gap) * v_s)
        assert hs.torus_distance(hs.su_intersect_toral(CAT, a, b), expected) < 1e-12


# ========= LEAVES =========

@pytest.mark.parametrize("length", [0.3, 1.7, 3.7, 10.0])
def test_far_wrapped_leaf_points_are_related(length):
    x = np.array([0.2, 0.3])
    v_s, v_u = CAT.stable_basis[:, 0], CAT.unstable_basis[:, 0]
    along_s = hs.into_unit_box(x + length * v_s)
    along_u = hs.into_unit_box(x + length * v_u)
    assert hs.leaf_related(CAT, x, along_s, "stable")
    assert hs.leaf_related(CAT, x, along_u, "unstable")
    assert not hs.leaf_related(CAT, x, along_u, "stable")
    assert not hs.leaf_related(CAT, x, along_s, "unstable")


def test_leaf_related_rejects_offset_points():
    x = np.array([0.6, 0.1])
    v_s, v_u = CAT.stable_basis[:, 0], CAT.unstable_basis[:, 0]
    assert not hs.leaf_related(CAT, x, hs.into_unit_box(x + 3.7 * v_s + 1e-3 * v_u), "stable")
    assert hs.leaf_related(CAT, x, x, "stable")


def test_leaf_related_direction_is_checked():
    with pytest.raises(ParamOutOfRange):
        hs.leaf_related(CAT, [0.1, 0.1], [0.2, 0.2], "sideways")
