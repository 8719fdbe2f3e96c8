from fractions import Fraction

import numpy as np
import pytest
from scipy import sparse

from components import chain_engine as ce
from components.systems_catalog import (
    CantorIdentity,
    LadderSystem,
    MorseSmaleCircle,
    RotationSystem,
    SystemSpec,
    make_system,
)
from exceptions import (
    ChainNotFound,
    ChainStepViolated,
    InvalidSpec,
    NotChainTransitive,
    ParamOutOfRange,
    WitnessInequalityViolated,
)

QUARTER_POINTS = np.array([[0.0], [0.25], [0.5], [0.75]])


def _quarter_rotation(delta):
    grid = ce.GridSystem.from_map(QUARTER_POINTS, lambda p: np.mod(p + 0.25, 1.0), "circle", 0.25)
    return ce.build_chain_graph(grid, delta)


def _cycle_graph(n: int):
    points = (np.arange(n) / n)[:, None]
    grid = ce.GridSystem.from_map(points, lambda p: np.mod(p + 1.0 / n, 1.0), "circle", 0.5 / n)
    return ce.build_chain_graph(grid, 0.25 / n)


def _identity_graph():
    grid = ce.GridSystem.from_map(np.array([[0.0], [0.5], [1.0]]), lambda p: p, "interval", 0.5)
    return ce.build_chain_graph(grid, 0.1)


# ========= GRID & GRAPH =========

def test_grid_rejects_duplicate_points():
    with pytest.raises(InvalidSpec):
        ce.GridSystem(np.zeros((2, 1)), np.zeros((2, 1)), "interval", 0.1)


def test_build_chain_graph_rejects_nonpositive_delta():
    grid = ce.GridSystem.from_map(QUARTER_POINTS, lambda p: p, "circle", 0.25)
    with pytest.raises(ParamOutOfRange):
        ce.build_chain_graph(grid, 0.0)


def test_rotation_graph_is_a_cycle():
    graph = _quarter_rotation(0.1)
    assert graph.edge_count == 4
    assert graph.has_edge(3, 0)
    assert not graph.has_edge(0, 0)
    assert ce.chain_analysis(graph) == {"chain_transitive": True, "chain_mixing": False, "cycle_gcd": 4}
    assert ce.transitive_closure(graph).all()


def test_wider_delta_adds_loops_and_mixes():
    graph = _quarter_rotation(0.3)
    assert graph.has_edge(0, 0)
    analysis = ce.chain_analysis(graph)
    assert analysis["chain_mixing"]
    assert analysis["cycle_gcd"] == 1


def test_identity_graph_is_not_chain_transitive():
    graph = _identity_graph()
    assert ce.chain_recurrent_nodes(graph) == frozenset({0, 1, 2})
    assert not ce.chain_analysis(graph)["chain_transitive"]
    with pytest.raises(NotChainTransitive):
        ce.chain_bound(graph)


def test_true_space_delta():
    graph = _quarter_rotation(0.1)
    assert graph.true_space_delta() is None
    grid = ce.GridSystem.from_map(QUARTER_POINTS, lambda p: np.mod(p + 0.25, 1.0), "circle", 0.25, lipschitz=1.0)
    assert ce.build_chain_graph(grid, 0.1).true_space_delta() == pytest.approx(0.6)


# ========= CHAINS =========

def test_find_chain_paths():
    graph = _quarter_rotation(0.1)
    chain = ce.find_chain(graph, 0, 2)
    assert chain.length == 2
    assert np.allclose(chain.nodes[-1], [0.5])
    closed = ce.find_chain(graph, 0, 0)
    assert closed.length == 4
    assert ce.find_chain(_identity_graph(), 0, 2) is None


def test_chain_bound_on_cycle():
    assert ce.chain_bound(_quarter_rotation(0.1)) == 5


@pytest.mark.parametrize("n", [100, 4000])
def test_chain_bound_is_exact_on_long_cycles(n):
    graph = _cycle_graph(n)
    assert graph.edge_count == n
    assert ce.chain_bound(graph) == n + 1
    assert ce.hub_bound(graph) == 2 * n


def test_make_chain_rejects_large_step():
    rotation = RotationSystem(Fraction(1, 3))
    with pytest.raises(ChainStepViolated) as exc:
        ce.make_chain(rotation, [np.array([0.0]), np.array([0.9])], 0.1)
    assert exc.value.index == 0


def test_lemma_chain_between_arbitrary_points():
    rotation = RotationSystem(Fraction(1, 3))
    graph = ce.build_chain_graph(rotation.grid(0.05), 0.1)
    a, b = np.array([0.123]), np.array([0.777])
    chain = ce.lemma_chain(graph, rotation, a, b)
    assert 2 <= chain.length <= ce.chain_bound(graph)
    assert np.allclose(chain.nodes[0], a)
    assert np.allclose(chain.nodes[-1], b)
    assert ce.validate_chain(rotation, chain)


def test_lemma_chain_unreachable():
    with pytest.raises(ChainNotFound):
        ce.lemma_chain(_identity_graph(), CantorIdentity(1), np.array([0.0]), np.array([1.0]))


# ========= WITNESS CHAINS =========

def test_assemble_barycenter_chain_on_ladder():
    ladder = LadderSystem()
    w = ce.BarycenterChainWitness(k=1, l=1, p=Fraction(0), q=Fraction(1), z=Fraction(1, 6), m=8)
    chain = ce.assemble_barycenter_chain(ladder, Fraction(1, 20), Fraction(19, 20), 0.2, w)
    assert chain.length == 12
    assert chain.nodes[0] == Fraction(1, 20)
    assert chain.nodes[-1] == Fraction(19, 20)
    assert ce.validate_chain(ladder, chain)


@pytest.mark.parametrize("epsilon, m, index", [
    (0.04, 8, 0),
    (0.2, 7, 3),
])
def test_assemble_barycenter_chain_reports_failed_hypothesis(epsilon, m, index):
    w = ce.BarycenterChainWitness(k=1, l=1, p=Fraction(0), q=Fraction(1), z=Fraction(1, 6), m=m)
    with pytest.raises(WitnessInequalityViolated) as exc:
        ce.assemble_barycenter_chain(LadderSystem(), Fraction(1, 20), Fraction(19, 20), epsilon, w)
    assert exc.value.index == index


def test_assemble_barycenter_chain_without_middle_orbit():
    w = ce.BarycenterChainWitness(k=1, l=1, p=Fraction(0), q=Fraction(1), z=Fraction(1, 6), m=0)
    with pytest.raises(WitnessInequalityViolated) as exc:
        ce.assemble_barycenter_chain(LadderSystem(), Fraction(1, 20), Fraction(19, 20), 0.2, w)
    assert exc.value.index == 4


def test_assemble_supath_chain_on_ladder():
    ladder = LadderSystem()
    path = [Fraction(0), Fraction(1, 2), Fraction(1)]
    witnesses = [ce.RecurrenceWitness(Fraction(1, 11), 1, 8), ce.RecurrenceWitness(Fraction(9, 10), 8, 1)]
    chain = ce.assemble_supath_chain(ladder, Fraction(1, 20), Fraction(19, 20), 0.1, path, witnesses, k=1, l=1)
    assert chain.length == 23
    assert max(chain.step_errors) < 0.1
    assert ce.validate_chain(ladder, chain)


def test_assemble_supath_chain_short_recurrence():
    ladder = LadderSystem()
    path = [Fraction(0), Fraction(1, 2), Fraction(1)]
    # v_1 = 1/10 is not strictly within 0.1 of 0
    witnesses = [ce.RecurrenceWitness(Fraction(1, 10), 1, 7), ce.RecurrenceWitness(Fraction(9, 10), 8, 1)]
    with pytest.raises(WitnessInequalityViolated) as exc:
        ce.assemble_supath_chain(ladder, Fraction(1, 20), Fraction(19, 20), 0.1, path, witnesses, k=1, l=1)
    assert exc.value.index == 1


def test_assemble_supath_chain_needs_one_witness_per_step():
    with pytest.raises(InvalidSpec):
        ce.assemble_supath_chain(LadderSystem(), Fraction(1, 20), Fraction(19, 20), 0.1,
                                 [Fraction(0), Fraction(1)], [], k=1, l=1)


# ========= RECURRENCE & TRANSITIVITY =========

@pytest.mark.parametrize("seed", range(6))
def test_recurrent_nodes_match_transitive_closure(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 201))
    grid = ce.GridSystem.from_map((np.arange(n) / n)[:, None], lambda p: p, "interval", 0.5 / n)
    density = min(1.0, rng.uniform(0.5, 3.0) / n)
    random = sparse.random(n, n, density=density, format="csr", random_state=rng, data_rvs=np.ones)
    graph = ce.ChainGraph(grid, 0.1, (random > 0).astype(np.int8).tocsr())
    reach = ce.transitive_closure(graph)
    assert ce.chain_recurrent_nodes(graph) == frozenset(np.flatnonzero(np.diag(reach)).tolist())
    assert ce.chain_analysis(graph)["chain_transitive"] == bool(reach.all())


@pytest.mark.parametrize("delta", [1e-9, 1e-3, 0.5])
def test_identity_grid_is_chain_recurrent(delta):
    grid = ce.GridSystem.from_map((np.arange(50) / 50)[:, None], lambda p: p, "interval", 0.01)
    assert ce.chain_recurrent_nodes(ce.build_chain_graph(grid, delta)) == frozenset(range(50))


def test_morse_smale_recurrence_grows_with_delta_and_stays_near_fixed_points():
    morse = MorseSmaleCircle(2)
    grid = morse.grid(0.002)
    fixed = np.array(morse.repellers() + morse.attractors())
    nodes = frozenset()
    for delta in (0.002, 0.005, 0.01):
        wider = ce.chain_recurrent_nodes(ce.build_chain_graph(grid, delta))
        assert nodes <= wider
        nodes = wider
    x = grid.points[sorted(nodes), 0]
    gaps = np.abs(x[:, None] - fixed[None, :])
    # |T x - x| < delta only within 0.0203 of a fixed point at delta = 0.01
    assert np.minimum(gaps, 1.0 - gaps).min(axis=1).max() < 0.021
    for v in fixed:
        assert grid.nearest(np.array([v])) in nodes
    assert grid.nearest(np.array([0.125])) not in nodes


def test_cat_map_grid_chains_respect_the_bound():
    cat = make_system(SystemSpec(kind="cat_map"))
    graph = ce.build_chain_graph(cat.grid(cells=50), 0.04)
    assert graph.base.size == 2500
    assert ce.chain_analysis(graph)["chain_transitive"]
    bound = ce.chain_bound(graph)
    assert bound <= ce.hub_bound(graph)
    rng = np.random.default_rng(4)
    for i, j in rng.integers(0, graph.base.size, size=(40, 2)):
        chain = ce.find_chain(graph, int(i), int(j))
        assert chain is not None
        assert 1 <= chain.length <= bound
        assert ce.validate_chain(cat, chain)
