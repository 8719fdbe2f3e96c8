from fractions import Fraction

import numpy as np
import pytest

from components.systems_catalog import (
    CantorIdentity,
    LadderSystem,
    MorseSmaleCircle,
    RotationSystem,
    SystemSpec,
    ToralDyn,
    expected_facts,
    make_system,
)
from exceptions import InvalidSpec, ParamOutOfRange, UnknownKind


# ========= SPECS =========

@pytest.mark.parametrize("spec, error", [
    (SystemSpec(kind="rotation", alpha="3/2"), ParamOutOfRange),
    (SystemSpec(kind="rotation", alpha="one third"), InvalidSpec),
    (SystemSpec(kind="solenoid"), UnknownKind),
    (SystemSpec(kind="cantor_identity", depth=0), ParamOutOfRange),
    (SystemSpec(kind="full_shift"), ParamOutOfRange),
    (SystemSpec(kind="toral"), InvalidSpec),
    (SystemSpec(kind="morse_smale_circle", k=2, amplitude=1.5), ParamOutOfRange),
])
def test_spec_check_rejects(spec, error):
    with pytest.raises(error):
        spec.check()


def test_spec_label():
    assert SystemSpec(kind="cat_map").label == "cat_map"
    spec = SystemSpec(kind="morse_smale_circle", k=2, amplitude=0.5)
    assert spec.label == "morse_smale_circle(amplitude=0.5, k=2)"


def test_make_system_families():
    assert make_system(SystemSpec(kind="example3_sft")).family == "sft"
    shift = make_system(SystemSpec(kind="full_shift", s=3))
    assert shift.sft.alphabet_size == 3
    assert shift.name == "full_shift(s=3)"
    assert isinstance(make_system(SystemSpec(kind="toral", matrix=[[3, 1], [2, 1]])), ToralDyn)
    assert isinstance(make_system(SystemSpec(kind="ladder", n_max=10)), LadderSystem)
    assert make_system(SystemSpec(kind="cantor_identity", depth=2)).depth == 2


def test_expected_facts_for_generic_toral_matrix():
    sheet = expected_facts(SystemSpec(kind="toral", matrix=[[3, 1], [2, 1]]))
    assert sheet.kind == "toral"
    assert sheet.entries == expected_facts(SystemSpec(kind="cat_map")).entries


def test_expected_facts_example3():
    entries = expected_facts(SystemSpec(kind="example3_sft")).entries
    assert entries["barycenter_on_Per"].value
    assert not entries["su_intersecting_on_Per"].value
    assert not entries["mixing"].value


# ========= LADDER =========

def test_ladder_membership():
    ladder = LadderSystem()
    assert ladder.check_member(Fraction(1, 7)) == Fraction(1, 7)
    assert ladder.check_member(Fraction(6, 7)) == Fraction(6, 7)
    with pytest.raises(InvalidSpec):
        ladder.check_member(Fraction(2, 5))
    with pytest.raises(InvalidSpec):
        ladder.parse_point("2/3x")


def test_ladder_iterates():
    ladder = LadderSystem()
    assert ladder.iterate(Fraction(1, 2), 1) == Fraction(2, 3)
    assert ladder.iterate(Fraction(1, 3), 2) == Fraction(2, 3)
    assert ladder.iterate(Fraction(2, 3), -2) == Fraction(1, 3)
    assert ladder.evaluate(Fraction(0)) == 0
    assert ladder.evaluate_inverse(Fraction(1)) == 1


def test_ladder_coords_match_exact_map():
    ladder = LadderSystem(n_max=12)
    points = ladder.enumeration()
    image = ladder.evaluate_coords(np.array([[float(p)] for p in points]))
    assert np.allclose(image[:, 0], [float(ladder.evaluate(p)) for p in points])


def test_ladder_trajectory():
    rows = LadderSystem().trajectory(Fraction(1, 2), -1, 1)
    assert np.allclose(rows[:, 0], [1 / 3, 1 / 2, 2 / 3])


def test_ladder_relations():
    ladder = LadderSystem()
    assert ladder.stable_related(Fraction(1, 5), Fraction(1))
    assert not ladder.stable_related(Fraction(0), Fraction(1, 5))
    assert ladder.unstable_related(Fraction(0), Fraction(4, 5))


# ========= CIRCLE MAPS =========

def test_rotation_irrational_proxy():
    assert RotationSystem(Fraction(618034, 1000003)).irrational_proxy
    assert not RotationSystem(Fraction(1, 3)).irrational_proxy


def test_morse_smale_inverse():
    morse = MorseSmaleCircle(2)
    x = np.array([0.05, 0.3, 0.61, 0.9])
    assert np.allclose(morse.evaluate_inverse(morse.evaluate(x)), x, atol=1e-12)


def test_morse_smale_relations():
    morse = MorseSmaleCircle(2)
    assert morse.stable_related(np.array([0.1]), np.array([0.2]))
    assert morse.stable_related(np.array([0.1]), np.array([0.3]))
    assert not morse.unstable_related(np.array([0.1]), np.array([0.3]))
    assert morse.repellers() == [0.0, 0.5]
    assert morse.attractors() == [0.25, 0.75]


# ========= CANTOR & TORAL =========

def test_cantor_points():
    assert np.allclose(CantorIdentity(2).points()[:, 0], [0, 2 / 9, 2 / 3, 8 / 9])
    assert CantorIdentity(2).resolution == pytest.approx(1 / 18)


def test_cat_map_periodic_points():
    cat = make_system(SystemSpec(kind="cat_map"))
    points = cat.periodic_points(3)
    assert any(np.array_equal(p, [0.0, 0.0]) for p in points)
    assert any(np.array_equal(p, [0.5, 0.5]) for p in points)


def test_toral_trajectory_spans_past_and_future():
    cat = make_system(SystemSpec(kind="cat_map"))
    rows = cat.trajectory(np.array([0.5, 0.5]), -3, 3)
    assert rows.shape == (7, 2)
    assert np.array_equal(rows[0], rows[3])
    assert np.array_equal(rows[3], [0.5, 0.5])
