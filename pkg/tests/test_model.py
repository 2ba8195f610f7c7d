import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sdpfit.model import (
    Assignment,
    DimensionMismatch,
    EmptyStrategy,
    MissingProcessingTime,
    NegativeValue,
    UnknownResource,
    assignment_to_json,
    instance_to_json,
    parse_assignment,
    precedes,
    scheduling_instance,
    usage_marginals,
    validate_instance,
)
from strategies import random_instances


def raw_one(weight=1.0, p=1.0, strategies=(("e1",),), resources=("e1",)):
    return {
        "kind": "congestion",
        "resources": list(resources),
        "players": [{"id": "j", "weight": weight, "strategies": [list(s) for s in strategies], "processing": {"e1": p}}],
    }


def test_single_player_ratio_one():
    inst = validate_instance(raw_one())
    assert inst.n_players == 1 and inst.ratio(0, 0) == 1.0


def test_ratio_is_p_over_w():
    assert validate_instance(raw_one(weight=2.0, p=3.0)).ratio(0, 0) == 1.5


def test_unknown_resource_named():
    with pytest.raises(UnknownResource, match="e9"):
        validate_instance(raw_one(strategies=(("e9",),)))


@pytest.mark.parametrize(
    "raw, exc",
    [
        (raw_one(strategies=((),)), EmptyStrategy),
        (raw_one(strategies=()), EmptyStrategy),
        (raw_one(weight=-1.0), NegativeValue),
        (raw_one(p=-2.0), NegativeValue),
        (raw_one(p=math.inf), MissingProcessingTime),
        (raw_one(strategies=(("e1",), ("e2",)), resources=("e1", "e2")), MissingProcessingTime),
    ],
)
def test_validation_errors(raw, exc):
    with pytest.raises(exc):
        validate_instance(raw)


def test_zero_weight_accepted_with_infinite_ratio():
    inst = validate_instance(raw_one(weight=0.0))
    assert math.isinf(inst.ratio(0, 0))


def three_resources():
    return validate_instance(
        {
            "resources": ["e1", "e2", "e3"],
            "players": [
                {"id": "a", "weight": 1, "strategies": [["e1"], ["e1", "e2"]], "processing": {"e1": 1, "e2": 1}},
            ],
        }
    )


def test_pure_marginals():
    inst = three_resources()
    z = usage_marginals(inst, Assignment.from_choices(inst, [1]))
    assert z[:, 0].tolist() == [1.0, 1.0, 0.0]


def test_mixed_marginals():
    inst = three_resources()
    z = usage_marginals(inst, Assignment(((0.5, 0.5),)))
    assert z[:, 0].tolist() == [1.0, 0.5, 0.0]


def test_marginals_dimension_mismatch():
    inst = three_resources()
    with pytest.raises(DimensionMismatch):
        usage_marginals(inst, Assignment(((1.0,),)))


def test_probabilities_must_sum_to_one():
    with pytest.raises(ValueError):
        Assignment(((0.5, 0.4),)).validate(three_resources())


def test_precedes_cases():
    inst = scheduling_instance([[1.0], [2.0], [1.0]], [1.0, 1.0, 1.0])
    assert precedes(inst, 0, 0, 1)
    assert precedes(inst, 0, 0, 2) and not precedes(inst, 0, 2, 0)
    assert not precedes(inst, 0, 1, 1)


@given(random_instances(players=(1, 5), zero_weight=0.2))
def test_precedes_is_strict_total_order(inst):
    for e, us in enumerate(inst.users):
        for a in us:
            assert not precedes(inst, e, a, a)
            for b in us:
                if a != b:
                    assert precedes(inst, e, a, b) != precedes(inst, e, b, a)
                    for c in us:
                        if precedes(inst, e, a, b) and precedes(inst, e, b, c):
                            assert precedes(inst, e, a, c)


@given(random_instances(players=(1, 5)), st.data())
def test_pure_marginals_are_binary(inst, data):
    choices = [data.draw(st.integers(0, n - 1)) for n in inst.strategy_counts]
    x = Assignment.from_choices(inst, choices)
    z = usage_marginals(inst, x)
    assert set(np.unique(z)) <= {0.0, 1.0}
    assert all(sum(row) == 1.0 for row in x.probs)


def test_scheduling_round_trip():
    P = np.array([[1.0, np.inf], [2.0, 3.0]])
    inst = scheduling_instance(P, [1.0, 2.0])
    assert inst.is_scheduling
    assert inst.strategy_counts == (1, 2)
    again = validate_instance(instance_to_json(inst))
    assert again == inst
    assert np.array_equal(again.proc, inst.proc)


@given(random_instances(players=(1, 4)))
def test_json_round_trip(inst):
    assert validate_instance(instance_to_json(inst)) == inst


@given(random_instances(kind="affine", players=(1, 4)))
def test_affine_json_round_trip(inst):
    assert validate_instance(instance_to_json(inst)) == inst


def test_assignment_shorthand_and_lists():
    inst = three_resources()
    assert parse_assignment({"x": {"a": 1}}, inst).choices() == (1,)
    x = parse_assignment({"x": {"a": [0.25, 0.75]}}, inst)
    assert assignment_to_json(x, inst) == {"x": {"a": [0.25, 0.75]}}
    with pytest.raises(DimensionMismatch):
        parse_assignment({"x": {"a": 5}}, inst)
    with pytest.raises(DimensionMismatch):
        parse_assignment({"x": {"a": 0, "zz": 0}}, inst)
