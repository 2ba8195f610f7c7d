import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from sdpfit.cost import social_cost
from sdpfit.model import DimensionMismatch, scheduling_instance, validate_instance
from sdpfit.online import Fenwick, OnlineState, greedy_increase, greedy_online, prefix_cost, replay_check
from sdpfit.oracle import brute_force_opt
from strategies import random_instances


def test_first_arrival_increase():
    inst = scheduling_instance([[2.0, 3.0]], [1.5])
    st_ = OnlineState.empty(inst)
    assert greedy_increase(st_, 0, 0) == 3.0 and greedy_increase(st_, 0, 1) == 4.5


def test_increase_behind_resident():
    # k: w=1, p=2 (ratio 2) already on the machine; j: w=2, p=2 (ratio 1) arrives
    inst = scheduling_instance([[2.0], [2.0]], [1.0, 2.0])
    _, full = greedy_online(inst, [0, 1])
    prefix = OnlineState(inst, (0,), (0, None), full.cumulative[:2])
    assert greedy_increase(prefix, 1, 0) == pytest.approx(6.0)
    assert full.cumulative[-1] - full.cumulative[1] == pytest.approx(8.0 - 2.0)


def test_increase_when_all_residents_first():
    inst = scheduling_instance([[1.0], [2.0], [4.0]], [1.0, 1.0, 2.0])
    _, full = greedy_online(inst, [0, 1, 2])
    prefix = OnlineState(inst, (0, 1), (0, 0, None), full.cumulative[:3])
    assert greedy_increase(prefix, 2, 0) == pytest.approx(2.0 * (4.0 + 1.0 + 2.0))


def test_single_player_takes_cheapest():
    inst = scheduling_instance([[3.0, 2.0]], [1.0])
    assert greedy_online(inst)[0].choices() == (1,)


def test_two_identical_jobs_split(two_by_two):
    x, state = greedy_online(two_by_two)
    assert sorted(x.choices()) == [0, 1] and state.cumulative[-1] == 2.0
    assert state.alternatives[1].tolist() == [2.0, 1.0]


def test_two_jobs_split_cost_three():
    inst = scheduling_instance([[1.0, 1.0], [2.0, 2.0]], [1.0, 1.0])
    x, state = greedy_online(inst)
    assert x.choices() == (0, 1) and state.cumulative[-1] == 3.0


def test_order_must_be_permutation(two_by_two):
    with pytest.raises(DimensionMismatch):
        greedy_online(two_by_two, [0, 0])


def test_already_arrived(two_by_two):
    _, state = greedy_online(two_by_two)
    with pytest.raises(ValueError):
        greedy_increase(state, 0, 0)


@given(st.lists(st.tuples(st.integers(0, 15), st.floats(-5, 5)), max_size=30), st.integers(0, 16))
def test_fenwick_prefix(updates, pos):
    fw = Fenwick(16)
    ref = [0.0] * 16
    for i, v in updates:
        fw.add(i, v)
        ref[i] += v
    assert fw.prefix(pos) == pytest.approx(sum(ref[:pos]), abs=1e-9)
    assert fw.total() == pytest.approx(sum(ref), abs=1e-9)


@given(random_instances(players=(1, 5), zero_weight=0.15), st.randoms(use_true_random=False))
def test_replay_and_telescoping(inst, rnd):
    order = list(range(inst.n_players))
    rnd.shuffle(order)
    x, state = greedy_online(inst, order)
    rc = replay_check(state)
    assert rc.max_violation <= 1e-9 and rc.max_recompute_error <= 1e-9 and rc.telescoping_error <= 1e-9
    assert state.cumulative[0] == 0
    assert all(b >= a for a, b in zip(state.cumulative, state.cumulative[1:]))
    assert state.increments.sum() == pytest.approx(social_cost(inst, x).social, rel=1e-9, abs=1e-12)
    assert prefix_cost(inst, order, state.choices) == pytest.approx(state.cumulative[-1], rel=1e-9, abs=1e-12)


@given(random_instances(players=(1, 4), zero_weight=0.1))
def test_competitive_ratio_four(inst):
    opt = brute_force_opt(inst)[0]
    for perm in itertools.permutations(range(inst.n_players)):
        assert greedy_online(inst, perm)[1].cumulative[-1] <= 4 * opt * (1 + 1e-12) + 1e-12


@given(random_instances(players=(1, 5)))
def test_chosen_strategy_minimizes_closed_form(inst):
    x, state = greedy_online(inst)
    for t, j in enumerate(state.order):
        before = OnlineState(inst, state.order[:t], tuple(c if k in state.order[:t] else None for k, c in enumerate(state.choices)), state.cumulative[: t + 1])
        closed = [greedy_increase(before, j, i) for i in range(inst.strategy_counts[j])]
        assert state.alternatives[t] == pytest.approx(closed, rel=1e-9, abs=1e-12)
        assert state.choices[j] == min(range(len(closed)), key=lambda i: (state.alternatives[t][i], i))
