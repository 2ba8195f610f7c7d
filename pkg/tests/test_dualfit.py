import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from sdpfit.cost import social_cost
from sdpfit.dualfit import (
    INFO,
    POA_SCENARIOS,
    CertificateMismatch,
    NotAnEquilibrium,
    Scenario,
    corrupt_gram,
    corrupt_vectors,
    corrupt_y,
    fit_dual,
    parse_scenario,
    scenario_constants,
    verify_dual,
    verify_dual_cce,
)
from sdpfit.equilibria import ProfileDistribution
from sdpfit.generators import KKParams, RandomProfile, gen_kk, gen_lower_bound_ls, gen_random
from sdpfit.localsearch import improved_local_search, jump_opt
from sdpfit.model import Assignment, scheduling_instance
from sdpfit.online import greedy_online
from sdpfit.oracle import brute_force_opt, enumerate_pure_equilibria
from sdpfit.sdp import gram_matrix
from strategies import random_instances

SQRT5 = math.sqrt(5)
RHO = {
    Scenario.SMITH4: 0.25,
    Scenario.PS: 2 / (3 + SQRT5),
    Scenario.RAND2133: 15 / 32,
    Scenario.RAND_UNIFORM2: 0.5,
    Scenario.RAND_POA2: 0.5,
    Scenario.AFFINE: 2 / (3 + SQRT5),
    Scenario.JUMPOPT: 2 / (3 + SQRT5),
    Scenario.IMPROVED_LS: 4 / (5 + SQRT5),
    Scenario.GREEDY: 0.25,
}


@pytest.mark.parametrize("s", list(RHO))
def test_constants(s):
    k = scenario_constants(s)
    assert k.rho == pytest.approx(RHO[s], abs=1e-12)
    assert k.residuals and max(k.residuals.values()) <= 1e-12


def test_published_rho_values():
    assert scenario_constants("ps").rho == pytest.approx(0.3819660, abs=1e-7)
    assert scenario_constants("rand").rho == 0.46875
    assert scenario_constants("localsearch").rho == pytest.approx(0.5527864, abs=1e-7)


@pytest.mark.parametrize("name", ["smith", "SmithRule4", "smith4", "kk-low", "KKLowP"])
def test_parse_scenario(name):
    assert isinstance(parse_scenario(name), Scenario)


def test_parse_unknown():
    with pytest.raises(ValueError):
        parse_scenario("nope")


def test_smith_split_example(two_by_two):
    x = Assignment.from_choices(two_by_two, [0, 1])
    sol = fit_dual("smith", two_by_two, x)
    np.testing.assert_allclose(sol.y, [0.5, 0.5])
    G = gram_matrix(sol.family, sparse=False)
    assert G[0, 0] == pytest.approx(0.5)
    rep = verify_dual("smith", two_by_two, x, sol)
    assert rep.dual_objective == pytest.approx(0.75)
    assert rep.ratio == pytest.approx(0.375) and rep.passed
    js = rep.to_json()
    assert js["pass"] is True and js["dualObjective"] == pytest.approx(0.75)


def test_kk_high_example():
    kk = gen_kk(KKParams(2, 1, 2.0, 0.01))
    rep = verify_dual("kk-high", kk.instance, kk)
    assert rep.dual_objective == pytest.approx(6.0, rel=1e-9)
    assert rep.passed and rep.extra["optMatch"] <= 1e-9


def test_kk_low_example():
    kk = gen_kk(KKParams(4, 1, 1.0, 0.01))
    rep = verify_dual("kk-low", kk.instance, kk)
    assert rep.dual_objective == pytest.approx(3.625, rel=1e-9) and rep.passed


def test_kk_case_must_match():
    kk = gen_kk(KKParams(2, 1, 2.0, 0.01))
    with pytest.raises(CertificateMismatch):
        fit_dual("kk-low", kk.instance, kk)


@pytest.mark.parametrize("m", [2, 3, 5])
@pytest.mark.parametrize("p", [0.3, 1.0, 1.5, 2.5, 6.0])
def test_kk_grid(m, p):
    for k in range(0, m):
        par = KKParams(m, k, p, 0.02)
        kk = gen_kk(par)
        rep = verify_dual("kk-high" if par.high_case else "kk-low", kk.instance, kk)
        assert rep.feasible and rep.extra["optMatch"] <= 1e-9
        bound = (1 + math.sqrt(2)) / 2
        assert par.ne_cost_limit() / par.opt_cost() <= bound + 1e-6
        # at finite eps the small jobs add m * eps / 2 on top of the limit
        assert rep.extra["neOverDual"] <= bound + par.m * par.eps_used / 2 / par.opt_cost() + 1e-12


@pytest.mark.parametrize("s", [s for s in POA_SCENARIOS if s is not Scenario.AFFINE])
def test_single_player_is_feasible(s):
    inst = scheduling_instance([[2.0, 1.5]], [1.3]) if s is not Scenario.RAND_UNIFORM2 else scheduling_instance([[1.0, 2.0]], [1.0])
    for x, _ in enumerate_pure_equilibria(inst, INFO[s].mechanism):
        assert verify_dual(s, inst, x).passed


def test_rand_uniform_rejects_mixed_ratios(one_machine):
    x = Assignment.from_choices(one_machine, [0, 0])
    with pytest.raises(CertificateMismatch):
        fit_dual("rand-uniform", one_machine, x)


def test_rejects_non_equilibrium(two_by_two):
    with pytest.raises(CertificateMismatch):
        fit_dual("smith", two_by_two, Assignment.from_choices(two_by_two, [0, 0]))


def test_rejects_wrong_certificate_type(two_by_two):
    with pytest.raises(CertificateMismatch):
        fit_dual("greedy", two_by_two, Assignment.from_choices(two_by_two, [0, 1]))
    with pytest.raises(CertificateMismatch):
        fit_dual("affine", two_by_two, Assignment.from_choices(two_by_two, [0, 1]))


def test_rejects_foreign_greedy_run(two_by_two, one_machine):
    _, state = greedy_online(one_machine)
    with pytest.raises(CertificateMismatch):
        fit_dual("greedy", two_by_two, state)


def test_mutations_caught(two_by_two, one_machine):
    x = Assignment.from_choices(two_by_two, [0, 1])
    sol = fit_dual("smith", two_by_two, x)
    bad = verify_dual("smith", two_by_two, x, corrupt_y(two_by_two, sol))
    assert not bad.passed and bad.max_violation_set1 > 0
    assert not verify_dual("smith", two_by_two, x, corrupt_vectors(two_by_two, sol)).passed
    G = gram_matrix(sol.family, sparse=False)
    rep = verify_dual("smith", two_by_two, x, sol, gram=corrupt_gram(G))
    assert not rep.passed and rep.gram_min_eig < 0


@given(random_instances(players=(1, 4), zero_weight=0.1), st.sampled_from([s for s in POA_SCENARIOS if s is not Scenario.AFFINE]))
def test_weak_duality_and_bound(inst, s):
    info = INFO[s]
    if s is Scenario.RAND_UNIFORM2:
        return
    opt = brute_force_opt(inst, info.benchmark)[0]
    for x, _ in enumerate_pure_equilibria(inst, info.mechanism):
        rep = verify_dual(s, inst, x)
        assert rep.passed
        assert rep.dual_objective <= opt + 1e-9 * max(opt, 1e-12)


@given(st.integers(0, 10**6))
def test_weak_duality_uniform_ratio(seed):
    inst = gen_random(seed, RandomProfile(players=3, mode="uniform-ratio"))
    opt = brute_force_opt(inst)[0]
    for x, _ in enumerate_pure_equilibria(inst, "rand"):
        rep = verify_dual("rand-uniform", inst, x)
        assert rep.passed and rep.dual_objective <= opt * (1 + 1e-9) + 1e-12


@given(random_instances(kind="affine", players=(1, 3)))
def test_weak_duality_affine(inst):
    opt = brute_force_opt(inst)[0]
    for x, _ in enumerate_pure_equilibria(inst, None):
        rep = verify_dual("affine", inst, x)
        assert rep.passed and rep.dual_objective <= opt * (1 + 1e-9) + 1e-12


@given(random_instances(players=(1, 4), zero_weight=0.1))
def test_smith_second_family_is_tight(inst):
    for x, _ in enumerate_pure_equilibria(inst, "smith"):
        assert verify_dual("smith", inst, x).set2_tightness <= 1e-9


@given(random_instances(mode="scheduling", players=(1, 4), resources=(1, 3), zero_weight=0.1))
def test_local_search_fits(inst):
    opt = brute_force_opt(inst)[0]
    xa = jump_opt(inst).assignment
    ra = verify_dual("jumpopt", inst, xa)
    assert ra.passed and ra.extra["strongBoundOk"]
    xb = improved_local_search(inst).assignment
    rb = verify_dual("localsearch", inst, xb)
    assert rb.passed and rb.dual_objective <= opt * (1 + 1e-9) + 1e-12


@given(random_instances(mode="restricted-identical", players=(1, 4), resources=(1, 3)))
def test_restricted_identical_jumpopt(inst):
    x = jump_opt(inst).assignment
    rep = verify_dual("jumpopt-restricted", inst, x)
    assert rep.passed and rep.extra["etaEqual"]


def test_lower_bound_fits_with_rho():
    lb = gen_lower_bound_ls(6)
    rep = verify_dual("localsearch", lb.instance, lb.local_opt)
    assert rep.passed
    assert rep.dual_objective >= 4 / (5 + SQRT5) * social_cost(lb.instance, lb.local_opt).social * (1 - 1e-9)


@given(random_instances(players=(1, 5), zero_weight=0.1), st.randoms(use_true_random=False))
def test_greedy_fit(inst, rnd):
    order = list(range(inst.n_players))
    rnd.shuffle(order)
    _, state = greedy_online(inst, order)
    rep = verify_dual("greedy", inst, state)
    assert rep.passed and rep.ratio >= 0.25 - 1e-12
    assert rep.extra["telescopingResidual"] <= 1e-12


def test_cce_point_mass_matches(two_by_two):
    x = Assignment.from_choices(two_by_two, [0, 1])
    a = verify_dual_cce("smith", two_by_two, ProfileDistribution.point_mass(x))
    b = verify_dual("smith", two_by_two, x)
    assert a.dual_objective == pytest.approx(b.dual_objective, abs=1e-15)
    assert a.passed == b.passed


def test_cce_uniform_mixture(two_by_two):
    eqs = [Assignment.from_choices(two_by_two, c) for c in ([0, 1], [1, 0])]
    rep = verify_dual_cce("smith", two_by_two, ProfileDistribution.uniform(eqs))
    assert rep.passed and rep.gram_min_eig >= -1e-8


def test_cce_rejects_non_equilibrium(two_by_two):
    x = Assignment.from_choices(two_by_two, [0, 0])
    with pytest.raises(NotAnEquilibrium):
        verify_dual_cce("smith", two_by_two, ProfileDistribution.point_mass(x))


def test_cce_needs_poa_scenario(two_by_two):
    x = Assignment.from_choices(two_by_two, [0, 1])
    with pytest.raises(CertificateMismatch):
        verify_dual_cce("greedy", two_by_two, ProfileDistribution.point_mass(x))


@given(random_instances(players=(2, 3)), st.sampled_from([Scenario.SMITH4, Scenario.PS, Scenario.RAND2133]), st.data())
def test_cce_mixtures_pass(inst, s, data):
    eqs = [x for x, _ in enumerate_pure_equilibria(inst, INFO[s].mechanism)]
    if len(eqs) < 2:
        return
    raw = data.draw(st.lists(st.floats(0.05, 1.0), min_size=len(eqs), max_size=len(eqs)))
    p = np.array(raw) / sum(raw)
    rep = verify_dual_cce(s, inst, ProfileDistribution(tuple(zip(eqs, p.tolist()))))
    assert rep.passed
