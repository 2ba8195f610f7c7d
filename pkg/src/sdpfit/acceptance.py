"""The acceptance battery: ten end-to-end checks, each returning a result object.

``tests/test_acceptance.py`` and the ``suite`` command both run these
functions; all randomness derives from one base seed.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .cost import Mechanism, social_cost
from .dualfit import (
    INFO,
    Scenario,
    corrupt_gram,
    corrupt_vectors,
    corrupt_y,
    fit_dual,
    scenario_constants,
    verify_dual,
    verify_dual_cce,
)
from .equilibria import ProfileDistribution
from .generators import LAMBDA, KKParams, RandomProfile, gen_kk, gen_lower_bound_ls, gen_random
from .localsearch import check_gamma_potential, check_jumpopt, improved_local_search, jump_opt
from .model import Assignment
from .online import greedy_online, replay_check
from .oracle import brute_force_opt, enumerate_pure_equilibria, pure_profiles
from .sdp import (
    CostKind,
    KernelVector,
    Space,
    build_cost_matrix,
    embedding_matrix,
    gram_matrix,
    gram_min_eigenvalue,
    harmonic_kernel,
    primal_value,
)

SQRT5 = math.sqrt(5)
RATIO_BOUNDS = {
    Scenario.SMITH4: 4.0,
    Scenario.PS: (3 + SQRT5) / 2,
    Scenario.RAND2133: 32 / 15,
    Scenario.RAND_UNIFORM2: 2.0,
    Scenario.RAND_POA2: 2.0,
    Scenario.AFFINE: (3 + SQRT5) / 2,
}


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    detail: str
    metrics: dict = field(default_factory=dict)

    def line(self) -> str:
        return f"criterion {self.number:2d} [{'PASS' if self.passed else 'FAIL'}] {self.name}: {self.detail}"

    def to_json(self) -> dict:
        return {"criterion": self.number, "name": self.name, "pass": self.passed, "detail": self.detail, "metrics": self.metrics}


def _seed(base: int, i: int) -> int:
    return base * 1_000_003 + i


def _rel(a: float, b: float) -> float:
    return abs(a - b) / max(1.0, abs(b))


# ---------------------------------------------------------------------------
# 1


def criterion_constants(seed: int = 0) -> CriterionResult:
    want = {
        Scenario.PS: 2 / (3 + SQRT5),
        Scenario.RAND2133: 15 / 32,
        Scenario.RAND_UNIFORM2: 0.5,
        Scenario.RAND_POA2: 0.5,
        Scenario.IMPROVED_LS: 4 / (5 + SQRT5),
        Scenario.SMITH4: 0.25,
    }
    worst_res = 0.0
    worst_rho = 0.0
    for s in Scenario:
        k = scenario_constants(s)
        worst_res = max([worst_res, *k.residuals.values()])
        if s in want:
            worst_rho = max(worst_rho, abs(k.rho - want[s]))
    ok = worst_res <= 1e-12 and worst_rho <= 1e-12
    return CriterionResult(1, "constant identities", ok, f"max residual {worst_res:.3e}, max rho error {worst_rho:.3e}",
                           {"maxResidual": worst_res, "maxRhoError": worst_rho})


# ---------------------------------------------------------------------------
# 2


def criterion_primal(seed: int = 0, n_instances: int = 1000, per_instance: int = 16) -> CriterionResult:
    rng = np.random.default_rng(_seed(seed, 2))
    worst, checked = 0.0, 0
    for t in range(n_instances):
        affine = t % 3 == 2
        prof = RandomProfile(
            players=int(rng.integers(1, 6)),
            resources=int(rng.integers(1, 5)),
            max_strategies=3,
            max_strategy_size=3,
            kind="affine" if affine else "congestion",
            grid=0.5 if t % 4 == 0 else None,
            zero_weight_prob=0.1 if t % 7 == 0 else 0.0,
        )
        inst = gen_random(_seed(seed, 20_000 + t), prof)
        profiles = list(pure_profiles(inst))
        if len(profiles) > per_instance:
            pick = rng.choice(len(profiles), size=per_instance, replace=False)
            profiles = [profiles[i] for i in sorted(pick)]
        kinds = [(CostKind.AFFINE, None)] if affine else [(CostKind.SMITH, Mechanism.SMITH), (CostKind.RAND, Mechanism.RAND)]
        mats = [(build_cost_matrix(inst, k), m) for k, m in kinds]
        for c in profiles:
            x = Assignment.from_choices(inst, c)
            for cm, m in mats:
                worst = max(worst, _rel(primal_value(cm, x, inst), social_cost(inst, x, m).social))
                checked += 1
    ok = worst <= 1e-9
    return CriterionResult(2, "primal consistency", ok, f"{checked} evaluations, max relative error {worst:.3e}",
                           {"evaluations": checked, "maxRelError": worst})


# ---------------------------------------------------------------------------
# 3 and 4 share one batch


def equilibrium_batch(seed: int = 0, n_instances: int = 200) -> list[dict]:
    """Every pure equilibrium of every scenario on the seeded batch, verified once."""
    out = []
    for t in range(n_instances):
        if t % 5 == 4:
            kind, mode = "affine", "general"
        elif t % 5 == 3:
            kind, mode = "congestion", "uniform-ratio"
        else:
            kind, mode = "congestion", "general"
        prof = RandomProfile(
            players=2 + t % 3,
            resources=3,
            max_strategies=3,
            max_strategy_size=2,
            kind=kind,
            mode=mode,
            grid=0.5 if t % 2 else None,
            zero_weight_prob=0.1 if t % 11 == 0 and kind == "congestion" else 0.0,
        )
        inst = gen_random(_seed(seed, 30_000 + t), prof)
        if kind == "affine":
            scen = [Scenario.AFFINE]
        else:
            scen = [Scenario.SMITH4, Scenario.PS, Scenario.RAND2133, Scenario.RAND_POA2]
            if mode == "uniform-ratio":
                scen.append(Scenario.RAND_UNIFORM2)
        for s in scen:
            info = INFO[s]
            opt = brute_force_opt(inst, info.benchmark)[0]
            for x, c in enumerate_pure_equilibria(inst, info.mechanism):
                rep = verify_dual(s, inst, x)
                out.append({"t": t, "scenario": s, "instance": inst, "x": x, "cost": c, "opt": opt, "report": rep})
    return out


def _mutations(batch: list[dict], every: int = 7) -> tuple[int, int]:
    tried = caught = 0
    for k, row in enumerate(batch):
        if k % every:
            continue
        s, inst, x = row["scenario"], row["instance"], row["x"]
        sol = fit_dual(s, inst, x)
        muts = [verify_dual(s, inst, x, corrupt_y(inst, sol)).passed]
        # scaling vectors only changes anything when some vector is nonzero
        if any(v.parts or (v.coords is not None and np.any(v.coords)) for v in sol.vectors):
            muts.append(verify_dual(s, inst, x, corrupt_vectors(inst, sol)).passed)
        G = gram_matrix(sol.family, sparse=False)
        if G[0, 0] > 0:
            muts.append(verify_dual(s, inst, x, sol, gram=corrupt_gram(G)).passed)
        tried += len(muts)
        caught += sum(not m for m in muts)
    return tried, caught


def criterion_fitting(seed: int = 0, batch: list[dict] | None = None) -> CriterionResult:
    batch = batch if batch is not None else equilibrium_batch(seed)
    fails = [r for r in batch if not r["report"].passed]
    v1 = max((r["report"].max_violation_set1 for r in batch), default=0.0)
    v2 = max((r["report"].max_violation_set2 for r in batch), default=0.0)
    eig = min((r["report"].gram_min_eig / max(r["report"].gram_trace, 1e-300) for r in batch), default=0.0)
    gap = min((r["report"].dual_objective - r["report"].target for r in batch), default=0.0)
    tried, caught = _mutations(batch)
    per = {s.value: sum(1 for r in batch if r["scenario"] is s) for s in RATIO_BOUNDS}
    ok = not fails and tried > 0 and caught == tried and all(per.values())
    detail = (f"{len(batch)} fitted equilibria, {len(fails)} failures, set1 {v1:.2e}, set2 {v2:.2e}, "
              f"min eig/trace {eig:.2e}, mutations caught {caught}/{tried}")
    return CriterionResult(3, "fitting feasibility and bound", ok, detail,
                           {"fitted": len(batch), "failures": len(fails), "perScenario": per, "maxSet1": v1, "maxSet2": v2,
                            "minEigOverTrace": eig, "minBoundSlack": gap, "mutationsTried": tried, "mutationsCaught": caught})


def criterion_weak_duality(seed: int = 0, batch: list[dict] | None = None) -> CriterionResult:
    batch = batch if batch is not None else equilibrium_batch(seed)
    viol = 0.0
    worst_ratio: dict[str, float] = {}
    over = []
    for r in batch:
        rep, opt = r["report"], r["opt"]
        viol = max(viol, (rep.dual_objective - opt) / max(abs(opt), 1e-300) if opt > 0 else max(0.0, rep.dual_objective))
        ratio = r["cost"] / opt if opt > 0 else 1.0
        s = r["scenario"]
        worst_ratio[s.value] = max(worst_ratio.get(s.value, 0.0), ratio)
        if ratio > RATIO_BOUNDS[s] * (1 + 1e-9):
            over.append((s.value, r["t"], ratio))
    ok = viol <= 1e-9 and not over
    pretty = ", ".join(f"{k} {v:.4f}" for k, v in sorted(worst_ratio.items()))
    return CriterionResult(4, "weak duality and ratio bounds", ok, f"max (dual-OPT)/OPT {viol:.2e}; worst ratios {pretty}",
                           {"maxExcess": viol, "worstRatios": worst_ratio, "overBound": over})


# ---------------------------------------------------------------------------
# 5


def criterion_local_search(seed: int = 0, n_instances: int = 120) -> CriterionResult:
    lemma = 0.0
    fails = []
    worst_restricted = 0.0
    worst_improved = 0.0
    for t in range(n_instances):
        restricted = t % 2 == 1
        prof = RandomProfile(
            players=2 + t % 4,
            resources=2 + t % 3,
            max_strategies=3,
            mode="restricted-identical" if restricted else "scheduling",
            grid=0.5 if t % 3 == 0 else None,
            zero_weight_prob=0.1 if t % 8 == 0 else 0.0,
        )
        inst = gen_random(_seed(seed, 50_000 + t), prof)
        opt = brute_force_opt(inst)[0]
        jo = jump_opt(inst)
        lemma = max(lemma, check_jumpopt(inst, jo.assignment).max_violation)
        s = Scenario.JUMPOPT_RESTRICTED if restricted else Scenario.JUMPOPT
        rep = verify_dual(s, inst, jo.assignment)
        if not (jo.converged and rep.passed and rep.extra["strongBoundOk"]):
            fails.append((t, s.value))
        if restricted:
            worst_restricted = max(worst_restricted, rep.extra["approxRatio"])
        ls = improved_local_search(inst)
        rep = verify_dual(Scenario.IMPROVED_LS, inst, ls.assignment)
        if not (ls.converged and rep.passed):
            fails.append((t, "ImprovedLSFit"))
        c = social_cost(inst, ls.assignment).social
        worst_improved = max(worst_improved, c / opt if opt > 0 else 1.0)
    bound = (5 + SQRT5) / 4
    ok = lemma <= 1e-9 and not fails and worst_restricted <= bound + 1e-6 and worst_improved <= 1.809 + 1e-6
    detail = (f"jump-optimum violation {lemma:.2e}, {len(fails)} failed fittings, restricted ratio {worst_restricted:.4f}, "
              f"improved-search ratio {worst_improved:.4f}")
    return CriterionResult(5, "local search", ok, detail,
                           {"lemmaViolation": lemma, "failures": fails, "restrictedRatio": worst_restricted,
                            "improvedRatio": worst_improved})


# ---------------------------------------------------------------------------
# 6


def criterion_lower_bound(seed: int = 0, n: int = 500, oracle_max: int = 12) -> CriterionResult:
    lb = gen_lower_bound_ls(n)
    cert = check_gamma_potential(lb.instance, lb.local_opt)
    local = social_cost(lb.instance, lb.local_opt).social
    canon = social_cost(lb.instance, lb.canonical).social
    ratio = local / lb.canonical_cost_formula
    rep = verify_dual(Scenario.IMPROVED_LS, lb.instance, lb.local_opt)
    formula_err = max(_rel(local, lb.local_opt_cost_formula), _rel(canon, lb.canonical_cost_formula))
    small = []
    for k in range(2, oracle_max + 1):
        small_lb = gen_lower_bound_ls(k)
        opt = brute_force_opt(small_lb.instance)[0]
        small.append((k, _rel(opt, small_lb.canonical_cost_formula), social_cost(small_lb.instance, small_lb.local_opt).social / opt))
    oracle_err = max(e for _, e, _ in small)
    ok = cert.passed(1e-9) and rep.passed and ratio >= 1.788 and formula_err <= 1e-9 and oracle_err <= 1e-9
    detail = (f"n={n}: potential violation {cert.max_violation:.2e}, ratio {ratio:.6f} (limit {LAMBDA**2:.6f}); "
              f"oracle OPT matches the canonical cost for n<={oracle_max} (max error {oracle_err:.1e}, ratio at {oracle_max} "
              f"{small[-1][2]:.4f})")
    return CriterionResult(6, "local-search lower bound", ok, detail,
                           {"ratio": ratio, "violation": cert.max_violation, "oracle": small, "fitPass": rep.passed})


# ---------------------------------------------------------------------------
# 7


def criterion_greedy(seed: int = 0, n_small: int = 30, n_six: int = 4) -> CriterionResult:
    lemma = recompute = 0.0
    worst = 0.0
    min_ratio = math.inf
    tele = 0.0
    fails = 0
    runs = 0
    specs = [(4 if t % 2 else 3, False) for t in range(n_small)] + [(6, True) for _ in range(n_six)]
    for t, (players, six) in enumerate(specs):
        prof = RandomProfile(
            players=players,
            resources=3 if six else 3 + t % 2,
            max_strategies=2 if six else 3,
            max_strategy_size=1 if t % 3 == 0 else 2,
            grid=0.5 if t % 4 == 0 else None,
            zero_weight_prob=0.1 if t % 5 == 0 else 0.0,
        )
        inst = gen_random(_seed(seed, 70_000 + t), prof)
        opt = brute_force_opt(inst)[0]
        for perm in itertools.permutations(range(inst.n_players)):
            x, state = greedy_online(inst, perm)
            runs += 1
            full = runs % 24 == 1 or not six
            if full:
                rc = replay_check(state)
                lemma = max(lemma, rc.max_violation)
                recompute = max(recompute, rc.max_recompute_error)
            rep = verify_dual(Scenario.GREEDY, inst, state)
            fails += not rep.passed
            min_ratio = min(min_ratio, rep.ratio)
            tele = max(tele, rep.extra["telescopingResidual"])
            worst = max(worst, social_cost(inst, x).social / opt if opt > 0 else 1.0)
    ok = lemma <= 1e-9 and recompute <= 1e-9 and worst <= 4 and fails == 0 and min_ratio >= 0.25 - 1e-8 and tele <= 1e-9
    detail = (f"{runs} runs, worst greedy/OPT {worst:.4f}, step violation {lemma:.2e}, recompute error {recompute:.2e}, "
              f"min certified ratio {min_ratio:.4f}, telescoping {tele:.1e}")
    return CriterionResult(7, "greedy online", ok, detail,
                           {"runs": runs, "worstRatio": worst, "stepViolation": lemma, "minRatio": min_ratio, "fitFailures": fails})


# ---------------------------------------------------------------------------
# 8


def criterion_kk(seed: int = 0, eps: float = 0.01) -> CriterionResult:
    worst_match = 0.0
    worst_ratio = 0.0
    fails = []
    from .equilibria import check_equilibrium

    for m in range(2, 7):
        for k in range(1, m):
            for p in (0.5, 1.0, 2.0, 4.0):
                kk = gen_kk(KKParams(m, k, p, eps))
                s = Scenario.KK_HIGH if kk.params.high_case else Scenario.KK_LOW
                rep = verify_dual(s, kk.instance, kk)
                worst_match = max(worst_match, rep.extra["optMatch"])
                worst_ratio = max(worst_ratio, rep.extra["neOverDual"])
                ne_ok = check_equilibrium(kk.instance, kk.equilibrium, Mechanism.SMITH, 1e-9).is_equilibrium
                if not (rep.passed and ne_ok):
                    fails.append((m, k, p))
    bound = (1 + math.sqrt(2)) / 2
    ok = worst_match <= 1e-9 and worst_ratio <= bound + 1e-3 and not fails
    return CriterionResult(8, "Kawaguchi-Kyan instances", ok,
                           f"max |dual-C(x*)|/C(x*) {worst_match:.2e}, max NE/dual {worst_ratio:.5f} (bound {bound:.5f}), {len(fails)} failures",
                           {"maxMatch": worst_match, "maxRatio": worst_ratio, "failures": fails})


# ---------------------------------------------------------------------------
# 9


def random_family(rng: np.random.Generator, space: Space, size: int | None = None) -> list[KernelVector]:
    size = size or int(rng.integers(1, 9))
    n_res = int(rng.integers(1, 4))
    pool = rng.uniform(0.1, 5.0, size=int(rng.integers(1, 6)))
    family = []
    for _ in range(size):
        parts = {}
        for e in range(n_res):
            if rng.uniform() < 0.7:
                terms = int(rng.integers(1, 4))
                parts[e] = [(float(rng.normal()), float(rng.choice(pool))) for _ in range(terms)]
        family.append(KernelVector.steps(space, parts))
    return family


def criterion_embedding(seed: int = 0, n_families: int = 500) -> CriterionResult:
    rng = np.random.default_rng(_seed(seed, 9))
    worst = 0.0
    worst_eig = 0.0
    for t in range(n_families):
        space = Space.F if t % 2 == 0 else Space.G
        fam = random_family(rng, space)
        G = gram_matrix(fam, sparse=False)
        V = embedding_matrix(fam)
        scale = max(1.0, float(np.abs(G).max()))
        worst = max(worst, float(np.abs(V @ V.T - G).max()) / scale)
        if space is Space.G:
            vals = np.unique(rng.uniform(0.01, 50.0, size=int(rng.integers(2, 40))))
            K = harmonic_kernel(vals[:, None], vals[None, :])
            worst_eig = min(worst_eig, gram_min_eigenvalue(K) / np.trace(K))
    ok = worst <= 1e-10 and worst_eig >= -1e-10
    return CriterionResult(9, "embedding fidelity", ok,
                           f"{n_families} families, max Gram error {worst:.2e}, min kernel eig/trace {worst_eig:.2e}",
                           {"maxError": worst, "minEigOverTrace": worst_eig})


# ---------------------------------------------------------------------------
# 10


def criterion_cce(seed: int = 0, n_instances: int = 150) -> CriterionResult:
    scen = (Scenario.SMITH4, Scenario.PS, Scenario.RAND2133)
    mismatch = 0.0
    mixtures = point = 0
    fails = []
    for t in range(n_instances):
        inst = gen_random(_seed(seed, 100_000 + t), RandomProfile(players=2 + t % 3, resources=2 + t % 2, max_strategies=3))
        rng = np.random.default_rng(_seed(seed, 110_000 + t))
        for s in scen:
            eqs = [x for x, _ in enumerate_pure_equilibria(inst, INFO[s].mechanism)]
            for x in eqs[:2]:
                a = verify_dual_cce(s, inst, ProfileDistribution.point_mass(x))
                b = verify_dual(s, inst, x)
                mismatch = max(mismatch, abs(a.dual_objective - b.dual_objective), abs(a.max_violation_set1 - b.max_violation_set1))
                point += 1
                if not a.passed:
                    fails.append((t, s.value, "point"))
            if len(eqs) >= 2:
                p = rng.dirichlet(np.ones(len(eqs)))
                rep = verify_dual_cce(s, inst, ProfileDistribution(tuple(zip(eqs, p.tolist()))))
                mixtures += 1
                if not rep.passed:
                    fails.append((t, s.value, "mixture"))
    ok = not fails and mismatch <= 1e-12 and mixtures > 0
    return CriterionResult(10, "coarse correlated equilibria", ok,
                           f"{point} point masses, {mixtures} mixtures, {len(fails)} failures, point-mass mismatch {mismatch:.1e}",
                           {"pointMasses": point, "mixtures": mixtures, "failures": fails})


CRITERIA: dict[int, Callable[..., CriterionResult]] = {
    1: criterion_constants,
    2: criterion_primal,
    3: criterion_fitting,
    4: criterion_weak_duality,
    5: criterion_local_search,
    6: criterion_lower_bound,
    7: criterion_greedy,
    8: criterion_kk,
    9: criterion_embedding,
    10: criterion_cce,
}


def run_all(seed: int = 0, only: list[int] | None = None) -> list[CriterionResult]:
    batch = None
    out = []
    for n in sorted(only or CRITERIA):
        if n in (3, 4):
            batch = batch if batch is not None else equilibrium_batch(seed)
            out.append(CRITERIA[n](seed, batch=batch))
        else:
            out.append(CRITERIA[n](seed))
    return out
