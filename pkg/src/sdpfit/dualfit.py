"""Dual fittings on the shared SDP relaxation and their numerical certification.

Every scenario turns a certificate (an equilibrium, a local optimum, a greedy
trace or a reduced Kawaguchi-Kyan instance) into an explicit dual solution
``(y, v_0, v_ij)`` of

    max  sum_j y_j - |v_0|^2 / 2
    s.t. y_j <= C[ij, ij] - |v_ij|^2 / 2 + <v_0, v_ij>     for all j, i
         <v_ij, v_i'k> <= 2 C[ij, i'k]                     for all (ij) != (i'k)

and ``verify_dual`` checks both constraint families on closed-form inner
products, the positive semidefiniteness of the Gram matrix after a Euclidean
embedding, and the objective bound ``dual >= rho * cost``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Sequence

import numpy as np
import scipy.sparse as sp

from .cost import Mechanism, social_cost
from .equilibria import ProfileDistribution, check_cce, check_equilibrium
from .generators import KKInstance
from .localsearch import GAMMA, check_gamma_potential, check_jumpopt, potentials
from .model import AffineInstance, Assignment, CongestionInstance, Instance, SdpfitError, usage_marginals
from .online import OnlineState
from .sdp import (
    DENSE_EIG_LIMIT,
    CostKind,
    CostMatrix,
    KernelVector,
    Space,
    build_cost_matrix,
    embedding_matrix,
    factored_min_eigenvalue,
    gram_matrix,
    gram_min_eigenvalue,
    pair_legend,
)

SQRT5 = math.sqrt(5)
KK_BOUND = (1 + math.sqrt(2)) / 2
RESTRICTED_BOUND = (5 + SQRT5) / 4


class CertificateMismatch(SdpfitError, ValueError):
    pass


class NotAnEquilibrium(SdpfitError, ValueError):
    pass


class Scenario(str, Enum):
    SMITH4 = "SmithRule4"
    PS = "PropSharing"
    RAND2133 = "Rand2133"
    RAND_UNIFORM2 = "RandUniform2"
    RAND_POA2 = "RandPoA2"
    AFFINE = "AffineCG"
    JUMPOPT = "JumpOptFit"
    JUMPOPT_RESTRICTED = "JumpOptRestricted"
    IMPROVED_LS = "ImprovedLSFit"
    GREEDY = "GreedyFit"
    KK_HIGH = "KKHighP"
    KK_LOW = "KKLowP"


ALIASES = {
    "smith": Scenario.SMITH4,
    "ps": Scenario.PS,
    "rand": Scenario.RAND2133,
    "rand-uniform": Scenario.RAND_UNIFORM2,
    "rand-poa": Scenario.RAND_POA2,
    "affine": Scenario.AFFINE,
    "jumpopt": Scenario.JUMPOPT,
    "jumpopt-restricted": Scenario.JUMPOPT_RESTRICTED,
    "localsearch": Scenario.IMPROVED_LS,
    "greedy": Scenario.GREEDY,
    "kk-high": Scenario.KK_HIGH,
    "kk-low": Scenario.KK_LOW,
}


def parse_scenario(name: str | Scenario) -> Scenario:
    if isinstance(name, Scenario):
        return name
    if name in ALIASES:
        return ALIASES[name]
    for s in Scenario:
        if name.lower() in (s.value.lower(), s.name.lower()):
            return s
    raise ValueError(f"unknown scenario {name!r}")


@dataclass(frozen=True)
class ScenarioInfo:
    program: CostKind
    space: Space
    certificate: str  # nash | jumpopt | gamma | greedy | kk
    mechanism: Mechanism | None
    benchmark: Mechanism | None


INFO: dict[Scenario, ScenarioInfo] = {
    Scenario.SMITH4: ScenarioInfo(CostKind.SMITH, Space.F, "nash", Mechanism.SMITH, Mechanism.SMITH),
    Scenario.PS: ScenarioInfo(CostKind.SMITH, Space.F, "nash", Mechanism.PS, Mechanism.SMITH),
    Scenario.RAND2133: ScenarioInfo(CostKind.SMITH, Space.G, "nash", Mechanism.RAND, Mechanism.SMITH),
    Scenario.RAND_UNIFORM2: ScenarioInfo(CostKind.SMITH, Space.G, "nash", Mechanism.RAND, Mechanism.SMITH),
    Scenario.RAND_POA2: ScenarioInfo(CostKind.RAND, Space.G, "nash", Mechanism.RAND, Mechanism.RAND),
    Scenario.AFFINE: ScenarioInfo(CostKind.AFFINE, Space.E, "nash", None, None),
    Scenario.JUMPOPT: ScenarioInfo(CostKind.SMITH, Space.F, "jumpopt", Mechanism.SMITH, Mechanism.SMITH),
    Scenario.JUMPOPT_RESTRICTED: ScenarioInfo(CostKind.SMITH, Space.F, "jumpopt", Mechanism.SMITH, Mechanism.SMITH),
    Scenario.IMPROVED_LS: ScenarioInfo(CostKind.SMITH, Space.F, "gamma", Mechanism.SMITH, Mechanism.SMITH),
    Scenario.GREEDY: ScenarioInfo(CostKind.SMITH, Space.F, "greedy", Mechanism.SMITH, Mechanism.SMITH),
    Scenario.KK_HIGH: ScenarioInfo(CostKind.SMITH, Space.E, "kk", Mechanism.SMITH, Mechanism.SMITH),
    Scenario.KK_LOW: ScenarioInfo(CostKind.SMITH, Space.E, "kk", Mechanism.SMITH, Mechanism.SMITH),
}

POA_SCENARIOS = tuple(s for s, i in INFO.items() if i.certificate == "nash")


# ---------------------------------------------------------------------------
# constants


@dataclass(frozen=True)
class Constants:
    alpha: float | None
    beta: float | None
    gamma: float | None
    rho: float | None
    residuals: dict[str, float]


def scenario_constants(s: Scenario | str) -> Constants:
    """Fitting constants and the residuals of the identities they must satisfy."""
    s = parse_scenario(s)
    if s in (Scenario.SMITH4, Scenario.GREEDY):
        a, b = 1.0, 0.5
        rho = 0.25
        res = {"1-a^2/2=ab": abs(1 - a * a / 2 - a * b), "b-b^2=rho": abs(b - b * b - rho)}
        return Constants(a, b, None, rho, res)
    if s in (Scenario.PS, Scenario.AFFINE, Scenario.JUMPOPT, Scenario.JUMPOPT_RESTRICTED):
        a = math.sqrt(2 / SQRT5)
        b = 1 / a - a / 2
        rho = 2 / (3 + SQRT5)
        res = {"1-a^2/2=ab": abs(1 - a * a / 2 - a * b), "ab-b^2/2=rho": abs(a * b - b * b / 2 - rho)}
        return Constants(a, b, None, rho, res)
    if s is Scenario.RAND2133:
        a, b, rho = 1.0, 0.75, 15 / 32
        res = {"1-a^2/4=ab": abs(1 - a * a / 4 - a * b), "ab-b^2/2=rho": abs(a * b - b * b / 2 - rho)}
        return Constants(a, b, None, rho, res)
    if s in (Scenario.RAND_UNIFORM2, Scenario.RAND_POA2):
        a, b, rho = 2 / math.sqrt(3), 1 / math.sqrt(3), 0.5
        res = {"1-a^2/4=ab": abs(1 - a * a / 4 - a * b), "ab-b^2/2=rho": abs(a * b - b * b / 2 - rho)}
        return Constants(a, b, None, rho, res)
    if s is Scenario.IMPROVED_LS:
        a = math.sqrt((SQRT5 + 1) / 5)
        b = math.sqrt((SQRT5 - 1) / 5)
        g = GAMMA
        rho = 4 / (5 + SQRT5)
        res = {
            "ab/g=1-a^2/2": abs(a * b / g - (1 - a * a / 2)),
            "ab(2g-1)/g=b^2/2": abs(a * b * (2 * g - 1) / g - b * b / 2),
            "2ab-b^2=rho": abs(2 * a * b - b * b - rho),
        }
        return Constants(a, b, g, rho, res)
    # KK constants depend on the instance; the fitting matches the optimum exactly
    return Constants(None, None, None, 1.0, {})


# ---------------------------------------------------------------------------
# dual solutions


@dataclass(frozen=True)
class DualSolution:
    """``y`` per player plus ``v_0`` and one vector per (player, strategy) in matrix order."""

    scenario: Scenario
    y: np.ndarray
    v0: KernelVector
    vectors: tuple[KernelVector, ...]
    legend: tuple[tuple[int, int], ...]
    meta: dict[str, Any] = field(default_factory=dict)

    @property
    def family(self) -> list[KernelVector]:
        return [self.v0, *self.vectors]

    def with_y(self, y: np.ndarray) -> "DualSolution":
        return DualSolution(self.scenario, np.asarray(y, dtype=float), self.v0, self.vectors, self.legend, self.meta)


def _step_vectors(
    instance: CongestionInstance, z: np.ndarray, alpha: float, beta: float, space: Space
) -> tuple[KernelVector, list[KernelVector]]:
    """``v_0 = beta sum_k w_k z_ek [point d_ek]`` and ``v_ij = alpha w_j [e in i][point d_ej]``."""
    w, d = instance.weights, instance.ratios
    parts0 = {}
    for e, us in enumerate(instance.users):
        terms = [(beta * w[k] * z[e, k], d[e, k]) for k in us if w[k] * z[e, k] > 0]
        if terms:
            parts0[e] = terms
    v0 = KernelVector.steps(space, parts0)
    vecs = []
    for j, strats in enumerate(instance.strategy_resources):
        for s in strats:
            parts = {int(e): [(alpha * w[j], d[e, j])] for e in s} if w[j] > 0 else {}
            vecs.append(KernelVector.steps(space, parts))
    return v0, vecs


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise CertificateMismatch(msg)


def uniform_ratio_violation(instance: CongestionInstance) -> float:
    """Largest relative spread of Smith ratios among positive-weight users of one resource."""
    worst = 0.0
    for e, us in enumerate(instance.users):
        r = [instance.ratios[e, j] for j in us if instance.weights[j] > 0]
        if len(r) > 1:
            worst = max(worst, (max(r) - min(r)) / max(1e-300, max(abs(v) for v in r)))
    return worst


def fit_dual(s: Scenario | str, instance: Instance, certificate, check: bool = True, tol: float = 1e-9) -> DualSolution:
    """Build the fitted dual for scenario ``s``.

    ``check=True`` first confirms that the certificate is of the required
    kind (an equilibrium at ``tol`` for the price-of-anarchy scenarios, a
    local optimum for the local-search ones); ``check=False`` fits whatever
    profile is given, which is what mutation tests need.
    """
    s = parse_scenario(s)
    info = INFO[s]
    k = scenario_constants(s)
    legend = tuple(pair_legend(instance))
    if info.certificate == "kk":
        return _fit_kk(s, instance, certificate, legend)
    if info.program is CostKind.AFFINE:
        _require(isinstance(instance, AffineInstance), f"{s.value} needs an affine instance")
    else:
        _require(isinstance(instance, CongestionInstance), f"{s.value} needs a congestion instance")

    if info.certificate == "greedy":
        _require(isinstance(certificate, OnlineState), "GreedyFit consumes a greedy run")
        _require(certificate.instance is instance, "greedy run belongs to another instance")
        x = certificate.assignment()
    else:
        _require(isinstance(certificate, Assignment), f"{s.value} consumes an assignment")
        x = certificate
    x.validate(instance)
    z = usage_marginals(instance, x)

    if s is Scenario.RAND_UNIFORM2:
        spread = uniform_ratio_violation(instance)
        _require(spread <= 1e-12, f"Smith ratios are not uniform per resource (spread {spread:.3e})")

    if info.certificate in ("jumpopt", "gamma"):
        _require(instance.is_scheduling, f"{s.value} needs a scheduling instance")
        _require(x.is_pure, f"{s.value} needs a pure profile")

    if check:
        if info.certificate == "nash":
            rep = check_equilibrium(instance, x, info.mechanism, tol)
            _require(rep.is_equilibrium, f"profile is not an equilibrium (violation {rep.max_violation:.3e})")
        elif info.certificate == "jumpopt":
            rep = check_jumpopt(instance, x)
            _require(rep.max_violation <= tol, f"profile is not a jump optimum (violation {rep.max_violation:.3e})")
        elif info.certificate == "gamma":
            rep = check_gamma_potential(instance, x)
            _require(rep.max_violation <= tol, f"profile is not a potential local optimum ({rep.max_violation:.3e})")

    a, b = k.alpha, k.beta
    meta: dict[str, Any] = {"assignment": x}
    if info.program is CostKind.AFFINE:
        br = social_cost(instance, x)
        sa = np.sqrt(instance.a)
        v0 = KernelVector.euclidean(b * sa * br.loads)
        vecs = []
        for j, strats in enumerate(instance.strategy_resources):
            for st in strats:
                c = np.zeros(instance.n_resources)
                c[st] = a * sa[st] * instance.rweights[st, j]
                vecs.append(KernelVector.euclidean(c))
        y = a * b * br.per_player
        meta.update(cost=br.social)
        return DualSolution(s, y, v0, tuple(vecs), legend, meta)

    v0, vecs = _step_vectors(instance, z, a, b, info.space)
    br = social_cost(instance, x, info.mechanism)
    w = instance.weights
    if info.certificate == "nash":
        y = a * b * w * br.per_player if s is not Scenario.SMITH4 else b * w * br.per_player
    elif info.certificate == "jumpopt":
        y = a * b * (br.weighted + br.delays)
    elif info.certificate == "gamma":
        y = a * b / k.gamma * potentials(instance, x)
    else:  # greedy
        y = b * certificate.increments
    meta.update(cost=br.social, eta=br.eta)
    return DualSolution(s, np.asarray(y, dtype=float), v0, tuple(vecs), legend, meta)


def _fit_kk(s: Scenario, instance, kk, legend) -> DualSolution:
    _require(isinstance(kk, KKInstance), f"{s.value} consumes a reduced Kawaguchi-Kyan instance")
    _require(kk.instance is instance, "reduced instance does not match")
    par = kk.params
    want_high = s is Scenario.KK_HIGH
    _require(par.high_case == want_high, f"p={par.p} selects the {'high' if par.high_case else 'low'} case")
    m, eps = par.m, par.eps_used
    c0 = par.alpha if want_high else par.beta
    large = set(kk.large)
    y = np.zeros(instance.n_players)
    vecs = []
    for j, strats in enumerate(instance.strategy_resources):
        if j in large:
            h = par.alpha if want_high else par.p
            y[j] = par.p**2 + par.alpha**2 / 2 if want_high else par.p**2 / 2 + par.beta * par.p
        else:
            h = eps
            y[j] = eps * c0
        for st in strats:
            c = np.zeros(m)
            c[st] = h
            vecs.append(KernelVector.euclidean(c))
    v0 = KernelVector.euclidean(np.full(m, c0))
    return DualSolution(s, y, v0, tuple(vecs), legend, {"assignment": kk.equilibrium, "kk": kk})


# ---------------------------------------------------------------------------
# verification


@dataclass(frozen=True)
class FeasibilityReport:
    scenario: str
    rho: float
    dual_objective: float
    social_cost: float
    target: float
    ratio: float
    max_violation_set1: float
    max_violation_set2: float
    set2_tightness: float
    gram_min_eig: float
    gram_trace: float
    embedding_error: float
    feasible: bool
    bound_ok: bool
    passed: bool
    extra: dict[str, Any] = field(default_factory=dict)

    def to_json(self) -> dict:
        out = {
            "scenario": self.scenario,
            "rho": self.rho,
            "dualObjective": self.dual_objective,
            "socialCost": self.social_cost,
            "target": self.target,
            "ratio": self.ratio,
            "maxViolationSet1": self.max_violation_set1,
            "maxViolationSet2": self.max_violation_set2,
            "set2Tightness": self.set2_tightness,
            "gramMinEig": self.gram_min_eig,
            "gramTrace": self.gram_trace,
            "embeddingError": self.embedding_error,
            "feasible": self.feasible,
            "boundOk": self.bound_ok,
            "pass": self.passed,
        }
        out.update({k: v for k, v in self.extra.items() if isinstance(v, (bool, int, float, str)) or v is None})
        return out


@dataclass(frozen=True)
class ConstraintCheck:
    set1: float
    set2: float
    tightness: float
    dual_objective: float


def _safe_div(num: np.ndarray, den: np.ndarray) -> np.ndarray:
    return np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))


def check_constraints(y: np.ndarray, gram, cmat: CostMatrix) -> ConstraintCheck:
    """Relative violations of both constraint families.

    Each violation is divided by the sum of magnitudes of the terms of its
    inequality, so the measure is scale-free and only rounding error remains
    on a feasible solution.
    """
    G = gram.tocsr() if sp.issparse(gram) else sp.csr_matrix(np.asarray(gram))
    C = cmat.matrix
    rows = np.arange(1, C.shape[0])
    players = np.array([j for j, _ in cmat.legend], dtype=int)
    diagG = G.diagonal()[1:]
    row0 = np.asarray(G[0, :].todense()).ravel()[1:]
    diagC = C.diagonal()[1:]
    yj = y[players]
    rhs = diagC - 0.5 * diagG + row0
    scale = np.abs(diagC) + 0.5 * np.abs(diagG) + np.abs(row0) + np.abs(yj)
    v1 = _safe_div(np.maximum(0.0, yj - rhs), scale)
    set1 = float(v1.max(initial=0.0))

    Gs = G[1:, 1:].tocsr()
    C2 = (2.0 * C[1:, 1:]).tocsr()
    Gs = Gs - sp.diags(Gs.diagonal())
    C2 = C2 - sp.diags(C2.diagonal())
    D = (Gs - C2).tocoo()
    if D.nnz:
        absG = abs(Gs).tocsr()
        absC = abs(C2).tocsr()
        den = np.asarray(absG[D.row, D.col]).ravel() + np.asarray(absC[D.row, D.col]).ravel()
        rel = _safe_div(np.abs(D.data), den)
        pos = D.data > 0
        set2 = float(rel[pos].max(initial=0.0))
        tight = float(rel.max(initial=0.0))
    else:
        set2 = tight = 0.0
    dual = float(y.sum() - 0.5 * G[0, 0])
    del rows
    return ConstraintCheck(set1, set2, tight, dual)


def _embedding_check(family: Sequence[KernelVector], gram, tol: float = 1e-8) -> tuple[float, float]:
    """(min eigenvalue, max embedding error) using a Euclidean embedding of the family."""
    V = embedding_matrix(family, tol)
    n = len(family)
    G = gram.tocsr() if sp.issparse(gram) else sp.csr_matrix(np.asarray(gram))
    scale = max(1.0, float(abs(G).max()) if G.nnz else 1.0)
    err = 0.0
    for start in range(0, n, 512):
        stop = min(n, start + 512)
        block = V[start:stop] @ V.T
        err = max(err, float(np.abs(block - G[start:stop].toarray()).max(initial=0.0)))
    if n <= DENSE_EIG_LIMIT:
        lam = gram_min_eigenvalue(G.toarray())
    else:
        lam = factored_min_eigenvalue(V)
    return lam, err / scale


def _certificate_cost(s: Scenario, instance: Instance, sol: DualSolution) -> float:
    return float(sol.meta["cost"])


def _finish(
    s: Scenario,
    chk: ConstraintCheck,
    lam: float,
    trace: float,
    emb: float,
    cost: float,
    target: float,
    tol: float,
    tol_psd: float,
    extra: dict,
    bound_extra_ok: bool = True,
) -> FeasibilityReport:
    rho = scenario_constants(s).rho
    feasible = chk.set1 <= tol and chk.set2 <= tol and lam >= -tol_psd * max(trace, 0.0) and emb <= tol
    bound_ok = chk.dual_objective >= target - tol * max(abs(cost), abs(target)) and bound_extra_ok
    ratio = chk.dual_objective / cost if cost else (1.0 if chk.dual_objective == 0 else math.inf)
    return FeasibilityReport(
        s.value, rho, chk.dual_objective, cost, target, ratio, chk.set1, chk.set2, chk.tightness,
        lam, trace, emb, feasible, bound_ok, feasible and bound_ok, extra,
    )


def verify_dual(
    s: Scenario | str,
    instance: Instance,
    certificate,
    sol: DualSolution | None = None,
    tol: float = 1e-8,
    tol_psd: float = 1e-8,
    cap: int = 2_000_000,
    kk_slack: float = 1e-3,
    gram=None,
) -> FeasibilityReport:
    """Check a fitted solution and the scenario's objective bound.

    The cost the bound refers to is the social cost of the certificate under
    the scenario's mechanism. For the jump-optimum scenarios the report also
    carries the sharper bound ``rho (2 C - eta)`` in ``extra``; the
    restricted-identical variant additionally compares against the
    brute-force optimum. ``gram`` overrides the computed Gram matrix, which
    lets tests feed deliberately corrupted matrices.
    """
    s = parse_scenario(s)
    if sol is None:
        sol = fit_dual(s, instance, certificate)
    info = INFO[s]
    if len(sol.vectors) != len(pair_legend(instance)):
        raise CertificateMismatch("solution does not match the instance's strategy pairs")
    cmat = build_cost_matrix(instance, info.program)
    family = sol.family
    G = gram_matrix(family) if gram is None else gram
    chk = check_constraints(sol.y, G, cmat)
    if gram is None:
        lam, emb = _embedding_check(family, G)
    else:
        lam, emb = gram_min_eigenvalue(G), 0.0
    Gd = G.diagonal() if hasattr(G, "diagonal") else np.diag(G)
    trace = float(np.sum(Gd))
    extra: dict[str, Any] = {}
    rho = scenario_constants(s).rho

    if info.certificate == "kk":
        kk: KKInstance = sol.meta["kk"]
        ne_cost = social_cost(instance, kk.equilibrium, Mechanism.SMITH).social
        opt = kk.opt_cost
        match = abs(chk.dual_objective - opt) / max(1.0, abs(opt))
        poa = ne_cost / chk.dual_objective
        extra.update(optFormula=opt, optMatch=match, neCost=ne_cost, neOverDual=poa, poaBound=KK_BOUND)
        ok = match <= 1e-9 and poa <= KK_BOUND + kk_slack
        return _finish(s, chk, lam, trace, emb, ne_cost, opt, tol, tol_psd, extra, ok)

    cost = _certificate_cost(s, instance, sol)
    target = rho * cost
    ok_extra = True
    if info.certificate == "jumpopt":
        eta = float(sol.meta["eta"])
        strong = rho * (2 * cost - eta)
        extra.update(eta=eta, strongTarget=strong, strongBoundOk=chk.dual_objective >= strong - tol * max(1.0, cost))
        ok_extra = extra["strongBoundOk"]
        if s is Scenario.JUMPOPT_RESTRICTED:
            from .oracle import brute_force_opt

            opt, xo = brute_force_opt(instance, Mechanism.SMITH, cap)
            eta_opt = social_cost(instance, xo, Mechanism.SMITH).eta
            eta_equal = abs(eta - eta_opt) <= 1e-9 * max(1.0, eta)
            restricted_target = rho * (2 * cost - opt)
            approx = cost / opt if opt else 1.0
            extra.update(
                bruteOpt=opt,
                etaOpt=eta_opt,
                etaEqual=eta_equal,
                restrictedTarget=restricted_target,
                approxRatio=approx,
                approxBound=RESTRICTED_BOUND,
            )
            ok_extra = (
                ok_extra
                and eta_equal
                and chk.dual_objective >= restricted_target - tol * max(1.0, cost)
                and approx <= RESTRICTED_BOUND + 1e-6
            )
    if info.certificate == "greedy":
        state: OnlineState = certificate
        ysum = float(sol.y.sum())
        b = scenario_constants(s).beta
        tele = abs(ysum - b * cost) / max(1.0, abs(cost))
        extra.update(sumY=ysum, telescopingResidual=tele)
        ok_extra = tele <= tol
        del state
    return _finish(s, chk, lam, trace, emb, cost, target, tol, tol_psd, extra, ok_extra)


def verify_dual_cce(
    s: Scenario | str,
    instance: Instance,
    sigma: ProfileDistribution,
    tol: float = 1e-8,
    tol_psd: float = 1e-8,
    eq_tol: float = 1e-9,
) -> FeasibilityReport:
    """Verify the expected dual: ``Y = E[Gram]`` and ``phi = E[y]`` over ``sigma``."""
    s = parse_scenario(s)
    info = INFO[s]
    if info.certificate != "nash":
        raise CertificateMismatch(f"{s.value} is not an equilibrium scenario")
    sigma.validate(instance)
    rep = check_cce(instance, sigma, info.mechanism, eq_tol)
    if not rep.is_equilibrium:
        raise NotAnEquilibrium(f"distribution is not a coarse correlated equilibrium ({rep.max_violation:.3e})")
    cmat = build_cost_matrix(instance, info.program)
    Y = None
    phi = np.zeros(instance.n_players)
    cost = 0.0
    emb = 0.0
    for x, p in sigma.support:
        if p == 0:
            continue
        sol = fit_dual(s, instance, x, check=False)
        G = gram_matrix(sol.family, sparse=False)
        _, e = _embedding_check(sol.family, G)
        emb = max(emb, e)
        Y = p * G if Y is None else Y + p * G
        phi += p * sol.y
        cost += p * _certificate_cost(s, instance, sol)
    chk = check_constraints(phi, Y, cmat)
    lam = gram_min_eigenvalue(Y)
    trace = float(np.trace(Y))
    rho = scenario_constants(s).rho
    extra = {"supportSize": len(sigma.support), "expectedCost": cost}
    return _finish(s, chk, lam, trace, emb, cost, rho * cost, tol, tol_psd, extra)


# ---------------------------------------------------------------------------
# mutations used to show the verifier rejects broken solutions


def corrupt_y(instance: Instance, sol: DualSolution, cmat: CostMatrix | None = None, frac: float = 0.1) -> DualSolution:
    """Raise the ``y`` of the tightest player past its slack by ``frac`` of its value."""
    cmat = cmat or build_cost_matrix(instance, INFO[sol.scenario].program)
    G = gram_matrix(sol.family, sparse=True).tocsr()
    players = np.array([j for j, _ in cmat.legend], dtype=int)
    rhs = cmat.matrix.diagonal()[1:] - 0.5 * G.diagonal()[1:] + np.asarray(G[0, :].todense()).ravel()[1:]
    slack = np.full(instance.n_players, np.inf)
    np.minimum.at(slack, players, rhs - sol.y[players])
    j = int(np.argmin(slack))
    y = sol.y.copy()
    y[j] += max(slack[j], 0.0) + frac * max(abs(y[j]), 1.0)
    return sol.with_y(y)


def corrupt_vectors(instance: Instance, sol: DualSolution, factor: float | None = None) -> DualSolution:
    """Scale every ``v_ij`` (not ``v_0``) by ``factor``.

    Without an explicit factor, pick twice the smallest scale ``f`` at which
    ``C_aa - f^2 |v_a|^2 / 2 + f <v_0, v_a> < y_j`` for some pair ``a``, so the
    first constraint family is guaranteed to break even when no two pairs
    interact.
    """
    if factor is None:
        cmat = build_cost_matrix(instance, INFO[sol.scenario].program)
        G = gram_matrix(sol.family, sparse=True).tocsr()
        norms = G.diagonal()[1:]
        g0 = np.asarray(G[0, :].todense()).ravel()[1:]
        players = np.array([j for j, _ in cmat.legend], dtype=int)
        room = np.maximum(cmat.matrix.diagonal()[1:] - sol.y[players], 0.0)
        live = norms > 0
        if not live.any():
            raise ValueError("every v_ij is zero; scaling cannot change the solution")
        roots = (g0[live] + np.sqrt(g0[live] ** 2 + 2 * norms[live] * room[live])) / norms[live]
        factor = 2.0 * max(1.0, float(roots.min()))

    def scale(v: KernelVector) -> KernelVector:
        if v.space is Space.E:
            return KernelVector.euclidean(v.coords * factor)
        return KernelVector(v.space, {e: tuple((h * factor, b) for h, b in t) for e, t in v.parts.items()})

    return DualSolution(sol.scenario, sol.y, sol.v0, tuple(scale(v) for v in sol.vectors), sol.legend, sol.meta)


def corrupt_gram(G: np.ndarray, amount: float | None = None) -> np.ndarray:
    """Shrink ``|v_0|^2`` below what the other entries allow, breaking positive semidefiniteness."""
    G = np.array(G, dtype=float)
    if amount is None:
        amount = G[0, 0] + 1.0
    G[0, 0] -= amount
    return G
