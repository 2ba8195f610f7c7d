"""Named instance families and seeded random instances.

Random instances use numpy's ``default_rng`` (PCG64 seeded through
``SeedSequence``), so a seed identifies an instance across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .localsearch import GAMMA
from .model import (
    AffineInstance,
    Assignment,
    CongestionInstance,
    InstanceError,
    scheduling_instance,
    validate_instance,
)

LAMBDA = (GAMMA + math.sqrt(GAMMA**2 + 4)) / 2  # positive root of t^2 = 1 + GAMMA t


class InvalidParams(InstanceError):
    pass


# ---------------------------------------------------------------------------
# local-search lower bound


@dataclass(frozen=True)
class LowerBoundInstance:
    instance: CongestionInstance
    local_opt: Assignment
    canonical: Assignment

    @property
    def canonical_cost_formula(self) -> float:
        return LAMBDA**2 + self.instance.n_players - 1

    @property
    def local_opt_cost_formula(self) -> float:
        return self.instance.n_players * LAMBDA**2

    @property
    def ratio_formula(self) -> float:
        return self.local_opt_cost_formula / self.canonical_cost_formula


def gen_lower_bound_ls(n: int, literal: bool = False) -> LowerBoundInstance:
    """Jobs ``1..n`` on machines ``1..n+1``; job ``j`` may use machines ``j`` and ``j+1``.

    Job ``j >= 2`` has weight ``LAMBDA^-(j-1)`` and processing times
    ``LAMBDA^(j-1)`` on machine ``j`` and ``LAMBDA^(j+1)`` on ``j+1``; the
    profile ``j -> j+1`` is a potential local optimum of cost ``n LAMBDA^2``,
    while ``j -> j`` costs ``LAMBDA^2 + n - 1``.

    Job 1 has weight 1 and time ``LAMBDA^2`` on both machines. This makes the
    inequality of job 2 tight: its deviation potential is
    ``1 + GAMMA * w_1 w_2 min(d_21, d_22) = 1 + GAMMA LAMBDA = LAMBDA^2``.
    ``literal=True`` instead uses weight ``LAMBDA`` and times ``LAMBDA``,
    which gives the same costs but lets job 2 improve (its ratio on machine 2
    drops to 1), so that variant is not a local optimum.
    """
    if n < 2:
        raise InvalidParams("the lower-bound family needs n >= 2")
    lam = LAMBDA
    rows = []
    w1, p1 = (lam, lam) if literal else (1.0, lam**2)
    rows.append({"m1": p1, "m2": p1})
    weights = [w1]
    for j in range(2, n + 1):
        rows.append({f"m{j}": lam ** (j - 1), f"m{j + 1}": lam ** (j + 1)})
        weights.append(lam ** -(j - 1))
    machines = [f"m{i}" for i in range(1, n + 2)]
    inst = scheduling_instance(rows, weights, machines)
    local = Assignment.from_choices(inst, [1] * n)
    canon = Assignment.from_choices(inst, [0] * n)
    return LowerBoundInstance(inst, local, canon)


# ---------------------------------------------------------------------------
# Kawaguchi-Kyan reduced instances


@dataclass(frozen=True)
class KKParams:
    """``m`` machines, ``k < m`` large jobs of size ``p`` and unit workload of size-``eps`` jobs per machine."""

    m: int
    k: int
    p: float
    eps: float

    def validate(self) -> "KKParams":
        if self.m < 1 or int(self.m) != self.m:
            raise InvalidParams("m must be a positive integer")
        if not 0 <= self.k < self.m or int(self.k) != self.k:
            raise InvalidParams("need 0 <= k < m")
        if not self.p > 0 or not self.eps > 0 or self.eps > 1:
            raise InvalidParams("need p > 0 and 0 < eps <= 1")
        return self

    @property
    def per_machine(self) -> int:
        """Small jobs per machine; ``1/eps`` rounded so each machine holds workload exactly 1."""
        return max(1, round(1 / self.eps))

    @property
    def eps_used(self) -> float:
        return 1.0 / self.per_machine

    @property
    def n_small(self) -> int:
        return self.m * self.per_machine

    @property
    def alpha(self) -> float:
        return self.m / (self.m - self.k)

    @property
    def beta(self) -> float:
        return (self.m + self.p * self.k) / self.m

    @property
    def high_case(self) -> bool:
        return self.p >= self.alpha

    def opt_cost(self) -> float:
        """Closed-form optimum of the reduced instance (two cases at ``p = alpha``)."""
        m, k, p = self.m, self.k, self.p
        if self.high_case:
            return k * p**2 + (m - k) / 2 * self.alpha**2
        return 0.5 * (k * p**2 + m * self.beta**2)

    def ne_cost_limit(self) -> float:
        """Equilibrium cost as ``eps -> 0``: ``m/2`` for the small jobs plus ``k p (1 + p)``."""
        return self.m / 2 + self.k * self.p * (1 + self.p)


@dataclass(frozen=True)
class KKInstance:
    params: KKParams
    instance: CongestionInstance
    equilibrium: Assignment
    small: tuple[int, ...]
    large: tuple[int, ...]

    @property
    def opt_cost(self) -> float:
        return self.params.opt_cost()


def gen_kk(params: KKParams) -> KKInstance:
    """Identical machines with ``w_j = p_j``; small jobs come first in the index order.

    All Smith ratios equal 1, so ties are broken by index and every small job
    precedes every large one. The equilibrium spreads small jobs round-robin
    (one unit of workload per machine) and puts large job ``l`` on machine
    ``l``, so all large jobs start at time 1.
    """
    params.validate()
    m, eps = params.m, params.eps_used
    sizes = [eps] * params.n_small + [float(params.p)] * params.k
    P = np.tile(np.array(sizes)[:, None], (1, m))
    ids = [f"s{t + 1}" for t in range(params.n_small)] + [f"L{t + 1}" for t in range(params.k)]
    inst = scheduling_instance(P, sizes, job_ids=ids)
    choices = [t % m for t in range(params.n_small)] + list(range(params.k))
    small = tuple(range(params.n_small))
    large = tuple(range(params.n_small, params.n_small + params.k))
    return KKInstance(params, inst, Assignment.from_choices(inst, choices), small, large)


# ---------------------------------------------------------------------------
# random instances


@dataclass(frozen=True)
class RandomProfile:
    """Shape of a random instance.

    ``mode`` is one of ``general``, ``uniform-ratio`` (``p_ej = lambda_e w_j``),
    ``scheduling`` (singleton strategies) or ``restricted-identical``
    (singletons with ``p_ij = p_j``). ``grid`` rounds weights and times to
    multiples of itself, which produces ties in the Smith ratios.
    """

    players: int = 3
    resources: int = 3
    max_strategies: int = 3
    max_strategy_size: int = 2
    weight_range: tuple[float, float] = (0.5, 2.0)
    proc_range: tuple[float, float] = (0.5, 3.0)
    kind: str = "congestion"
    mode: str = "general"
    grid: float | None = None
    zero_weight_prob: float = 0.0
    extra: dict = field(default_factory=dict)


def _draw(rng: np.random.Generator, lo: float, hi: float, grid: float | None) -> float:
    v = float(rng.uniform(lo, hi))
    if grid:
        v = max(grid, round(v / grid) * grid)
    return v


def _strategies(rng: np.random.Generator, prof: RandomProfile, singleton: bool) -> list[list[int]]:
    m = prof.resources
    size_cap = 1 if singleton else max(1, min(prof.max_strategy_size, m))
    want = int(rng.integers(1, prof.max_strategies + 1))
    seen, out = set(), []
    for _ in range(8 * want):
        if len(out) == want:
            break
        size = int(rng.integers(1, size_cap + 1))
        s = tuple(sorted(int(e) for e in rng.choice(m, size=size, replace=False)))
        if s not in seen:
            seen.add(s)
            out.append(list(s))
    return out


def gen_random(seed: int, profile: RandomProfile | None = None) -> CongestionInstance | AffineInstance:
    prof = profile or RandomProfile()
    rng = np.random.default_rng(seed)
    rids = [f"e{i + 1}" for i in range(prof.resources)]
    singleton = prof.mode in ("scheduling", "restricted-identical")
    if prof.kind == "affine":
        resources = [
            {"id": r, "a": _draw(rng, *prof.proc_range, prof.grid), "b": _draw(rng, 0.0, prof.proc_range[1], prof.grid)}
            for r in rids
        ]
        players = []
        for j in range(prof.players):
            strats = _strategies(rng, prof, singleton)
            used = sorted({e for s in strats for e in s})
            players.append(
                {
                    "id": f"p{j + 1}",
                    "strategies": [[rids[e] for e in s] for s in strats],
                    "resource_weights": {rids[e]: _draw(rng, *prof.weight_range, prof.grid) for e in used},
                }
            )
        return validate_instance({"kind": "affine", "resources": resources, "players": players})
    if prof.kind != "congestion":
        raise InvalidParams(f"unknown kind {prof.kind!r}")
    lam = [_draw(rng, *prof.proc_range, prof.grid) for _ in rids]
    players = []
    for j in range(prof.players):
        w = _draw(rng, *prof.weight_range, prof.grid)
        if prof.zero_weight_prob and rng.uniform() < prof.zero_weight_prob:
            w = 0.0
        strats = _strategies(rng, prof, singleton)
        used = sorted({e for s in strats for e in s})
        if prof.mode == "uniform-ratio":
            proc = {rids[e]: lam[e] * w for e in used}
        elif prof.mode == "restricted-identical":
            pj = _draw(rng, *prof.proc_range, prof.grid)
            proc = {rids[e]: pj for e in used}
        elif prof.mode in ("general", "scheduling"):
            proc = {rids[e]: _draw(rng, *prof.proc_range, prof.grid) for e in used}
        else:
            raise InvalidParams(f"unknown mode {prof.mode!r}")
        players.append(
            {"id": f"p{j + 1}", "weight": w, "strategies": [[rids[e] for e in s] for s in strats], "processing": proc}
        )
    return validate_instance({"kind": "congestion", "resources": rids, "players": players})
