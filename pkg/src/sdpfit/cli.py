"""Command-line interface.

Exit status: 0 when the command's check passes, 2 when it certifies a
failure (infeasible fitting, not an equilibrium, a failed suite criterion),
1 for usage and input errors. With ``--json`` errors are reported as
``{"error": {"kind": ..., "message": ...}}``.
"""

from __future__ import annotations

import argparse
import itertools
import json
import math
import sys
from pathlib import Path
from typing import Any

import numpy as np

from . import acceptance
from .cost import Mechanism, social_cost
from .dualfit import INFO, CertificateMismatch, NotAnEquilibrium, Scenario, parse_scenario, verify_dual, verify_dual_cce
from .equilibria import best_response_dynamics, check_equilibrium, parse_distribution
from .generators import KKParams, RandomProfile, gen_kk, gen_lower_bound_ls, gen_random
from .localsearch import check_gamma_potential, check_jumpopt, improved_local_search, jump_opt
from .model import AffineInstance, Assignment, SdpfitError, assignment_to_json, instance_to_json, parse_assignment, validate_instance
from .online import greedy_online, replay_check
from .oracle import DEFAULT_CAP, brute_force_opt, ratio_report

SIG = 12


class UsageError(Exception):
    pass


class InputError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message: str):
        raise UsageError(message)


def fmt(v: Any) -> Any:
    """Round floats to 12 significant digits, recursively; non-finite floats become strings."""
    if isinstance(v, (bool, str)) or v is None:
        return v
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return float(f"{v:.{SIG}g}") if math.isfinite(v) else str(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, dict):
        return {str(k): fmt(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [fmt(x) for x in v]
    if isinstance(v, np.ndarray):
        return fmt(v.tolist())
    return str(v)


def _text(report: dict, indent: int = 0) -> str:
    lines = []
    pad = "  " * indent
    for k, v in report.items():
        if isinstance(v, dict):
            lines.append(f"{pad}{k}:")
            lines.append(_text(v, indent + 1))
        elif isinstance(v, float):
            lines.append(f"{pad}{k}: {v:.{SIG}g}")
        else:
            lines.append(f"{pad}{k}: {v}")
    return "\n".join(line for line in lines if line)


def _load_json(path: str | None, what: str) -> dict:
    if path is None:
        raise UsageError(f"--{what} is required")
    try:
        return json.loads(Path(path).read_text())
    except FileNotFoundError as exc:
        raise OSError(f"{what} file not found: {path}") from exc
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: invalid JSON ({exc})") from exc


def _instance(args):
    return validate_instance(_load_json(args.instance, "instance"))


def _mechanism(args, instance):
    if isinstance(instance, AffineInstance):
        return None
    return Mechanism(args.mechanism)


def _assignment(path: str | None, instance, what: str = "assignment") -> Assignment:
    return parse_assignment(_load_json(path, what), instance)


def _order(text: str | None, instance) -> list[int] | None:
    if text is None:
        return None
    idx = instance.player_index
    try:
        return [idx[t.strip()] for t in text.split(",") if t.strip()]
    except KeyError as exc:
        raise InputError(f"unknown player {exc.args[0]!r} in --order") from exc


# ---------------------------------------------------------------------------
# commands; each returns (report dict, ok)


def cmd_eval(args):
    inst = _instance(args)
    x = _assignment(args.assignment, inst)
    br = social_cost(inst, x, _mechanism(args, inst))
    return br.to_json(inst), True


def cmd_check_ne(args):
    inst = _instance(args)
    x = _assignment(args.assignment, inst)
    rep = check_equilibrium(inst, x, _mechanism(args, inst), args.tol)
    return rep.to_json(inst), rep.is_equilibrium


def cmd_br(args):
    inst = _instance(args)
    init = _assignment(args.init, inst, "init") if args.init else Assignment.from_choices(inst, [0] * inst.n_players)
    res = best_response_dynamics(inst, _mechanism(args, inst), init, args.max_iters, args.policy, args.seed, args.tol)
    out = {"converged": res.converged, "moves": res.moves, **assignment_to_json(res.assignment, inst)}
    out["social"] = social_cost(inst, res.assignment, _mechanism(args, inst)).social
    return out, res.converged


def cmd_jumpopt(args):
    inst = _instance(args)
    init = _assignment(args.init, inst, "init") if args.init else None
    res = jump_opt(inst, init, args.max_iters, args.tol)
    cert = check_jumpopt(inst, res.assignment)
    out = {"converged": res.converged, "moves": res.moves, **assignment_to_json(res.assignment, inst)}
    out["social"] = social_cost(inst, res.assignment).social
    out["certificate"] = cert.to_json(inst)
    return out, res.converged


def cmd_localsearch(args):
    inst = _instance(args)
    init = _assignment(args.init, inst, "init") if args.init else None
    res = improved_local_search(inst, init, args.eps_rel, args.max_iters)
    cert = check_gamma_potential(inst, res.assignment)
    out = {"converged": res.converged, "moves": res.moves, **assignment_to_json(res.assignment, inst)}
    out["social"] = social_cost(inst, res.assignment).social
    out["certificate"] = cert.to_json(inst)
    return out, res.converged and cert.passed(max(args.eps_rel, 1e-9))


def cmd_greedy(args):
    inst = _instance(args)
    if args.all_orders:
        if inst.n_players > 7:
            raise UsageError("--all-orders supports at most 7 players")
        opt = brute_force_opt(inst, Mechanism.SMITH, args.cap)[0]
        worst, worst_order, ok = -1.0, None, True
        for perm in itertools.permutations(range(inst.n_players)):
            x, state = greedy_online(inst, perm)
            c = state.cumulative[-1]
            ok = ok and replay_check(state).max_violation <= 1e-9
            if c > worst:
                worst, worst_order = c, perm
        ratio = worst / opt if opt > 0 else 1.0
        out = {
            "orders": math.factorial(inst.n_players),
            "worstCost": worst,
            "worstOrder": [inst.players[j].id for j in worst_order],
            "opt": opt,
            "worstRatio": ratio,
        }
        return out, ok and ratio <= 4 + 1e-9
    x, state = greedy_online(inst, _order(args.order, inst))
    rc = replay_check(state)
    out = {**assignment_to_json(x, inst), "social": state.cumulative[-1]}
    out["increments"] = dict(zip((p.id for p in inst.players), state.increments.tolist()))
    out["maxStepViolation"] = rc.max_violation
    return out, rc.max_violation <= 1e-9


def _parse_kk(text: str) -> KKParams:
    try:
        m, k, p, eps = text.split(",")
        return KKParams(int(m), int(k), float(p), float(eps))
    except ValueError as exc:
        raise UsageError("--kk expects m,k,p,eps") from exc


def cmd_verify_dual(args):
    s = parse_scenario(args.scenario)
    info = INFO[s]
    if info.certificate == "kk":
        if not args.kk:
            raise UsageError(f"{s.value} needs --kk m,k,p,eps")
        kk = gen_kk(_parse_kk(args.kk))
        rep = verify_dual(s, kk.instance, kk, tol=args.tol, tol_psd=args.tol_psd)
        return rep.to_json(), rep.passed
    inst = _instance(args)
    if args.distribution:
        sigma = parse_distribution(_load_json(args.distribution, "distribution"), inst)
        rep = verify_dual_cce(s, inst, sigma, args.tol, args.tol_psd)
        return rep.to_json(), rep.passed
    if info.certificate == "greedy":
        cert = greedy_online(inst, _order(args.order, inst))[1]
    elif args.assignment:
        cert = _assignment(args.assignment, inst)
    elif info.certificate == "jumpopt":
        cert = jump_opt(inst, max_iters=args.max_iters).assignment
    elif info.certificate == "gamma":
        cert = improved_local_search(inst, max_iters=args.max_iters).assignment
    else:
        raise UsageError(f"{s.value} needs --assignment or --distribution")
    rep = verify_dual(s, inst, cert, tol=args.tol, tol_psd=args.tol_psd, cap=args.cap)
    return rep.to_json(), rep.passed


def cmd_oracle(args):
    inst = _instance(args)
    rep = ratio_report(inst, _mechanism(args, inst), args.tol, args.cap)
    return rep.to_json(inst), True


def _write_pair(prefix: str | None, instance, profiles: dict) -> dict:
    out = {"instance": instance_to_json(instance), "profiles": {k: assignment_to_json(v, instance) for k, v in profiles.items()}}
    if prefix is None:
        return out
    base = Path(prefix)
    base.parent.mkdir(parents=True, exist_ok=True)
    files = {"instance": str(base.with_suffix(".json"))}
    base.with_suffix(".json").write_text(json.dumps(out["instance"], indent=2))
    for k, v in out["profiles"].items():
        path = base.with_name(f"{base.name}.{k}.json")
        path.write_text(json.dumps(v, indent=2))
        files[k] = str(path)
    return {"written": files}


def cmd_gen(args):
    if args.family == "lower-bound":
        lb = gen_lower_bound_ls(args.n, literal=args.literal)
        info = _write_pair(args.out, lb.instance, {"local": lb.local_opt, "canonical": lb.canonical})
        info["ratioFormula"] = lb.ratio_formula
        return info, True
    if args.family == "kk":
        kk = gen_kk(KKParams(args.m, args.k, args.p, args.eps))
        info = _write_pair(args.out, kk.instance, {"equilibrium": kk.equilibrium})
        info["optFormula"] = kk.opt_cost
        return info, True
    prof = RandomProfile(
        players=args.players,
        resources=args.resources,
        max_strategies=args.max_strategies,
        max_strategy_size=args.max_strategy_size,
        kind=args.kind,
        mode=args.mode,
    )
    inst = gen_random(args.seed, prof)
    return _write_pair(args.out, inst, {}), True


def cmd_suite(args):
    only = [int(t) for t in args.criteria.split(",")] if args.criteria else None
    results = acceptance.run_all(args.seed, only)
    if not args.json:
        for r in results:
            print(r.line())
    ok = all(r.passed for r in results)
    return {"seed": args.seed, "pass": ok, "criteria": [r.to_json() for r in results]}, ok


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="sdpfit", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", parser_class=_Parser)

    def common(sp, instance=True, mechanism=False):
        sp.add_argument("--json", action="store_true", help="machine-readable output")
        sp.add_argument("--tol", type=float, default=1e-9)
        sp.add_argument("--max-iters", type=int, default=100_000)
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--cap", type=int, default=DEFAULT_CAP, help="largest profile count to enumerate")
        if instance:
            sp.add_argument("--instance")
        if mechanism:
            sp.add_argument("--mechanism", default="smith", choices=[m.value for m in Mechanism])

    sp = sub.add_parser("eval", help="social and per-player cost")
    common(sp, mechanism=True)
    sp.add_argument("--assignment")
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("check-ne", help="check the equilibrium conditions")
    common(sp, mechanism=True)
    sp.add_argument("--assignment")
    sp.set_defaults(func=cmd_check_ne)

    sp = sub.add_parser("br", help="best-response dynamics")
    common(sp, mechanism=True)
    sp.add_argument("--init")
    sp.add_argument("--policy", default="round-robin", choices=["round-robin", "random"])
    sp.set_defaults(func=cmd_br)

    sp = sub.add_parser("jumpopt", help="single-job moves on the global objective")
    common(sp)
    sp.add_argument("--init")
    sp.set_defaults(func=cmd_jumpopt)

    sp = sub.add_parser("localsearch", help="potential-based local search")
    common(sp)
    sp.add_argument("--init")
    sp.add_argument("--eps-rel", type=float, default=1e-9)
    sp.set_defaults(func=cmd_localsearch)

    sp = sub.add_parser("greedy", help="greedy online assignment")
    common(sp)
    sp.add_argument("--order", help="comma-separated player ids")
    sp.add_argument("--all-orders", action="store_true")
    sp.set_defaults(func=cmd_greedy)

    sp = sub.add_parser("verify-dual", help="fit and verify a dual solution")
    common(sp)
    sp.set_defaults(tol=1e-8)
    sp.add_argument("--scenario", required=True)
    sp.add_argument("--assignment")
    sp.add_argument("--distribution")
    sp.add_argument("--order")
    sp.add_argument("--kk", help="m,k,p,eps for the Kawaguchi-Kyan scenarios")
    sp.add_argument("--tol-psd", type=float, default=1e-8)
    sp.set_defaults(func=cmd_verify_dual)

    sp = sub.add_parser("oracle", help="brute-force optima and equilibria")
    common(sp, mechanism=True)
    sp.set_defaults(func=cmd_oracle)

    sp = sub.add_parser("gen", help="generate instances")
    common(sp, instance=False)
    sp.add_argument("family", choices=["lower-bound", "kk", "random"])
    sp.add_argument("--out", help="output prefix; writes PREFIX.json and PREFIX.<profile>.json")
    sp.add_argument("--n", type=int, default=3)
    sp.add_argument("--literal", action="store_true", help="lower bound with the uncorrected first job")
    sp.add_argument("--m", type=int, default=2)
    sp.add_argument("--k", type=int, default=1)
    sp.add_argument("--p", type=float, default=2.0)
    sp.add_argument("--eps", type=float, default=0.01)
    sp.add_argument("--players", type=int, default=3)
    sp.add_argument("--resources", type=int, default=3)
    sp.add_argument("--max-strategies", type=int, default=3)
    sp.add_argument("--max-strategy-size", type=int, default=2)
    sp.add_argument("--kind", default="congestion", choices=["congestion", "affine"])
    sp.add_argument("--mode", default="general", choices=["general", "uniform-ratio", "scheduling", "restricted-identical"])
    sp.set_defaults(func=cmd_gen)

    sp = sub.add_parser("suite", help="run the acceptance battery")
    common(sp, instance=False)
    sp.add_argument("--criteria", help="comma-separated criterion numbers")
    sp.set_defaults(func=cmd_suite)
    return p


def _emit(report: dict, as_json: bool, stream=None) -> None:
    stream = stream or sys.stdout
    if as_json:
        print(json.dumps(fmt(report), indent=2, sort_keys=True), file=stream)
    else:
        print(_text(fmt(report)), file=stream)


def main(argv: list[str] | None = None) -> int:
    argv = sys.argv[1:] if argv is None else argv
    as_json = "--json" in argv
    try:
        args = build_parser().parse_args(argv)
        if args.command is None:
            raise UsageError("a command is required")
        for name in ("tol", "tol_psd", "eps_rel"):
            if getattr(args, name, 1.0) <= 0:
                raise UsageError(f"--{name.replace('_', '-')} must be positive")
        report, ok = args.func(args)
    except UsageError as exc:
        return _fail("usage", str(exc), as_json)
    except OSError as exc:
        return _fail("io", str(exc), as_json)
    except (InputError, CertificateMismatch, NotAnEquilibrium, SdpfitError, ValueError, KeyError, TypeError) as exc:
        return _fail("input", f"{type(exc).__name__}: {exc}", as_json)
    if args.command == "suite" and not as_json:
        print("suite:", "PASS" if ok else "FAIL")
    else:
        _emit(report, as_json)
    return 0 if ok else 2


def _fail(kind: str, message: str, as_json: bool) -> int:
    if as_json:
        print(json.dumps({"error": {"kind": kind, "message": message}}))
    else:
        print(f"error ({kind}): {message}", file=sys.stderr)
    return 1


if __name__ == "__main__":
    sys.exit(main())
