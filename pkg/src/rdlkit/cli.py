"""Command-line entry point ``rdlkit``.

stdout carries only JSON or CSV; diagnostics go to stderr.  Exit codes:
0 success / member, 1 non-member / infeasible, 2 usage or validation error.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import frontier as fr
from . import regions_discrete as rd
from . import regions_gaussian as rg
from . import schemesim as ss
from .model import (
    AuxChannel,
    ChainOrder,
    GaussianChain,
    JointPmf3,
    ModelError,
    RdlPoint,
    check_markov,
    load_model,
    validate,
)

log = logging.getLogger("rdlkit")


class UsageError(Exception):
    pass


def _num(v):
    if isinstance(v, dict):
        return {str(k): _num(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_num(x) for x in v]
    if isinstance(v, np.ndarray):
        return _num(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        if not math.isfinite(f):
            return "inf" if f > 0 else ("-inf" if f < 0 else "nan")
        return float(format(f, ".12g"))
    if isinstance(v, AuxChannel):
        return {"inputs": list(v.inputs), "output": v.output, "probs": _num(v.probs)}
    return v


def _dumps(doc) -> str:
    return json.dumps(_num(doc), sort_keys=True, indent=2) + "\n"


def _emit(text: str, out: str | None) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _params(raw: str | None) -> dict:
    if not raw:
        return {}
    try:
        if raw.startswith("@"):
            return json.loads(Path(raw[1:]).read_text())
        return json.loads(raw)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"--params: {exc}") from exc


def _setting(name: str) -> rd.SettingId:
    try:
        return rd.SettingId(name)
    except ValueError:
        raise UsageError(f"unknown setting {name!r}; choose from {', '.join(s.value for s in rd.SettingId)}")


def _channel(p: dict, key: str, inputs: tuple[str, ...], output: str, required: bool = True):
    if key not in p:
        if required:
            raise UsageError(f"--params needs {key!r}")
        return None
    return AuxChannel(inputs, output, np.asarray(p[key], dtype=float))


def _g(p: dict):
    return None if p.get("g") is None else np.asarray(p["g"])


def _distortion(p: dict):
    d = p.get("distortion")
    if d is None or d == "hamming":
        return None
    if d == "logloss":
        return "logloss"
    return np.asarray(d, dtype=float)


def _corner_doc(c: rd.CornerPoint) -> dict:
    q = c.point
    return {"r1": q.r1, "r2": q.r2, "r3": q.r3, "d": q.d, "delta": q.delta, "values": c.values}


def _verdict_doc(v: rd.Verdict) -> dict:
    return {"member": v.member, "on_boundary": v.on_boundary, "slacks": v.slacks, "floors": v.floors,
            "message": v.message}


# -- region ---------------------------------------------------------------------


def _eval_discrete(s: rd.SettingId, m: JointPmf3, p: dict) -> dict:
    S = rd.SettingId
    dist = _distortion(p)
    if s == S.OneSided:
        u = _channel(p, "p_u_given_y", ("y",), "u")
        if dist == "logloss" and "p_v_given_x" not in p:
            return _corner_doc(rd.one_sided_logloss_corner(m, u, float(p["d"])))
        v = _channel(p, "p_v_given_x", ("x",), "v")
        return _corner_doc(rd.one_sided_inner_corner(m, u, v, _g(p), dist))
    if s == S.TwoSided:
        u = _channel(p, "p_u_given_y", ("y",), "u")
        if "p_xhat_given_uxy" in p:
            h = _channel(p, "p_xhat_given_uxy", ("u", "x", "y"), "h")
        else:
            h = _channel(p, "p_xhat_given_ux", ("u", "x"), "h")
        return _corner_doc(rd.two_sided_corner(m, u, h, dist))
    if s in (S.TriA, S.CasA, S.TriA_BC, S.TriB, S.CasB, S.TriB_BC):
        if "d" not in p:
            raise UsageError("--params needs 'd' for the log-loss floors")
        D = float(p["d"])
        r3 = 0.0 if s.name.startswith("Cas") else float(p.get("r3", 0.0))
        if s in (S.TriA, S.CasA):
            f = rd.tri_A_logloss_floors(m, D, r3)
        elif s == S.TriA_BC:
            f = rd.tri_A_BC_logloss_floors(m, D)
        else:
            f = rd.tri_B_logloss_floors(m, D, r3, bc=s == S.TriB_BC)
        return {"floors": f, "d": D, "r3": r3, "quantities": rd.logloss_quantities(m)}
    if s in (S.TriC, S.CasC):
        u = _channel(p, "p_u_given_x", ("x",), "u")
        r3 = 0.0 if s == S.CasC else float(p.get("r3", 0.0))
        return _corner_doc(rd.tri_C_corner(m, u, _g(p), r3, dist))
    if s == S.TriC_BC:
        return _corner_doc(rd.tri_C_BC_corner(m, _channel(p, "p_u_given_x", ("x",), "u"), _g(p), dist))
    u = _channel(p, "p_u_given_xz", ("x", "z"), "u")
    if s == S.TriD:
        v = _channel(p, "p_v_given_uxz", ("u", "x", "z"), "v", required=False)
        return _corner_doc(rd.tri_D_corner(m, u, v, _g(p), dist))
    if s == S.CasD:
        return _corner_doc(rd.cas_D_corner(m, u, _g(p), dist))
    return _corner_doc(rd.tri_D_BC_corner(m, u, _g(p), dist))


def _eval_gaussian(s: rd.SettingId, c: GaussianChain, p: dict) -> tuple[dict, int]:
    S = rd.SettingId
    if s == S.OneSided:
        if "alpha" in p:
            return _corner_doc(rg.one_sided_gaussian_corner(c, float(p["alpha"]), float(p["d"]))), 0
        r = rg.dmin_one_sided(c, float(p["r1"]), float(p["r2"]), float(p["delta"]))
        doc = {"feasible": r.feasible, "dmin": r.dmin, "branch": r.branch, "alpha_star": r.alpha_star,
               "clamped": r.clamped, "delta_used": r.delta_used}
        return doc, 0 if r.feasible else 1
    D = float(p["d"])
    r3 = 0.0 if s.name.startswith("Cas") else float(p.get("r3", 0.0))
    if s in (S.TriA, S.CasA):
        return {"floors": rg.tri_A_gaussian_floors(c, D, r3)}, 0
    if s in (S.TriB, S.CasB):
        return {"floors": rg.tri_B_gaussian_floors(c, D, r3)}, 0
    raise UsageError(f"no Gaussian evaluator for {s.value}")


def _point(p: dict) -> RdlPoint:
    try:
        return RdlPoint(float(p["r1"]), float(p["r2"]), float(p["d"]), float(p["delta"]),
                        None if p.get("r3") is None else float(p["r3"]))
    except KeyError as exc:
        raise UsageError(f"membership needs r1, r2, d, delta (missing {exc})") from exc


def _member(s: rd.SettingId, m, p: dict, jobs: int) -> tuple[dict, int]:
    S = rd.SettingId
    q = _point(p)
    if isinstance(m, GaussianChain):
        if s in (S.TriA, S.CasA):
            v = rg.tri_A_gaussian_check(m, q)
        elif s in (S.TriB, S.CasB):
            v = rg.tri_B_gaussian_check(m, q)
        elif s == S.OneSided:
            r = rg.dmin_one_sided(m, q.r1, q.r2, q.delta)
            ok = r.feasible and q.d >= r.dmin - rd.SLACK_TOL
            msg = "member" if ok else ("Δ below I(X;Z) floor" if not r.feasible else "D below D_min")
            return {"member": ok, "dmin": r.dmin, "message": msg}, 0 if ok else 1
        else:
            raise UsageError(f"no Gaussian membership for {s.value}")
        return _verdict_doc(v), 0 if v.member else 1
    dist = _distortion(p)
    if dist == "logloss" and s in (S.TriA, S.CasA, S.TriA_BC, S.TriB, S.CasB, S.TriB_BC):
        if s.name.startswith("Cas") and q.r3:
            raise UsageError("cascade settings have no private link; drop r3")
        if s in (S.TriA, S.CasA):
            v = rd.tri_A_logloss_check(m, q)
        elif s == S.TriA_BC:
            v = rd.tri_A_BC_logloss_check(m, q)
        else:
            v = rd.tri_B_logloss_check(m, q, bc=s == S.TriB_BC)
        doc = _verdict_doc(v)
        if not v.member and v.slacks.get("delta", 0) < -rd.SLACK_TOL and q.delta < rd.logloss_quantities(m)["I(X;Z)"]:
            doc["message"] = "Δ below I(X;Z) floor"
        return doc, 0 if v.member else 1
    grid = fr.GridSpec(k=int(p.get("k", 8)), u_sizes=tuple(p.get("u_sizes", (1, 2))),
                       v_sizes=tuple(p.get("v_sizes", (1,))))
    res = fr.membership(s, m, q, grid, fr.Objective(distortion=dist), jobs=jobs)
    doc = {"member": res.inside, "message": res.message, "slack": res.slack, "resolution": res.resolution,
           "witness": None if res.witness is None else fr.serialize_witness(res.witness.witness)}
    return doc, 0 if res.inside else 1


def cmd_region(args) -> int:
    m = load_model(args.model)
    s = _setting(args.setting)
    p = _params(args.params)
    if args.action == "eval":
        if isinstance(m, GaussianChain):
            doc, code = _eval_gaussian(s, m, p)
        else:
            doc, code = _eval_discrete(s, m, p), 0
    else:
        doc, code = _member(s, m, p, args.jobs)
    doc = {"setting": s.value, "action": args.action, **doc}
    _emit(_dumps(doc), args.out)
    if code == 1:
        print(doc.get("message") or "not a member", file=sys.stderr)
    return code


# -- fig4 -----------------------------------------------------------------------


def _floats(raw: str) -> list[float]:
    try:
        return [float(t) for t in raw.replace(",", " ").split()]
    except ValueError as exc:
        raise UsageError(f"bad number list {raw!r}") from exc


def cmd_fig4(args) -> int:
    c = load_model(args.model)
    if not isinstance(c, GaussianChain) or c.order != ChainOrder.Y_X_Z:
        raise UsageError("fig4 needs a Gaussian model with order Y_X_Z")
    lo, hi = rg.delta_range(c)
    d_lo = lo if args.delta_lo is None else args.delta_lo
    d_hi = hi if args.delta_hi is None else args.delta_hi
    if args.steps < 1 or d_hi < d_lo:
        raise UsageError("empty Δ range")
    grid = np.array([d_lo]) if args.steps == 1 else np.linspace(d_lo, d_hi, args.steps)
    r1s, r2s = _floats(args.r1), _floats(args.r2)
    if not r1s or not r2s:
        raise UsageError("need at least one R1 and one R2")
    lines = ["r1,r2,delta,dmin,branch,alpha_star"]
    f = rg._fmt
    for r1 in r1s:
        for r2 in r2s:
            cv = rg.fig4_curve(c, r1, r2, grid)
            for row in cv.rows():
                lines.append(",".join([f(r1), f(r2), *row]))
    for r2 in r2s:
        if r2 > 0:
            lines.append(",".join(["", f(r2), f(rg.delta_star(c, r2)), "", "delta_star", ""]))
    _emit("\n".join(lines) + "\n", args.out)
    return 0


# -- frontier -------------------------------------------------------------------


def _ints(raw: str) -> tuple[int, ...]:
    try:
        return tuple(int(t) for t in raw.replace(",", " ").split())
    except ValueError as exc:
        raise UsageError(f"bad integer list {raw!r}") from exc


def cmd_frontier(args) -> int:
    m = load_model(args.model)
    if not isinstance(m, JointPmf3):
        raise UsageError("frontier needs a discrete model")
    s = _setting(args.setting)
    dist = args.distortion
    if dist in (None, "hamming"):
        dist = None
    elif dist != "logloss":
        dist = np.asarray(json.loads(Path(dist).read_text()), dtype=float)
    grid = fr.GridSpec(k=args.k, u_sizes=_ints(args.u_sizes), v_sizes=_ints(args.v_sizes))
    obj = fr.Objective(d=tuple(_floats(args.d)) if args.d else None,
                       r3=tuple(_floats(args.r3)) if args.r3 else (0.0,), distortion=dist)
    log.info("tracing %s at k=%d", s.value, args.k)
    curve = fr.trace_frontier(s, m, grid, obj, jobs=args.jobs)
    _emit(curve.to_csv(), args.out)
    return 0


# -- simulate ---------------------------------------------------------------------


def cmd_simulate(args) -> int:
    m = load_model(args.model)
    if not isinstance(m, JointPmf3):
        raise UsageError("simulate needs a discrete model")
    p = _params(args.params)
    scheme = p.get("scheme", "one_sided")
    n, trials = int(p.get("n", 64)), int(p.get("trials", 0))
    eps = float(p.get("eps", 0.1))
    common = dict(n=n, trials=trials, eps=eps, seed=args.seed, selection=p.get("selection", "random"),
                  exact=bool(p.get("exact", False)))
    if scheme == "one_sided":
        cr = p.get("codebook_rates")
        rep = ss.run_one_sided(m, _channel(p, "p_u_given_y", ("y",), "u"),
                               _channel(p, "p_v_given_x", ("x",), "v"), np.asarray(p["g"]),
                               tuple(p["rates"]), codebook_rates=None if cr is None else tuple(cr),
                               block=p.get("block"), **common)
    elif scheme in ("forwarding_A", "forwarding_C"):
        rep = ss.run_triangular_forwarding(m, _channel(p, "p_u_given_x", ("x",), "u"), np.asarray(p["g"]),
                                           tuple(p["rates"]), setting=scheme[-1],
                                           codebook_rate=p.get("codebook_rate"), **common)
    elif scheme == "keyed_B":
        k = p.get("key", {})
        rep = ss.run_triangular_keyed(m, _channel(p, "p_u_given_x", ("x",), "u"), np.asarray(p["g"]),
                                      tuple(p["rates"]), ss.KeyConfig(float(k.get("rate", 0.0)),
                                                                      k.get("mode", "binned"), int(k.get("seed", 0))),
                                      codebook_rate=p.get("codebook_rate"), **common)
    else:
        raise UsageError(f"unknown scheme {scheme!r}")
    _emit(rep.to_json() + "\n", args.out)
    return 0


# -- validate ---------------------------------------------------------------------


def cmd_validate(args) -> int:
    try:
        m = load_model(args.model)
    except ModelError as exc:
        _emit(_dumps({"valid": False, "error": type(exc).__name__, "message": str(exc)}), args.out)
        return 2
    if isinstance(m, GaussianChain):
        doc = {"valid": True, "kind": "gaussian", "order": m.order.value}
    else:
        doc = {"valid": not validate(m), "kind": "discrete", "shape": list(m.shape), "markov": {}}
        for chain in ("x-y-z", "x-z-y", "y-x-z"):
            r = check_markov(m, chain)
            doc["markov"][chain.upper()] = {"holds": r.passed, "max_violation": r.max_violation}
    _emit(_dumps(doc), args.out)
    return 0


# -- parser -----------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        sys.exit(2)


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="rdlkit", description="Rate-distortion-leakage regions with a public helper.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    ap.add_argument("--jobs", type=int, default=1, help="worker cap (does not change outputs)")
    sub = ap.add_subparsers(dest="cmd", required=True, parser_class=_Parser)

    r = sub.add_parser("region", help="evaluate a corner or test membership")
    r.add_argument("action", choices=("eval", "member"))
    r.add_argument("--model", required=True)
    r.add_argument("--setting", required=True)
    r.add_argument("--params", help="JSON object or @file")
    r.add_argument("--out")
    r.set_defaults(func=cmd_region)

    f = sub.add_parser("fig4", help="D_min versus leakage for the one-sided Gaussian helper")
    f.add_argument("--model", required=True)
    f.add_argument("--r1", default="1,1.25")
    f.add_argument("--r2", default="0.5,1,1.25")
    f.add_argument("--delta-lo", type=float)
    f.add_argument("--delta-hi", type=float)
    f.add_argument("--steps", type=int, default=200)
    f.add_argument("--out")
    f.set_defaults(func=cmd_fig4)

    t = sub.add_parser("frontier", help="grid-search Pareto frontier")
    t.add_argument("--model", required=True)
    t.add_argument("--setting", required=True)
    t.add_argument("--k", type=int, default=8)
    t.add_argument("--u-sizes", default="1,2")
    t.add_argument("--v-sizes", default="1")
    t.add_argument("--distortion", help="hamming (default), logloss, or a JSON table file")
    t.add_argument("--d", help="fixed distortion levels (log loss)")
    t.add_argument("--r3", help="private-link rates")
    t.add_argument("--out")
    t.set_defaults(func=cmd_frontier)

    s = sub.add_parser("simulate", help="run the finite-blocklength scheme simulator")
    s.add_argument("--model", required=True)
    s.add_argument("--params", required=True, help="JSON object or @file")
    s.add_argument("--seed", type=int, required=True)
    s.add_argument("--out")
    s.set_defaults(func=cmd_simulate)

    v = sub.add_parser("validate", help="check a model file")
    v.add_argument("--model", required=True)
    v.add_argument("--out")
    v.set_defaults(func=cmd_validate)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.jobs < 1:
        print("rdlkit: error: --jobs must be >= 1", file=sys.stderr)
        return 2
    try:
        return args.func(args)
    except (UsageError, ModelError, rd.MarkovPreconditionError, rd.CardinalityError, ValueError,
            KeyError, OSError) as exc:
        print(f"rdlkit: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
