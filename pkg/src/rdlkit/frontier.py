"""Grid search over quantized auxiliary channels and Pareto filtering.

Every conditional row of an auxiliary channel ranges over the pmfs whose
entries are multiples of ``1/k``.  The search enumerates every combination
exactly (no sampling), evaluates the corner of the requested setting in
batches, and keeps the non-dominated points.  Coordinates are all minimized:
(r1, r2, r3, d, delta).
"""
from __future__ import annotations

import csv
import io
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .measures import Joint, SoftReconstruction, compose, join, logloss_distortion
from .model import AuxChannel, JointPmf3, RdlPoint, require_valid
from .regions_discrete import (
    SLACK_TOL,
    SettingId,
    _dist_table,
    logloss_quantities,
    require_markov,
    tri_A_BC_logloss_floors,
    tri_A_logloss_floors,
    tri_B_logloss_floors,
)

log = logging.getLogger(__name__)

PARETO_TOL = 1e-12
CHUNK = 4096
COLS = ("r1", "r2", "r3", "d", "delta")


def simplex_grid(k: int, m: int) -> np.ndarray:
    """All pmfs on ``m`` symbols with entries in {0, 1/k, ..., 1}, lexicographic in the counts.

    Returns an array of shape (C(k+m-1, m-1), m).
    """
    if k < 1 or m < 1:
        raise ValueError("k and m must be >= 1")
    out: list[tuple[int, ...]] = []

    def rec(prefix: tuple[int, ...], left: int, slots: int) -> None:
        if slots == 1:
            out.append(prefix + (left,))
            return
        for c in range(left + 1):
            rec(prefix + (c,), left - c, slots - 1)

    rec((), k, m)
    assert len(out) == math.comb(k + m - 1, m - 1)
    return np.array(out, dtype=float) / k


@dataclass(frozen=True)
class GridSpec:
    k: int = 8
    u_sizes: tuple[int, ...] = (1, 2)
    v_sizes: tuple[int, ...] = (1,)
    h_sizes: tuple[int, ...] | None = None  # reconstruction alphabet sizes (two-sided only)
    max_channels: int = 2_000_000

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("grid resolution k must be >= 1")
        if not self.u_sizes or min(self.u_sizes) < 1 or min(self.v_sizes) < 1:
            raise ValueError("aux sizes must be >= 1")


@dataclass(frozen=True)
class Objective:
    """Fixed coordinates for the search.

    ``d`` lists distortion levels for settings where D is an input (log loss);
    ``r3`` lists private-link rates for settings where R3 is an input.
    """

    d: tuple[float, ...] | None = None
    r3: tuple[float, ...] = (0.0,)
    distortion: object = None


# -- channel slots per setting --------------------------------------------------


@dataclass(frozen=True)
class _Slot:
    inputs: tuple[str, ...]
    output: str
    n_in: int
    size: int
    in_shape: tuple[int, ...]


def _is_logloss(distortion) -> bool:
    return isinstance(distortion, str) and distortion == "logloss"


def _slots(setting: SettingId, model: JointPmf3, u: int, v: int, h: int | None) -> list[_Slot]:
    nx, ny, nz = model.shape
    s = setting
    if s == SettingId.OneSided:
        return [_Slot(("y",), "u", ny, u, (ny,)), _Slot(("x",), "v", nx, v, (nx,))]
    if s == SettingId.TwoSided:
        return [_Slot(("y",), "u", ny, u, (ny,)), _Slot(("u", "x"), "h", u * nx, h, (u, nx))]
    if s in (SettingId.TriC, SettingId.CasC, SettingId.TriC_BC):
        return [_Slot(("x",), "u", nx, u, (nx,))]
    if s == SettingId.TriD:
        return [_Slot(("x", "z"), "u", nx * nz, u, (nx, nz)),
                _Slot(("u", "x", "z"), "v", u * nx * nz, v, (u, nx, nz))]
    if s in (SettingId.CasD, SettingId.TriD_BC):
        return [_Slot(("x", "z"), "u", nx * nz, u, (nx, nz))]
    raise ValueError(f"{s.value} has a closed form; no channel search")


def _caps(setting: SettingId, model: JointPmf3, distortion) -> tuple[int, int]:
    nx, ny, nz = model.shape
    s = setting
    if s == SettingId.OneSided:
        return (ny + 2, 1) if _is_logloss(distortion) else (ny + 4, nx + 1)
    if s == SettingId.TwoSided:
        return ny + 3, 1
    if s in (SettingId.TriC, SettingId.CasC, SettingId.TriC_BC):
        return nx + 1, 1
    if s == SettingId.TriD:
        return nx * nz + 3, (nx * nz + 3) * (nx * nz + 1)
    return nx * nz + 2, 1


# -- batched evaluation ---------------------------------------------------------


def _digits(idx: np.ndarray, radix: int, n: int) -> np.ndarray:
    """Mixed-radix expansion, most significant digit first."""
    out = np.empty((idx.size, n), dtype=np.int64)
    rem = idx.copy()
    for j in range(n - 1, -1, -1):
        out[:, j] = rem % radix
        rem //= radix
    return out


class _Space:
    """Cartesian product of quantized channel slots, indexed lexicographically."""

    def __init__(self, slots: list[_Slot], k: int):
        self.slots = slots
        self.rows = [simplex_grid(k, s.size) for s in slots]
        self.counts = [len(r) ** s.n_in for r, s in zip(self.rows, slots)]
        self.total = int(np.prod(self.counts, dtype=object))

    def channels(self, idx: np.ndarray) -> list[np.ndarray]:
        """Channel arrays (B, *in_shape, size) for global indices ``idx``."""
        out = []
        rem = idx.astype(np.int64)
        per = []
        for c in reversed(self.counts):
            per.append(rem % c)
            rem = rem // c
        per.reverse()
        for s, rows, loc in zip(self.slots, self.rows, per):
            d = _digits(loc, len(rows), s.n_in)
            out.append(rows[d].reshape((idx.size,) + s.in_shape + (s.size,)))
        return out


def _clip(a, name: str):
    a = np.asarray(a, dtype=float)
    if a.size and a.min() < -1e-9:
        raise ArithmeticError(f"{name} evaluated negative ({a.min()})")
    return np.maximum(a, 0.0)


def _batch_eval(setting: SettingId, base: np.ndarray, slots: list[_Slot], chans: list[np.ndarray],
                obj: Objective, pre: dict) -> np.ndarray:
    """Corner coordinates (B*, 5) for one batch; rows repeat per fixed D / R3 value."""
    s = setting
    names = "xy" if s in (SettingId.TriC, SettingId.CasC, SettingId.TriC_BC) else "xyz"
    probs, cur, batch = base, names, False
    for sl, w in zip(slots, chans):
        probs, cur, batch = compose(probs, cur, w, sl.inputs, sl.output, batch)
    j = Joint(probs, cur, batch)
    B = probs.shape[0]
    dist = obj.distortion
    zeros = np.zeros(B)

    def block(r1, r2, r3, d, delta):
        return np.stack([_clip(r1, "r1"), _clip(r2, "r2"), _clip(r3, "r3"), _clip(d, "d"),
                         _clip(delta, "delta")], axis=1)

    def dist_of(ctx: str):
        if _is_logloss(dist):
            return j.H("x", ctx)
        table = pre["dtable"]
        p = j.marginal("x" + ctx)
        cost = np.tensordot(p, table, axes=([1], [0]))
        return cost.min(axis=-1).reshape(B, -1).sum(axis=1)

    if s == SettingId.OneSided:
        r2, delta = j.I("y", "u"), j.I("x", "uz")
        if _is_logloss(dist):
            h = j.H("x", "u")
            return np.concatenate([block(np.maximum(h - D, 0), r2, zeros, np.full(B, D), delta)
                                   for D in obj.d])
        return block(j.I("x", "v", "u"), r2, zeros, dist_of("uv"), delta)
    if s == SettingId.TwoSided:
        table = pre["dtable"]
        d = np.einsum("bxh,xh->b", j.marginal("xh"), table)
        return block(j.I("x", "h", "u"), j.I("y", "u"), zeros, d, j.I("x", "uz"))
    if s in (SettingId.TriC, SettingId.CasC):
        wz = j.I("x", "u", "y")
        d = dist_of("uy")
        r3s = (0.0,) if s == SettingId.CasC else obj.r3
        return np.concatenate([block(np.maximum(wz - r3, 0), np.maximum(wz - r3, 0), np.full(B, r3), d,
                                     np.maximum(wz - r3, 0)) for r3 in r3s])
    if s == SettingId.TriC_BC:
        wz = j.I("x", "u", "y")
        return block(wz, zeros, zeros, dist_of("uy"), wz)
    if s == SettingId.TriD:
        return block(j.I("x", "u", "z"), j.I("xz", "u", "y"), j.I("xz", "v", "uy"), dist_of("uvy"),
                     j.I("x", "uz"))
    if s == SettingId.CasD:
        return block(j.I("x", "u", "z"), j.I("xz", "u", "y"), zeros, dist_of("uy"), j.I("x", "uz"))
    if s == SettingId.TriD_BC:
        r1 = j.I("x", "u", "z")
        return block(r1, np.maximum(j.I("xz", "u", "y") - r1, 0), zeros, dist_of("uy"), j.I("x", "uz"))
    raise AssertionError(s)


# -- frontier -------------------------------------------------------------------


@dataclass(frozen=True)
class FrontierPoint:
    point: RdlPoint
    witness: dict = field(default_factory=dict)


@dataclass
class FrontierCurve:
    setting: SettingId
    k: int | None
    points: list[FrontierPoint]
    params: dict = field(default_factory=dict)
    order: tuple[str, ...] = COLS

    def array(self) -> np.ndarray:
        return np.array([p.point.as_tuple() for p in self.points], dtype=float).reshape(-1, 5)

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        pkeys = sorted(self.params)
        if header:
            w.writerow(["setting", "k", *pkeys, *COLS, "witness"])
        for fp in self.points:
            w.writerow([
                self.setting.value, "" if self.k is None else self.k,
                *(_fmt(self.params[p]) for p in pkeys),
                *(_fmt(v) for v in fp.point.as_tuple()),
                serialize_witness(fp.witness),
            ])
        return buf.getvalue()


def _fmt(v) -> str:
    if isinstance(v, (list, tuple)):
        return " ".join(_fmt(x) for x in v)
    if isinstance(v, str):
        return v
    if v is None:
        return ""
    return format(float(v), ".12g")


def serialize_witness(w: dict) -> str:
    parts = []
    for key in sorted(w):
        val = w[key]
        if isinstance(val, AuxChannel):
            rows = np.asarray(val.probs).reshape(-1, val.aux_size)
            body = ";".join(",".join(format(float(x), ".12g") for x in r) for r in rows)
            parts.append(f"{key}=[{body}]")
        else:
            parts.append(f"{key}={_fmt(val)}")
    return " ".join(parts)


def pareto_filter(points: np.ndarray, tol: float = PARETO_TOL) -> np.ndarray:
    """Indices of the non-dominated rows (all coordinates minimized).

    Rows are visited in lexicographic order of their coordinates with a stable
    sort, so among duplicates the earliest row is kept.
    """
    pts = np.asarray(points, dtype=float)
    if pts.shape[0] == 0:
        return np.zeros(0, dtype=np.int64)
    order = np.lexsort(pts.T[::-1])
    keep = _kernels.pareto_keep(pts[order], tol)
    return np.sort(order[keep])


def _closed_form_points(setting: SettingId, model: JointPmf3, obj: Objective) -> list[FrontierPoint]:
    if obj.d is None:
        raise ValueError(f"{setting.value} under log loss needs fixed distortion levels")
    s = setting
    out = []
    r3s = (0.0,) if s.name.startswith("Cas") or s.name.endswith("_BC") else obj.r3
    for D in obj.d:
        for r3 in r3s:
            if s in (SettingId.TriA, SettingId.CasA):
                f = tri_A_logloss_floors(model, D, r3)
            elif s == SettingId.TriA_BC:
                f = tri_A_BC_logloss_floors(model, D)
            elif s in (SettingId.TriB, SettingId.CasB):
                f = tri_B_logloss_floors(model, D, r3)
            elif s == SettingId.TriB_BC:
                f = tri_B_logloss_floors(model, D, bc=True)
            else:
                raise ValueError(s)
            out.append(FrontierPoint(RdlPoint(f["r1"], f["r2"], D, f["delta"],
                                              r3 if s in (SettingId.TriA, SettingId.TriB) else None),
                                     {"closed_form": "floor"}))
    return out


CLOSED_FORM = (SettingId.TriA, SettingId.CasA, SettingId.TriA_BC,
               SettingId.TriB, SettingId.CasB, SettingId.TriB_BC)


def _prepare(setting: SettingId, model: JointPmf3, obj: Objective) -> tuple[np.ndarray, dict]:
    require_valid(model)
    if setting.markov:
        require_markov(model, setting.markov)
    dist = obj.distortion
    pre = {}
    if _is_logloss(dist):
        if setting in (SettingId.TwoSided,):
            raise ValueError("two-sided search takes a distortion table")
        if setting == SettingId.OneSided and obj.d is None:
            raise ValueError("log-loss one-sided search needs fixed distortion levels")
    else:
        pre["dtable"] = _dist_table(dist, model.shape[0])
    if setting in (SettingId.TriC, SettingId.CasC, SettingId.TriC_BC):
        base = model.probs.sum(axis=2)
    else:
        base = np.asarray(model.probs)
    return base, pre


def _spaces(setting: SettingId, model: JointPmf3, grid: GridSpec, obj: Objective):
    cap_u, cap_v = _caps(setting, model, obj.distortion)
    nx = model.shape[0]
    h_sizes = grid.h_sizes or (nx,)
    v_sizes = grid.v_sizes if setting == SettingId.TriD or (
        setting == SettingId.OneSided and not _is_logloss(obj.distortion)) else (1,)
    if setting == SettingId.OneSided and _is_logloss(obj.distortion):
        v_sizes = (1,)
    for u in grid.u_sizes:
        if u > cap_u:
            raise ValueError(f"|U| = {u} exceeds the cap {cap_u} for {setting.value}")
    for v in v_sizes:
        if v > cap_v:
            raise ValueError(f"|V| = {v} exceeds the cap {cap_v} for {setting.value}")
    out = []
    for u in grid.u_sizes:
        for v in v_sizes:
            for h in (h_sizes if setting == SettingId.TwoSided else (None,)):
                sl = _slots(setting, model, u, v, h)
                out.append(((u, v, h), sl, _Space(sl, grid.k)))
    total = sum(sp.total for _, _, sp in out)
    if total > grid.max_channels:
        raise ValueError(f"grid has {total} channel combinations, above max_channels={grid.max_channels}")
    return out


def _reps(setting: SettingId, obj: Objective) -> tuple[str, tuple[float, ...]]:
    if setting == SettingId.OneSided and _is_logloss(obj.distortion):
        return "d", tuple(obj.d)
    if setting == SettingId.TriC:
        return "r3", tuple(obj.r3)
    return "", (None,)


def _witness(setting, slots, chans, rep_key, rep_val, aux) -> dict:
    w = {}
    for sl, ch in zip(slots, chans):
        w[f"p_{sl.output}_given_{''.join(sl.inputs)}"] = AuxChannel(sl.inputs, sl.output, ch)
    if rep_key:
        w[rep_key] = rep_val
    return w


def _evaluate_all(setting, model, grid, obj, jobs):
    """Yield (points (N, 5), locator) over every space in deterministic order."""
    base, pre = _prepare(setting, model, obj)
    spaces = _spaces(setting, model, grid, obj)
    rep_key, reps = _reps(setting, obj)
    results = []
    for si, (aux, slots, space) in enumerate(spaces):
        starts = list(range(0, space.total, CHUNK))

        def work(st, slots=slots, space=space):
            idx = np.arange(st, min(st + CHUNK, space.total), dtype=np.int64)
            pts = _batch_eval(setting, base, slots, space.channels(idx), obj, pre)
            return idx, pts

        if jobs and jobs > 1 and len(starts) > 1:
            with ThreadPoolExecutor(max_workers=jobs) as ex:
                chunks = list(ex.map(work, starts))
        else:
            chunks = [work(st) for st in starts]
        for idx, pts in chunks:
            nrep = len(reps)
            B = idx.size
            loc = np.stack([np.full(B * nrep, si), np.tile(idx, nrep), np.repeat(np.arange(nrep), B)], axis=1)
            results.append((pts, loc))
    if not results:
        return np.zeros((0, 5)), np.zeros((0, 3), dtype=np.int64), spaces, rep_key, reps
    pts = np.concatenate([r[0] for r in results])
    loc = np.concatenate([r[1] for r in results])
    # order: aux sizes, then repetition value, then channel index
    order = np.lexsort((loc[:, 1], loc[:, 2], loc[:, 0]))
    return pts[order], loc[order], spaces, rep_key, reps


def trace_frontier(setting: SettingId | str, model: JointPmf3, grid: GridSpec,
                   objective: Objective | None = None, jobs: int = 1) -> FrontierCurve:
    """Pareto frontier of the setting's corners over the quantized channel grid.

    Closed-form settings (A and B under log loss) return their floor points.
    """
    setting = SettingId(setting)
    obj = objective or Objective()
    params = {}
    if obj.d is not None:
        params["d_fixed"] = list(obj.d)
    if setting in CLOSED_FORM:
        if not _is_logloss(obj.distortion):
            raise ValueError(f"{setting.value} is evaluated in closed form under log loss only")
        pts = _closed_form_points(setting, model, obj)
        arr = np.array([p.point.as_tuple() for p in pts])
        keep = pareto_filter(arr)
        return FrontierCurve(setting, None, [pts[i] for i in keep], params)
    pts, loc, spaces, rep_key, reps = _evaluate_all(setting, model, grid, obj, jobs)
    keep = pareto_filter(pts)
    out = []
    for i in keep:
        si, ci, ri = (int(v) for v in loc[i])
        aux, slots, space = spaces[si]
        chans = [c[0] for c in space.channels(np.array([ci]))]
        r1, r2, r3, d, delta = pts[i]
        r3v = r3 if setting in (SettingId.TriC, SettingId.TriD) else None
        out.append(FrontierPoint(RdlPoint(r1, r2, d, delta, r3v),
                                 _witness(setting, slots, chans, rep_key, reps[ri], aux)))
    return FrontierCurve(setting, grid.k, out, params)


def dominated_by(a: np.ndarray, b: np.ndarray, tol: float = PARETO_TOL) -> np.ndarray:
    """For each row of ``a``, whether some row of ``b`` weakly dominates it."""
    a = np.asarray(a, float).reshape(-1, 5)
    b = np.asarray(b, float).reshape(-1, 5)
    if b.shape[0] == 0:
        return np.zeros(a.shape[0], dtype=bool)
    return np.array([bool(np.any(np.all(b <= r + tol, axis=1))) for r in a])


# -- membership -----------------------------------------------------------------


@dataclass(frozen=True)
class Membership:
    inside: bool
    message: str
    witness: FrontierPoint | None = None
    slack: float | None = None
    resolution: int | None = None


LEAKAGE_FLOOR_SETTINGS = (
    SettingId.OneSided, SettingId.TwoSided, SettingId.TriA, SettingId.CasA, SettingId.TriA_BC,
    SettingId.TriB, SettingId.CasB, SettingId.TriB_BC, SettingId.TriD, SettingId.CasD, SettingId.TriD_BC,
)


def leakage_floor(setting: SettingId, model: JointPmf3) -> float:
    """Channel-independent lower bound on Delta (I(X;Z), or 0 in setting C)."""
    if setting in LEAKAGE_FLOOR_SETTINGS:
        return logloss_quantities(model)["I(X;Z)"]
    return 0.0


def membership(setting: SettingId | str, model: JointPmf3, q: RdlPoint, grid: GridSpec,
               objective: Objective | None = None, jobs: int = 1) -> Membership:
    """Is ``q`` weakly dominated by some grid corner?  "outside" is resolution-qualified."""
    setting = SettingId(setting)
    obj = objective or Objective()
    require_valid(model)
    floor = leakage_floor(setting, model)
    if q.delta < floor - SLACK_TOL:
        return Membership(False, f"outside: Δ below I(X;Z) floor ({q.delta:.12g} < {floor:.12g}); "
                                 "holds at every resolution", None, q.delta - floor, None)
    r3 = q.r3 or 0.0
    if _is_logloss(obj.distortion) and setting in (SettingId.OneSided,) + CLOSED_FORM:
        obj = Objective(d=(q.d,), r3=(r3,), distortion="logloss")
    elif setting == SettingId.TriC:
        obj = Objective(d=obj.d, r3=(r3,), distortion=obj.distortion)
    if setting in CLOSED_FORM:
        fp = _closed_form_points(setting, model, obj)[0]
        c = fp.point
        slacks = [q.r1 - c.r1, q.r2 - c.r2, q.delta - c.delta]
        s = min(slacks)
        ok = s >= -SLACK_TOL
        return Membership(ok, "inside" if ok else "outside (closed form)", fp, s, None)
    pts, loc, spaces, rep_key, reps = _evaluate_all(setting, model, grid, obj, jobs)
    qv = np.array(q.as_tuple())
    if setting == SettingId.TriD_BC:
        # constraints are R1 >= r1 and R1 + R2 >= r1 + r2
        sl = np.stack([qv[0] - pts[:, 0], qv[0] + qv[1] - pts[:, 0] - pts[:, 1],
                       qv[3] - pts[:, 3], qv[4] - pts[:, 4]], axis=1)
    else:
        cols = [0, 1, 3, 4] + ([2] if setting in (SettingId.TriD,) else [])
        sl = qv[cols] - pts[:, cols]
    worst = sl.min(axis=1)
    i = int(np.argmax(worst))
    if worst.size == 0:
        return Membership(False, f"outside at resolution k={grid.k}", None, None, grid.k)
    si, ci, ri = (int(v) for v in loc[i])
    aux, slots, space = spaces[si]
    chans = [c[0] for c in space.channels(np.array([ci]))]
    r1, r2, r3c, d, delta = pts[i]
    fp = FrontierPoint(RdlPoint(r1, r2, d, delta, r3c if setting in (SettingId.TriC, SettingId.TriD) else None),
                       _witness(setting, slots, chans, rep_key, reps[ri], aux))
    if worst[i] >= -SLACK_TOL:
        return Membership(True, "inside", fp, float(worst[i]), grid.k)
    return Membership(False, f"outside at resolution k={grid.k} (not a converse claim)", fp,
                      float(worst[i]), grid.k)


# -- log-loss cross-check ---------------------------------------------------------


def erasure_channel(nx: int, p: float) -> AuxChannel:
    """V = X with probability p, else the erasure symbol ``nx``."""
    w = np.zeros((nx, nx + 1))
    w[np.arange(nx), np.arange(nx)] = p
    w[:, nx] = 1.0 - p
    return AuxChannel(("x",), "v", w)


@dataclass(frozen=True)
class CrosscheckReport:
    matched_gap: float
    grid_gap: float | None
    n_matched: int
    single_letter: np.ndarray = field(repr=False, default=None)
    inner: np.ndarray = field(repr=False, default=None)


def _inner_logloss_corner(model: JointPmf3, u_ch: AuxChannel, v_ch: AuxChannel) -> np.ndarray:
    """Inner-bound corner with the posterior soft reconstruction from (U, V)."""
    j = join(model, u_ch, v_ch)
    p_xuv = j.marginal("xuv")
    soft = SoftReconstruction(j.posterior("x", "uv"))
    d = logloss_distortion(p_xuv, soft)
    return np.array([j.I("x", "v", "u"), j.I("y", "u"), 0.0, d, j.I("x", "uz")])


def _posterior_logloss(p_xuv: np.ndarray) -> np.ndarray:
    """Batched E[log 1/p(X|U,V)] from a (B, x, u, v) joint, summed cell by cell."""
    ctx = p_xuv.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        post = np.where(p_xuv > 0, p_xuv / np.where(ctx > 0, ctx, 1.0), 1.0)
        terms = np.where(p_xuv > 0, -p_xuv * np.log2(post), 0.0)
    return terms.reshape(terms.shape[0], -1).sum(axis=1)


def crosscheck_logloss(model: JointPmf3, grid: GridSpec, d_grid, gap_k: int | None = None) -> CrosscheckReport:
    """Compare the U-only log-loss corners with the (U, V) inner-bound corners.

    For every grid channel p(u|y) and every D, the U-only point
    ([H(X|U) - D]+, I(Y;U), D, I(X;U,Z)) is matched against the inner-bound
    corner whose V is an erasure of X kept with probability 1 - D/H(X|U) (V
    constant when D >= H(X|U)), decoded with the posterior soft
    reconstruction.  ``matched_gap`` is the largest coordinate difference
    (when the clamp is active only an inner D above the target counts).
    With ``gap_k`` set, V also ranges over the ``gap_k`` grid of channels with
    |V| = |X| + 1 and ``grid_gap`` is the largest excess of the best grid rate
    (at distortion <= D) over the U-only rate.
    """
    require_valid(model)
    nx, ny, _ = model.shape
    d_grid = np.asarray([float(d) for d in d_grid])
    base = np.asarray(model.probs)
    v_rows = None
    if gap_k:
        v_space = _Space([_Slot(("x",), "v", nx, nx + 1, (nx,))], gap_k)
        v_rows = v_space.channels(np.arange(v_space.total))[0]
    single, inner = [], []
    grid_gap = 0.0 if gap_k else None
    for u in grid.u_sizes:
        space = _Space([_Slot(("y",), "u", ny, u, (ny,))], grid.k)
        for st in range(0, space.total, CHUNK):
            w = space.channels(np.arange(st, min(st + CHUNK, space.total)))[0]
            probs, cur, batch = compose(base, "xyz", w, ("y",), "u")
            j = Joint(probs, cur, batch)
            B = w.shape[0]
            h = j.H("x", "u")
            r2, delta = j.I("y", "u"), j.I("x", "uz")
            for D in d_grid:
                a = np.stack([np.maximum(h - D, 0.0), r2, np.zeros(B), np.full(B, D), delta], axis=1)
                keep = np.where(h > D, 1.0 - D / np.where(h > 0, h, 1.0), 0.0)  # erasure keep-probability
                ve = np.zeros((B, nx, nx + 1))
                ve[:, np.arange(nx), np.arange(nx)] = keep[:, None]
                ve[:, :, nx] = 1.0 - keep[:, None]
                pj, cj, bj = compose(probs, cur, ve, ("x",), "v", batch)
                jv = Joint(pj, cj, bj)
                b = np.stack([jv.I("x", "v", "u"), jv.I("y", "u"), np.zeros(B),
                              _posterior_logloss(jv.marginal("xuv")), jv.I("x", "uz")], axis=1)
                single.append(a)
                inner.append(b)
            if v_rows is not None:
                nv = v_rows.shape[0]
                pj, cj, bj = compose(np.repeat(probs, nv, axis=0), cur, np.tile(v_rows, (B, 1, 1)),
                                     ("x",), "v", True)
                jv = Joint(pj, cj, bj)
                dv = _posterior_logloss(jv.marginal("xuv")).reshape(B, nv)
                r1v = jv.I("x", "v", "u").reshape(B, nv)
                for D in d_grid:
                    best = np.where(dv <= D + SLACK_TOL, r1v, np.inf).min(axis=1)
                    ok = np.isfinite(best)
                    if np.any(ok):
                        gap = best[ok] - np.maximum(h[ok] - D, 0.0)
                        grid_gap = max(grid_gap, float(gap.max()))
    a = np.concatenate(single)
    b = np.concatenate(inner)
    clamp = b[:, 3] < a[:, 3] - SLACK_TOL  # inner point beats the target D only when the rate is clamped
    dd = np.where(clamp & (a[:, 0] <= SLACK_TOL), 0.0, np.abs(a[:, 3] - b[:, 3]))
    gaps = np.maximum.reduce([np.abs(a[:, 0] - b[:, 0]), np.abs(a[:, 1] - b[:, 1]),
                              np.abs(a[:, 4] - b[:, 4]), dd])
    return CrosscheckReport(float(gaps.max()), grid_gap, int(a.shape[0]), a, b)
