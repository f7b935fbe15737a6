"""Corner points and membership checks for the discrete settings.

Coordinate roles of :class:`~rdlkit.model.JointPmf3` per setting:

=============  ==============  ========================  ==========================
setting        X               Y                         Z
=============  ==============  ========================  ==========================
OneSided       source          helper observation        eavesdropper side info
TwoSided       source          helper observation        eavesdropper side info
TriA/CasA      source          decoder side info         helper side info
TriB/CasB      source          encoder+decoder side info helper side info
TriC/CasC      source          decoder side info         ignored (helper has none)
TriD/CasD      source          decoder side info         encoder+helper side info
=============  ==============  ========================  ==========================

Auxiliary names used in joints: ``u``, ``v`` and ``h`` (the reconstruction
X-hat of the two-sided setting).

Distortion arguments accept ``None`` (Hamming on the source alphabet), a
table ``d[x, xhat]``, or ``"logloss"``.  Reconstruction tables ``g`` map the
context indices to an X-hat index; ``g=None`` picks the per-context argmin
(the posterior for log loss).
"""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field

import numpy as np

from .measures import INF, Joint, SoftReconstruction, join, logloss_distortion, positive_part
from .model import AuxChannel, JointPmf3, RdlPoint, check_markov, require_valid

log = logging.getLogger(__name__)

SLACK_TOL = 1e-12
BOUNDARY_TOL = 1e-9


class SettingId(str, enum.Enum):
    OneSided = "OneSided"
    TwoSided = "TwoSided"
    TriA = "TriA"
    CasA = "CasA"
    TriA_BC = "TriA_BC"
    TriB = "TriB"
    CasB = "CasB"
    TriB_BC = "TriB_BC"
    TriC = "TriC"
    CasC = "CasC"
    TriC_BC = "TriC_BC"
    TriD = "TriD"
    CasD = "CasD"
    TriD_BC = "TriD_BC"

    @property
    def markov(self) -> str | None:
        if self.name[3] in "AB" and self.name.startswith(("Tri", "Cas")):
            return "x-y-z"
        if self.name.startswith(("TriD", "CasD")):
            return "x-z-y"
        return None

    @property
    def has_private_link(self) -> bool:
        return self.name in ("TriA", "TriB", "TriC", "TriD")


class MarkovPreconditionError(ValueError):
    pass


class CardinalityError(ValueError):
    pass


class ReconstructionError(ValueError):
    pass


@dataclass(frozen=True)
class CornerPoint:
    point: RdlPoint
    achieving: dict = field(default_factory=dict)
    values: dict = field(default_factory=dict)


@dataclass(frozen=True)
class Verdict:
    """Membership verdict with signed slack ``lhs - rhs`` per constraint."""

    member: bool
    slacks: dict
    floors: dict
    message: str = ""

    @property
    def on_boundary(self) -> bool:
        return self.member and any(abs(s) <= BOUNDARY_TOL for s in self.slacks.values())


# -- shared helpers -----------------------------------------------------------


def require_markov(model: JointPmf3, chain: str) -> None:
    res = check_markov(model, chain)
    if not res.passed:
        raise MarkovPreconditionError(
            f"setting requires the Markov chain {chain.upper()}; "
            f"max violation {res.max_violation:.3g} exceeds tolerance"
        )


def _cap(ch: AuxChannel | None, cap: int, what: str) -> None:
    if ch is not None and ch.aux_size > cap:
        raise CardinalityError(f"|{what}| = {ch.aux_size} exceeds the cap {cap}")


def _expect_inputs(ch: AuxChannel, inputs: tuple[str, ...], output: str) -> AuxChannel:
    if ch.output != output or tuple(ch.inputs) != inputs:
        raise ValueError(
            f"expected channel p({output}|{','.join(inputs)}), "
            f"got p({ch.output}|{','.join(ch.inputs)})"
        )
    return ch


def _nn(v, name: str) -> float:
    v = float(v)
    if v < -SLACK_TOL:
        raise ArithmeticError(f"{name} evaluated negative ({v})")
    return max(v, 0.0)


def hamming(n: int) -> np.ndarray:
    return 1.0 - np.eye(n)


def _dist_table(distortion, nx: int):
    if distortion is None or (isinstance(distortion, str) and distortion == "hamming"):
        return hamming(nx)
    if isinstance(distortion, str):
        if distortion == "logloss":
            return "logloss"
        raise ValueError(f"unknown distortion {distortion!r}")
    d = np.asarray(distortion, dtype=float)
    if d.ndim != 2 or d.shape[0] != nx:
        raise ValueError(f"distortion table must be (|X|={nx}, |Xhat|), got {d.shape}")
    return d


def optimal_reconstruction(joint: Joint, ctx: str, d: np.ndarray) -> np.ndarray:
    """Per-context argmin of expected distortion; ties go to the lowest index."""
    p = joint.marginal("x" + ctx)  # (x, ctx...) possibly batched
    if joint.batch:
        cost = np.tensordot(p, d, axes=([1], [0]))  # (B, ctx..., xhat)
    else:
        cost = np.tensordot(d.T, p, axes=([1], [0]))  # (xhat, ctx...)
        cost = np.moveaxis(cost, 0, -1)
    return np.argmin(cost, axis=-1)


def expected_distortion(joint: Joint, ctx: str, g, distortion):
    """E[d(X, g(ctx))] over ``joint``; works on batched joints when ``g`` is None."""
    nx = joint.size("x")
    d = _dist_table(distortion, nx)
    if isinstance(d, str):  # logloss
        if g is None:
            return joint.H("x", given=ctx) if ctx else joint.H("x")
        soft = g if isinstance(g, SoftReconstruction) else SoftReconstruction(np.asarray(g, float))
        p = joint.marginal("x" + ctx) if ctx else joint.marginal("x")
        if not ctx:
            return logloss_distortion(p[:, None], SoftReconstruction(soft.rows.reshape(1, -1)))
        return logloss_distortion(p, soft)
    if not ctx:
        p_x = joint.marginal("x")
        cost = p_x @ d if not joint.batch else p_x @ d
        if g is None:
            return cost.min(axis=-1)
        g = int(np.asarray(g).reshape(()))
        return float(cost[g])
    if g is None:
        p = joint.marginal("x" + ctx)
        if joint.batch:
            cost = np.tensordot(p, d, axes=([1], [0]))
            return cost.min(axis=-1).reshape(cost.shape[0], -1).sum(axis=1)
        cost = np.moveaxis(np.tensordot(d.T, p, axes=([1], [0])), 0, -1)
        return float(cost.min(axis=-1).sum())
    g = np.asarray(g)
    ctx_shape = tuple(joint.size(c) for c in ctx)
    if g.shape != ctx_shape:
        raise ReconstructionError(f"g has shape {g.shape}, context {ctx!r} needs {ctx_shape}")
    if not np.issubdtype(g.dtype, np.integer):
        if np.any(g != np.round(g)):
            raise ReconstructionError("deterministic g must hold integer indices")
        g = g.astype(np.int64)
    if np.any(g < 0) or np.any(g >= d.shape[1]):
        raise ReconstructionError(f"g references indices outside [0, {d.shape[1]})")
    p = joint.marginal("x" + ctx)  # (x, ctx...)
    cost = np.moveaxis(np.tensordot(d.T, p, axes=([1], [0])), 0, -1)  # (ctx..., xhat)
    return float(np.take_along_axis(cost, g[..., None], axis=-1).sum())


def _corner(r1, r2, d, delta, r3=None, achieving=None, values=None) -> CornerPoint:
    return CornerPoint(
        RdlPoint(
            r1=_nn(r1, "r1"), r2=_nn(r2, "r2"), d=_nn(d, "d"), delta=_nn(delta, "delta"),
            r3=None if r3 is None else _nn(r3, "r3"),
        ),
        achieving or {},
        values or {},
    )


# -- one-sided and two-sided helper -------------------------------------------


def one_sided_inner_corner(model: JointPmf3, p_u_given_y: AuxChannel, p_v_given_x: AuxChannel,
                           g=None, distortion=None) -> CornerPoint:
    """Inner-bound corner (R1, R2, D, Delta) of the one-sided helper.

    Joint ``p(x,y,z) p(u|y) p(v|x)``; returns R2 = I(Y;U), R1 = I(X;V|U),
    D = E d(X, g(U,V)), Delta = I(X;U,Z).
    """
    require_valid(model)
    nx, ny, _ = model.shape
    _expect_inputs(p_u_given_y, ("y",), "u")
    _expect_inputs(p_v_given_x, ("x",), "v")
    _cap(p_u_given_y, ny + 4, "U")
    _cap(p_v_given_x, nx + 1, "V")
    j = join(model, p_u_given_y, p_v_given_x)
    d = expected_distortion(j, "uv", g, distortion)
    return _corner(
        j.I("x", "v", "u"), j.I("y", "u"), d, j.I("x", "uz"),
        achieving={"p_u_given_y": p_u_given_y, "p_v_given_x": p_v_given_x, "g": g},
    )


def one_sided_logloss_corner(model: JointPmf3, p_u_given_y: AuxChannel, D: float) -> CornerPoint:
    """Log-loss corner: R2 = I(Y;U), R1 = [H(X|U) - D]+, Delta = I(X;U,Z)."""
    require_valid(model)
    if D < 0:
        raise ValueError("D must be >= 0")
    _expect_inputs(p_u_given_y, ("y",), "u")
    _cap(p_u_given_y, model.shape[1] + 2, "U")
    j = join(model, p_u_given_y)
    h_xu = j.H("x", "u")
    return _corner(
        positive_part(h_xu - D), j.I("y", "u"), D, j.I("x", "uz"),
        achieving={"p_u_given_y": p_u_given_y},
        values={"H(X|U)": float(h_xu), "pre_clamp_r1": float(h_xu - D)},
    )


def induced_reconstruction_channel(model: JointPmf3, p_u_given_y: AuxChannel,
                                   p_xhat_given_uxy: AuxChannel) -> AuxChannel:
    """Collapse p(xhat|u,x,y) to the p(xhat|u,x) it induces under p(x,y,z)p(u|y)."""
    _expect_inputs(p_xhat_given_uxy, ("u", "x", "y"), "h")
    j = join(model, p_u_given_y, p_xhat_given_uxy)
    return AuxChannel(("u", "x"), "h", j.posterior("h", "ux"))


def two_sided_corner(model: JointPmf3, p_u_given_y: AuxChannel, p_xhat: AuxChannel,
                     distortion=None) -> CornerPoint:
    """Two-sided corner: R2 = I(Y;U), R1 = I(X;Xhat|U), D = E d(X,Xhat), Delta = I(X;U,Z).

    ``p_xhat`` is p(h|u,x) or the wider p(h|u,x,y); both give the same four
    values because only the (x,y,z,u) and (x,u,h) marginals enter.
    """
    require_valid(model)
    _expect_inputs(p_u_given_y, ("y",), "u")
    if p_xhat.output != "h" or tuple(p_xhat.inputs) not in (("u", "x"), ("u", "x", "y")):
        raise ValueError("reconstruction channel must be p(h|u,x) or p(h|u,x,y)")
    _cap(p_u_given_y, model.shape[1] + 3, "U")
    j = join(model, p_u_given_y, p_xhat)
    d = _dist_table(distortion, model.shape[0])
    if isinstance(d, str):
        raise ValueError("two_sided_corner takes a distortion table, not log loss")
    if d.shape[1] != p_xhat.aux_size:
        raise ValueError(f"distortion table has {d.shape[1]} columns, |Xhat| = {p_xhat.aux_size}")
    dist = float(np.sum(j.marginal("xh") * d))
    return _corner(
        j.I("x", "h", "u"), j.I("y", "u"), dist, j.I("x", "uz"),
        achieving={"p_u_given_y": p_u_given_y, "p_xhat": p_xhat},
    )


# -- setting (A) and (B): closed forms under log loss --------------------------


def _r3(q: RdlPoint) -> float:
    return 0.0 if q.r3 is None else q.r3


def _verdict(q: RdlPoint, floors: dict, lhs: dict, messages: dict) -> Verdict:
    slacks = {k: lhs[k] - floors[k] for k in floors}
    failing = [k for k, s in slacks.items() if s < -SLACK_TOL]
    msg = "; ".join(messages.get(k, f"{k} below its floor") for k in failing)
    return Verdict(not failing, slacks, floors, msg)


def _leak_msg(i_xz: float) -> str:
    return f"Δ below the leakage floor (I(X;Z) = {i_xz:.6g} plus the description term)"


def logloss_quantities(model: JointPmf3) -> dict:
    require_valid(model)
    j = Joint(model.probs, "xyz")
    return {
        "H(X|Y)": float(j.H("x", "y")),
        "I(X;Z)": float(j.I("x", "z")),
        "H(Y|X,Z)": float(j.H("y", "xz")),
    }


def tri_A_logloss_floors(model: JointPmf3, D: float, r3: float = 0.0) -> dict:
    require_markov(model, "x-y-z")
    q = logloss_quantities(model)
    a = positive_part(q["H(X|Y)"] - D - r3)
    return {"r1": a, "r2": a, "delta": q["I(X;Z)"] + a}


def tri_A_logloss_check(model: JointPmf3, q: RdlPoint) -> Verdict:
    """Setting (A) under log loss, X - Y - Z.  Use ``r3 = 0`` / ``None`` for the cascade."""
    floors = tri_A_logloss_floors(model, q.d, _r3(q))
    i_xz = logloss_quantities(model)["I(X;Z)"]
    return _verdict(q, floors, {"r1": q.r1, "r2": q.r2, "delta": q.delta},
                    {"delta": _leak_msg(i_xz)})


def tri_A_BC_logloss_floors(model: JointPmf3, D: float) -> dict:
    require_markov(model, "x-y-z")
    q = logloss_quantities(model)
    a = positive_part(q["H(X|Y)"] - D)
    return {"r1": a, "r2": 0.0, "delta": q["I(X;Z)"] + a}


def tri_A_BC_logloss_check(model: JointPmf3, q: RdlPoint) -> Verdict:
    """Broadcast variant of (A): the helper link needs no rate."""
    floors = tri_A_BC_logloss_floors(model, q.d)
    i_xz = logloss_quantities(model)["I(X;Z)"]
    return _verdict(q, floors, {"r1": q.r1, "r2": q.r2, "delta": q.delta},
                    {"delta": _leak_msg(i_xz)})


def tri_B_logloss_floors(model: JointPmf3, D: float, r3: float = 0.0, bc: bool = False) -> dict:
    require_markov(model, "x-y-z")
    q = logloss_quantities(model)
    wz = q["H(X|Y)"] - D - (0.0 if bc else r3)
    a = positive_part(wz)
    return {
        "r1": a,
        "r2": 0.0 if bc else a,
        "delta": q["I(X;Z)"] + positive_part(wz - q["H(Y|X,Z)"]),
    }


def tri_B_logloss_check(model: JointPmf3, q: RdlPoint, bc: bool = False) -> Verdict:
    """Setting (B) under log loss; the common side information Y feeds a secret key.

    ``bc=True`` gives the broadcast variant (R2 >= 0, no private link).
    """
    floors = tri_B_logloss_floors(model, q.d, _r3(q), bc=bc)
    i_xz = logloss_quantities(model)["I(X;Z)"]
    return _verdict(q, floors, {"r1": q.r1, "r2": q.r2, "delta": q.delta},
                    {"delta": _leak_msg(i_xz)})


# -- setting (C) ----------------------------------------------------------------


def _c_joint(model: JointPmf3, p_u_given_x: AuxChannel) -> Joint:
    require_valid(model)
    _expect_inputs(p_u_given_x, ("x",), "u")
    _cap(p_u_given_x, model.shape[0] + 1, "U")
    if model.shape[2] > 1:
        log.info("setting C ignores the Z coordinate (helper has no side information)")
    p_xy = model.probs.sum(axis=2)
    return join(p_xy, p_u_given_x, names="xy")


def tri_C_corner(model: JointPmf3, p_u_given_x: AuxChannel, g=None, r3: float = 0.0,
                 distortion=None) -> CornerPoint:
    """Setting (C): R1 = R2 = Delta = [I(X;U|Y) - R3]+, D = E d(X, g(U,Y))."""
    if r3 < 0:
        raise ValueError("r3 must be >= 0")
    j = _c_joint(model, p_u_given_x)
    wz = j.I("x", "u", "y")
    a = positive_part(wz - r3)
    d = expected_distortion(j, "uy", g, distortion)
    return _corner(a, a, d, a, r3=r3, achieving={"p_u_given_x": p_u_given_x, "g": g},
                   values={"I(X;U|Y)": float(wz)})


def tri_C_BC_corner(model: JointPmf3, p_u_given_x: AuxChannel, g=None, distortion=None) -> CornerPoint:
    """Broadcast (C): R1 = I(X;U|Y), R2 = 0, Delta = I(X;U|Y)."""
    j = _c_joint(model, p_u_given_x)
    wz = j.I("x", "u", "y")
    d = expected_distortion(j, "uy", g, distortion)
    return _corner(wz, 0.0, d, wz, achieving={"p_u_given_x": p_u_given_x, "g": g},
                   values={"I(X;U|Y)": float(wz)})


# -- setting (D) ----------------------------------------------------------------


def _d_caps(model: JointPmf3) -> tuple[int, int, int]:
    nx, _, nz = model.shape
    k = nx * nz
    return k + 3, (k + 3) * (k + 1), k + 2


def tri_D_corner(model: JointPmf3, p_u_given_xz: AuxChannel, p_v_given_uxz: AuxChannel | None = None,
                 g=None, distortion=None) -> CornerPoint:
    """Setting (D), X - Z - Y, decode-and-re-bin helper.

    R1 = I(X;U|Z), R2 = I(X,Z;U|Y), R3 = I(X,Z;V|U,Y), D = E d(X, g(U,V,Y)),
    Delta = I(X;U,Z).  ``p_v_given_uxz=None`` means V constant (the cascade).
    """
    require_valid(model)
    require_markov(model, "x-z-y")
    cap_u, cap_v, _ = _d_caps(model)
    _expect_inputs(p_u_given_xz, ("x", "z"), "u")
    _cap(p_u_given_xz, cap_u, "U")
    if p_v_given_uxz is None:
        p_v_given_uxz = AuxChannel.constant(("u", "x", "z"),
                                            (p_u_given_xz.aux_size, model.shape[0], model.shape[2]), "v")
    _expect_inputs(p_v_given_uxz, ("u", "x", "z"), "v")
    _cap(p_v_given_uxz, cap_v, "V")
    j = join(model, p_u_given_xz, p_v_given_uxz)
    d = expected_distortion(j, "uvy", g, distortion)
    return _corner(
        j.I("x", "u", "z"), j.I("xz", "u", "y"), d, j.I("x", "uz"), r3=j.I("xz", "v", "uy"),
        achieving={"p_u_given_xz": p_u_given_xz, "p_v_given_uxz": p_v_given_uxz, "g": g},
    )


def cas_D_corner(model: JointPmf3, p_u_given_xz: AuxChannel, g=None, distortion=None) -> CornerPoint:
    """Cascade (D): V constant, |U| <= |X||Z| + 2, reconstruction g(U, Y)."""
    require_valid(model)
    require_markov(model, "x-z-y")
    _cap(p_u_given_xz, _d_caps(model)[2], "U")
    if g is not None:
        g = np.asarray(g)[:, None, :]  # g(u, y) -> g(u, v, y) with |V| = 1
    c = tri_D_corner(model, p_u_given_xz, None, g, distortion)
    p = c.point
    return CornerPoint(RdlPoint(p.r1, p.r2, p.d, p.delta), c.achieving, c.values)


def tri_D_BC_corner(model: JointPmf3, p_u_given_xz: AuxChannel, g=None, distortion=None) -> CornerPoint:
    """Broadcast (D): constraints R1 >= I(X;U|Z) and R1 + R2 >= I(X,Z;U|Y).

    The returned point is the region's corner for these auxiliaries:
    r1 = I(X;U|Z) and r2 = I(X,Z;U|Y) - I(X;U|Z) (never negative under the
    Markov chain).  The sum-rate floor is in ``values["sum_rate"]``.
    """
    require_valid(model)
    require_markov(model, "x-z-y")
    _expect_inputs(p_u_given_xz, ("x", "z"), "u")
    _cap(p_u_given_xz, _d_caps(model)[2], "U")
    j = join(model, p_u_given_xz)
    r1 = j.I("x", "u", "z")
    s = j.I("xz", "u", "y")
    d = expected_distortion(j, "uy", g, distortion)
    return _corner(r1, positive_part(s - r1), d, j.I("x", "uz"),
                   achieving={"p_u_given_xz": p_u_given_xz, "g": g},
                   values={"sum_rate": float(s), "r1_floor": float(r1)})


@dataclass(frozen=True)
class FeasibilityReport:
    ok: bool
    r_prime: float | None
    violated: tuple[str, ...]
    informations: dict
    derived_bounds: dict


def feasibility_check_D14(model: JointPmf3, p_u_given_xz: AuxChannel, r1: float, r2: float,
                          r_prime: float | None = None) -> FeasibilityReport:
    """Covering/packing rate conditions of the broadcast (D) code.

    Conditions on the extra codebook rate R':
        covering at the encoder   R1 + R2 + R' > I(X,Z;U)
        packing at the helper     R2 + R' < I(Z;U)
        packing at the decoder    R' < I(Y;U)
    A condition whose both sides are zero is met trivially (a single
    codeword needs no covering and a single codeword per bin has nothing to
    disambiguate).  With ``r_prime=None`` a witness is searched for; the
    combined bounds R1 > I(X;U|Z) and R1 + R2 > I(X,Z;U|Y) are reported.
    """
    require_valid(model)
    require_markov(model, "x-z-y")
    j = join(model, p_u_given_xz)
    i_xzu = max(float(j.I("xz", "u")), 0.0)
    i_zu = max(float(j.I("z", "u")), 0.0)
    i_yu = max(float(j.I("y", "u")), 0.0)
    info = {"I(X,Z;U)": i_xzu, "I(Z;U)": i_zu, "I(Y;U)": i_yu}
    bounds = {"I(X;U|Z)": float(j.I("x", "u", "z")), "I(X,Z;U|Y)": float(j.I("xz", "u", "y"))}
    tol = SLACK_TOL

    def failing(rp: float) -> tuple[str, ...]:
        bad = []
        cov = r1 + r2 + rp
        if not (cov > i_xzu or (i_xzu <= tol and cov >= 0)):
            bad.append("covering: R1 + R2 + R' > I(X,Z;U)")
        hp = r2 + rp
        if not (hp < i_zu or hp <= tol):
            bad.append("helper packing: R2 + R' < I(Z;U)")
        if not (rp < i_yu or rp <= tol):
            bad.append("decoder packing: R' < I(Y;U)")
        return tuple(bad)

    if r_prime is not None:
        bad = failing(float(r_prime))
        return FeasibilityReport(not bad, float(r_prime), bad, info, bounds)
    lo = max(0.0, i_xzu - r1 - r2)
    hi = min(i_zu - r2, i_yu)
    candidates = [0.0, lo, 0.5 * (lo + hi)] if hi > lo else [0.0, lo]
    for rp in candidates:
        if rp >= 0 and not failing(rp):
            return FeasibilityReport(True, rp, (), info, bounds)
    return FeasibilityReport(False, None, failing(lo), info, bounds)
