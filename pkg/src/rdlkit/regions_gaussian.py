"""Closed-form Gaussian rate-distortion-leakage algebra (base-2 logs).

Two chain orders are used:

* ``Y_X_Z`` (one-sided helper): Y ~ N(0, var_root), X = Y + N1, Z = X + N2.
* ``X_Y_Z`` (triangular A/B): X ~ N(0, var_root), Y = X + N1, Z = Y + N2.
"""
from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass

import numpy as np

from .measures import positive_part
from .model import ChainOrder, GaussianChain, RdlPoint
from .regions_discrete import SLACK_TOL, CornerPoint, Verdict

log = logging.getLogger(__name__)

BRANCH_RATE = "rate"  # saturation branch: 2^{-2R1}(2^{-2R2} var_y + var_n1)
BRANCH_LEAK = "leakage"  # leakage-limited branch: 2^{-2R1}(alpha* var_y + var_n1)


def _need(chain: GaussianChain, order: ChainOrder) -> None:
    if chain.order != order:
        raise ValueError(f"expected a {order.value} chain, got {chain.order.value}")


@dataclass(frozen=True)
class AlphaParam:
    alpha: float

    def __post_init__(self):
        if not (0.0 < self.alpha < 1.0):
            raise ValueError(f"alpha must lie strictly in (0, 1), got {self.alpha}")


def _leak_of_a(chain: GaussianChain, a: float) -> float:
    """Leakage 1/2 log(S (a + n2) / (n2 a)) with a = alpha var_y + var_n1."""
    s = chain.var_root + chain.var_n1
    n2 = chain.var_n2
    return 0.5 * math.log2(s * (a + n2) / (n2 * a))


def one_sided_gaussian_corner(chain: GaussianChain, alpha: AlphaParam | float, D: float) -> CornerPoint:
    """Corner (R1, R2, D, Delta) of the one-sided Gaussian helper for a given alpha."""
    _need(chain, ChainOrder.Y_X_Z)
    if not isinstance(alpha, AlphaParam):
        alpha = AlphaParam(float(alpha))
    if not D > 0:
        raise ValueError("D must be > 0")
    a = alpha.alpha * chain.var_root + chain.var_n1
    r2 = 0.5 * math.log2(1.0 / alpha.alpha)
    r1 = positive_part(0.5 * math.log2(a / D))
    return CornerPoint(RdlPoint(r1=r1, r2=r2, d=float(D), delta=_leak_of_a(chain, a)),
                       {"alpha": alpha.alpha}, {"alpha*var_y+var_n1": a})


def delta_range(chain: GaussianChain) -> tuple[float, float]:
    """Leakage range over which the distortion-leakage tradeoff is active."""
    _need(chain, ChainOrder.Y_X_Z)
    s = chain.var_root + chain.var_n1
    n1, n2 = chain.var_n1, chain.var_n2
    lo = 0.5 * math.log2(1.0 + s / n2)
    hi = 0.5 * math.log2(s * (n1 + n2) / (n1 * n2))
    return lo, hi


def alpha_star(chain: GaussianChain, delta: float) -> float:
    """Helper-quality parameter allowed by leakage ``delta`` (1 at the lower end, 0 at the upper)."""
    s = chain.var_root + chain.var_n1
    vy, n1, n2 = chain.var_root, chain.var_n1, chain.var_n2
    t = 2.0 ** (-2.0 * delta)
    return (t * s * (n1 + n2) - n1 * n2) / (vy * n2 - t * vy * s)


def alpha_star_alt(chain: GaussianChain, delta: float) -> float:
    """The second printed closed form; it omits the -var_n1 shift (kept for comparison)."""
    s = chain.var_root + chain.var_n1
    return chain.var_n2 / ((2.0 ** (2.0 * delta) * chain.var_n2 / s - 1.0) * chain.var_root)


@dataclass(frozen=True)
class DminResult:
    feasible: bool
    dmin: float
    branch: str | None
    alpha_star: float | None
    clamped: bool = False
    delta_used: float | None = None


def _branches(chain: GaussianChain, r1: float, r2: float, a_star: float) -> tuple[float, float]:
    g = 2.0 ** (-2.0 * r1)
    return g * (2.0 ** (-2.0 * r2) * chain.var_root + chain.var_n1), g * (a_star * chain.var_root + chain.var_n1)


def dmin_one_sided(chain: GaussianChain, r1: float, r2: float, delta: float) -> DminResult:
    """Minimum distortion for rates (R1, R2) under leakage ``delta``.

    Below the leakage range the point is infeasible (dmin = inf).  Above it
    the leakage constraint is inactive and ``delta`` is clamped to the upper
    endpoint with a logged notice.
    """
    _need(chain, ChainOrder.Y_X_Z)
    if r1 < 0 or r2 < 0:
        raise ValueError("rates must be >= 0")
    lo, hi = delta_range(chain)
    if delta < lo - SLACK_TOL:
        return DminResult(False, math.inf, None, None, False, float(delta))
    clamped = False
    d_used = min(max(float(delta), lo), hi)
    if delta > hi + SLACK_TOL:
        log.info("leakage %.12g above the active range; clamped to %.12g", delta, hi)
        clamped = True
    a = alpha_star(chain, d_used)
    if a < -1e-9 or a > 1 + 1e-9:
        raise ArithmeticError(f"alpha* = {a} outside [0, 1]")
    a = min(max(a, 0.0), 1.0)
    b_rate, b_leak = _branches(chain, r1, r2, a)
    branch = BRANCH_RATE if b_rate >= b_leak else BRANCH_LEAK
    return DminResult(True, max(b_rate, b_leak), branch, a, clamped, d_used)


def delta_star(chain: GaussianChain, r2: float, verify: bool = True) -> float:
    """Leakage at which the two branches of the D_min expression cross (alpha* = 2^{-2 R2}).

    Independent of R1.  Verified by bisection on the branch difference.
    """
    _need(chain, ChainOrder.Y_X_Z)
    if not r2 > 0:
        raise ValueError("R2 must be > 0")
    a = 2.0 ** (-2.0 * r2) * chain.var_root + chain.var_n1
    ds = _leak_of_a(chain, a)
    if verify:
        lo, hi = delta_range(chain)
        target = 2.0 ** (-2.0 * r2)
        f = lambda d: alpha_star(chain, d) - target  # noqa: E731 - decreasing in d
        a_lo, a_hi = lo, hi
        for _ in range(200):
            mid = 0.5 * (a_lo + a_hi)
            if f(mid) > 0:
                a_lo = mid
            else:
                a_hi = mid
            if a_hi - a_lo < 1e-13:
                break
        if abs(0.5 * (a_lo + a_hi) - ds) > 1e-10:
            raise ArithmeticError(f"closed-form delta* {ds} disagrees with bisection {0.5 * (a_lo + a_hi)}")
    return ds


# -- triangular settings A and B ---------------------------------------------


def _tri_floors(chain: GaussianChain, D: float, r3: float, keyed: bool) -> dict:
    _need(chain, ChainOrder.X_Y_Z)
    if not D > 0:
        raise ValueError("D must be > 0")
    vx, n1, n2 = chain.var_root, chain.var_n1, chain.var_n2
    sigma2 = vx * n1 / (vx + n1)
    rate = positive_part(0.5 * math.log2(sigma2 / D) - r3)
    i_xz = 0.5 * math.log2(1.0 + vx / (n1 + n2))
    return {"r1": rate, "r2": rate, "delta": i_xz if keyed else i_xz + rate}


def tri_A_gaussian_floors(chain: GaussianChain, D: float, r3: float = 0.0) -> dict:
    return _tri_floors(chain, D, r3, keyed=False)


def tri_B_gaussian_floors(chain: GaussianChain, D: float, r3: float = 0.0) -> dict:
    return _tri_floors(chain, D, r3, keyed=True)


def _check(floors: dict, q: RdlPoint) -> Verdict:
    lhs = {"r1": q.r1, "r2": q.r2, "delta": q.delta}
    slacks = {k: lhs[k] - floors[k] for k in floors}
    bad = [k for k, s in slacks.items() if s < -SLACK_TOL]
    msg = "; ".join(
        "Δ below the leakage floor" if k == "delta" else f"{k} below its floor" for k in bad
    )
    return Verdict(not bad, slacks, floors, msg)


def tri_A_gaussian_check(chain: GaussianChain, q: RdlPoint) -> Verdict:
    """Gaussian setting A; ``q.r3`` of None or 0 gives the cascade."""
    return _check(tri_A_gaussian_floors(chain, q.d, q.r3 or 0.0), q)


def tri_B_gaussian_check(chain: GaussianChain, q: RdlPoint) -> Verdict:
    """Gaussian setting B: the continuous common side information keys away the rate term."""
    return _check(tri_B_gaussian_floors(chain, q.d, q.r3 or 0.0), q)


# -- distortion-leakage curve -------------------------------------------------


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, str):
        return v
    return format(float(v), ".12g")


@dataclass(frozen=True)
class DminCurve:
    """D_min over a leakage grid for fixed (R1, R2)."""

    r1: float
    r2: float
    delta: np.ndarray
    dmin: np.ndarray
    branch: tuple[str, ...]
    alpha_star: np.ndarray
    delta_star: float

    HEADER = ("delta", "dmin", "branch", "alpha_star")

    def rows(self):
        for d, v, b, a in zip(self.delta, self.dmin, self.branch, self.alpha_star):
            yield (_fmt(d), _fmt(v), b, _fmt(a))

    def to_csv(self, header: bool = True) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        if header:
            w.writerow(self.HEADER)
        w.writerows(self.rows())
        return buf.getvalue()


def fig4_curve(chain: GaussianChain, r1: float, r2: float, delta_grid) -> DminCurve:
    """Evaluate D_min(R1, R2, Delta) on ``delta_grid``."""
    grid = np.asarray(delta_grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("empty leakage grid")
    res = [dmin_one_sided(chain, r1, r2, float(d)) for d in grid]
    return DminCurve(
        float(r1), float(r2), grid,
        np.array([r.dmin for r in res]),
        tuple(r.branch or "infeasible" for r in res),
        np.array([np.nan if r.alpha_star is None else r.alpha_star for r in res]),
        delta_star(chain, r2) if r2 > 0 else math.inf,
    )
