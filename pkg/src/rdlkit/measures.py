"""Exact information measures (base 2) and logarithmic-loss distortion.

Everything works on dense pmfs.  :class:`Joint` names each axis with a single
letter so region formulas read close to their textbook form::

    j = join(model, p_u_given_y)
    j.I("x", "uz")        # I(X; U, Z)
    j.H("x", given="u")   # H(X | U)

A ``Joint`` may carry one leading batch axis; every measure then returns one
value per batch entry.  The frontier search relies on this to evaluate many
quantized channels at once.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import AuxChannel, DimensionMismatchError, JointPmf3, NORM_TOL

INF = float("inf")


def _xlog2x(p: np.ndarray) -> np.ndarray:
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(p > 0, p * np.log2(np.where(p > 0, p, 1.0)), 0.0)


def entropy(p) -> float:
    """H(p) in bits, with 0 log 0 = 0.  Any array shape is treated as one pmf."""
    p = np.asarray(p, dtype=float)
    return float(-_xlog2x(p).sum())


def binary_entropy(q: float) -> float:
    return entropy([q, 1.0 - q])


def positive_part(a):
    """[a]+ = max(0, a)."""
    return np.maximum(a, 0.0) if isinstance(a, np.ndarray) else max(0.0, float(a))


def cond_entropy(p_ab) -> float:
    """H(A|B) for a 2-d joint ``p_ab[a, b]``."""
    p_ab = np.asarray(p_ab, dtype=float)
    if p_ab.ndim != 2:
        raise DimensionMismatchError("cond_entropy expects a 2-d joint p[a, b]")
    return entropy(p_ab) - entropy(p_ab.sum(axis=0))


def mutual_info(p_ab) -> float:
    """I(A;B) for a 2-d joint ``p_ab[a, b]``."""
    p_ab = np.asarray(p_ab, dtype=float)
    if p_ab.ndim != 2:
        raise DimensionMismatchError("mutual_info expects a 2-d joint p[a, b]")
    return entropy(p_ab.sum(axis=1)) + entropy(p_ab.sum(axis=0)) - entropy(p_ab)


def kl_div(p, q) -> float:
    """D(p||q) in bits; +inf when q misses mass that p has."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatchError(f"alphabet mismatch: {p.shape} vs {q.shape}")
    supp = p > 0
    if np.any(q[supp] <= 0):
        return INF
    return float(np.sum(p[supp] * (np.log2(p[supp]) - np.log2(q[supp]))))


class Joint:
    """Dense joint pmf whose axes are named by single letters."""

    def __init__(self, probs: np.ndarray, names: str, batch: bool = False):
        probs = np.asarray(probs, dtype=float)
        self.batch = bool(batch)
        off = 1 if self.batch else 0
        if probs.ndim != len(names) + off:
            raise DimensionMismatchError(f"{probs.ndim} axes for names {names!r}")
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate axis names in {names!r}")
        self.probs = probs
        self.names = names

    def size(self, name: str) -> int:
        return self.probs.shape[self._ax(name)]

    def _ax(self, name: str) -> int:
        return self.names.index(name) + (1 if self.batch else 0)

    def marginal(self, names: str) -> np.ndarray:
        """Marginal array with axes in the order given by ``names``."""
        missing = [c for c in names if c not in self.names]
        if missing:
            raise KeyError(f"unknown variables {missing}")
        drop = tuple(self._ax(c) for c in self.names if c not in names)
        m = self.probs.sum(axis=drop) if drop else self.probs
        kept = [c for c in self.names if c in names]
        perm = [kept.index(c) for c in names]
        if self.batch:
            perm = [0] + [i + 1 for i in perm]
        return np.transpose(m, perm)

    def _h(self, names: str):
        if not names:
            return np.zeros(self.probs.shape[0]) if self.batch else 0.0
        m = self.marginal("".join(sorted(set(names), key=self.names.index)))
        t = _xlog2x(m)
        if self.batch:
            return -t.reshape(t.shape[0], -1).sum(axis=1)
        return float(-t.sum())

    def H(self, a: str, given: str = ""):
        """H(A | given)."""
        return self._h(a + given) - self._h(given)

    def I(self, a: str, b: str, given: str = ""):
        """I(A; B | given)."""
        return self._h(a + given) + self._h(b + given) - self._h(a + b + given) - self._h(given)

    def posterior(self, target: str, given: str) -> np.ndarray:
        """p(target | given) with axes (given..., target); zero-mass contexts get uniform rows."""
        m = self.marginal(given + target)
        nt = int(np.prod([self.size(c) for c in target]))
        lead = m.shape[: m.ndim - len(target)]
        m = m.reshape(lead + (nt,))
        tot = m.sum(axis=-1, keepdims=True)
        with np.errstate(invalid="ignore", divide="ignore"):
            post = np.where(tot > 0, m / np.where(tot > 0, tot, 1.0), 1.0 / nt)
        return post


def compose(probs: np.ndarray, names: str, w: np.ndarray, inputs, output: str,
            batch: bool = False) -> tuple[np.ndarray, str, bool]:
    """Multiply a joint by a channel ``w[inputs..., output]``.

    ``probs`` may carry a leading batch axis (``batch=True``); ``w`` may carry
    one too (one extra leading axis).  Returns ``(probs, names, batch)``.
    """
    inputs = tuple(inputs)
    if output in names:
        raise ValueError(f"variable {output!r} already present")
    for inp in inputs:
        if inp not in names:
            raise KeyError(f"channel input {inp!r} not in joint {names!r}")
    w = np.asarray(w, dtype=float)
    w_batch = w.ndim == len(inputs) + 2
    if not w_batch and w.ndim != len(inputs) + 1:
        raise DimensionMismatchError(f"channel array has {w.ndim} axes for inputs {inputs}")
    off = 1 if w_batch else 0
    order = sorted(range(len(inputs)), key=lambda i: names.index(inputs[i]))
    w = np.transpose(w, ([0] if w_batch else []) + [i + off for i in order] + [len(inputs) + off])
    p_off = 1 if batch else 0
    shape = [1] * len(names)
    for i in order:
        ax = names.index(inputs[i])
        if probs.shape[ax + p_off] != w.shape[off + order.index(i)]:
            raise DimensionMismatchError(
                f"channel input {inputs[i]!r} has {w.shape[off + order.index(i)]} symbols, "
                f"joint has {probs.shape[ax + p_off]}"
            )
        shape[ax] = probs.shape[ax + p_off]
    n_out = w.shape[-1]
    if w_batch:
        w = w.reshape((w.shape[0],) + tuple(shape) + (n_out,))
        if not batch:
            probs = probs[None]
        out = probs[..., None] * w
    else:
        w = w.reshape(tuple(shape) + (n_out,))
        if batch:
            w = w[None]
        out = probs[..., None] * w
    return out, names + output, batch or w_batch


def join(model: JointPmf3 | np.ndarray, *channels: AuxChannel, names: str = "xyz") -> Joint:
    """Compose a source pmf with auxiliary channels into one dense joint.

    Each channel's inputs must already be present when it is applied, so
    ``join(m, p_u_given_y, p_v_given_x)`` builds ``p(x,y,z) p(u|y) p(v|x)``
    and the Markov structure of the result holds by construction.
    """
    probs = model.probs if isinstance(model, JointPmf3) else np.asarray(model, float)
    cur = names
    batch = False
    for ch in channels:
        probs, cur, batch = compose(probs, cur, ch.probs, ch.inputs, ch.output, batch)
    return Joint(probs, cur, batch)


@dataclass(frozen=True, eq=False)
class SoftReconstruction:
    """Soft estimates: ``rows[c]`` is a pmf over X for context symbol ``c``."""

    rows: np.ndarray

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=float)
        if rows.ndim < 2:
            raise DimensionMismatchError("rows must be (context..., |X|)")
        if np.any(rows < 0) or np.any(np.abs(rows.sum(axis=-1) - 1) > NORM_TOL):
            raise ValueError("each soft reconstruction row must be a pmf")
        object.__setattr__(self, "rows", rows)


def logloss_distortion(p_x_ctx, soft: SoftReconstruction) -> float:
    """Expected log loss sum p(x, c) log2(1 / xhat(x | c)).

    ``p_x_ctx`` is the joint with X on axis 0 and the context (one or more
    axes) after it; ``soft.rows`` is indexed (context..., x).  Returns +inf if
    a supported symbol gets zero soft mass.
    """
    p = np.asarray(p_x_ctx, dtype=float)
    rows = np.moveaxis(soft.rows, -1, 0)
    if rows.shape != p.shape:
        raise DimensionMismatchError(f"soft rows {soft.rows.shape} do not fit joint {p.shape}")
    supp = p > 0
    if np.any(rows[supp] <= 0):
        return INF
    return float(-np.sum(p[supp] * np.log2(rows[supp])))
