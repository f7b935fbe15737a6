"""Hot inner loops with a numba path and a pure-numpy path.

The numba path is used when numba imports and ``RDLKIT_DISABLE_NUMBA`` is not
set to a true value.  Both paths are always importable (``numpy_impl`` and
``numba_impl``) so tests and the benchmark can compare them directly.

Kernels
-------
typical_mask(ctx, codebook, pmf, eps)
    Robust joint typicality of one context sequence against every codeword.
pareto_keep(points, tol)
    Non-dominated filter over lexicographically sorted points.
xzo_from_law(pxyz, law)
    Sum out Y from p(x,y,z) * law(o | x, y).
"""
from __future__ import annotations

import os
import types

import numpy as np

# -- numpy path ---------------------------------------------------------------


def _np_typical_mask(ctx, codebook, pmf, eps):
    ctx = np.asarray(ctx, dtype=np.int64)
    codebook = np.asarray(codebook)
    m, n = codebook.shape
    n_ctx, n_out = pmf.shape
    cell = ctx[None, :] * n_out + codebook.astype(np.int64)
    ok = np.ones(m, dtype=bool)
    for c in range(n_ctx * n_out):
        p = pmf.flat[c]
        freq = np.count_nonzero(cell == c, axis=1) / n
        ok &= np.abs(freq - p) <= eps * p
    return ok


def _dominates(a, b, tol):
    """a weakly dominates b within tol (a <= b + tol everywhere)."""
    return np.all(a <= b + tol, axis=-1)


def _np_pareto_keep(points, tol):
    pts = np.asarray(points, dtype=float)
    n = pts.shape[0]
    keep = np.zeros(n, dtype=bool)
    kept: list[int] = []
    for i in range(n):
        p = pts[i]
        if kept:
            kp = pts[kept]
            if np.any(_dominates(kp, p, tol)):
                continue
            # drop kept points that p strictly dominates
            strict = np.all(p <= kp + tol, axis=1) & np.any(p < kp - tol, axis=1)
            if np.any(strict):
                for j in np.asarray(kept)[strict]:
                    keep[j] = False
                kept = [j for j, s in zip(kept, strict) if not s]
        kept.append(i)
        keep[i] = True
    return keep


def _np_xzo_from_law(pxyz, law):
    return np.einsum("xyz,xyo->xzo", pxyz, law)


numpy_impl = types.SimpleNamespace(
    name="numpy",
    typical_mask=_np_typical_mask,
    pareto_keep=_np_pareto_keep,
    xzo_from_law=_np_xzo_from_law,
)

# -- numba path ---------------------------------------------------------------

numba_impl = None
try:  # pragma: no cover - exercised whenever numba is installed
    import numba as _nb

    @_nb.njit(cache=True, nogil=True)
    def _nb_typical_mask(ctx, codebook, pmf, eps):
        m, n = codebook.shape
        n_ctx, n_out = pmf.shape
        ok = np.ones(m, dtype=np.bool_)
        counts = np.zeros((n_ctx, n_out), dtype=np.int64)
        for i in range(m):
            counts[:, :] = 0
            for t in range(n):
                counts[ctx[t], codebook[i, t]] += 1
            good = True
            for a in range(n_ctx):
                for u in range(n_out):
                    # same float expression as the numpy path
                    f = counts[a, u] / n
                    p = pmf[a, u]
                    if abs(f - p) > eps * p:
                        good = False
                        break
                if not good:
                    break
            ok[i] = good
        return ok

    @_nb.njit(cache=True, nogil=True)
    def _nb_pareto_keep(pts, tol):
        n, k = pts.shape
        keep = np.zeros(n, dtype=np.bool_)
        kept = np.empty(n, dtype=np.int64)
        nk = 0
        for i in range(n):
            dominated = False
            for jj in range(nk):
                j = kept[jj]
                weak = True
                for c in range(k):
                    if pts[j, c] > pts[i, c] + tol:
                        weak = False
                        break
                if weak:
                    dominated = True
                    break
            if dominated:
                continue
            w = 0
            for jj in range(nk):
                j = kept[jj]
                weak = True
                strict = False
                for c in range(k):
                    if pts[i, c] > pts[j, c] + tol:
                        weak = False
                        break
                    if pts[i, c] < pts[j, c] - tol:
                        strict = True
                if weak and strict:
                    keep[j] = False
                else:
                    kept[w] = j
                    w += 1
            nk = w
            kept[nk] = i
            nk += 1
            keep[i] = True
        return keep

    @_nb.njit(cache=True, nogil=True)
    def _nb_xzo_from_law(pxyz, law):
        nx, ny, nz = pxyz.shape
        no = law.shape[2]
        out = np.zeros((nx, nz, no))
        for x in range(nx):
            for y in range(ny):
                for z in range(nz):
                    p = pxyz[x, y, z]
                    if p == 0.0:
                        continue
                    for o in range(no):
                        out[x, z, o] += p * law[x, y, o]
        return out

    def _wrap_typical(ctx, codebook, pmf, eps):
        return _nb_typical_mask(
            np.ascontiguousarray(ctx, dtype=np.int64),
            np.ascontiguousarray(codebook),
            np.ascontiguousarray(pmf, dtype=np.float64),
            float(eps),
        )

    def _wrap_pareto(points, tol):
        return _nb_pareto_keep(np.ascontiguousarray(points, dtype=np.float64), float(tol))

    def _wrap_xzo(pxyz, law):
        return _nb_xzo_from_law(
            np.ascontiguousarray(pxyz, dtype=np.float64),
            np.ascontiguousarray(law, dtype=np.float64),
        )

    numba_impl = types.SimpleNamespace(
        name="numba",
        typical_mask=_wrap_typical,
        pareto_keep=_wrap_pareto,
        xzo_from_law=_wrap_xzo,
    )
except ImportError:  # pragma: no cover
    pass


def _numba_disabled() -> bool:
    return os.environ.get("RDLKIT_DISABLE_NUMBA", "").strip().lower() in {"1", "true", "yes", "on"}


active = numpy_impl if (numba_impl is None or _numba_disabled()) else numba_impl
BACKEND = active.name

typical_mask = active.typical_mask
pareto_keep = active.pareto_keep
xzo_from_law = active.xzo_from_law
