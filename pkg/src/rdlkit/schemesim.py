"""Finite-blocklength simulation of the random-coding schemes.

Codebooks hold i.i.d. sequences drawn from the auxiliary marginal.  Encoders
pick a codeword that is robustly typical with their observation (uniformly
among the typical ones, or uniformly over the whole codebook when none is),
bin it with a uniform random map and send ``ceil(n R)`` index bits.  The
decoder looks in the received bin for the codeword typical with its side
information.

Two modes:

* Monte Carlo trials (``trials`` source draws against one fixed codebook);
* exact leakage for small ``n``: I(X^n; observed index, Z^n) / n computed by
  enumerating every source triple and the encoder's conditional law, for the
  fixed codebook (the value is conditioned on the codebook).

Randomness: one ``seed`` feeds a :class:`numpy.random.SeedSequence`; codebooks,
bin maps, the key map and every trial get their own child streams, so reports
are reproducible and splitting the index does not change the codebook.
"""
from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from . import _kernels
from .measures import Joint, entropy, join
from .model import AuxChannel, JointPmf3, check_markov, require_valid

log = logging.getLogger(__name__)

MAX_CODEBOOK_CELLS = 1 << 26
EXACT_MAX_STATES = 1 << 22

# child-stream slots of the run seed
_S_CB_A, _S_CB_B, _S_BINS, _S_KEY, _S_TRIALS = range(5)


@dataclass(frozen=True)
class TypicalityParam:
    eps: float = 0.1

    def __post_init__(self):
        if not self.eps > 0:
            raise ValueError("typicality eps must be > 0")


@dataclass(frozen=True)
class KeyConfig:
    """Secret key for the one-time pad on the cascade index.

    ``mode``: "none", "binned" (key = uniform random bin of y^n, shared by
    encoder and decoder) or "external" (independent uniform key, diagnostic).
    """

    rate: float = 0.0
    mode: str = "binned"
    seed: int = 0

    def __post_init__(self):
        if self.rate < 0:
            raise ValueError("key rate must be >= 0")
        if self.mode not in ("none", "binned", "external"):
            raise ValueError(f"unknown key mode {self.mode!r}")

    def check_alphabet(self, ny: int) -> None:
        if self.rate > math.log2(ny) + 1e-12:
            raise ValueError(f"key rate {self.rate} exceeds log2|Y| = {math.log2(ny):.6g}")


def _bits(n: int, rate: float) -> int:
    # tolerate rates that are integers over n up to float noise
    return max(0, math.ceil(n * rate - 1e-9))


def _children(seed: int, count: int = 5) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(int(seed)).spawn(count)


@dataclass(frozen=True, eq=False)
class Codebook:
    n: int
    codewords: np.ndarray  # (M, n) symbols of the auxiliary alphabet
    bin_bits: int
    bins: np.ndarray  # (M,) bin index of each codeword
    seed: int

    @property
    def size(self) -> int:
        return self.codewords.shape[0]

    @classmethod
    def draw(cls, n: int, bits: int, p_aux: np.ndarray, bin_bits: int,
             cw_seq: np.random.SeedSequence, bin_seq: np.random.SeedSequence, seed: int,
             max_cells: int = MAX_CODEBOOK_CELLS) -> "Codebook":
        m = 1 << bits
        if m * n > max_cells:
            raise ValueError(f"codebook of 2^{bits} codewords x n={n} exceeds the size guard ({max_cells} cells)")
        rng = np.random.default_rng(cw_seq)
        p_aux = np.asarray(p_aux, float)
        cw = rng.choice(p_aux.size, size=(m, n), p=p_aux / p_aux.sum()).astype(np.int64)
        bins = np.random.default_rng(bin_seq).integers(0, 1 << bin_bits, size=m, dtype=np.int64)
        return cls(n, cw, bin_bits, bins, int(seed))


def typicality_test(seqs, pmf, eps: float = 0.1) -> bool:
    """Robust joint typicality: |pi(a) - p(a)| <= eps p(a) for every joint symbol a.

    ``pmf`` is an array with one axis per sequence, or a :class:`JointPmf3`
    when three sequences (x, y, z) are given.
    """
    if isinstance(pmf, JointPmf3):
        pmf = pmf.probs
    pmf = np.asarray(pmf, float)
    seqs = [np.asarray(s, dtype=np.int64) for s in seqs]
    if len(seqs) != pmf.ndim:
        raise ValueError(f"{len(seqs)} sequences for a pmf with {pmf.ndim} axes")
    n = seqs[0].size
    if any(s.size != n for s in seqs):
        raise ValueError("sequence length mismatch")
    if n == 0:
        raise ValueError("empty sequences")
    flat = np.ravel_multi_index(tuple(seqs), pmf.shape)
    freq = np.bincount(flat, minlength=pmf.size) / n
    p = pmf.ravel()
    return bool(np.all(np.abs(freq - p) <= eps * p))


def _key_of(y: np.ndarray, bits: int, seed: int) -> int:
    """Uniform random bin of the sequence y, realized as a keyed hash."""
    if bits == 0:
        return 0
    h = hashlib.blake2b(np.asarray(y, dtype=np.int64).tobytes(), digest_size=16,
                        key=int(seed).to_bytes(8, "little", signed=False))
    return int.from_bytes(h.digest(), "little") % (1 << bits)


# -- trial report ---------------------------------------------------------------


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, np.ndarray):
        return _jsonable(v.tolist())
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if not math.isfinite(f) else float(format(f, ".12g"))
    return v


@dataclass
class TrialReport:
    config: dict
    seed: int
    n: int
    trials: int
    distortion_mean: float | None = None
    distortion_std: float | None = None
    error_rate: float | None = None
    encode_failure_rate: float | None = None
    index_entropy: dict = field(default_factory=dict)
    exact_leakage: float | None = None
    modes: dict = field(default_factory=dict)
    distortions: list = field(default_factory=list, repr=False)

    def __post_init__(self):
        for name in ("distortion_mean", "distortion_std", "exact_leakage"):
            v = getattr(self, name)
            if v is not None and v < -1e-12:
                raise ValueError(f"{name} must be >= 0")
        if self.error_rate is not None and not 0 <= self.error_rate <= 1:
            raise ValueError("error rate outside [0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d.pop("distortions")
        return _jsonable(d)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


def _empirical_entropy(values) -> float:
    if len(values) == 0:
        return 0.0
    _, counts = np.unique(np.asarray(values), return_counts=True)
    return max(entropy(counts / counts.sum()), 0.0)


# -- helpers ----------------------------------------------------------------------


def _dist_table(distortion, nx: int, g: np.ndarray) -> np.ndarray:
    d = 1.0 - np.eye(nx) if distortion is None else np.asarray(distortion, float)
    if d.ndim != 2 or d.shape[0] != nx:
        raise ValueError(f"distortion table must have {nx} rows")
    if g.min() < 0 or g.max() >= d.shape[1]:
        raise ValueError("g references reconstruction symbols outside the distortion table")
    return d


def _encode(ctx: np.ndarray, cb: Codebook, pmf: np.ndarray, eps: float, rng, selection: str):
    mask = _kernels.typical_mask(ctx, cb.codewords, pmf, eps)
    hits = np.flatnonzero(mask)
    if hits.size:
        return int(hits[0] if selection == "first" else hits[rng.integers(hits.size)]), True
    return (0 if selection == "first" else int(rng.integers(cb.size))), False


def _encode_law(ctx: np.ndarray, cb: Codebook, pmf: np.ndarray, eps: float, selection: str) -> np.ndarray:
    """Exact conditional law of the encoder's codeword choice given its observation."""
    mask = _kernels.typical_mask(ctx, cb.codewords, pmf, eps)
    law = np.zeros(cb.size)
    hits = np.flatnonzero(mask)
    if selection == "first":
        law[hits[0] if hits.size else 0] = 1.0
    elif hits.size:
        law[hits] = 1.0 / hits.size
    else:
        law[:] = 1.0 / cb.size
    return law


def _decode(bin_index: int, side: np.ndarray, cb: Codebook, pmf: np.ndarray, eps: float) -> tuple[int, bool]:
    """Lowest-index codeword in the bin typical with the side information.

    Returns (index, unique); an empty search falls back to the bin's first
    codeword (or codeword 0 if the bin is empty).
    """
    cand = np.flatnonzero(cb.bins == bin_index)
    if cand.size == 0:
        return 0, False
    mask = _kernels.typical_mask(side, cb.codewords[cand], pmf, eps)
    hits = cand[mask]
    if hits.size == 0:
        return int(cand[0]), False
    return int(hits[0]), hits.size == 1


def _sample_source(model: JointPmf3, n: int, rng) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    p = model.probs.ravel()
    flat = rng.choice(p.size, size=n, p=p / p.sum())
    return np.unravel_index(flat, model.shape)


def _aux_marginal(joint: np.ndarray, axis: int) -> np.ndarray:
    return joint.sum(axis=tuple(i for i in range(joint.ndim) if i != axis))


def _rate_floor_warn(name: str, rate: float, floor: float) -> None:
    if rate < floor - 1e-12:
        log.warning("%s = %.6g is below its floor %.6g; the scheme may fail", name, rate, floor)


def _blocks(n: int, block: int | None) -> tuple[int, int]:
    if block is None:
        return n, 1
    if block < 1 or n % block:
        raise ValueError(f"block {block} must divide n = {n}")
    return block, n // block


# -- one-sided helper ---------------------------------------------------------------


@dataclass(eq=False)
class OneSidedScheme:
    """Helper quantizes y^n to u^n (index w2); encoder quantizes x^n to v^n and sends its bin w1."""

    model: JointPmf3
    n: int
    cb_u: Codebook
    cb_v: Codebook
    pmf_yu: np.ndarray
    pmf_xv: np.ndarray
    pmf_uv: np.ndarray
    g: np.ndarray
    eps: float
    selection: str

    def observation_law(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """law[x^n, y^n, w2]: the eavesdropper sees the helper's index."""
        law_y = np.stack([_encode_law(y, self.cb_u, self.pmf_yu, self.eps, self.selection) for y in ys])
        return np.broadcast_to(law_y[None], (len(xs),) + law_y.shape)


def run_one_sided(model: JointPmf3, p_u_given_y: AuxChannel, p_v_given_x: AuxChannel, g,
                  rates: tuple[float, float], n: int, trials: int, eps: float | TypicalityParam = 0.1,
                  seed: int = 0, codebook_rates: tuple[float, float] | None = None,
                  block: int | None = None, selection: str = "random", distortion=None,
                  exact: bool = False, max_cells: int = MAX_CODEBOOK_CELLS) -> TrialReport:
    """Simulate the one-sided helper scheme.

    ``rates = (R1, R2)`` set the index sizes.  ``codebook_rates = (R_u, R_v)``
    set the codebook sizes; by default R_u = R2 and R_v = I(X;V) plus the
    margin R1 - I(X;V|U).  ``g[u, v]`` is the reconstruction table.  With
    ``block`` the length-n sequence is coded as ``n / block`` independent
    sub-blocks sharing one codebook.
    """
    require_valid(model)
    eps = eps.eps if isinstance(eps, TypicalityParam) else TypicalityParam(eps).eps
    r1, r2 = (float(r) for r in rates)
    j = join(model, p_u_given_y, p_v_given_x)
    i_yu, i_xv_u, i_xv = float(j.I("y", "u")), float(j.I("x", "v", "u")), float(j.I("x", "v"))
    _rate_floor_warn("R2", r2, i_yu)
    _rate_floor_warn("R1", r1, i_xv_u)
    if codebook_rates is None:
        codebook_rates = (r2, i_xv + max(r1 - i_xv_u, 0.0))
    L, nblocks = _blocks(n, block)
    g = np.asarray(g, dtype=np.int64)
    nx = model.shape[0]
    if g.shape != (p_u_given_y.aux_size, p_v_given_x.aux_size):
        raise ValueError("g must be indexed [u, v]")
    dtab = _dist_table(distortion, nx, g)
    ch = _children(seed)
    pmf_yu, pmf_xv, pmf_uv = j.marginal("yu"), j.marginal("xv"), j.marginal("uv")
    bits_u = min(_bits(L, codebook_rates[0]), _bits(L, r2))
    cb_u = Codebook.draw(L, bits_u, _aux_marginal(pmf_yu, 1), 0, ch[_S_CB_A],
                         np.random.SeedSequence(0), seed, max_cells)
    cb_v = Codebook.draw(L, _bits(L, codebook_rates[1]), _aux_marginal(pmf_xv, 1), _bits(L, r1),
                         ch[_S_CB_B], ch[_S_BINS], seed, max_cells)
    scheme = OneSidedScheme(model, L, cb_u, cb_v, pmf_yu, pmf_xv, pmf_uv, g, eps, selection)
    config = {
        "scheme": "one_sided", "rates": [r1, r2], "codebook_rates": list(codebook_rates),
        "codebook_bits": [bits_u, _bits(L, codebook_rates[1])], "bin_bits": _bits(L, r1),
        "eps": eps, "block": block, "selection": selection,
        "floors": {"I(Y;U)": i_yu, "I(X;V|U)": i_xv_u},
    }
    rep = TrialReport(config, int(seed), n, int(trials), modes={"exact": exact, "conditioned_on_codebook": True})
    if trials > 0:
        tr_seqs = ch[_S_TRIALS].spawn(trials)
        dist, errs, encf, w1s, w2s = [], [], 0, [], []
        for t in range(trials):
            rng = np.random.default_rng(tr_seqs[t])
            tot, bad = 0.0, False
            w1t, w2t = [], []
            for _ in range(nblocks):
                x, y, _z = _sample_source(model, L, rng)
                iu, _ = _encode(y, cb_u, pmf_yu, eps, rng, selection)
                iv, ok = _encode(x, cb_v, pmf_xv, eps, rng, selection)
                encf += not ok
                w1 = int(cb_v.bins[iv])
                u = cb_u.codewords[iu]
                dv, _uniq = _decode(w1, u, cb_v, pmf_uv, eps)
                bad |= dv != iv
                xhat = g[u, cb_v.codewords[dv]]
                tot += float(dtab[x, xhat].sum())
                w1t.append(w1)
                w2t.append(iu)
            dist.append(tot / n)
            errs.append(bad)
            w1s.append(tuple(w1t))
            w2s.append(tuple(w2t))
        _fill_stats(rep, dist, errs, encf / (trials * nblocks),
                    {"W1": _empirical_entropy([hash(w) for w in w1s]) / n,
                     "W2": _empirical_entropy([hash(w) for w in w2s]) / n})
    if exact:
        if block is not None:
            raise ValueError("exact leakage needs block=None")
        rep.exact_leakage = run_exact_leakage(scheme)
    return rep


def _fill_stats(rep: TrialReport, dist, errs, encf: float, hidx: dict) -> None:
    d = np.asarray(dist)
    rep.distortion_mean = float(d.mean())
    rep.distortion_std = float(d.std())
    rep.error_rate = float(np.mean(errs))
    rep.encode_failure_rate = float(encf)
    rep.index_entropy = hidx
    rep.distortions = d.tolist()


# -- triangular: forwarding and keyed -------------------------------------------------


@dataclass(eq=False)
class ForwardingScheme:
    """Wyner-Ziv quantize-and-bin of x^n; the bin index splits into w1 (cascade) and w3 (private).

    ``w = w1 * 2^b3 + w3``.  With a key, w1 splits further into a clear part
    and a keyed part of ``key_bits`` low bits: ``w1 = w1l * 2^bk + w1k`` and
    the cascade carries ``w1l * 2^bk + (w1k + k) mod 2^bk``.
    """

    model: JointPmf3
    n: int
    cb: Codebook
    pmf_xu: np.ndarray
    pmf_yu: np.ndarray
    b1: int
    b3: int
    key_bits: int
    key_mode: str
    key_seed: int
    g: np.ndarray
    eps: float
    selection: str

    def split(self, idx: int) -> tuple[int, int]:
        w = int(self.cb.bins[idx])
        return w >> self.b3, w & ((1 << self.b3) - 1)

    def key(self, y: np.ndarray, rng=None) -> int:
        if self.key_bits == 0 or self.key_mode == "none":
            return 0
        if self.key_mode == "binned":
            return _key_of(y, self.key_bits, self.key_seed)
        return int(rng.integers(1 << self.key_bits))

    def wrap(self, w1: int, k: int) -> int:
        m = (1 << self.key_bits) - 1
        return (w1 & ~m) | (((w1 & m) + k) & m)

    def unwrap(self, c: int, k: int) -> int:
        m = (1 << self.key_bits) - 1
        return (c & ~m) | (((c & m) - k) & m)

    def _w1_law(self, x: np.ndarray) -> np.ndarray:
        law = _encode_law(x, self.cb, self.pmf_xu, self.eps, self.selection)
        out = np.zeros(1 << self.b1)
        np.add.at(out, self.cb.bins >> self.b3, law)
        return out

    def observation_law(self, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
        """law[x^n, y^n, c]: the helper sees the (possibly keyed) cascade index c."""
        lx = np.stack([self._w1_law(x) for x in xs])  # (X^n, 2^b1)
        nw = lx.shape[1]
        if self.key_bits == 0 or self.key_mode == "none":
            return np.broadcast_to(lx[:, None, :], (len(xs), len(ys), nw))
        m = 1 << self.key_bits
        lx3 = lx.reshape(len(xs), nw // m, m)  # (x, clear, keyed)
        if self.key_mode == "external":
            unif = np.repeat(lx3.sum(axis=2, keepdims=True) / m, m, axis=2)
            return np.broadcast_to(unif.reshape(len(xs), 1, nw), (len(xs), len(ys), nw))
        out = np.empty((len(xs), len(ys), nw))
        for yi, y in enumerate(ys):
            k = self.key(y)
            out[:, yi, :] = np.roll(lx3, k, axis=2).reshape(len(xs), nw)
        return out


def _forwarding_setup(model, p_u_given_x: AuxChannel, g, rates, n, eps, seed, codebook_rate, selection,
                      key: KeyConfig | None, max_cells, side: str):
    require_valid(model)
    eps = eps.eps if isinstance(eps, TypicalityParam) else TypicalityParam(eps).eps
    r1, r3 = (float(r) for r in rates)
    if p_u_given_x.inputs != ("x",) or p_u_given_x.output != "u":
        raise ValueError("expected p(u|x)")
    j = join(model, p_u_given_x)
    i_xu, wz = float(j.I("x", "u")), float(j.I("x", "u", "y"))
    _rate_floor_warn("R1 + R3", r1 + r3, wz)
    if codebook_rate is None:
        codebook_rate = i_xu + max(r1 + r3 - wz, 0.0)
    b1, b3 = _bits(n, r1), _bits(n, r3)
    key = key or KeyConfig(0.0, "none")
    key.check_alphabet(model.shape[1])
    kb = min(_bits(n, key.rate), b1) if key.mode != "none" else 0
    ch = _children(seed)
    pmf_xu, pmf_yu = j.marginal("xu"), j.marginal("yu")
    # the bin map is drawn over the total index, so the split does not change it
    cb = Codebook.draw(n, _bits(n, codebook_rate), _aux_marginal(pmf_xu, 1), b1 + b3,
                       ch[_S_CB_A], ch[_S_BINS], seed, max_cells)
    g = np.asarray(g, dtype=np.int64)
    if g.shape != (p_u_given_x.aux_size, model.shape[1]):
        raise ValueError("g must be indexed [u, y]")
    key_seed = int(ch[_S_KEY].generate_state(1, dtype=np.uint64)[0]) ^ int(key.seed)
    scheme = ForwardingScheme(model, n, cb, pmf_xu, pmf_yu, b1, b3, kb, key.mode, key_seed, g, eps, selection)
    config = {
        "scheme": side, "rates": [r1, r3], "codebook_rate": codebook_rate,
        "codebook_bits": _bits(n, codebook_rate), "bits": [b1, b3], "key": asdict(key),
        "key_bits": kb, "eps": eps, "selection": selection,
        "floors": {"I(X;U|Y)": wz, "I(X;U)": i_xu},
    }
    return scheme, config, ch


def _run_forwarding(scheme: ForwardingScheme, config, ch, n, trials, seed, distortion, exact) -> TrialReport:
    model = scheme.model
    nx = model.shape[0]
    dtab = _dist_table(distortion, nx, scheme.g)
    rep = TrialReport(config, int(seed), n, int(trials),
                      modes={"exact": exact, "conditioned_on_codebook": True, "key_mode": scheme.key_mode})
    if trials > 0:
        tr_seqs = ch[_S_TRIALS].spawn(trials)
        dist, errs, encf, c1s, w3s = [], [], 0, [], []
        for t in range(trials):
            rng = np.random.default_rng(tr_seqs[t])
            key_rng = np.random.default_rng(tr_seqs[t].spawn(1)[0])
            x, y, _z = _sample_source(model, n, rng)
            iu, ok = _encode(x, scheme.cb, scheme.pmf_xu, scheme.eps, rng, scheme.selection)
            encf += not ok
            w1, w3 = scheme.split(iu)
            k = scheme.key(y, key_rng)
            c1 = scheme.wrap(w1, k)  # what the helper sees and forwards
            w = (scheme.unwrap(c1, k) << scheme.b3) | w3
            du, _uniq = _decode(w, y, scheme.cb, scheme.pmf_yu, scheme.eps)
            xhat = scheme.g[scheme.cb.codewords[du], y]
            dist.append(float(dtab[x, xhat].mean()))
            errs.append(du != iu)
            c1s.append(c1)
            w3s.append(w3)
        _fill_stats(rep, dist, errs, encf / trials,
                    {"W1": _empirical_entropy(c1s) / n, "W3": _empirical_entropy(w3s) / n})
    if exact:
        rep.exact_leakage = run_exact_leakage(scheme)
    return rep


def run_triangular_forwarding(model: JointPmf3, p_u_given_x: AuxChannel, g, rates: tuple[float, float],
                              n: int, trials: int, eps: float | TypicalityParam = 0.1, seed: int = 0,
                              setting: str = "A", codebook_rate: float | None = None,
                              selection: str = "random", distortion=None, exact: bool = False,
                              max_cells: int = MAX_CODEBOOK_CELLS) -> TrialReport:
    """Triangular/cascade scheme where the helper forwards w1 unchanged.

    ``rates = (R1, R3)``: cascade and private index rates (the forwarded rate
    R2 equals R1).  ``g[u, y]`` reconstructs from the codeword and the
    decoder's side information.  Setting "C" ignores Z (it only enters the
    exact leakage, which setting C does not bound by I(X;Z)).
    """
    if setting not in ("A", "C"):
        raise ValueError("forwarding covers settings A and C")
    if setting == "A":
        if not check_markov(model, "x-y-z"):
            raise ValueError("setting A needs X - Y - Z")
    scheme, config, ch = _forwarding_setup(model, p_u_given_x, g, rates, n, eps, seed, codebook_rate,
                                           selection, None, max_cells, f"forwarding_{setting}")
    return _run_forwarding(scheme, config, ch, n, trials, seed, distortion, exact)


def run_triangular_keyed(model: JointPmf3, p_u_given_x: AuxChannel, g, rates: tuple[float, float],
                         key: KeyConfig, n: int, trials: int, eps: float | TypicalityParam = 0.1,
                         seed: int = 0, codebook_rate: float | None = None, selection: str = "random",
                         distortion=None, exact: bool = False,
                         max_cells: int = MAX_CODEBOOK_CELLS) -> TrialReport:
    """Setting B: the low ``ceil(n R_k)`` bits of w1 are one-time padded with a key.

    With ``key.mode == "binned"`` the key is a uniform random bin of y^n known
    to both ends; "external" draws an independent uniform key (diagnostic).
    """
    if not check_markov(model, "x-y-z"):
        raise ValueError("setting B needs X - Y - Z")
    scheme, config, ch = _forwarding_setup(model, p_u_given_x, g, rates, n, eps, seed, codebook_rate,
                                           selection, key, max_cells, "keyed_B")
    return _run_forwarding(scheme, config, ch, n, trials, seed, distortion, exact)


def keyed_scheme(model, p_u_given_x, g, rates, key: KeyConfig, n, eps=0.1, seed=0, codebook_rate=None,
                 selection="random") -> ForwardingScheme:
    """Build the scheme object alone (for exact-enumeration studies)."""
    return _forwarding_setup(model, p_u_given_x, g, rates, n, eps, seed, codebook_rate, selection, key,
                             MAX_CODEBOOK_CELLS, "keyed_B")[0]


# -- exact leakage ----------------------------------------------------------------------


class _Fixed:
    """Encoders that ignore the codebook: constant index or the full source sequence."""

    def __init__(self, model: JointPmf3, n: int, kind: str):
        if kind not in ("constant", "identity"):
            raise ValueError(f"unknown encoder {kind!r}")
        self.model, self.n, self.kind = model, n, kind

    def observation_law(self, xs, ys):
        if self.kind == "constant":
            return np.ones((len(xs), len(ys), 1))
        return np.broadcast_to(np.eye(len(xs))[:, None, :], (len(xs), len(ys), len(xs)))


def all_sequences(size: int, n: int) -> np.ndarray:
    """All sequences over ``range(size)`` of length n, first symbol most significant."""
    idx = np.arange(size ** n)
    out = np.empty((idx.size, n), dtype=np.int64)
    for t in range(n - 1, -1, -1):
        out[:, t] = idx % size
        idx = idx // size
    return out


def block_pmf(model: JointPmf3, n: int) -> np.ndarray:
    """p(x^n, y^n, z^n) as an (|X|^n, |Y|^n, |Z|^n) array in :func:`all_sequences` order."""
    nx, ny, nz = model.shape
    p = np.ones((1, 1, 1))
    for _ in range(n):
        p = np.einsum("abc,xyz->axbycz", p, model.probs).reshape(
            p.shape[0] * nx, p.shape[1] * ny, p.shape[2] * nz)
    return p


def observation_joint(scheme, model: JointPmf3 | None = None, n: int | None = None) -> np.ndarray:
    """p(x^n, z^n, o) of the source block and the eavesdropper's index."""
    model = model or scheme.model
    n = n or scheme.n
    nx, ny, nz = model.shape
    states = (nx * ny * nz) ** n
    if states > EXACT_MAX_STATES:
        raise ValueError(f"|X|^n|Y|^n|Z|^n = {states} exceeds the enumeration guard {EXACT_MAX_STATES}")
    xs, ys = all_sequences(nx, n), all_sequences(ny, n)
    law = scheme.observation_law(xs, ys)
    return _kernels.xzo_from_law(block_pmf(model, n), np.ascontiguousarray(law))


def run_exact_leakage(scheme, model: JointPmf3 | None = None, n: int | None = None) -> float:
    """I(X^n; O, Z^n) / n for a fixed scheme (codebook, bins and key map).

    ``scheme`` is a scheme object from this module or "constant" / "identity"
    (then ``model`` and ``n`` are required).
    """
    if isinstance(scheme, str):
        if model is None or n is None:
            raise ValueError("model and n are required for a named encoder")
        scheme = _Fixed(model, n, scheme)
    n = n or scheme.n
    pxzo = observation_joint(scheme, model, n)
    return max(float(Joint(pxzo, "xzo").I("x", "zo")) / n, 0.0)
