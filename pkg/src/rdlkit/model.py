"""Source models, rate-distortion-leakage points and their JSON persistence.

A discrete source is a dense joint pmf ``p(x, y, z)`` with labelled alphabets.
The Gaussian sources are three-variance additive-noise chains.  Which
coordinate plays which role (decoder side information, helper side
information, ...) is documented by each region evaluator.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

NORM_TOL = 1e-9
MARKOV_TOL = 1e-9
MAX_CELLS = 10**6

COORDS = ("x", "y", "z")


class ModelError(ValueError):
    """Base class for model construction and file errors."""


class ModelFormatError(ModelError):
    pass


class DimensionMismatchError(ModelError):
    pass


class NormalizationError(ModelError):
    pass


def _freeze(a: np.ndarray) -> np.ndarray:
    a = np.array(a, dtype=np.float64, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class JointPmf3:
    """Dense joint pmf over (X, Y, Z).

    ``probs[ix, iy, iz]`` is the mass of ``(alphabet_x[ix], alphabet_y[iy],
    alphabet_z[iz])``.  Only shapes are checked on construction; use
    :func:`validate` for the value invariants.
    """

    alphabet_x: tuple[str, ...]
    alphabet_y: tuple[str, ...]
    alphabet_z: tuple[str, ...]
    probs: np.ndarray

    def __post_init__(self):
        for name in ("alphabet_x", "alphabet_y", "alphabet_z"):
            object.__setattr__(self, name, tuple(str(s) for s in getattr(self, name)))
        probs = _freeze(self.probs)
        shape = (len(self.alphabet_x), len(self.alphabet_y), len(self.alphabet_z))
        if min(shape) < 1:
            raise DimensionMismatchError("every alphabet needs at least one symbol")
        if probs.shape != shape:
            raise DimensionMismatchError(
                f"probs has shape {probs.shape}, alphabets imply {shape}"
            )
        if probs.size > MAX_CELLS:
            raise DimensionMismatchError(f"{probs.size} cells exceeds the dense cap {MAX_CELLS}")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def from_array(cls, probs, labels: Sequence[Sequence[str]] | None = None) -> "JointPmf3":
        probs = np.asarray(probs, dtype=np.float64)
        if probs.ndim != 3:
            raise DimensionMismatchError("expected a 3-d array p[x, y, z]")
        if labels is None:
            labels = [[str(i) for i in range(k)] for k in probs.shape]
        return cls(tuple(labels[0]), tuple(labels[1]), tuple(labels[2]), probs)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.probs.shape

    @property
    def alphabets(self) -> dict[str, tuple[str, ...]]:
        return {"x": self.alphabet_x, "y": self.alphabet_y, "z": self.alphabet_z}

    def __eq__(self, other):
        if not isinstance(other, JointPmf3):
            return NotImplemented
        return (
            self.alphabets == other.alphabets
            and np.array_equal(self.probs, other.probs)
        )

    def __hash__(self):
        return hash((self.alphabet_x, self.alphabet_y, self.alphabet_z, self.probs.tobytes()))


class ChainOrder(str, enum.Enum):
    Y_X_Z = "Y_X_Z"
    X_Y_Z = "X_Y_Z"


@dataclass(frozen=True)
class GaussianChain:
    """Additive-noise Gaussian chain.

    For ``Y_X_Z``: Y ~ N(0, var_root), X = Y + N1, Z = X + N2.
    For ``X_Y_Z``: X ~ N(0, var_root), Y = X + N1, Z = Y + N2.
    """

    order: ChainOrder
    var_root: float
    var_n1: float
    var_n2: float

    def __post_init__(self):
        object.__setattr__(self, "order", ChainOrder(self.order))
        for name in ("var_root", "var_n1", "var_n2"):
            v = float(getattr(self, name))
            if not (math.isfinite(v) and v > 0):
                raise ModelError(f"{name} must be finite and > 0, got {v}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class RdlPoint:
    """Rates (bits/symbol), distortion and leakage (bits/symbol).

    ``r3`` is ``None`` for settings without a private link.
    """

    r1: float
    r2: float
    d: float
    delta: float
    r3: float | None = None

    def __post_init__(self):
        for name in ("r1", "r2", "d", "delta", "r3"):
            v = getattr(self, name)
            if v is None:
                continue
            v = float(v)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, v)

    def as_tuple(self) -> tuple[float, float, float, float, float]:
        """(r1, r2, r3, d, delta) with an absent r3 reported as 0."""
        return (self.r1, self.r2, 0.0 if self.r3 is None else self.r3, self.d, self.delta)


@dataclass(frozen=True, eq=False)
class AuxChannel:
    """Conditional pmf ``p(output | inputs)``.

    ``probs`` has one axis per input variable (in ``inputs`` order) followed by
    the output axis.  Input names are single letters naming source
    coordinates or other auxiliaries, e.g. ``("y",)`` for ``p(u|y)`` or
    ``("u", "x", "z")`` for ``p(v|u,x,z)``.
    """

    inputs: tuple[str, ...]
    output: str
    probs: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "inputs", tuple(self.inputs))
        probs = _freeze(self.probs)
        if probs.ndim != len(self.inputs) + 1:
            raise DimensionMismatchError(
                f"channel p({self.output}|{','.join(self.inputs)}) needs "
                f"{len(self.inputs) + 1} axes, got {probs.ndim}"
            )
        if probs.shape[-1] < 1:
            raise DimensionMismatchError("auxiliary alphabet must be non-empty")
        if np.any(probs < 0) or np.any(np.abs(probs.sum(axis=-1) - 1) > NORM_TOL):
            raise NormalizationError(f"rows of p({self.output}|...) must be pmfs")
        object.__setattr__(self, "probs", probs)

    @property
    def aux_size(self) -> int:
        return self.probs.shape[-1]

    @classmethod
    def constant(cls, inputs, in_sizes, output: str) -> "AuxChannel":
        return cls(tuple(inputs), output, np.ones(tuple(in_sizes) + (1,)))

    @classmethod
    def identity(cls, inp: str, size: int, output: str) -> "AuxChannel":
        return cls((inp,), output, np.eye(size))


# -- validation ---------------------------------------------------------------


def validate(model: JointPmf3, tol: float = NORM_TOL) -> list[str]:
    """Return every invariant violation of ``model``; an empty list means ok."""
    problems: list[str] = []
    p = model.probs
    if not np.all(np.isfinite(p)):
        problems.append("non-finite mass present")
    neg = np.argwhere(p < 0)
    for ix, iy, iz in neg:
        problems.append(
            f"negative mass at ({model.alphabet_x[ix]},{model.alphabet_y[iy]},"
            f"{model.alphabet_z[iz]}): {p[ix, iy, iz]!r}"
        )
    total = float(np.sum(p))
    if abs(total - 1.0) > tol:
        problems.append(f"masses sum to {total!r}, not 1 within {tol}")
    return problems


def require_valid(model: JointPmf3) -> None:
    problems = validate(model)
    if problems:
        raise NormalizationError("; ".join(problems))


# -- pmf algebra --------------------------------------------------------------


def _coord_list(coords: Iterable[str] | str) -> list[str]:
    out = [c.lower() for c in coords if c not in " ,-"]
    if not out:
        raise ValueError("empty coordinate set")
    bad = [c for c in out if c not in COORDS]
    if bad:
        raise ValueError(f"unknown coordinates {bad}")
    return out


def marginal(model: JointPmf3, coords: Iterable[str] | str) -> np.ndarray:
    """Marginal pmf over ``coords`` with axes kept in (x, y, z) order."""
    keep = set(_coord_list(coords))
    drop = tuple(i for i, c in enumerate(COORDS) if c not in keep)
    m = model.probs.sum(axis=drop) if drop else model.probs.copy()
    return m / m.sum()


@dataclass(frozen=True)
class MarkovCheck:
    passed: bool
    max_violation: float
    chain: tuple[str, str, str]

    def __bool__(self):
        return self.passed


def _parse_chain(chain) -> tuple[str, str, str]:
    if isinstance(chain, str):
        parts = [c for c in chain.lower().replace("−", "-").split("-") if c]
        if len(parts) == 1:
            parts = list(parts[0])
    else:
        parts = [str(c).lower() for c in chain]
    if len(parts) != 3 or sorted(parts) != sorted(COORDS):
        raise ValueError(f"chain must order x, y, z exactly once, got {chain!r}")
    return tuple(parts)  # type: ignore[return-value]


def check_markov(model: JointPmf3, chain, tol: float = MARKOV_TOL) -> MarkovCheck:
    """Test the Markov chain ``a - m - b`` on ``model``.

    Uses max over cells of ``|p(a,m,b) p(m) - p(a,m) p(m,b)|``, which avoids
    dividing by zero-mass middle symbols.
    """
    a, m, b = _parse_chain(chain)
    order = [COORDS.index(c) for c in (a, m, b)]
    p = np.transpose(model.probs, order)
    p_m = p.sum(axis=(0, 2))
    p_am = p.sum(axis=2)
    p_mb = p.sum(axis=0)
    lhs = p * p_m[None, :, None]
    rhs = p_am[:, :, None] * p_mb[None, :, :]
    viol = float(np.max(np.abs(lhs - rhs))) if p.size else 0.0
    return MarkovCheck(viol <= tol, viol, (a, m, b))


# -- builders -----------------------------------------------------------------


def from_chain(p_xy, p_z_given_y, labels=None) -> JointPmf3:
    """Build ``p(x,y) p(z|y)``, which satisfies X - Y - Z by construction."""
    p_xy = np.asarray(p_xy, dtype=float)
    w = np.asarray(p_z_given_y, dtype=float)
    return JointPmf3.from_array(p_xy[:, :, None] * w[None, :, :], labels)


def bsc(p: float) -> np.ndarray:
    return np.array([[1 - p, p], [p, 1 - p]])


def dsbs(p: float, z: str = "y", pz: float = 0.0) -> JointPmf3:
    """Doubly symmetric binary source extended with a third coordinate.

    X is uniform and Y = X through a BSC(p).  ``z`` selects Z:
    ``"y"`` copies Y, ``"x"`` copies X, ``"const"`` is a singleton, and
    ``"y-noisy"`` passes Y through a BSC(pz).
    """
    p_xy = 0.5 * bsc(p)
    labels = [["0", "1"], ["0", "1"], ["0", "1"]]
    if z == "y":
        return from_chain(p_xy, np.eye(2), labels)
    if z == "y-noisy":
        return from_chain(p_xy, bsc(pz), labels)
    if z == "x":
        return JointPmf3.from_array(p_xy[:, :, None] * np.eye(2)[:, None, :], labels)
    if z == "const":
        return JointPmf3.from_array(p_xy[:, :, None], [labels[0], labels[1], ["*"]])
    raise ValueError(f"unknown z mode {z!r}")


def random_pmf(rng: np.random.Generator, shape) -> np.ndarray:
    p = rng.dirichlet(np.ones(int(np.prod(shape)))).reshape(shape)
    return p


def random_channel(rng: np.random.Generator, n_in: int, n_out: int) -> np.ndarray:
    return rng.dirichlet(np.ones(n_out), size=n_in)


def random_model(rng: np.random.Generator, sizes=(2, 2, 2), chain: str | None = None) -> JointPmf3:
    """Random full-support model; ``chain`` = "x-y-z" or "x-z-y" imposes that Markov order."""
    nx, ny, nz = sizes
    if chain is None:
        return JointPmf3.from_array(random_pmf(rng, sizes))
    a, m, b = _parse_chain(chain)
    if m == "y":
        return from_chain(random_pmf(rng, (nx, ny)), random_channel(rng, ny, nz))
    if m == "z":
        p_xz = random_pmf(rng, (nx, nz))
        w = random_channel(rng, nz, ny)  # p(y|z)
        return JointPmf3.from_array(np.einsum("xz,zy->xyz", p_xz, w))
    if m == "x":
        p_xy = random_pmf(rng, (nx, ny))
        w = random_channel(rng, nx, nz)  # p(z|x)
        return JointPmf3.from_array(p_xy[:, :, None] * w[:, None, :])
    raise ValueError(chain)


# -- persistence --------------------------------------------------------------


def _num(s) -> float:
    try:
        return float(s)
    except (TypeError, ValueError) as exc:
        raise ModelFormatError(f"not a decimal number: {s!r}") from exc


def model_to_dict(model: JointPmf3 | GaussianChain) -> dict:
    if isinstance(model, GaussianChain):
        return {
            "kind": "gaussian",
            "order": model.order.value,
            "var_root": repr(model.var_root),
            "var_n1": repr(model.var_n1),
            "var_n2": repr(model.var_n2),
        }
    return {
        "kind": "discrete",
        "alphabets": {k: list(v) for k, v in model.alphabets.items()},
        # C order: index = ((ix*|Y|) + iy)*|Z| + iz
        "probs": [repr(float(v)) for v in model.probs.ravel(order="C")],
    }


def model_from_dict(doc: dict) -> JointPmf3 | GaussianChain:
    if not isinstance(doc, dict) or "kind" not in doc:
        raise ModelFormatError("model document must be an object with a 'kind' field")
    kind = doc["kind"]
    if kind == "gaussian":
        try:
            return GaussianChain(
                ChainOrder(doc["order"]),
                _num(doc["var_root"]),
                _num(doc["var_n1"]),
                _num(doc["var_n2"]),
            )
        except KeyError as exc:
            raise ModelFormatError(f"gaussian model missing field {exc}") from exc
        except ValueError as exc:
            if isinstance(exc, ModelError):
                raise
            raise ModelFormatError(str(exc)) from exc
    if kind != "discrete":
        raise ModelFormatError(f"unknown model kind {kind!r}")
    try:
        alph = doc["alphabets"]
        labels = [list(alph[c]) for c in COORDS]
        raw = doc["probs"]
    except (KeyError, TypeError) as exc:
        raise ModelFormatError(f"discrete model missing field {exc}") from exc
    if not isinstance(raw, list):
        raise ModelFormatError("'probs' must be a list of decimal strings")
    shape = tuple(len(l) for l in labels)
    if len(raw) != int(np.prod(shape)):
        raise DimensionMismatchError(
            f"'probs' has {len(raw)} entries, alphabets imply {int(np.prod(shape))}"
        )
    probs = np.array([_num(s) for s in raw], dtype=np.float64).reshape(shape)
    model = JointPmf3(tuple(labels[0]), tuple(labels[1]), tuple(labels[2]), probs)
    problems = validate(model)
    if problems:
        raise NormalizationError("; ".join(problems))
    return model


def save_model(model: JointPmf3 | GaussianChain, path) -> None:
    Path(path).write_text(json.dumps(model_to_dict(model), indent=1) + "\n")


def load_model(path) -> JointPmf3 | GaussianChain:
    try:
        doc = json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"{path}: malformed JSON ({exc})") from exc
    return model_from_dict(doc)
