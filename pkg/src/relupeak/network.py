"""Feed-forward ReLU networks with a scalar linear head, and their input domains.

A network is a chain of affine layers with ReLU activations followed by a
linear read-out.  Networks and polytopes are immutable after construction and
safe to share across workers; random state is always passed in explicitly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .linprog import LE, LinearProgram, LpStatus, solve_lp

DEFAULT_BOUNDARY_EPS = 1e-6
_REJECTION_BUDGET = 10**6


class NetworkFormatError(ValueError):
    """A network or polytope file does not parse or is internally inconsistent."""


class SamplingBudgetError(RuntimeError):
    """Rejection sampling exhausted its budget without an accepted point."""


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ReluNetwork:
    """Layer weights/biases plus the final linear head.

    ``weights[k]`` maps the activations of layer k to the pre-activations of
    layer k+1 (shape next_width x prev_width); ``head`` is the read-out over
    the last hidden layer.  The function value is head @ relu(...(relu(W0 x
    + b0))...).
    """

    weights: tuple
    biases: tuple
    head: np.ndarray

    def __post_init__(self):
        ws = tuple(_frozen(w) for w in self.weights)
        bs = tuple(_frozen(b) for b in self.biases)
        head = _frozen(self.head)
        if len(ws) == 0 or len(ws) != len(bs):
            raise ValueError("need one (weight, bias) pair per hidden layer")
        prev = ws[0].shape[1]
        for k, (w, b) in enumerate(zip(ws, bs)):
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.size:
                raise ValueError(f"layer {k}: weight/bias shapes do not chain")
            if w.shape[1] != prev:
                raise ValueError(
                    f"layer {k}: expected {prev} input columns, got {w.shape[1]}"
                )
            if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
                raise ValueError(f"layer {k}: non-finite weights")
            prev = w.shape[0]
        if head.ndim != 1 or head.size != prev:
            raise ValueError("head length must match the last hidden width")
        if not np.all(np.isfinite(head)):
            raise ValueError("non-finite head weights")
        object.__setattr__(self, "weights", ws)
        object.__setattr__(self, "biases", bs)
        object.__setattr__(self, "head", head)

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def hidden_widths(self) -> tuple:
        return tuple(w.shape[0] for w in self.weights)

    @property
    def num_hidden(self) -> int:
        return sum(self.hidden_widths)

    @property
    def widths(self) -> tuple:
        return (self.input_dim, *self.hidden_widths, 1)


@dataclass(frozen=True)
class Polytope:
    """A bounded input domain: a box plus optional rows row @ x <= rhs."""

    lower: np.ndarray
    upper: np.ndarray
    general: tuple = ()

    def __post_init__(self):
        lo = _frozen(self.lower)
        hi = _frozen(self.upper)
        if lo.ndim != 1 or lo.shape != hi.shape or lo.size == 0:
            raise ValueError("lower/upper must be matching nonempty vectors")
        if not (np.all(np.isfinite(lo)) and np.all(np.isfinite(hi))):
            raise ValueError("box bounds must be finite (bounded domain)")
        if np.any(lo > hi):
            raise ValueError("lower bound exceeds upper bound")
        rows = []
        for row, rhs in self.general:
            r = _frozen(row)
            if r.shape != lo.shape:
                raise ValueError("general row length does not match the box")
            rhs = float(rhs)
            if not (np.all(np.isfinite(r)) and np.isfinite(rhs)):
                raise ValueError("general rows must be finite")
            rows.append((r, rhs))
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)
        object.__setattr__(self, "general", tuple(rows))
        # One LP feasibility solve certifies the region is nonempty.
        feas = solve_lp(
            LinearProgram(
                np.zeros(lo.size), lo, hi, [(r, LE, rhs) for r, rhs in rows]
            )
        )
        if feas.status != LpStatus.OPTIMAL:
            raise ValueError("polytope is empty")

    @property
    def dim(self) -> int:
        return self.lower.size

    @classmethod
    def unit_box(cls, dim: int) -> "Polytope":
        return cls(np.zeros(dim), np.ones(dim))


@dataclass(frozen=True)
class ActivationPattern:
    """Per-layer on/off bits plus the neurons sitting on their switching plane.

    ``bits[k][i]`` is 1 iff neuron i of hidden layer k has strictly positive
    pre-activation; ``boundary[k]`` holds the indices whose pre-activation
    magnitude is within the boundary epsilon.
    """

    bits: tuple
    boundary: tuple

    def __post_init__(self):
        bits = tuple(np.asarray(b, dtype=np.int8) for b in self.bits)
        for b in bits:
            b.setflags(write=False)
            if b.ndim != 1 or np.any((b != 0) & (b != 1)):
                raise ValueError("bits must be 0/1 vectors")
        bnd = tuple(frozenset(int(i) for i in s) for s in self.boundary)
        if len(bnd) != len(bits):
            raise ValueError("boundary needs one index set per layer")
        for k, s in enumerate(bnd):
            for i in s:
                if not 0 <= i < bits[k].size:
                    raise ValueError(f"boundary index {i} invalid for layer {k}")
        object.__setattr__(self, "bits", bits)
        object.__setattr__(self, "boundary", bnd)

    def key(self) -> bytes:
        """Hashable digest of the bit vectors (boundary sets excluded)."""
        return b"|".join(b.tobytes() for b in self.bits)

    @property
    def num_boundary(self) -> int:
        return sum(len(s) for s in self.boundary)


class ForwardResult(NamedTuple):
    value: float
    preacts: list


def forward(net: ReluNetwork, x) -> ForwardResult:
    """Evaluate the network, returning the value and per-layer pre-activations."""
    x = np.asarray(x, dtype=float)
    if x.shape != (net.input_dim,):
        raise ValueError(f"input has shape {x.shape}, expected ({net.input_dim},)")
    if not np.all(np.isfinite(x)):
        raise ValueError("input entries must be finite")
    preacts = []
    h = x
    for w, b in zip(net.weights, net.biases):
        z = w @ h + b
        preacts.append(z)
        h = np.maximum(z, 0.0)
    return ForwardResult(float(net.head @ h), preacts)


def activation_pattern(
    net: ReluNetwork, x, eps_boundary: float = DEFAULT_BOUNDARY_EPS
) -> ActivationPattern:
    """Which neurons fire at ``x``, and which sit within eps of their plane.

    A pre-activation of exactly zero counts as off (and as boundary); the
    function value is the same either way.
    """
    if eps_boundary < 0:
        raise ValueError("eps_boundary must be nonnegative")
    _, preacts = forward(net, x)
    bits = tuple((z > 0).astype(np.int8) for z in preacts)
    boundary = tuple(
        frozenset(np.flatnonzero(np.abs(z) <= eps_boundary).tolist()) for z in preacts
    )
    return ActivationPattern(bits, boundary)


def xavier_init(widths: Sequence[int], seed: int) -> ReluNetwork:
    """Random network with uniform Xavier weights and zero biases.

    ``widths`` lists every layer size including the input and the final
    output of 1, e.g. [2, 3, 1].  Each weight matrix between fan_in and
    fan_out units is drawn uniformly from +-sqrt(6 / (fan_in + fan_out));
    the head uses the same rule with fan_out 1.  Deterministic in ``seed``.
    """
    widths = [int(w) for w in widths]
    if len(widths) < 3:
        raise ValueError("widths needs at least input, one hidden and output")
    if any(w <= 0 for w in widths):
        raise ValueError("widths must be positive")
    if widths[-1] != 1:
        raise ValueError("the output width must be 1 (scalar objective)")
    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-2], widths[1:-1]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    limit = np.sqrt(6.0 / (widths[-2] + 1))
    head = rng.uniform(-limit, limit, size=widths[-2])
    return ReluNetwork(tuple(weights), tuple(biases), head)


def sample_input(p: Polytope, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the polytope.

    Boxes are sampled coordinatewise; with general rows we rejection-sample
    from the bounding box, which is exactly uniform on the feasible region.
    """
    if not p.general:
        return rng.uniform(p.lower, p.upper)
    for _ in range(_REJECTION_BUDGET):
        x = rng.uniform(p.lower, p.upper)
        if all(float(r @ x) <= rhs for r, rhs in p.general):
            return x
    raise SamplingBudgetError(
        f"no accepted sample in {_REJECTION_BUDGET} tries for polytope with "
        f"dim={p.dim}, {len(p.general)} general rows"
    )


def contains(p: Polytope, x, tol: float = 1e-9) -> bool:
    """True iff the box and all general rows hold within ``tol``."""
    x = np.asarray(x, dtype=float)
    if x.shape != p.lower.shape:
        raise ValueError("point dimension does not match the polytope")
    if np.any(x < p.lower - tol) or np.any(x > p.upper + tol):
        return False
    return all(float(r @ x) <= rhs + tol for r, rhs in p.general)


# ---------------------------------------------------------------------------
# Serialization.  JSON keeps full double precision: Python emits the shortest
# decimal string that round-trips each float exactly.


def network_to_dict(net: ReluNetwork) -> dict:
    return {
        "widths": list(net.widths),
        "layers": [
            {"W": w.tolist(), "b": b.tolist()}
            for w, b in zip(net.weights, net.biases)
        ],
        "a": net.head.tolist(),
    }


def network_from_dict(obj: dict) -> ReluNetwork:
    for key in ("widths", "layers", "a"):
        if key not in obj:
            raise NetworkFormatError(f"network object is missing field {key!r}")
    try:
        weights = tuple(np.asarray(layer["W"], dtype=float) for layer in obj["layers"])
        biases = tuple(np.asarray(layer["b"], dtype=float) for layer in obj["layers"])
        head = np.asarray(obj["a"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise NetworkFormatError(f"malformed network fields: {exc}") from exc
    try:
        net = ReluNetwork(weights, biases, head)
    except ValueError as exc:
        raise NetworkFormatError(f"inconsistent network: {exc}") from exc
    if list(net.widths) != [int(w) for w in obj["widths"]]:
        raise NetworkFormatError(
            f"declared widths {obj['widths']} do not match layer shapes "
            f"{list(net.widths)}"
        )
    return net


def save_network(net: ReluNetwork, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(network_to_dict(net), fh)
        fh.write("\n")


def load_network(path) -> ReluNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise NetworkFormatError(
                f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
    return network_from_dict(obj)


def polytope_to_dict(p: Polytope) -> dict:
    return {
        "lower": p.lower.tolist(),
        "upper": p.upper.tolist(),
        "general": [{"row": r.tolist(), "rhs": rhs} for r, rhs in p.general],
    }


def polytope_from_dict(obj: dict) -> Polytope:
    for key in ("lower", "upper"):
        if key not in obj:
            raise NetworkFormatError(f"polytope object is missing field {key!r}")
    try:
        general = tuple(
            (np.asarray(g["row"], dtype=float), float(g["rhs"]))
            for g in obj.get("general", [])
        )
        return Polytope(
            np.asarray(obj["lower"], dtype=float),
            np.asarray(obj["upper"], dtype=float),
            general,
        )
    except (KeyError, TypeError, ValueError) as exc:
        if isinstance(exc, NetworkFormatError):
            raise
        raise NetworkFormatError(f"malformed polytope: {exc}") from exc


def save_polytope(p: Polytope, path):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(polytope_to_dict(p), fh)
        fh.write("\n")


def load_polytope(path) -> Polytope:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise NetworkFormatError(
                f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}"
            ) from exc
    return polytope_from_dict(obj)
