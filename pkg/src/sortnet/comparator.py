"""Weight-shared neural comparator.

Only the canonical half of the parameters is stored. Every hidden unit ``i``
has a dual ``i'`` whose input weights are the x/y-swapped copy of unit
``i``'s and whose output weights are the succ/prec-swapped copy, so the dual
activation is obtained by running unit ``i`` on the swapped pair. This makes

    forward(x, y).n_succ == forward(y, x).n_prec

hold bit for bit, not just up to rounding.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, fields, replace
from typing import Iterator

import numpy as np

MODEL_MAGIC = "sortnet-model v1"
ACTIVATIONS = ("logistic", "tanh")
PARAM_BLOCKS = ("v_x", "v_y", "b_h", "w_succ", "w_prec", "b_out")


class NumericFault(FloatingPointError):
    """Raised when training produces a non-finite loss or gradient."""


class Preference(enum.Enum):
    SUCC = "succ"
    PREC = "prec"
    TIE = "tie"

    def flipped(self) -> "Preference":
        if self is Preference.SUCC:
            return Preference.PREC
        if self is Preference.PREC:
            return Preference.SUCC
        return self


def _logistic(a):
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-a))


def _activate(a, activation):
    if activation == "logistic":
        return _logistic(a)
    return np.tanh(a)


def _activation_slope(s, activation):
    # derivative expressed through the activation value s = act(a)
    if activation == "logistic":
        return s * (1.0 - s)
    return 1.0 - s * s


@dataclass(frozen=True, eq=False)
class WeightSharedComparator:
    """Canonical parameters of the comparator.

    ``v_x`` and ``v_y`` are ``(H, d)``; ``b_h``, ``w_succ`` and ``w_prec`` are
    length ``H``; ``b_out`` is the output bias shared by both outputs.
    ``linear_output`` drops the output activation, which is the variant
    produced by :func:`symmetrize_network`.
    """

    v_x: np.ndarray
    v_y: np.ndarray
    b_h: np.ndarray
    w_succ: np.ndarray
    w_prec: np.ndarray
    b_out: float
    activation: str = "logistic"
    linear_output: bool = False

    def __post_init__(self):
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"unknown activation {self.activation!r}")
        for name in ("v_x", "v_y", "b_h", "w_succ", "w_prec"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=np.float64))
        object.__setattr__(self, "b_out", float(self.b_out))
        H, d = self.v_x.shape
        if self.v_y.shape != (H, d):
            raise ValueError(f"v_y has shape {self.v_y.shape}, expected {(H, d)}")
        for name in ("b_h", "w_succ", "w_prec"):
            if getattr(self, name).shape != (H,):
                raise ValueError(f"{name} has shape {getattr(self, name).shape}, expected {(H,)}")
        if H < 1 or d < 1:
            raise ValueError("comparator needs d >= 1 and H >= 1")

    @property
    def d(self) -> int:
        return self.v_x.shape[1]

    @property
    def H(self) -> int:
        return self.v_x.shape[0]

    def copy(self) -> "WeightSharedComparator":
        return replace(self)

    def parameters(self) -> dict:
        return {name: getattr(self, name) for name in PARAM_BLOCKS}

    def __eq__(self, other):
        if not isinstance(other, WeightSharedComparator):
            return NotImplemented
        return (
            self.activation == other.activation
            and self.linear_output == other.linear_output
            and all(
                np.array_equal(getattr(self, n), getattr(other, n)) for n in PARAM_BLOCKS
            )
        )

    __hash__ = None


@dataclass(frozen=True)
class ForwardTrace:
    """Activations of one forward pass.

    ``hidden`` interleaves canonical and dual units: slot ``2i`` holds
    ``h_i`` and slot ``2i+1`` holds ``h_i'``. ``z_succ``/``z_prec`` are the
    output pre-activations.
    """

    hidden: np.ndarray
    n_succ: float
    n_prec: float
    z_succ: float
    z_prec: float


@dataclass(frozen=True)
class ParameterGradient:
    v_x: np.ndarray
    v_y: np.ndarray
    b_h: np.ndarray
    w_succ: np.ndarray
    w_prec: np.ndarray
    b_out: float

    def blocks(self) -> Iterator[tuple[str, np.ndarray]]:
        for f in fields(self):
            yield f.name, np.asarray(getattr(self, f.name), dtype=np.float64)


def init_random(d: int, H: int, activation: str = "logistic", seed=None) -> WeightSharedComparator:
    """Uniform init in [-r, r] with r = 1/sqrt(2d)."""
    if int(d) != d or d < 1:
        raise ValueError(f"d must be a positive integer, got {d}")
    if int(H) != H or H < 1:
        raise ValueError(f"H must be a positive integer, got {H}")
    d, H = int(d), int(H)
    rng = np.random.default_rng(seed)
    r = 1.0 / np.sqrt(2.0 * d)
    return WeightSharedComparator(
        v_x=rng.uniform(-r, r, size=(H, d)),
        v_y=rng.uniform(-r, r, size=(H, d)),
        b_h=rng.uniform(-r, r, size=H),
        w_succ=rng.uniform(-r, r, size=H),
        w_prec=rng.uniform(-r, r, size=H),
        b_out=float(rng.uniform(-r, r)),
        activation=activation,
    )


def zeros(d: int, H: int, activation: str = "logistic") -> WeightSharedComparator:
    """All-zero comparator; it ties on every pair."""
    return WeightSharedComparator(
        v_x=np.zeros((H, d)), v_y=np.zeros((H, d)), b_h=np.zeros(H),
        w_succ=np.zeros(H), w_prec=np.zeros(H), b_out=0.0, activation=activation,
    )


def project(weights: np.ndarray, X: np.ndarray) -> np.ndarray:
    """Sum ``weights[i, k] * X[n, k]`` over k in ascending order.

    Returns shape ``(n, H)``. The loop fixes the summation order so the same
    operands always give the same bits, which is what the exact symmetry of
    the comparator rests on (BLAS kernels make no such promise).
    """
    X = np.asarray(X, dtype=np.float64)
    acc = X[:, 0:1] * weights[:, 0]
    for k in range(1, X.shape[1]):
        acc = acc + X[:, k:k + 1] * weights[:, k]
    return acc


def _hidden_from_projections(net, px_a, py_b, px_b, py_a):
    # canonical unit on (a, b), and the dual as the canonical unit on (b, a)
    h = _activate((px_a + py_b) + net.b_h, net.activation)
    g = _activate((px_b + py_a) + net.b_h, net.activation)
    return h, g


def _output_sums(net, h, g):
    # pair terms i and i' are added first (commutative, hence exact under
    # the swap), then folded in ascending i.
    z_s = h[:, 0] * net.w_succ[0] + g[:, 0] * net.w_prec[0]
    z_p = h[:, 0] * net.w_prec[0] + g[:, 0] * net.w_succ[0]
    for i in range(1, net.H):
        z_s = z_s + (h[:, i] * net.w_succ[i] + g[:, i] * net.w_prec[i])
        z_p = z_p + (h[:, i] * net.w_prec[i] + g[:, i] * net.w_succ[i])
    return z_s + net.b_out, z_p + net.b_out


def _outputs(net, z_s, z_p):
    if net.linear_output:
        return z_s, z_p
    return _activate(z_s, net.activation), _activate(z_p, net.activation)


def _check_pair(net, X, Y):
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    Y = np.atleast_2d(np.asarray(Y, dtype=np.float64))
    if X.shape != Y.shape or X.shape[1] != net.d:
        raise ValueError(
            f"dimension mismatch: comparator has d={net.d}, got {X.shape} and {Y.shape}"
        )
    return X, Y


def forward_batch(net: WeightSharedComparator, X, Y):
    """Vectorised forward pass over row-aligned pairs ``(X[n], Y[n])``.

    Returns ``(hidden_canonical, hidden_dual, n_succ, n_prec, z_succ, z_prec)``.
    """
    X, Y = _check_pair(net, X, Y)
    px, py = project(net.v_x, X), project(net.v_y, Y)
    qx, qy = project(net.v_x, Y), project(net.v_y, X)
    h, g = _hidden_from_projections(net, px, py, qx, qy)
    z_s, z_p = _output_sums(net, h, g)
    n_s, n_p = _outputs(net, z_s, z_p)
    return h, g, n_s, n_p, z_s, z_p


def forward(net: WeightSharedComparator, x, y) -> ForwardTrace:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 1 or y.ndim != 1:
        raise ValueError("forward expects two feature vectors")
    h, g, n_s, n_p, z_s, z_p = forward_batch(net, x[None, :], y[None, :])
    hidden = np.empty(2 * net.H)
    hidden[0::2] = h[0]
    hidden[1::2] = g[0]
    return ForwardTrace(hidden, float(n_s[0]), float(n_p[0]), float(z_s[0]), float(z_p[0]))


def _verdict(n_s, n_p) -> Preference:
    if n_s > n_p:
        return Preference.SUCC
    if n_p > n_s:
        return Preference.PREC
    return Preference.TIE


def compare(net: WeightSharedComparator, x, y) -> Preference:
    trace = forward(net, x, y)
    return _verdict(trace.n_succ, trace.n_prec)


def compare_batch(net: WeightSharedComparator, X, Y) -> np.ndarray:
    """Sign of ``N_succ - N_prec`` per row: +1 succ, -1 prec, 0 tie."""
    _, _, n_s, n_p, _, _ = forward_batch(net, X, Y)
    return np.sign(n_s - n_p).astype(int)


class BoundComparator:
    """Comparator bound to a fixed set of objects, compared by index.

    Projections of every object are computed once; each comparison then
    costs O(H) and yields exactly the bits :func:`forward` would.
    """

    def __init__(self, net: WeightSharedComparator, X):
        X = np.asarray(X, dtype=np.float64)
        if X.ndim != 2 or X.shape[1] != net.d:
            raise ValueError(f"dimension mismatch: comparator has d={net.d}, got {X.shape}")
        self.net = net
        self._px = project(net.v_x, X)
        self._py = project(net.v_y, X)

    def __call__(self, i: int, j: int) -> Preference:
        net = self.net
        h, g = _hidden_from_projections(
            net, self._px[i:i + 1], self._py[j:j + 1], self._px[j:j + 1], self._py[i:i + 1]
        )
        z_s, z_p = _output_sums(net, h, g)
        n_s, n_p = _outputs(net, z_s, z_p)
        return _verdict(n_s[0], n_p[0])


LEGAL_TARGETS = ((1.0, 0.0), (0.0, 1.0))


def _check_target(target):
    t = tuple(float(v) for v in np.asarray(target, dtype=np.float64).ravel())
    if t not in LEGAL_TARGETS:
        raise ValueError(f"target must be [1, 0] or [0, 1], got {list(t)}")
    return t


def loss(trace: ForwardTrace, target) -> float:
    t1, t2 = _check_target(target)
    return (t1 - trace.n_succ) ** 2 + (t2 - trace.n_prec) ** 2


def _backward(net, X, Y, T, h, g, n_s, n_p):
    """Gradient of the summed squared error over a batch of pairs."""
    r_s = -2.0 * (T[:, 0] - n_s)
    r_p = -2.0 * (T[:, 1] - n_p)
    if net.linear_output:
        delta_s, delta_p = r_s, r_p
    else:
        delta_s = r_s * _activation_slope(n_s, net.activation)
        delta_p = r_p * _activation_slope(n_p, net.activation)
    # each stored output weight serves two logical connections
    w_succ = delta_s @ h + delta_p @ g
    w_prec = delta_p @ h + delta_s @ g
    b_out = float(delta_s.sum() + delta_p.sum())
    slope_h = _activation_slope(h, net.activation)
    slope_g = _activation_slope(g, net.activation)
    alpha = (np.outer(delta_s, net.w_succ) + np.outer(delta_p, net.w_prec)) * slope_h
    beta = (np.outer(delta_s, net.w_prec) + np.outer(delta_p, net.w_succ)) * slope_g
    # the dual unit multiplies y by v_x and x by v_y
    v_x = alpha.T @ X + beta.T @ Y
    v_y = alpha.T @ Y + beta.T @ X
    b_h = alpha.sum(axis=0) + beta.sum(axis=0)
    return ParameterGradient(v_x, v_y, b_h, w_succ, w_prec, b_out)


def gradient(net: WeightSharedComparator, x, y, target) -> ParameterGradient:
    """Exact gradient of the squared error on one pair w.r.t. the stored parameters."""
    t = np.array([_check_target(target)])
    X, Y = _check_pair(net, x, y)
    if X.shape[0] != 1:
        raise ValueError("gradient expects a single pair; use batch_gradient")
    h, g, n_s, n_p, _, _ = forward_batch(net, X, Y)
    return _backward(net, X, Y, t, h, g, n_s, n_p)


def batch_gradient(net: WeightSharedComparator, X, Y, T) -> ParameterGradient:
    """Gradient of the error summed over the pairs ``(X[n], Y[n])`` with targets ``T[n]``."""
    X, Y = _check_pair(net, X, Y)
    T = np.asarray(T, dtype=np.float64).reshape(-1, 2)
    if T.shape[0] != X.shape[0]:
        raise ValueError("one target per pair required")
    for row in T:
        _check_target(row)
    h, g, n_s, n_p, _, _ = forward_batch(net, X, Y)
    return _backward(net, X, Y, T, h, g, n_s, n_p)


def apply_update(net: WeightSharedComparator, grad: ParameterGradient, learning_rate: float):
    """One gradient-descent step; returns a new comparator."""
    if not learning_rate > 0:
        raise ValueError(f"learning_rate must be positive, got {learning_rate}")
    updated = {}
    for name, g in grad.blocks():
        if not np.all(np.isfinite(g)):
            raise NumericFault(f"non-finite gradient in block {name}")
        updated[name] = getattr(net, name) - learning_rate * g
    updated["b_out"] = float(updated["b_out"])
    return replace(net, **updated)


# -- doubling construction -------------------------------------------------


@dataclass(frozen=True)
class PlainThreeLayerNet:
    """Unconstrained net R^{2d} -> R^2 with linear outputs.

    ``V`` is ``(m, 2d)`` with x-features in the first d columns, ``W`` is
    ``(2, m)`` with row 0 feeding the succ output.
    """

    V: np.ndarray
    b: np.ndarray
    W: np.ndarray
    c: np.ndarray
    activation: str = "logistic"

    def __post_init__(self):
        for name in ("V", "b", "W", "c"):
            object.__setattr__(self, name, np.array(getattr(self, name), dtype=np.float64))
        m, two_d = self.V.shape
        if two_d % 2:
            raise ValueError("input layer must have an even width 2d")
        if self.b.shape != (m,) or self.W.shape != (2, m) or self.c.shape != (2,):
            raise ValueError("layer shapes of the plain net are inconsistent")

    @property
    def d(self) -> int:
        return self.V.shape[1] // 2

    def __call__(self, x, y) -> np.ndarray:
        z = np.concatenate([np.asarray(x, dtype=np.float64), np.asarray(y, dtype=np.float64)])
        hidden = _activate(self.V @ z + self.b, self.activation)
        return self.W @ hidden + self.c


def random_plain_net(d: int, m: int, activation: str = "logistic", seed=None) -> PlainThreeLayerNet:
    rng = np.random.default_rng(seed)
    return PlainThreeLayerNet(
        V=rng.normal(size=(m, 2 * d)),
        b=rng.normal(size=m),
        W=rng.normal(size=(2, m)),
        c=rng.normal(size=2),
        activation=activation,
    )


def symmetrize_network(plain: PlainThreeLayerNet) -> WeightSharedComparator:
    """Double ``plain`` into a weight-shared net with linear outputs.

    Canonical units copy ``plain``; dual units follow the sharing rules. The
    shared output bias is ``c_succ + c_prec`` so that the pre-activation
    outputs are ``r(x, y) + swap(r(y, x))``; when ``plain`` already has equal
    output biases this is twice each of them.
    """
    d = plain.d
    return WeightSharedComparator(
        v_x=plain.V[:, :d],
        v_y=plain.V[:, d:],
        b_h=plain.b,
        w_succ=plain.W[0],
        w_prec=plain.W[1],
        b_out=float(plain.c[0] + plain.c[1]),
        activation=plain.activation,
        linear_output=True,
    )


def to_plain(net: WeightSharedComparator) -> PlainThreeLayerNet:
    """Materialise the dual units of a linear-output comparator as a plain net."""
    if not net.linear_output:
        raise ValueError("only linear-output comparators have a plain equivalent")
    H = net.H
    V = np.empty((2 * H, 2 * net.d))
    V[0::2] = np.hstack([net.v_x, net.v_y])
    V[1::2] = np.hstack([net.v_y, net.v_x])
    W = np.empty((2, 2 * H))
    W[0, 0::2], W[0, 1::2] = net.w_succ, net.w_prec
    W[1, 0::2], W[1, 1::2] = net.w_prec, net.w_succ
    half = net.b_out / 2.0
    return PlainThreeLayerNet(V, np.repeat(net.b_h, 2), W, np.array([half, half]), net.activation)


# -- model file ------------------------------------------------------------


def dumps(net: WeightSharedComparator) -> str:
    head = f"d={net.d} H={net.H} activation={net.activation}"
    if net.linear_output:
        head += " output=linear"
    lines = [MODEL_MAGIC, head]
    for name in PARAM_BLOCKS:
        values = np.atleast_1d(getattr(net, name)).ravel()
        lines.append(name + " " + " ".join(float(v).hex() for v in values))
    return "\n".join(lines) + "\n"


def loads(text: str) -> WeightSharedComparator:
    lines = text.splitlines()
    if not lines or lines[0].strip() != MODEL_MAGIC:
        raise ValueError(f"not a model file: first line must be {MODEL_MAGIC!r}")
    if len(lines) < 2 + len(PARAM_BLOCKS):
        raise ValueError("model file is truncated")
    header = dict(tok.split("=", 1) for tok in lines[1].split())
    try:
        d, H = int(header["d"]), int(header["H"])
        activation = header["activation"]
    except (KeyError, ValueError) as exc:
        raise ValueError(f"bad model header: {lines[1]!r}") from exc
    shapes = {"v_x": (H, d), "v_y": (H, d), "b_h": (H,), "w_succ": (H,), "w_prec": (H,), "b_out": ()}
    blocks = {}
    for name, line in zip(PARAM_BLOCKS, lines[2:]):
        tag, *values = line.split()
        if tag != name:
            raise ValueError(f"expected parameter block {name!r}, found {tag!r}")
        arr = np.array([float.fromhex(v) for v in values])
        if arr.size != int(np.prod(shapes[name], dtype=int)):
            raise ValueError(f"block {name} has {arr.size} values, expected shape {shapes[name]}")
        blocks[name] = arr.reshape(shapes[name])
    blocks["b_out"] = float(blocks["b_out"])
    return WeightSharedComparator(
        activation=activation, linear_output=header.get("output") == "linear", **blocks
    )


def save(net: WeightSharedComparator, path) -> None:
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(dumps(net))


def load(path) -> WeightSharedComparator:
    with open(path, encoding="ascii") as fh:
        return loads(fh.read())
