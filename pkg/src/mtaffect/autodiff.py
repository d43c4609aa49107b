"""Reverse-mode automatic differentiation on float64 numpy arrays.

Exactly the primitives the encoder needs: elementwise arithmetic, matmul,
affine maps, activations, concatenation/stacking, inverted dropout, valid
1-d convolution with mask-aware max-over-time pooling, GRU recurrence, the
two task losses, Adam, and a finite-difference gradient checker.

Every op records a backward closure on the output tensor; Tensor.backward()
replays them in reverse topological order, accumulating gradients additively
into inputs that require them. A "tape" is therefore implicit in the graph
of live tensors; independent graphs can run concurrently.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np


class Tensor:
    """n-d float64 array node; grad is populated by backward()."""

    __slots__ = ("data", "grad", "requires_grad", "_prev", "_backward", "_op")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._prev: tuple[Tensor, ...] = ()
        self._backward = None
        self._op = "leaf"

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        """Backpropagate from a scalar output through the recorded graph."""
        if self.size != 1:
            raise ValueError(f"backward() needs a scalar, got shape {self.shape}")
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._prev:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None:
                node._backward()

    def __repr__(self):
        return f"Tensor(shape={self.shape}, op={self._op!r})"

    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents: tuple[Tensor, ...], op: str) -> Tensor:
    out = Tensor(data)
    out.requires_grad = any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._prev = parents
        out._op = op
    return out


def _accum(t: Tensor, g: np.ndarray) -> None:
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    # Sum a gradient back down to the pre-broadcast shape.
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, n in enumerate(shape):
        if n == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _make(a.data + b.data, (a, b), "add")

    def backward():
        if a.requires_grad:
            _accum(a, _unbroadcast(out.grad, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(out.grad, b.shape))

    out._backward = backward if out.requires_grad else None
    return out


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _make(a.data - b.data, (a, b), "sub")

    def backward():
        if a.requires_grad:
            _accum(a, _unbroadcast(out.grad, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(-out.grad, b.shape))

    out._backward = backward if out.requires_grad else None
    return out


def mul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    out = _make(a.data * b.data, (a, b), "mul")

    def backward():
        if a.requires_grad:
            _accum(a, _unbroadcast(out.grad * b.data, a.shape))
        if b.requires_grad:
            _accum(b, _unbroadcast(out.grad * a.data, b.shape))

    out._backward = backward if out.requires_grad else None
    return out


def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    out = _make(a.data @ b.data, (a, b), "matmul")

    def backward():
        if a.requires_grad:
            _accum(a, out.grad @ b.data.T)
        if b.requires_grad:
            _accum(b, a.data.T @ out.grad)

    out._backward = backward if out.requires_grad else None
    return out


def affine(x, weight, bias) -> Tensor:
    """x @ weight + bias for x [batch, fan_in], weight [fan_in, fan_out]."""
    return add(matmul(x, weight), bias)


def reshape(x, shape) -> Tensor:
    x = as_tensor(x)
    out = _make(x.data.reshape(shape), (x,), "reshape")

    def backward():
        _accum(x, out.grad.reshape(x.shape))

    out._backward = backward if out.requires_grad else None
    return out


def concat(xs, axis: int = 0) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    out = _make(np.concatenate([x.data for x in xs], axis=axis), tuple(xs), "concat")
    sizes = [x.shape[axis] for x in xs]

    def backward():
        offset = 0
        for x, n in zip(xs, sizes):
            if x.requires_grad:
                index = [slice(None)] * out.grad.ndim
                index[axis] = slice(offset, offset + n)
                _accum(x, out.grad[tuple(index)])
            offset += n

    out._backward = backward if out.requires_grad else None
    return out


def stack(xs, axis: int = 0) -> Tensor:
    xs = [as_tensor(x) for x in xs]
    out = _make(np.stack([x.data for x in xs], axis=axis), tuple(xs), "stack")

    def backward():
        slabs = np.moveaxis(out.grad, axis, 0)
        for x, g in zip(xs, slabs):
            if x.requires_grad:
                _accum(x, g)

    out._backward = backward if out.requires_grad else None
    return out


def timestep(x, t: int) -> Tensor:
    """Select x[:, t, :] from a [batch, time, dim] tensor."""
    x = as_tensor(x)
    if x.ndim != 3:
        raise ValueError(f"timestep: expected 3-d input, got {x.shape}")
    out = _make(x.data[:, t, :], (x,), "timestep")

    def backward():
        g = np.zeros_like(x.data)
        g[:, t, :] = out.grad
        _accum(x, g)

    out._backward = backward if out.requires_grad else None
    return out


def relu(x) -> Tensor:
    x = as_tensor(x)
    out = _make(np.maximum(x.data, 0.0), (x,), "relu")

    def backward():
        _accum(x, out.grad * (x.data > 0.0))

    out._backward = backward if out.requires_grad else None
    return out


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Split by sign so neither branch exponentiates a large positive value.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def sigmoid(x) -> Tensor:
    x = as_tensor(x)
    y = _sigmoid(x.data)
    out = _make(y, (x,), "sigmoid")

    def backward():
        _accum(x, out.grad * y * (1.0 - y))

    out._backward = backward if out.requires_grad else None
    return out


def tanh(x) -> Tensor:
    x = as_tensor(x)
    y = np.tanh(x.data)
    out = _make(y, (x,), "tanh")

    def backward():
        _accum(x, out.grad * (1.0 - y * y))

    out._backward = backward if out.requires_grad else None
    return out


def dropout(x, p: float, training: bool, rng: np.random.Generator) -> Tensor:
    """Inverted dropout: zero entries with probability p and scale survivors
    by 1/(1-p) while training; the exact identity in eval mode."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {p}")
    x = as_tensor(x)
    if not training or p == 0.0:
        return x
    keep = (rng.random(x.shape) >= p) / (1.0 - p)
    out = _make(x.data * keep, (x,), "dropout")

    def backward():
        _accum(x, out.grad * keep)

    out._backward = backward if out.requires_grad else None
    return out


def conv1d(x, weight, bias, width: int) -> Tensor:
    """Valid 1-d convolution over time.

    x is [batch, time, dim]; weight is [width * dim, n_filters] with the
    window flattened time-major; output is [batch, time - width + 1,
    n_filters].
    """
    x, weight, bias = as_tensor(x), as_tensor(weight), as_tensor(bias)
    if x.ndim != 3:
        raise ValueError(f"conv1d: expected 3-d input, got {x.shape}")
    n_batch, n_time, dim = x.shape
    if n_time < width:
        raise ValueError(f"conv1d: time {n_time} shorter than filter width {width}")
    if (
        weight.ndim != 2
        or weight.shape[0] != width * dim
        or bias.shape != (weight.shape[1],)
    ):
        raise ValueError(
            f"conv1d: weight {weight.shape} / bias {bias.shape} do not match "
            f"width {width} and dim {dim}"
        )
    positions = n_time - width + 1
    windows = np.stack(
        [x.data[:, k : k + positions, :] for k in range(width)], axis=2
    ).reshape(n_batch * positions, width * dim)
    data = (windows @ weight.data + bias.data).reshape(n_batch, positions, -1)
    out = _make(data, (x, weight, bias), "conv1d")

    def backward():
        g = out.grad.reshape(n_batch * positions, -1)
        if weight.requires_grad:
            _accum(weight, windows.T @ g)
        if bias.requires_grad:
            _accum(bias, g.sum(axis=0))
        if x.requires_grad:
            gw = (g @ weight.data.T).reshape(n_batch, positions, width, dim)
            gx = np.zeros_like(x.data)
            for k in range(width):
                gx[:, k : k + positions, :] += gw[:, :, k, :]
            _accum(x, gx)

    out._backward = backward if out.requires_grad else None
    return out


def masked_max_over_time(x, valid: np.ndarray) -> Tensor:
    """Per-filter max over the time positions flagged valid.

    x is [batch, positions, n_filters]; valid is a boolean [batch, positions]
    with at least one valid position per row. Ties route the gradient to the
    lowest time index.
    """
    x = as_tensor(x)
    if x.ndim != 3 or valid.shape != x.shape[:2]:
        raise ValueError(
            f"masked_max_over_time: input {x.shape} vs valid {valid.shape}"
        )
    if not valid.any(axis=1).all():
        raise ValueError("masked_max_over_time: some row has no valid position")
    guarded = np.where(valid[:, :, None], x.data, -np.inf)
    argmax = guarded.argmax(axis=1)  # [batch, n_filters], first max wins
    data = np.take_along_axis(x.data, argmax[:, None, :], axis=1)[:, 0, :]
    out = _make(data, (x,), "masked_max")

    def backward():
        g = np.zeros_like(x.data)
        rows = np.arange(x.shape[0])[:, None]
        cols = np.arange(x.shape[2])[None, :]
        np.add.at(g, (rows, argmax, cols), out.grad)
        _accum(x, g)

    out._backward = backward if out.requires_grad else None
    return out


@dataclass
class ConvFilter:
    """One width of the convolution bank."""

    width: int
    weight: Tensor  # [width * in_dim, n_filters]
    bias: Tensor  # [n_filters]


def init_conv_bank(
    widths, in_dim: int, filters_per_width: int, rng: np.random.Generator
) -> list[ConvFilter]:
    bank = []
    for w in widths:
        weight = Tensor(
            glorot_uniform(w * in_dim, filters_per_width, rng), requires_grad=True
        )
        bias = Tensor(np.zeros(filters_per_width), requires_grad=True)
        bank.append(ConvFilter(width=w, weight=weight, bias=bias))
    return bank


def valid_conv_windows(mask: np.ndarray, width: int) -> np.ndarray:
    """Pooling positions for each row of a boolean [batch, time] mask.

    Rows at least as long as the filter pool over windows lying entirely
    within the tokens; shorter rows (including empty ones) pool over the
    windows that start inside the tokens, or window 0 alone when empty, so
    pooled outputs do not depend on how far the row was zero-padded.
    """
    lengths = mask.astype(bool).sum(axis=1).astype(int)
    positions = mask.shape[1] - width + 1
    if positions < 1:
        raise ValueError(f"filter width {width} exceeds padded length {mask.shape[1]}")
    t = np.arange(positions)[None, :]
    full = t + width <= lengths[:, None]
    short = t < np.maximum(lengths, 1)[:, None]
    return np.where((lengths >= width)[:, None], full, short)


def conv1d_maxpool(x, mask: np.ndarray, bank: list[ConvFilter]) -> Tensor:
    """Convolve with every filter width, ReLU, pool over mask-valid windows,
    and concatenate the pooled vectors: [batch, sum of filters per width]."""
    pooled = []
    for f in bank:
        valid = valid_conv_windows(mask, f.width)
        responses = relu(conv1d(x, f.weight, f.bias, f.width))
        pooled.append(masked_max_over_time(responses, valid))
    return concat(pooled, axis=1)


@dataclass
class GruParams:
    """Update gate (z), reset gate (r), and candidate (h) parameter triples;
    w_* map the input, u_* map the previous hidden state."""

    w_z: Tensor
    u_z: Tensor
    b_z: Tensor
    w_r: Tensor
    u_r: Tensor
    b_r: Tensor
    w_h: Tensor
    u_h: Tensor
    b_h: Tensor

    @classmethod
    def init(cls, in_dim: int, hidden: int, rng: np.random.Generator) -> "GruParams":
        def w():
            return Tensor(glorot_uniform(in_dim, hidden, rng), requires_grad=True)

        def u():
            return Tensor(orthogonal(hidden, rng), requires_grad=True)

        def b():
            return Tensor(np.zeros(hidden), requires_grad=True)

        return cls(w(), u(), b(), w(), u(), b(), w(), u(), b())

    @property
    def hidden(self) -> int:
        return self.u_z.shape[0]

    def named(self, prefix: str) -> dict[str, Tensor]:
        return {
            f"{prefix}.{name}": getattr(self, name)
            for name in ("w_z", "u_z", "b_z", "w_r", "u_r", "b_r", "w_h", "u_h", "b_h")
        }


def gru_cell(x, h_prev, p: GruParams) -> Tensor:
    """One GRU step on a [batch, in_dim] slice.

    z = sigmoid(x W_z + h U_z + b_z); r likewise; candidate
    h~ = tanh(x W_h + (r * h) U_h + b_h); new state (1 - z) * h + z * h~.
    """
    z = sigmoid(add(add(matmul(x, p.w_z), matmul(h_prev, p.u_z)), p.b_z))
    r = sigmoid(add(add(matmul(x, p.w_r), matmul(h_prev, p.u_r)), p.b_r))
    h_cand = tanh(add(add(matmul(x, p.w_h), matmul(mul(r, h_prev), p.u_h)), p.b_h))
    return add(mul(sub(1.0, z), h_prev), mul(z, h_cand))


def _gru_direction(x, mask, p, order) -> list:
    n_batch = x.shape[0]
    h = Tensor(np.zeros((n_batch, p.hidden)))
    states = {}
    for t in order:
        h_new = gru_cell(timestep(x, t), h, p)
        m = Tensor(mask[:, t : t + 1].astype(np.float64))
        keep = Tensor(1.0 - m.data)
        h = add(mul(m, h_new), mul(keep, h))
        states[t] = h
    return [states[t] for t in range(x.shape[1])]


def bigru(x, mask: np.ndarray, p_fwd: GruParams, p_bwd: GruParams) -> Tensor:
    """Bidirectional GRU over a [batch, time, dim] tensor.

    Both directions start from zero states and carry the hidden state
    unchanged across masked (padding) positions. Output is the per-timestep
    concatenation [forward ; backward], shape [batch, time, 2 * hidden].
    """
    x = as_tensor(x)
    if x.ndim != 3 or mask.shape != x.shape[:2]:
        raise ValueError(f"bigru: input {x.shape} vs mask {mask.shape}")
    n_time = x.shape[1]
    fwd = _gru_direction(x, mask, p_fwd, range(n_time))
    bwd = _gru_direction(x, mask, p_bwd, range(n_time - 1, -1, -1))
    steps = [concat([fwd[t], bwd[t]], axis=1) for t in range(n_time)]
    return stack(steps, axis=1)


def softmax(logits) -> Tensor:
    """Row-wise softmax with max-shift stabilization."""
    logits = as_tensor(logits)
    z = logits.data - logits.data.max(axis=-1, keepdims=True)
    ez = np.exp(z)
    y = ez / ez.sum(axis=-1, keepdims=True)
    out = _make(y, (logits,), "softmax")

    def backward():
        dot = (out.grad * y).sum(axis=-1, keepdims=True)
        _accum(logits, y * (out.grad - dot))

    out._backward = backward if out.requires_grad else None
    return out


def softmax_cross_entropy(logits, gold: np.ndarray) -> Tensor:
    """Mean -log softmax(logits)[gold] over the batch, with log-sum-exp
    stabilization; gold holds class indices."""
    logits = as_tensor(logits)
    gold = np.asarray(gold, dtype=int)
    if logits.ndim != 2 or gold.shape != (logits.shape[0],):
        raise ValueError(
            f"softmax_cross_entropy: logits {logits.shape} vs gold {gold.shape}"
        )
    n = logits.shape[0]
    zmax = logits.data.max(axis=1, keepdims=True)
    lse = zmax + np.log(np.exp(logits.data - zmax).sum(axis=1, keepdims=True))
    logp = logits.data - lse
    out = _make(-logp[np.arange(n), gold].mean(), (logits,), "cross_entropy")

    def backward():
        g = np.exp(logp)
        g[np.arange(n), gold] -= 1.0
        _accum(logits, g * (out.grad / n))

    out._backward = backward if out.requires_grad else None
    return out


def mse(pred, gold) -> Tensor:
    """Mean squared error over the batch."""
    pred = as_tensor(pred)
    gold = np.asarray(gold, dtype=np.float64)
    if pred.shape != gold.shape:
        raise ValueError(f"mse: pred {pred.shape} vs gold {gold.shape}")
    diff = pred.data - gold
    out = _make(np.mean(diff * diff), (pred,), "mse")

    def backward():
        _accum(pred, out.grad * 2.0 * diff / diff.size)

    out._backward = backward if out.requires_grad else None
    return out


def glorot_uniform(fan_in: int, fan_out: int, rng: np.random.Generator) -> np.ndarray:
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def orthogonal(n: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    return q * np.sign(np.diag(r))


@dataclass
class AdamState:
    """Adam moments keyed like the parameter dict, plus hyperparameters."""

    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)

    @classmethod
    def init(cls, params: dict[str, Tensor], lr: float = 1e-3, **kw) -> "AdamState":
        if lr <= 0:
            raise ValueError(f"lr must be positive, got {lr}")
        state = cls(lr=lr, **kw)
        for name, p in params.items():
            state.m[name] = np.zeros_like(p.data)
            state.v[name] = np.zeros_like(p.data)
        return state


def adam_step(
    params: dict[str, Tensor], grads: dict[str, np.ndarray], state: AdamState
) -> None:
    """Standard bias-corrected Adam update, applied in place."""
    state.t += 1
    correction1 = 1.0 - state.beta1**state.t
    correction2 = 1.0 - state.beta2**state.t
    for name, p in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if not np.all(np.isfinite(g)):
            raise ValueError(f"non-finite gradient for parameter {name!r}")
        m = state.m[name]
        v = state.v[name]
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        p.data -= state.lr * m_hat / (np.sqrt(v_hat) + state.eps)


@dataclass
class GradCheckReport:
    max_rel_err: float
    n_checked: int
    n_skipped: int
    per_param: dict[str, float]


def gradient_check(
    loss_fn,
    params: dict[str, Tensor],
    eps: float = 1e-4,
    max_coords_per_param: int = 64,
    rng: np.random.Generator | None = None,
) -> GradCheckReport:
    """Compare tape gradients against central finite differences.

    loss_fn must rebuild the graph deterministically (dropout off) and
    return a scalar Tensor. Relative error uses max(|fd|, |tape|, 1e-6) as
    denominator. Coordinates whose central differences disagree between step
    eps and eps/2 sit next to a relu/max kink and are skipped, not scored.
    """
    rng = rng or np.random.default_rng(0)
    for p in params.values():
        p.zero_grad()
    loss = loss_fn()
    loss.backward()
    tape = {
        name: (p.grad.copy() if p.grad is not None else np.zeros_like(p.data))
        for name, p in params.items()
    }

    def eval_at(p, idx, value):
        saved = p.data.flat[idx]
        p.data.flat[idx] = value
        out = loss_fn().item()
        p.data.flat[idx] = saved
        return out

    max_rel = 0.0
    checked = 0
    skipped = 0
    per_param = {}
    for name, p in params.items():
        if p.size <= max_coords_per_param:
            coords = np.arange(p.size)
        else:
            coords = rng.choice(p.size, size=max_coords_per_param, replace=False)
        worst = 0.0
        for idx in coords:
            theta = p.data.flat[idx]
            fd = (eval_at(p, idx, theta + eps) - eval_at(p, idx, theta - eps)) / (
                2 * eps
            )
            half = eps / 2
            fd_half = (
                eval_at(p, idx, theta + half) - eval_at(p, idx, theta - half)
            ) / (2 * half)
            if abs(fd - fd_half) > 1e-3 * max(1.0, abs(fd_half)):
                skipped += 1
                continue
            g = tape[name].flat[idx]
            rel = abs(fd - g) / max(abs(fd), abs(g), 1e-6)
            worst = max(worst, rel)
            checked += 1
        per_param[name] = worst
        max_rel = max(max_rel, worst)
    return GradCheckReport(
        max_rel_err=max_rel, n_checked=checked, n_skipped=skipped, per_param=per_param
    )
