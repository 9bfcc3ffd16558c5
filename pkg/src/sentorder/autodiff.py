"""Minimal reverse-mode autodiff over dense float64 arrays.

Every forward operation appends a backward closure to a module-level tape.
``backward()`` walks the tape in reverse, accumulating gradients additively
into ``Tensor.grad``; parameter gradients persist until explicitly zeroed,
so batch accumulation is just repeated forward/backward calls.

All arrays are rank <= 2 float64.  Forward evaluation is deterministic:
the same inputs always produce bit-identical outputs.
"""

from __future__ import annotations

import json
from contextlib import contextmanager

import numpy as np

from .kernels import lstm_seq_backward, lstm_seq_forward


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class NumericError(ValueError):
    """Non-finite values where finite ones are required."""


class CheckpointError(ValueError):
    """Checkpoint file does not match the expected names/shapes."""


# --------------------------------------------------------------------------
# tape
# --------------------------------------------------------------------------

_TAPE: list = []
_RECORDING = True


@contextmanager
def no_grad():
    """Disable tape recording inside the block (inference / finite differences)."""
    global _RECORDING
    prev = _RECORDING
    _RECORDING = False
    try:
        yield
    finally:
        _RECORDING = prev


def tape_size() -> int:
    return len(_TAPE)


def clear_tape() -> None:
    _TAPE.clear()


class Tensor:
    """Dense rank-<=2 float64 array with an accumulated-gradient slot."""

    __slots__ = ("data", "grad", "requires_grad")

    def __init__(self, data, requires_grad: bool = False):
        arr = np.asarray(data, dtype=np.float64)
        if arr.ndim > 2:
            raise ShapeError(f"rank {arr.ndim} > 2 not supported (shape {arr.shape})")
        self.data = arr
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad

    @property
    def shape(self):
        return self.data.shape

    def item(self) -> float:
        return float(self.data.reshape(-1)[0])

    def zero_grad(self) -> None:
        self.grad = None

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    # light operator sugar used throughout the model code
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)


class Parameter(Tensor):
    """Trainable tensor with a name and Adadelta accumulators."""

    __slots__ = ("name", "sq_grad_avg", "sq_update_avg")

    def __init__(self, data, name: str):
        super().__init__(data, requires_grad=True)
        self.name = name
        self.sq_grad_avg = np.zeros_like(self.data)
        self.sq_update_avg = np.zeros_like(self.data)

    def __repr__(self):
        return f"Parameter({self.name!r}, shape={self.data.shape})"


def _accum(t: Tensor, g: np.ndarray) -> None:
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = np.zeros_like(t.data)
    t.grad += g


def _record(fn) -> None:
    _TAPE.append(fn)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce gradient ``g`` back to ``shape`` after numpy broadcasting."""
    if g.shape == shape:
        return g
    if len(shape) < g.ndim:
        g = g.sum(axis=tuple(range(g.ndim - len(shape))))
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _wrap(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# --------------------------------------------------------------------------
# primitive operations
# --------------------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data + b.data, a.requires_grad or b.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is None:
                return
            _accum(a, _unbroadcast(out.grad, a.data.shape))
            _accum(b, _unbroadcast(out.grad, b.data.shape))
        _record(bwd)
    return out


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data - b.data, a.requires_grad or b.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is None:
                return
            _accum(a, _unbroadcast(out.grad, a.data.shape))
            _accum(b, _unbroadcast(-out.grad, b.data.shape))
        _record(bwd)
    return out


def mul(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    out = Tensor(a.data * b.data, a.requires_grad or b.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is None:
                return
            _accum(a, _unbroadcast(out.grad * b.data, a.data.shape))
            _accum(b, _unbroadcast(out.grad * a.data, b.data.shape))
        _record(bwd)
    return out


def scale(a: Tensor, c: float) -> Tensor:
    out = Tensor(a.data * c, a.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is not None:
                _accum(a, out.grad * c)
        _record(bwd)
    return out


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.data.shape[1] != b.data.shape[0]:
        raise ShapeError(f"matmul: {a.data.shape} @ {b.data.shape}")
    out = Tensor(a.data @ b.data, a.requires_grad or b.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is None:
                return
            _accum(a, out.grad @ b.data.T)
            _accum(b, a.data.T @ out.grad)
        _record(bwd)
    return out


def affine(x: Tensor, w: Tensor, b: Tensor) -> Tensor:
    """x @ w + b with b broadcast over rows."""
    if x.data.ndim != 2 or w.data.ndim != 2 or x.data.shape[1] != w.data.shape[0]:
        raise ShapeError(f"affine: x {x.data.shape} does not conform with W {w.data.shape}")
    if b.data.reshape(-1).shape[0] != w.data.shape[1]:
        raise ShapeError(f"affine: bias {b.data.shape} does not match W {w.data.shape}")
    out = Tensor(x.data @ w.data + b.data, x.requires_grad or w.requires_grad or b.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is None:
                return
            _accum(x, out.grad @ w.data.T)
            _accum(w, x.data.T @ out.grad)
            _accum(b, _unbroadcast(out.grad, b.data.shape))
        _record(bwd)
    return out


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    out_data = np.empty_like(d)
    pos = d >= 0
    out_data[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    ez = np.exp(d[~pos])
    out_data[~pos] = ez / (1.0 + ez)
    out = Tensor(out_data, x.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is not None:
                _accum(x, out.grad * out_data * (1.0 - out_data))
        _record(bwd)
    return out


def tanh(x: Tensor) -> Tensor:
    out_data = np.tanh(x.data)
    out = Tensor(out_data, x.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is not None:
                _accum(x, out.grad * (1.0 - out_data * out_data))
        _record(bwd)
    return out


def softmax_rows(x: Tensor) -> Tensor:
    """Softmax along the last dimension; rows sum to 1."""
    d = x.data if x.data.ndim == 2 else x.data.reshape(1, -1)
    shifted = d - d.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    out_data = e / e.sum(axis=1, keepdims=True)
    out_data = out_data.reshape(x.data.shape)
    out = Tensor(out_data, x.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is None:
                return
            g2 = out.grad if out.grad.ndim == 2 else out.grad.reshape(1, -1)
            o2 = out_data if out_data.ndim == 2 else out_data.reshape(1, -1)
            inner = (g2 * o2).sum(axis=1, keepdims=True)
            _accum(x, ((g2 - inner) * o2).reshape(x.data.shape))
        _record(bwd)
    return out


def activation(kind: str, x: Tensor) -> Tensor:
    """Dispatch sigmoid/tanh/softmax; rejects non-finite input."""
    if not np.all(np.isfinite(x.data)):
        raise NumericError(f"activation({kind}): non-finite input")
    if kind == "sigmoid":
        return sigmoid(x)
    if kind == "tanh":
        return tanh(x)
    if kind == "softmax":
        return softmax_rows(x)
    raise ValueError(f"unknown activation kind {kind!r}")


def log(x: Tensor) -> Tensor:
    out = Tensor(np.log(x.data), x.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is not None:
                _accum(x, out.grad / x.data)
        _record(bwd)
    return out


def clamp(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clip values; gradient passes through only where unclipped."""
    out_data = np.clip(x.data, lo, hi)
    inside = (x.data > lo) & (x.data < hi)
    out = Tensor(out_data, x.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is not None:
                _accum(x, out.grad * inside)
        _record(bwd)
    return out


def sum_all(x: Tensor) -> Tensor:
    out = Tensor(np.array(x.data.sum()), x.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is not None:
                _accum(x, np.full_like(x.data, float(out.grad)))
        _record(bwd)
    return out


def mean_rows(x: Tensor) -> Tensor:
    """(n, d) -> (1, d) column means."""
    n = x.data.shape[0]
    out = Tensor(x.data.mean(axis=0, keepdims=True), x.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is not None:
                _accum(x, np.repeat(out.grad / n, n, axis=0))
        _record(bwd)
    return out


def repeat_rows(x: Tensor, n: int) -> Tensor:
    """(1, d) -> (n, d); backward sums over the repeated rows."""
    if x.data.shape[0] != 1:
        raise ShapeError(f"repeat_rows expects a single row, got {x.data.shape}")
    out = Tensor(np.repeat(x.data, n, axis=0), x.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is not None:
                _accum(x, out.grad.sum(axis=0, keepdims=True))
        _record(bwd)
    return out


def concat_cols(parts: list[Tensor]) -> Tensor:
    rows = {p.data.shape[0] for p in parts}
    if len(rows) != 1:
        raise ShapeError(f"concat_cols: row counts differ {sorted(rows)}")
    out = Tensor(np.concatenate([p.data for p in parts], axis=1),
                 any(p.requires_grad for p in parts))
    if _RECORDING and out.requires_grad:
        widths = [p.data.shape[1] for p in parts]
        def bwd():
            if out.grad is None:
                return
            at = 0
            for p, w in zip(parts, widths):
                _accum(p, out.grad[:, at:at + w])
                at += w
        _record(bwd)
    return out


def concat_rows(parts: list[Tensor]) -> Tensor:
    cols = {p.data.shape[1] for p in parts}
    if len(cols) != 1:
        raise ShapeError(f"concat_rows: column counts differ {sorted(cols)}")
    out = Tensor(np.concatenate([p.data for p in parts], axis=0),
                 any(p.requires_grad for p in parts))
    if _RECORDING and out.requires_grad:
        heights = [p.data.shape[0] for p in parts]
        def bwd():
            if out.grad is None:
                return
            at = 0
            for p, h in zip(parts, heights):
                _accum(p, out.grad[at:at + h])
                at += h
        _record(bwd)
    return out


def gather_rows(x: Tensor, idx) -> Tensor:
    """Select rows by integer index array (embedding lookup / edge gather)."""
    idx = np.asarray(idx, dtype=np.intp)
    out = Tensor(x.data[idx], x.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is None:
                return
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            np.add.at(x.grad, idx, out.grad)
        _record(bwd)
    return out


def scatter_sum(src: Tensor, idx, n_rows: int) -> Tensor:
    """out[r] = sum of src rows e with idx[e] == r (message aggregation)."""
    idx = np.asarray(idx, dtype=np.intp)
    out_data = np.zeros((n_rows, src.data.shape[1]))
    np.add.at(out_data, idx, src.data)
    out = Tensor(out_data, src.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is not None:
                _accum(src, out.grad[idx])
        _record(bwd)
    return out


def pick(x: Tensor, i: int, j: int) -> Tensor:
    """Single entry of a matrix as a scalar tensor."""
    out = Tensor(np.array(x.data[i, j]), x.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is None:
                return
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[i, j] += float(out.grad)
        _record(bwd)
    return out


def mask_fill(x: Tensor, mask, value: float) -> Tensor:
    """Overwrite entries where mask is True; gradient is zeroed there."""
    mask = np.asarray(mask, dtype=bool)
    out_data = x.data.copy()
    out_data[mask] = value
    out = Tensor(out_data, x.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is not None:
                _accum(x, np.where(mask, 0.0, out.grad))
        _record(bwd)
    return out


def dropout(x: Tensor, rate: float, rng: np.random.Generator) -> Tensor:
    """Inverted dropout; draws one mask per call from the given generator."""
    if rate <= 0.0:
        return x
    keep = (rng.random(x.data.shape) >= rate) / (1.0 - rate)
    return mul(x, Tensor(keep))


# --------------------------------------------------------------------------
# recurrent cells
# --------------------------------------------------------------------------

class GruParams:
    """Weights for one GRU: update/reset/candidate gates."""

    def __init__(self, params: dict[str, Parameter]):
        self.wz, self.uz, self.bz = params["wz"], params["uz"], params["bz"]
        self.wr, self.ur, self.br = params["wr"], params["ur"], params["br"]
        self.wh, self.uh, self.bh = params["wh"], params["uh"], params["bh"]

    def all(self) -> list[Parameter]:
        return [self.wz, self.uz, self.bz, self.wr, self.ur, self.br,
                self.wh, self.uh, self.bh]


def gru_cell(x: Tensor, h_prev: Tensor, p: GruParams) -> Tensor:
    """Gated recurrent unit update over row-stacked inputs.

    z = sigmoid(x Wz + h Uz + bz), r = sigmoid(x Wr + h Ur + br),
    hhat = tanh(x Wh + (r*h) Uh + bh), h' = (1-z)*h + z*hhat.
    """
    if x.data.shape[0] != h_prev.data.shape[0]:
        raise ShapeError(f"gru_cell: rows {x.data.shape} vs {h_prev.data.shape}")
    z = sigmoid(add(affine(x, p.wz, p.bz), matmul(h_prev, p.uz)))
    r = sigmoid(add(affine(x, p.wr, p.br), matmul(h_prev, p.ur)))
    hhat = tanh(add(affine(x, p.wh, p.bh), matmul(mul(r, h_prev), p.uh)))
    one_minus_z = sub(Tensor(np.ones_like(z.data)), z)
    return add(mul(one_minus_z, h_prev), mul(z, hhat))


class LstmParams:
    """Fused-gate LSTM weights: wx (D,4H), wh (H,4H), b (4H,); gate order i,f,o,g."""

    def __init__(self, wx: Parameter, wh: Parameter, b: Parameter):
        self.wx, self.wh, self.b = wx, wh, b

    def all(self) -> list[Parameter]:
        return [self.wx, self.wh, self.b]


def lstm_step(x: Tensor, state: tuple[Tensor, Tensor], p: LstmParams) -> tuple[Tensor, Tensor]:
    """One LSTM step on row-stacked inputs; returns (h', c')."""
    h_prev, c_prev = state
    hsz = p.wh.data.shape[0]
    if x.data.shape[1] != p.wx.data.shape[0]:
        raise ShapeError(f"lstm_step: x {x.data.shape} does not conform with wx {p.wx.data.shape}")
    zs = add(affine(x, p.wx, p.b), matmul(h_prev, p.wh))
    i = sigmoid(slice_cols(zs, 0, hsz))
    f = sigmoid(slice_cols(zs, hsz, 2 * hsz))
    o = sigmoid(slice_cols(zs, 2 * hsz, 3 * hsz))
    g = tanh(slice_cols(zs, 3 * hsz, 4 * hsz))
    c = add(mul(f, c_prev), mul(i, g))
    h = mul(o, tanh(c))
    return h, c


def transpose(x: Tensor) -> Tensor:
    out = Tensor(x.data.T.copy(), x.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is not None:
                _accum(x, out.grad.T)
        _record(bwd)
    return out


def slice_cols(x: Tensor, lo: int, hi: int) -> Tensor:
    out = Tensor(x.data[:, lo:hi].copy(), x.requires_grad)
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is None:
                return
            if x.grad is None:
                x.grad = np.zeros_like(x.data)
            x.grad[:, lo:hi] += out.grad
        _record(bwd)
    return out


def lstm_seq(x: Tensor, p: LstmParams, reverse: bool = False) -> Tensor:
    """Run an LSTM over a (T, D) sequence; returns all hidden states (T, H).

    The time loop runs in the selected kernel backend (numba or numpy); the
    whole sequence is recorded as a single taped operation with an analytic
    backward pass.  Initial state is zero.
    """
    if x.data.ndim != 2 or x.data.shape[1] != p.wx.data.shape[0]:
        raise ShapeError(f"lstm_seq: x {x.data.shape} does not conform with wx {p.wx.data.shape}")
    xd = x.data[::-1] if reverse else x.data
    xw = xd @ p.wx.data + p.b.data
    h_all, stash = lstm_seq_forward(np.ascontiguousarray(xw), p.wh.data)
    out_data = h_all[::-1].copy() if reverse else h_all
    out = Tensor(out_data, x.requires_grad or any(q.requires_grad for q in p.all()))
    if _RECORDING and out.requires_grad:
        def bwd():
            if out.grad is None:
                return
            dh_all = out.grad[::-1] if reverse else out.grad
            dxw, dwh = lstm_seq_backward(np.ascontiguousarray(dh_all), p.wh.data, h_all, stash)
            _accum(x, (dxw @ p.wx.data.T)[::-1] if reverse else dxw @ p.wx.data.T)
            _accum(p.wx, xd.T @ dxw)
            _accum(p.wh, dwh)
            _accum(p.b, dxw.sum(axis=0))
        _record(bwd)
    return out


# --------------------------------------------------------------------------
# backward + gradient checking
# --------------------------------------------------------------------------

def backward(loss: Tensor) -> None:
    """Accumulate d(loss)/d(param) into every reachable tensor's grad slot.

    Consumes the tape: after the call the recorded operation sequence is
    cleared so the next forward pass starts fresh.
    """
    if loss.data.size != 1:
        raise ShapeError(f"backward: loss must be scalar, got shape {loss.data.shape}")
    loss.grad = np.ones_like(loss.data)
    for fn in reversed(_TAPE):
        fn()
    clear_tape()


def grad_check(f, params: list[Parameter], eps: float = 1e-5) -> float:
    """Compare analytic gradients of scalar f() against central differences.

    Returns the max relative error with denominator max(|analytic|,
    |numeric|, 1e-8) over every coordinate of every parameter.
    """
    if not (0.0 < eps <= 1e-2):
        raise ValueError(f"eps must be in (0, 1e-2], got {eps}")
    clear_tape()
    for p in params:
        p.zero_grad()
    loss = f()
    backward(loss)
    analytic = {id(p): (np.zeros_like(p.data) if p.grad is None else p.grad.copy())
                for p in params}
    max_rel = 0.0
    with no_grad():
        for p in params:
            flat = p.data.reshape(-1)
            ana = analytic[id(p)].reshape(-1)
            for k in range(flat.size):
                orig = flat[k]
                flat[k] = orig + eps
                fp = f().item()
                flat[k] = orig - eps
                fm = f().item()
                flat[k] = orig
                num = (fp - fm) / (2.0 * eps)
                rel = abs(ana[k] - num) / max(abs(ana[k]), abs(num), 1e-8)
                max_rel = max(max_rel, rel)
    for p in params:
        p.zero_grad()
    return max_rel


# --------------------------------------------------------------------------
# parameter collections and checkpoints
# --------------------------------------------------------------------------

CHECKPOINT_FORMAT_VERSION = 1


class ModelParams:
    """Named parameter collection with uniform seeded initialization."""

    def __init__(self, seed: int = 0, init_scale: float = 0.08):
        self._params: dict[str, Parameter] = {}
        self._rng = np.random.default_rng(seed)
        self._init_scale = init_scale

    def new(self, name: str, shape: tuple) -> Parameter:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        data = self._rng.uniform(-self._init_scale, self._init_scale, size=shape)
        p = Parameter(data, name)
        self._params[name] = p
        return p

    def add(self, p: Parameter) -> Parameter:
        if p.name in self._params:
            raise ValueError(f"duplicate parameter name {p.name!r}")
        self._params[p.name] = p
        return p

    def __getitem__(self, name: str) -> Parameter:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params.values())

    def __len__(self):
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def zero_grads(self) -> None:
        for p in self:
            p.zero_grad()

    def state_dict(self) -> dict:
        return {name: {"shape": list(p.data.shape), "values": p.data.reshape(-1).tolist()}
                for name, p in self._params.items()}

    def save(self, path: str, extra: dict | None = None) -> None:
        doc = {"format_version": CHECKPOINT_FORMAT_VERSION, "params": self.state_dict()}
        if extra:
            doc.update(extra)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(doc, fh)

    def load_state(self, state: dict) -> None:
        """Load values into existing parameters; names and shapes must match."""
        missing = set(self._params) - set(state)
        unexpected = set(state) - set(self._params)
        if missing or unexpected:
            raise CheckpointError(
                f"parameter name mismatch: missing={sorted(missing)} unexpected={sorted(unexpected)}")
        for name, entry in state.items():
            p = self._params[name]
            shape = tuple(entry["shape"])
            if shape != p.data.shape:
                raise CheckpointError(
                    f"shape mismatch for {name!r}: checkpoint {shape} vs model {p.data.shape}")
            p.data = np.asarray(entry["values"], dtype=np.float64).reshape(shape)
            p.sq_grad_avg = np.zeros_like(p.data)
            p.sq_update_avg = np.zeros_like(p.data)
            p.zero_grad()


def load_checkpoint_doc(path: str) -> dict:
    with open(path, "r", encoding="utf-8") as fh:
        doc = json.load(fh)
    if doc.get("format_version") != CHECKPOINT_FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint format_version {doc.get('format_version')!r}")
    return doc
