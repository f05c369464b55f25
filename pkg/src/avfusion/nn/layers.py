"""Layers with hand-derived backward passes.

Conventions shared by every layer:

* ``forward(x, mask=None)`` caches whatever backward needs; ``backward(grad)``
  must follow a forward on the same input and returns the gradient w.r.t.
  that input while accumulating parameter gradients into ``self.grads``.
* Gradients accumulate across calls (for mini-batch sums); ``zero_grads()``
  clears them in place, so external references to the grad arrays stay valid.
* ``mask`` is a boolean validity vector over rows (frames / tokens / samples).
  Masked rows carry zero padding and must never influence valid outputs;
  layers that reduce over time enforce this exactly, not approximately.
"""

from __future__ import annotations

import numpy as np


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape: tuple, dtype=np.float64) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape).astype(dtype)


def conv_window_mask(mask: np.ndarray, width: int, stride: int = 1) -> np.ndarray:
    """Validity of each convolution window: true iff every covered row is valid.

    Windows that touch padding are excluded downstream so that appending more
    padding can never change pooled results.
    """
    mask = np.asarray(mask, dtype=bool)
    n_out = (mask.size - width) // stride + 1
    if n_out < 1:
        raise ValueError(f"no window of width {width} fits {mask.size} rows")
    idx = np.arange(n_out)[:, None] * stride + np.arange(width)[None, :]
    return mask[idx].all(axis=1)


class Layer:
    """Base: named parameters plus matching gradient buffers."""

    def __init__(self):
        self.params: dict[str, np.ndarray] = {}
        self.grads: dict[str, np.ndarray] = {}

    def _register(self, name: str, value: np.ndarray) -> np.ndarray:
        self.params[name] = value
        self.grads[name] = np.zeros_like(value)
        return value

    def _adopt(self, prefix: str, child: "Layer") -> None:
        """Expose a child layer's parameters under `prefix.` (shared arrays)."""
        for k, v in child.params.items():
            self.params[f"{prefix}.{k}"] = v
            self.grads[f"{prefix}.{k}"] = child.grads[k]

    def zero_grads(self) -> None:
        for g in self.grads.values():
            g[...] = 0

    def forward(self, x, mask=None):
        raise NotImplementedError

    def backward(self, grad):
        raise NotImplementedError


class Dense(Layer):
    """Affine map y = x W + b over a batch of row vectors."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        self.w = self._register("w", xavier_uniform(rng, n_in, n_out, (n_in, n_out), dtype))
        self.b = self._register("b", np.zeros(n_out, dtype=dtype))

    def forward(self, x: np.ndarray, mask=None) -> np.ndarray:
        if x.ndim != 2 or x.shape[1] != self.w.shape[0]:
            raise ValueError(f"expected (batch, {self.w.shape[0]}), got {x.shape}")
        self._x = x
        return x @ self.w + self.b

    def backward(self, grad: np.ndarray) -> np.ndarray:
        self.grads["w"] += self._x.T @ grad
        self.grads["b"] += grad.sum(axis=0)
        return grad @ self.w.T


class Activation(Layer):
    """Elementwise relu/tanh, or softmax over the last dimension."""

    KINDS = ("relu", "tanh", "softmax_lastdim")

    def __init__(self, kind: str):
        super().__init__()
        if kind not in self.KINDS:
            raise ValueError(f"kind must be one of {self.KINDS}, got {kind!r}")
        self.kind = kind

    def forward(self, x: np.ndarray, mask=None) -> np.ndarray:
        if self.kind == "relu":
            self._y = np.maximum(x, 0)
        elif self.kind == "tanh":
            self._y = np.tanh(x)
        else:
            shifted = x - x.max(axis=-1, keepdims=True)
            e = np.exp(shifted)
            self._y = e / e.sum(axis=-1, keepdims=True)
        return self._y

    def backward(self, grad: np.ndarray) -> np.ndarray:
        y = self._y
        if self.kind == "relu":
            return grad * (y > 0)
        if self.kind == "tanh":
            return grad * (1.0 - y * y)
        return y * (grad - (grad * y).sum(axis=-1, keepdims=True))


class Conv1d(Layer):
    """Valid (no-pad) temporal convolution with full-width filters.

    Each filter spans the whole input dimension; with stride s the output has
    (frames - width) // s + 1 rows.
    """

    def __init__(self, n_in: int, out_channels: int, width: int,
                 rng: np.random.Generator, stride: int = 1, dtype=np.float64):
        super().__init__()
        if width < 1 or stride < 1:
            raise ValueError(f"width and stride must be >= 1, got {width}, {stride}")
        self.n_in = n_in
        self.width = width
        self.stride = stride
        fan_in = width * n_in
        self.w = self._register("w", xavier_uniform(rng, fan_in, out_channels,
                                                    (fan_in, out_channels), dtype))
        self.b = self._register("b", np.zeros(out_channels, dtype=dtype))

    def forward(self, x: np.ndarray, mask=None) -> np.ndarray:
        frames = x.shape[0]
        if frames < self.width:
            raise ValueError(f"{frames} frames < filter width {self.width}")
        n_out = (frames - self.width) // self.stride + 1
        idx = np.arange(n_out)[:, None] * self.stride + np.arange(self.width)[None, :]
        self._idx = idx
        self._frames = frames
        self._windows = x[idx].reshape(n_out, -1)
        return self._windows @ self.w + self.b

    def backward(self, grad: np.ndarray) -> np.ndarray:
        self.grads["w"] += self._windows.T @ grad
        self.grads["b"] += grad.sum(axis=0)
        gwin = (grad @ self.w.T).reshape(-1, self.width, self.n_in)
        gx = np.zeros((self._frames, self.n_in), dtype=grad.dtype)
        np.add.at(gx, self._idx, gwin)
        return gx


class Conv1dMultiWidth(Layer):
    """Parallel stride-1 convolutions with strictly increasing filter widths,
    one feature map per width (text-CNN style)."""

    def __init__(self, n_in: int, out_channels: int, widths: tuple[int, ...],
                 rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        if list(widths) != sorted(set(widths)):
            raise ValueError(f"widths must be strictly increasing, got {widths}")
        self.widths = tuple(widths)
        self.convs = [Conv1d(n_in, out_channels, w, rng, dtype=dtype) for w in widths]
        for w, conv in zip(widths, self.convs):
            self._adopt(f"width{w}", conv)

    def forward(self, x: np.ndarray, mask=None) -> list[np.ndarray]:
        return [conv.forward(x) for conv in self.convs]

    def backward(self, grads: list[np.ndarray]) -> np.ndarray:
        gx = None
        for conv, g in zip(self.convs, grads):
            contrib = conv.backward(g)
            gx = contrib if gx is None else gx + contrib
        return gx


class GlobalPool(Layer):
    """Per-channel max or mean over valid timesteps only.

    Max ties route the gradient to the earliest maximal timestep.
    """

    def __init__(self, kind: str = "max"):
        super().__init__()
        if kind not in ("max", "avg"):
            raise ValueError(f"kind must be 'max' or 'avg', got {kind!r}")
        self.kind = kind

    def forward(self, x: np.ndarray, mask=None) -> np.ndarray:
        t = x.shape[0]
        valid = np.flatnonzero(mask) if mask is not None else np.arange(t)
        if valid.size == 0:
            raise ValueError("empty mask: no valid timestep to pool over")
        self._shape = x.shape
        self._valid = valid
        sub = x[valid]
        if self.kind == "max":
            arg = sub.argmax(axis=0)
            self._rows = valid[arg]
            return sub[arg, np.arange(x.shape[1])]
        return sub.mean(axis=0)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        gx = np.zeros(self._shape, dtype=grad.dtype)
        if self.kind == "max":
            np.add.at(gx, (self._rows, np.arange(self._shape[1])), grad)
        else:
            gx[self._valid] = grad / self._valid.size
        return gx


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


class Lstm(Layer):
    """Single-direction LSTM over one sequence, with backprop through time.

    Zero initial state; the forget-gate bias starts at 1 so early training
    does not wash out the cell state. Masked timesteps copy the previous
    hidden and cell state unchanged, so padding cannot alter valid outputs.
    """

    GATES = ("i", "f", "o", "g")

    def __init__(self, n_in: int, n_hidden: int, rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        self.n_in = n_in
        self.n_hidden = n_hidden
        for gate in self.GATES:
            self._register(f"w_{gate}", xavier_uniform(rng, n_in, n_hidden,
                                                       (n_in, n_hidden), dtype))
        for gate in self.GATES:
            self._register(f"u_{gate}", xavier_uniform(rng, n_hidden, n_hidden,
                                                       (n_hidden, n_hidden), dtype))
        for gate in self.GATES:
            init = np.ones(n_hidden, dtype=dtype) if gate == "f" else np.zeros(n_hidden, dtype=dtype)
            self._register(f"b_{gate}", init)

    def forward(self, x: np.ndarray, mask=None) -> np.ndarray:
        frames = x.shape[0]
        p = self.params
        h = np.zeros(self.n_hidden, dtype=x.dtype)
        c = np.zeros(self.n_hidden, dtype=x.dtype)
        H = np.zeros((frames, self.n_hidden), dtype=x.dtype)
        self._steps = []
        for t in range(frames):
            if mask is not None and not mask[t]:
                self._steps.append(None)
                H[t] = h
                continue
            xt = x[t]
            i = _sigmoid(xt @ p["w_i"] + h @ p["u_i"] + p["b_i"])
            f = _sigmoid(xt @ p["w_f"] + h @ p["u_f"] + p["b_f"])
            o = _sigmoid(xt @ p["w_o"] + h @ p["u_o"] + p["b_o"])
            g = np.tanh(xt @ p["w_g"] + h @ p["u_g"] + p["b_g"])
            c_new = f * c + i * g
            tc = np.tanh(c_new)
            self._steps.append((xt, h, c, i, f, o, g, tc))
            c = c_new
            h = o * tc
            H[t] = h
        self._in_shape = x.shape
        return H

    def backward(self, grad_H: np.ndarray) -> np.ndarray:
        p, gr = self.params, self.grads
        gx = np.zeros(self._in_shape, dtype=grad_H.dtype)
        dh = np.zeros(self.n_hidden, dtype=grad_H.dtype)
        dc = np.zeros(self.n_hidden, dtype=grad_H.dtype)
        for t in range(len(self._steps) - 1, -1, -1):
            dh = dh + grad_H[t]
            step = self._steps[t]
            if step is None:
                continue  # state copied through; dh/dc pass to the prior step
            xt, h_prev, c_prev, i, f, o, g, tc = step
            do = dh * tc
            dc = dc + dh * o * (1.0 - tc * tc)
            di = dc * g
            df = dc * c_prev
            dg = dc * i
            pre = {
                "i": di * i * (1.0 - i),
                "f": df * f * (1.0 - f),
                "o": do * o * (1.0 - o),
                "g": dg * (1.0 - g * g),
            }
            dh_prev = np.zeros_like(dh)
            dx = np.zeros(self.n_in, dtype=grad_H.dtype)
            for gate, d in pre.items():
                gr[f"w_{gate}"] += np.outer(xt, d)
                gr[f"u_{gate}"] += np.outer(h_prev, d)
                gr[f"b_{gate}"] += d
                dh_prev += d @ p[f"u_{gate}"].T
                dx += d @ p[f"w_{gate}"].T
            gx[t] = dx
            dh = dh_prev
            dc = dc * f
        return gx


class AttentionPool(Layer):
    """Additive attention over frames: scores from a tanh projection of the
    hidden states, softmax weights over valid frames, weighted-sum context.

    forward returns ``(context, weights)``; gradients flow through the
    context, the weight vector is a read-only diagnostic. Masked frames get
    exactly zero weight.
    """

    def __init__(self, n_hidden: int, att_dim: int, rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        self.w = self._register("w", xavier_uniform(rng, n_hidden, att_dim,
                                                    (n_hidden, att_dim), dtype))
        self.b = self._register("b", np.zeros(att_dim, dtype=dtype))
        self.u = self._register("u", xavier_uniform(rng, att_dim, 1, (att_dim,), dtype))

    def forward(self, H: np.ndarray, mask=None) -> tuple[np.ndarray, np.ndarray]:
        frames = H.shape[0]
        valid = np.ones(frames, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        if not valid.any():
            raise ValueError("all frames masked: attention needs >= 1 valid frame")
        V = np.tanh(H @ self.w + self.b)
        s = V @ self.u
        s = np.where(valid, s, -np.inf)
        a = np.zeros(frames, dtype=H.dtype)
        e = np.exp(s[valid] - s[valid].max())
        a[valid] = e / e.sum()
        self._H, self._V, self._a = H, V, a
        return a @ H, a

    def backward(self, grad_ctx: np.ndarray) -> np.ndarray:
        H, V, a = self._H, self._V, self._a
        da = H @ grad_ctx
        ds = a * (da - float(da @ a))  # softmax backward; masked rows have a=0
        self.grads["u"] += V.T @ ds
        dpre = np.outer(ds, self.u) * (1.0 - V * V)
        self.grads["w"] += H.T @ dpre
        self.grads["b"] += dpre.sum(axis=0)
        return np.outer(a, grad_ctx) + dpre @ self.w.T


class MultiHeadAttention(Layer):
    """Self-attention with parallel scaled-dot-product heads.

    Literally heads + output projection: no positional encoding, residual
    path, or layer norm. Masked keys are excluded from every softmax row, so
    token outputs are permutation-equivariant and padding-invariant.
    """

    def __init__(self, model_dim: int, n_heads: int, head_dim: int,
                 rng: np.random.Generator, dtype=np.float64):
        super().__init__()
        self.model_dim = model_dim
        self.n_heads = n_heads
        self.head_dim = head_dim
        for h in range(n_heads):
            for proj in ("q", "k", "v"):
                self._register(f"{proj}{h}", xavier_uniform(
                    rng, model_dim, head_dim, (model_dim, head_dim), dtype))
        self._register("out", xavier_uniform(rng, n_heads * head_dim, model_dim,
                                             (n_heads * head_dim, model_dim), dtype))

    def forward(self, x: np.ndarray, mask=None) -> np.ndarray:
        tokens = x.shape[0]
        valid = np.ones(tokens, dtype=bool) if mask is None else np.asarray(mask, dtype=bool)
        if not valid.any():
            raise ValueError("all tokens masked: attention needs >= 1 valid token")
        scale = 1.0 / np.sqrt(self.head_dim)
        heads, cache = [], []
        for h in range(self.n_heads):
            Q = x @ self.params[f"q{h}"]
            K = x @ self.params[f"k{h}"]
            V = x @ self.params[f"v{h}"]
            s = (Q @ K.T) * scale
            s = np.where(valid[None, :], s, -np.inf)
            s = s - s.max(axis=1, keepdims=True)
            e = np.exp(s)
            A = e / e.sum(axis=1, keepdims=True)
            heads.append(A @ V)
            cache.append((Q, K, V, A))
        self._x, self._cache = x, cache
        self._concat = np.concatenate(heads, axis=1)
        return self._concat @ self.params["out"]

    def backward(self, grad_y: np.ndarray) -> np.ndarray:
        self.grads["out"] += self._concat.T @ grad_y
        gcat = grad_y @ self.params["out"].T
        x = self._x
        gx = np.zeros_like(x)
        scale = 1.0 / np.sqrt(self.head_dim)
        for h, (Q, K, V, A) in enumerate(self._cache):
            gh = gcat[:, h * self.head_dim:(h + 1) * self.head_dim]
            gA = gh @ V.T
            gV = A.T @ gh
            gS = A * (gA - (gA * A).sum(axis=1, keepdims=True))
            gQ = (gS @ K) * scale
            gK = (gS.T @ Q) * scale
            self.grads[f"q{h}"] += x.T @ gQ
            self.grads[f"k{h}"] += x.T @ gK
            self.grads[f"v{h}"] += x.T @ gV
            gx += gQ @ self.params[f"q{h}"].T
            gx += gK @ self.params[f"k{h}"].T
            gx += gV @ self.params[f"v{h}"].T
        return gx
