"""Small numpy network stack: pre-activation residual dense nets with dueling heads.

Layers keep the activations of their last forward call and backpropagate
through them. Parameters and gradients are exposed as ordered ``(name, array)``
lists so optimizers and checkpoints see a stable layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import N_ACTIONS


class Linear:
    def __init__(self, n_in: int, n_out: int, dtype=np.float32) -> None:
        self.weight = np.zeros((n_out, n_in), dtype=dtype)
        self.bias = np.zeros(n_out, dtype=dtype)
        self.grads = {"weight": np.zeros_like(self.weight), "bias": np.zeros_like(self.bias)}
        self._x = None

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def forward(self, x: np.ndarray) -> np.ndarray:
        self._x = x
        return x @ self.weight.T + self.bias

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._x is None:
            raise RuntimeError("backward called before forward")
        self.grads["weight"] = dy.T @ self._x
        self.grads["bias"] = dy.sum(axis=0)
        return dy @ self.weight


class BatchNorm:
    def __init__(self, n: int, momentum: float = 0.1, eps: float = 1e-5, dtype=np.float32) -> None:
        self.weight = np.ones(n, dtype=dtype)
        self.bias = np.zeros(n, dtype=dtype)
        self.running_mean = np.zeros(n, dtype=dtype)
        self.running_var = np.ones(n, dtype=dtype)
        self.momentum = momentum
        self.eps = eps
        self.grads = {"weight": np.zeros_like(self.weight), "bias": np.zeros_like(self.bias)}
        self._cache = None

    def params(self):
        return [("weight", self.weight), ("bias", self.bias)]

    def buffers(self):
        return [("running_mean", self.running_mean), ("running_var", self.running_var)]

    def forward(self, x: np.ndarray, train: bool) -> np.ndarray:
        if train:
            mean = x.mean(axis=0)
            var = x.var(axis=0)
            n = x.shape[0]
            m = self.momentum
            unbiased = var * (n / (n - 1)) if n > 1 else var
            self.running_mean[...] = (1 - m) * self.running_mean + m * mean
            self.running_var[...] = (1 - m) * self.running_var + m * unbiased
        else:
            mean, var = self.running_mean, self.running_var
        inv = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean) * inv
        self._cache = (xhat, inv, train)
        return xhat * self.weight + self.bias

    def backward(self, dy: np.ndarray) -> np.ndarray:
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        xhat, inv, train = self._cache
        self.grads["weight"] = (dy * xhat).sum(axis=0)
        self.grads["bias"] = dy.sum(axis=0)
        dxhat = dy * self.weight
        if not train:
            return dxhat * inv
        n = dy.shape[0]
        return (inv / n) * (n * dxhat - dxhat.sum(axis=0)
                            - xhat * (dxhat * xhat).sum(axis=0))


def _relu(x):
    return np.maximum(x, 0)


class ResidualBlock:
    """x + W2 relu(bn2(W1 relu(bn1(x))))."""

    def __init__(self, width: int, dtype=np.float32) -> None:
        self.bn1 = BatchNorm(width, dtype=dtype)
        self.fc1 = Linear(width, width, dtype)
        self.bn2 = BatchNorm(width, dtype=dtype)
        self.fc2 = Linear(width, width, dtype)
        self._masks = None

    def layers(self):
        return [("bn1", self.bn1), ("fc1", self.fc1), ("bn2", self.bn2), ("fc2", self.fc2)]

    def forward(self, x, train):
        h = self.bn1.forward(x, train)
        m1 = h > 0
        h = self.fc1.forward(h * m1)
        h = self.bn2.forward(h, train)
        m2 = h > 0
        h = self.fc2.forward(h * m2)
        self._masks = (m1, m2)
        return x + h

    def backward(self, dy):
        m1, m2 = self._masks
        d = self.fc2.backward(dy) * m2
        d = self.bn2.backward(d)
        d = self.fc1.backward(d) * m1
        d = self.bn1.backward(d)
        return dy + d


class DenseResNet:
    """Residual dense network ending in a dueling head.

    ``forward`` returns ``(state_value, q)`` with ``q[:, a] = state + adv[:, a]
    - mean(adv)`` for each of the six action kinds.
    """

    def __init__(self, input_width: int, hidden_width: int = 128, n_blocks: int = 3,
                 n_actions: int = N_ACTIONS, dtype=np.float32) -> None:
        self.input_width = input_width
        self.hidden_width = hidden_width
        self.n_actions = n_actions
        self.dtype = np.dtype(dtype)
        self.stem = Linear(input_width, hidden_width, dtype)
        self.blocks = [ResidualBlock(hidden_width, dtype) for _ in range(n_blocks)]
        self.head_bn = BatchNorm(hidden_width, dtype=dtype)
        self.widen = Linear(hidden_width, 2 * hidden_width, dtype)
        self.state_head = Linear(2 * hidden_width, 1, dtype)
        self.adv_head = Linear(2 * hidden_width, n_actions, dtype)
        self.training = False
        self._cache = None

    def named_layers(self):
        out = [("stem", self.stem)]
        for i, b in enumerate(self.blocks):
            out += [(f"block{i}.{n}", l) for n, l in b.layers()]
        out += [("head_bn", self.head_bn), ("widen", self.widen),
                ("state_head", self.state_head), ("adv_head", self.adv_head)]
        return out

    def parameters(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{ln}.{pn}", p) for ln, layer in self.named_layers() for pn, p in layer.params()]

    def gradients(self) -> list[np.ndarray]:
        return [layer.grads[pn] for _, layer in self.named_layers() for pn, _ in layer.params()]

    def buffers(self) -> list[tuple[str, np.ndarray]]:
        return [(f"{ln}.{bn}", b) for ln, layer in self.named_layers()
                if isinstance(layer, BatchNorm) for bn, b in layer.buffers()]

    def train(self, mode: bool = True) -> "DenseResNet":
        self.training = mode
        return self

    def eval(self) -> "DenseResNet":
        return self.train(False)

    def features(self, x: np.ndarray, train: bool) -> np.ndarray:
        h = self.stem.forward(x)
        for b in self.blocks:
            h = b.forward(h, train)
        return h

    def head(self, h: np.ndarray, train: bool):
        g = self.head_bn.forward(h, train)
        m1 = g > 0
        g = self.widen.forward(g * m1)
        m2 = g > 0
        g = g * m2
        state = self.state_head.forward(g)[:, 0]
        adv = self.adv_head.forward(g)
        q = state[:, None] + adv - adv.mean(axis=1, keepdims=True)
        self._cache = (m1, m2)
        return state, q

    def forward(self, x: np.ndarray, train: bool | None = None):
        x = np.asarray(x, dtype=self.dtype)
        if x.ndim == 1:
            x = x[None, :]
        if x.shape[1] != self.input_width:
            raise ValueError(f"expected input width {self.input_width}, got {x.shape[1]}")
        train = self.training if train is None else train
        return self.head(self.features(x, train), train)

    __call__ = forward

    def backward(self, d_q: np.ndarray, d_state: np.ndarray | None = None) -> list[np.ndarray]:
        """Backpropagate output gradients; returns gradients in ``parameters()`` order."""
        if self._cache is None:
            raise RuntimeError("backward called before forward")
        m1, m2 = self._cache
        d_q = np.asarray(d_q, dtype=self.dtype)
        d_adv = d_q - d_q.mean(axis=1, keepdims=True)
        d_s = d_q.sum(axis=1)
        if d_state is not None:
            d_s = d_s + np.asarray(d_state, dtype=self.dtype)
        dg = self.adv_head.backward(d_adv) + self.state_head.backward(d_s[:, None])
        dg = self.widen.backward(dg * m2) * m1
        dh = self.head_bn.backward(dg)
        for b in reversed(self.blocks):
            dh = b.backward(dh)
        self.stem.backward(dh)
        return self.gradients()


def kaiming_init(net: DenseResNet, seed: int, context_atoms: int = 0, n_emb: int | None = None) -> None:
    """Kaiming-uniform affine weights, zero biases, zeroed residual outputs.

    With context atoms the stem columns fed by context slots start at zero and
    the remaining columns use the fan-in of the non-context inputs only.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, 3]))
    for name, layer in net.named_layers():
        if not isinstance(layer, Linear):
            continue
        fan_in = layer.weight.shape[1]
        cols = np.ones(fan_in, dtype=bool)
        if name == "stem" and context_atoms:
            slots = 2 + 2 * context_atoms
            width = n_emb if n_emb is not None else fan_in // slots
            cols[:] = False
            cols[context_atoms * width:(context_atoms + 2) * width] = True
        bound = np.sqrt(6.0 / cols.sum())
        w = rng.uniform(-bound, bound, size=layer.weight.shape)
        w[:, ~cols] = 0.0
        layer.weight[...] = w
        layer.bias[...] = 0.0
    for b in net.blocks:
        b.fc2.weight[...] = 0.0
        b.fc2.bias[...] = 0.0


class AdaBelief:
    """AdaBelief over a list of parameter arrays (updated in place).

    Moments are kept in float64 regardless of the parameter dtype.
    """

    def __init__(self, params: list[np.ndarray], lr: float = 1e-3,
                 betas: tuple[float, float] = (0.9, 0.999), eps: float = 1e-16) -> None:
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.t = 0
        self.m = [np.zeros(p.shape) for p in params]
        self.s = [np.zeros(p.shape) for p in params]

    def step(self, grads: list[np.ndarray], lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        c1 = 1.0 - b1 ** self.t
        c2 = 1.0 - b2 ** self.t
        for p, g, m, s in zip(self.params, grads, self.m, self.s):
            if p.shape != g.shape:
                raise ValueError(f"gradient shape {g.shape} does not match {p.shape}")
            g = g.astype(np.float64)
            m *= b1
            m += (1 - b1) * g
            s *= b2
            s += (1 - b2) * (g - m) ** 2 + self.eps
            update = lr * (m / c1) / (np.sqrt(s / c2) + self.eps)
            p -= update.astype(p.dtype)

    def state_arrays(self) -> list[tuple[str, np.ndarray]]:
        out = [("t", np.array([self.t], dtype=np.float64))]
        out += [(f"m{i}", m) for i, m in enumerate(self.m)]
        out += [(f"s{i}", s) for i, s in enumerate(self.s)]
        return out

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        self.t = int(arrays["t"][0])
        for i in range(len(self.m)):
            self.m[i][...] = arrays[f"m{i}"]
            self.s[i][...] = arrays[f"s{i}"]


def adabelief_step(params, grads, state: AdaBelief, lr: float):
    state.params = params
    state.step(grads, lr)
    return params


@dataclass(frozen=True)
class LrSchedule:
    initial_lr: float
    total_epochs: int
    num_halvings: int = 2

    def lr_at(self, epoch: int) -> float:
        if not 0 <= epoch < self.total_epochs:
            raise ValueError(f"epoch {epoch} outside [0, {self.total_epochs})")
        stage = (epoch * (self.num_halvings + 1)) // self.total_epochs
        return self.initial_lr / 2 ** stage


def lr_at(schedule: LrSchedule, epoch: int) -> float:
    return schedule.lr_at(epoch)
