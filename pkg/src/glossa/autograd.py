"""Minimal reverse-mode automatic differentiation over numpy arrays.

Just enough machinery for an LSTM tagger: elementwise arithmetic,
matmul, row lookup, concatenation, sigmoid/tanh, log-softmax and
negative log-likelihood pulls. Float64 throughout so finite-difference
checks are meaningful.
"""

from __future__ import annotations

from typing import Callable

import numpy as np


class Tensor:
    __slots__ = ("data", "grad", "_parents", "_backward", "requires_grad")

    def __init__(self, data, requires_grad: bool = False,
                 parents: tuple["Tensor", ...] = (),
                 backward: Callable[[np.ndarray], None] | None = None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad or any(p.requires_grad for p in parents)
        self._parents = parents
        self._backward = backward

    @property
    def shape(self):
        return self.data.shape

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def backward(self, grad: np.ndarray | None = None) -> None:
        """Reverse accumulation from this (scalar unless `grad` given) node."""
        if grad is None:
            grad = np.ones_like(self.data)
        topo: list[Tensor] = []
        seen: set[int] = set()

        def visit(node: Tensor) -> None:
            if id(node) in seen or not node.requires_grad:
                return
            seen.add(id(node))
            for p in node._parents:
                visit(p)
            topo.append(node)

        visit(self)
        self._accumulate(np.asarray(grad, dtype=np.float64))
        for node in reversed(topo):
            if node._backward is not None:
                node._backward(node.grad)

    # -- ops ------------------------------------------------------------------

    def __add__(self, other: "Tensor") -> "Tensor":
        out = Tensor(self.data + other.data, parents=(self, other))

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g, other.data.shape))

        out._backward = backward
        return out

    def __sub__(self, other: "Tensor") -> "Tensor":
        return self + (other * -1.0)

    def __mul__(self, other) -> "Tensor":
        if not isinstance(other, Tensor):
            scale = float(other)
            out = Tensor(self.data * scale, parents=(self,))

            def backward_scalar(g):
                if self.requires_grad:
                    self._accumulate(g * scale)

            out._backward = backward_scalar
            return out
        out = Tensor(self.data * other.data, parents=(self, other))

        def backward(g):
            if self.requires_grad:
                self._accumulate(_unbroadcast(g * other.data, self.data.shape))
            if other.requires_grad:
                other._accumulate(_unbroadcast(g * self.data, other.data.shape))

        out._backward = backward
        return out

    def matmul(self, other: "Tensor") -> "Tensor":
        out = Tensor(self.data @ other.data, parents=(self, other))

        def backward(g):
            if self.requires_grad:
                if self.data.ndim == 1:
                    self._accumulate(g @ other.data.T if other.data.ndim == 2 else g * other.data)
                else:
                    self._accumulate(np.outer(g, other.data) if other.data.ndim == 1
                                     else g @ other.data.T)
            if other.requires_grad:
                if self.data.ndim == 1:
                    other._accumulate(np.outer(self.data, g) if other.data.ndim == 2
                                      else g * self.data)
                else:
                    other._accumulate(self.data.T @ g)

        out._backward = backward
        return out

    def __matmul__(self, other: "Tensor") -> "Tensor":
        return self.matmul(other)

    def sigmoid(self) -> "Tensor":
        s = 1.0 / (1.0 + np.exp(-self.data))
        out = Tensor(s, parents=(self,))

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * s * (1.0 - s))

        out._backward = backward
        return out

    def tanh(self) -> "Tensor":
        t = np.tanh(self.data)
        out = Tensor(t, parents=(self,))

        def backward(g):
            if self.requires_grad:
                self._accumulate(g * (1.0 - t * t))

        out._backward = backward
        return out

    def slice(self, start: int, stop: int) -> "Tensor":
        out = Tensor(self.data[start:stop], parents=(self,))

        def backward(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[start:stop] = g
                self._accumulate(full)

        out._backward = backward
        return out

    def concat(self, other: "Tensor") -> "Tensor":
        out = Tensor(np.concatenate([self.data, other.data]), parents=(self, other))
        n = self.data.shape[0]

        def backward(g):
            if self.requires_grad:
                self._accumulate(g[:n])
            if other.requires_grad:
                other._accumulate(g[n:])

        out._backward = backward
        return out

    def row(self, index: int) -> "Tensor":
        out = Tensor(self.data[index], parents=(self,))

        def backward(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[index] = g
                self._accumulate(full)

        out._backward = backward
        return out

    def log_softmax(self) -> "Tensor":
        x = self.data
        m = np.max(x)
        shifted = x - m
        logsum = m + np.log(np.sum(np.exp(shifted)))
        out_data = x - logsum
        out = Tensor(out_data, parents=(self,))
        softmax = np.exp(out_data)

        def backward(g):
            if self.requires_grad:
                self._accumulate(g - softmax * np.sum(g))

        out._backward = backward
        return out

    def pick(self, index: int) -> "Tensor":
        out = Tensor(self.data[index], parents=(self,))

        def backward(g):
            if self.requires_grad:
                full = np.zeros_like(self.data)
                full[index] = g
                self._accumulate(full)

        out._backward = backward
        return out

    def sum(self) -> "Tensor":
        out = Tensor(self.data.sum(), parents=(self,))

        def backward(g):
            if self.requires_grad:
                self._accumulate(np.full_like(self.data, float(g)))

        out._backward = backward
        return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum gradient over broadcast dimensions back to `shape`."""
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


class Parameter(Tensor):
    """Trainable leaf tensor."""

    def __init__(self, data):
        super().__init__(data, requires_grad=True)

    def zero_grad(self) -> None:
        self.grad = None


def add_all(terms: list[Tensor]) -> Tensor:
    total = terms[0]
    for t in terms[1:]:
        total = total + t
    return total


class Adam:
    """Adam with the standard bias-corrected moment estimates."""

    def __init__(self, params: dict[str, Parameter], lr: float = 2e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = params
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = {k: np.zeros_like(p.data) for k, p in params.items()}
        self.v = {k: np.zeros_like(p.data) for k, p in params.items()}

    def step(self) -> None:
        self.t += 1
        b1t = 1.0 - self.beta1 ** self.t
        b2t = 1.0 - self.beta2 ** self.t
        for key, p in self.params.items():
            if p.grad is None:
                continue
            g = p.grad
            self.m[key] = self.beta1 * self.m[key] + (1.0 - self.beta1) * g
            self.v[key] = self.beta2 * self.v[key] + (1.0 - self.beta2) * (g * g)
            m_hat = self.m[key] / b1t
            v_hat = self.v[key] / b2t
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()
