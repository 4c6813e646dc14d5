"""First-order optimizers on flat parameter vectors."""
from __future__ import annotations

import numpy as np


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr, self.b1, self.b2, self.eps = lr, beta1, beta2, eps
        self.m = self.v = None
        self.t = 0

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        if self.m is None:
            self.m = np.zeros_like(params)
            self.v = np.zeros_like(params)
        self.t += 1
        self.m = self.b1 * self.m + (1 - self.b1) * grad
        self.v = self.b2 * self.v + (1 - self.b2) * grad ** 2
        mhat = self.m / (1 - self.b1 ** self.t)
        vhat = self.v / (1 - self.b2 ** self.t)
        return params - self.lr * mhat / (np.sqrt(vhat) + self.eps)


class Nesterov:
    """v <- mu v - lr grad(theta + mu v); theta <- theta + v."""

    def __init__(self, lr: float, momentum: float = 0.9):
        if lr <= 0 or not 0 <= momentum < 1:
            raise ValueError("need lr > 0 and momentum in [0, 1)")
        self.lr, self.mu = lr, momentum
        self.v = None

    def lookahead(self, params: np.ndarray) -> np.ndarray:
        if self.v is None:
            self.v = np.zeros_like(params)
        return params + self.mu * self.v

    def step(self, params: np.ndarray, grad_at_lookahead: np.ndarray) -> np.ndarray:
        if self.v is None:
            self.v = np.zeros_like(params)
        self.v = self.mu * self.v - self.lr * grad_at_lookahead
        return params + self.v


class SGD:
    def __init__(self, lr: float):
        if lr <= 0:
            raise ValueError("learning rate must be positive")
        self.lr = lr

    def step(self, params: np.ndarray, grad: np.ndarray) -> np.ndarray:
        return params - self.lr * grad
