"""Gradient-based optimizers over named parameter dicts."""
from __future__ import annotations

import numpy as np


class SgdMomentum:
    def __init__(self, lr: float, momentum: float = 0.9):
        self.lr = lr
        self.momentum = momentum
        self.velocity: dict[str, np.ndarray] = {}

    def step(self, weights: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float | None = None):
        lr = self.lr if lr is None else lr
        for name in sorted(weights):
            v = self.velocity.get(name)
            if v is None:
                v = np.zeros_like(weights[name])
            v = self.momentum * v - lr * grads[name]
            self.velocity[name] = v
            weights[name] = weights[name] + v


class Adam:
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}

    def step(self, weights: dict[str, np.ndarray], grads: dict[str, np.ndarray], lr: float | None = None):
        lr = self.lr if lr is None else lr
        self.t += 1
        for name in sorted(weights):
            g = grads[name]
            m = self.m.get(name, np.zeros_like(g))
            v = self.v.get(name, np.zeros_like(g))
            m = self.beta1 * m + (1 - self.beta1) * g
            v = self.beta2 * v + (1 - self.beta2) * g * g
            self.m[name] = m
            self.v[name] = v
            mh = m / (1 - self.beta1**self.t)
            vh = v / (1 - self.beta2**self.t)
            weights[name] = weights[name] - lr * mh / (np.sqrt(vh) + self.eps)


def cosine_lr(base_lr: float, step: int, total_steps: int, final_fraction: float = 0.1) -> float:
    """Cosine decay from base_lr to final_fraction * base_lr over the run."""
    if total_steps <= 1:
        return base_lr
    end = base_lr * final_fraction
    frac = step / (total_steps - 1)
    return end + 0.5 * (base_lr - end) * (1.0 + np.cos(np.pi * frac))


def make_optimizer(name: str, lr: float):
    if name == "sgd":
        return SgdMomentum(lr)
    if name == "adam":
        return Adam(lr)
    raise ValueError(f"unknown optimizer {name!r}")
