"""Named parameter arrays and a manual Adam optimizer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class Parameter:
    """A named trainable array with a lazily allocated gradient buffer."""

    name: str
    values: np.ndarray
    grad: np.ndarray | None = None

    def ensure_grad(self) -> np.ndarray:
        if self.grad is None:
            self.grad = np.zeros_like(self.values)
        return self.grad

    def zero_grad(self) -> None:
        if self.grad is not None:
            self.grad.fill(0)


class Adam:
    """Adam with bias correction. Construct with (parameters, lr) groups so
    feature tables and network weights can train at different rates."""

    def __init__(
        self,
        groups,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        self.groups = [(list(params), float(lr)) for params, lr in groups]
        self.beta1 = float(beta1)
        self.beta2 = float(beta2)
        self.eps = float(eps)
        self.step_count = 0
        names = [p.name for params, _ in self.groups for p in params]
        if len(set(names)) != len(names):
            raise ValueError("duplicate parameter names in optimizer groups")
        self._m = {}
        self._v = {}
        for params, _ in self.groups:
            for p in params:
                self._m[p.name] = np.zeros_like(p.values)
                self._v[p.name] = np.zeros_like(p.values)

    def parameters(self):
        for params, _ in self.groups:
            yield from params

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def step(self) -> None:
        self.step_count += 1
        c1 = 1.0 - self.beta1 ** self.step_count
        c2 = 1.0 - self.beta2 ** self.step_count
        for params, lr in self.groups:
            for p in params:
                if p.grad is None:
                    continue
                g = p.grad
                m = self._m[p.name]
                v = self._v[p.name]
                m *= self.beta1
                m += (1.0 - self.beta1) * g
                v *= self.beta2
                v += (1.0 - self.beta2) * (g * g)
                p.values -= (lr / c1) * m / (np.sqrt(v / c2) + self.eps)

    def state_arrays(self):
        """Optimizer state as (name, array) pairs for checkpointing."""
        for name in sorted(self._m):
            yield f"optim.m.{name}", self._m[name]
        for name in sorted(self._v):
            yield f"optim.v.{name}", self._v[name]

    def load_state_arrays(self, arrays: dict, step_count: int) -> None:
        for name, m in self._m.items():
            m[...] = arrays[f"optim.m.{name}"]
        for name, v in self._v.items():
            v[...] = arrays[f"optim.v.{name}"]
        self.step_count = int(step_count)
