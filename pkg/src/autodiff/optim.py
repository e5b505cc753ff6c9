from typing import Dict, List, Sequence

import numpy as np

from tensor import Parameter


class Adam:
    """Adaptive-moment gradient descent with bias correction."""

    def __init__(self, params: Sequence[Parameter], lr: float = 1e-4,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8) -> None:
        self.params: List[Parameter] = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m = [np.zeros_like(p.data) for p in self.params]
        self.v = [np.zeros_like(p.data) for p in self.params]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, m, v in zip(self.params, self.m, self.v):
            g = p.grad
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data = p.data - self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def state(self) -> Dict[str, object]:
        return {"t": self.t, "m": self.m, "v": self.v}

    def load_state(self, t: int, m: Sequence[np.ndarray], v: Sequence[np.ndarray]) -> None:
        if len(m) != len(self.params) or len(v) != len(self.params):
            raise ValueError("Optimizer state does not match the parameter list")
        for p, mi, vi in zip(self.params, m, v):
            if mi.shape != p.shape or vi.shape != p.shape:
                raise ValueError(f"Optimizer moment shape mismatch for parameter of shape {p.shape}")
        self.t = int(t)
        self.m = [np.array(mi, dtype=np.float64) for mi in m]
        self.v = [np.array(vi, dtype=np.float64) for vi in v]


__all__ = ["Adam"]
