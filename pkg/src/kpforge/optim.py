"""AdamW with decoupled weight decay, global-norm clipping, and the
linear warmup / linear-decay-to-zero learning-rate schedule."""

from __future__ import annotations

import math

import numpy as np

from kpforge import autodiff as ad
from kpforge.errors import NumericError


class LinearSchedule:
    """lr ramps linearly over the warmup steps, then decays linearly to 0."""

    def __init__(self, base_lr: float, total_steps: int, warmup_fraction: float = 0.0):
        self.base_lr = base_lr
        self.total_steps = max(1, total_steps)
        self.warmup_steps = int(round(warmup_fraction * self.total_steps))

    def lr_at(self, step: int) -> float:
        if step < self.warmup_steps:
            return self.base_lr * (step + 1) / self.warmup_steps
        remaining = self.total_steps - step
        span = max(1, self.total_steps - self.warmup_steps)
        return self.base_lr * max(0.0, remaining / span)


class AdamW:
    def __init__(
        self,
        params: dict[str, ad.Tensor],
        lr: float = 1e-3,
        betas: tuple[float, float] = (0.9, 0.999),
        eps: float = 1e-8,
        weight_decay: float = 0.01,
        max_grad_norm: float | None = 1.0,
    ) -> None:
        self.params = params
        self.lr = lr
        self.beta1, self.beta2 = betas
        self.eps = eps
        self.weight_decay = weight_decay
        self.max_grad_norm = max_grad_norm
        self.step_count = 0
        self._m = {name: np.zeros_like(p.data) for name, p in params.items()}
        self._v = {name: np.zeros_like(p.data) for name, p in params.items()}

    def zero_grad(self) -> None:
        for param in self.params.values():
            param.grad = None

    def clip_gradients(self) -> float:
        """Scale all gradients so their global L2 norm is at most the cap."""
        total = 0.0
        for param in self.params.values():
            if param.grad is not None:
                total += float((param.grad**2).sum())
        norm = math.sqrt(total)
        if self.max_grad_norm is not None and norm > self.max_grad_norm > 0:
            scale = self.max_grad_norm / norm
            for param in self.params.values():
                if param.grad is not None:
                    param.grad *= scale
        return norm

    def step(self, lr: float | None = None) -> None:
        lr = self.lr if lr is None else lr
        self.step_count += 1
        correction1 = 1.0 - self.beta1**self.step_count
        correction2 = 1.0 - self.beta2**self.step_count
        for name, param in self.params.items():
            grad = param.grad
            if grad is None:
                continue
            if not np.isfinite(grad).all():
                raise NumericError(f"non-finite gradient for parameter {name!r}")
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * grad
            v *= self.beta2
            v += (1.0 - self.beta2) * grad**2
            update = (m / correction1) / (np.sqrt(v / correction2) + self.eps)
            param.data -= lr * (update + self.weight_decay * param.data)
