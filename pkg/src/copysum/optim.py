"""Adam with decoupled weight decay, plus a validation-plateau lr policy.

Decay is applied directly to the parameter value (never folded into the
gradient) and skipped entirely for parameters flagged ``decay_exempt``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .autodiff import Parameter
from .errors import ContractError


@dataclass
class AdamState:
    """Per-parameter moment estimates; shapes must match the parameter."""

    step_count: int
    m: np.ndarray
    v: np.ndarray


class AdamW:
    def __init__(
        self,
        params: list[Parameter],
        lr: float = 1e-3,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
        weight_decay: float = 0.01,
    ):
        if not 0.0 <= beta1 < 1.0 or not 0.0 <= beta2 < 1.0:
            raise ContractError(f"invalid betas ({beta1}, {beta2})")
        if lr < 0.0 or eps <= 0.0 or weight_decay < 0.0:
            raise ContractError("lr and weight_decay must be >= 0, eps > 0")
        self.params = list(params)
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.weight_decay = weight_decay
        self.states = [
            AdamState(0, np.zeros_like(p.data), np.zeros_like(p.data))
            for p in self.params
        ]

    def zero_grad(self) -> None:
        for p in self.params:
            p.zero_grad()

    def step(self) -> None:
        """One bias-corrected update from the currently stored gradients."""
        for p, state in zip(self.params, self.states):
            if state.m.shape != p.data.shape:
                raise ContractError(
                    f"optimizer state shape {state.m.shape} does not match "
                    f"parameter {p.name!r} shape {p.data.shape}"
                )
            g = p.grad
            state.step_count += 1
            t = state.step_count
            state.m = self.beta1 * state.m + (1.0 - self.beta1) * g
            state.v = self.beta2 * state.v + (1.0 - self.beta2) * (g * g)
            m_hat = state.m / (1.0 - self.beta1**t)
            v_hat = state.v / (1.0 - self.beta2**t)
            p.data -= self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
            if self.weight_decay and not p.decay_exempt:
                p.data -= self.lr * self.weight_decay * p.data


@dataclass
class PlateauHalver:
    """Halve the learning rate when validation loss stops improving.

    The loss must improve by more than ``min_delta`` within ``patience``
    consecutive checks, otherwise the rate is halved and the window resets.
    """

    patience: int = 2
    min_delta: float = 1e-4
    best: float = field(default=float("inf"), init=False)
    stale_checks: int = field(default=0, init=False)

    def update(self, optimizer: AdamW, val_loss: float) -> bool:
        """Record one validation check; returns True if the lr was halved."""
        if val_loss < self.best - self.min_delta:
            self.best = val_loss
            self.stale_checks = 0
            return False
        self.stale_checks += 1
        if self.stale_checks >= self.patience:
            optimizer.lr *= 0.5
            self.stale_checks = 0
            return True
        return False
