"""
NovoGrad with per-tensor second moments, plus the warmup + cosine LR schedule.

For every parameter tensor (one "layer"):

    v_t = beta2 * v_{t-1} + (1 - beta2) * ||g_t||^2        (v_1 = ||g_1||^2)
    m_t = beta1 * m_{t-1} + g_t / (sqrt(v_t) + eps) + wd * w
    w   = w - lr * m_t

On the first step ``m_0 = 0``, so ``m_1 = g_1 / (sqrt(v_1) + eps) + wd * w``.
Weight decay is skipped for parameters created with ``decay=False`` (biases and
batch-norm affine terms).
"""

import logging
import math

import numpy as np
from pydantic import BaseModel, Field, NonNegativeInt, PositiveInt, model_validator


class NonFiniteGradientError(FloatingPointError):
    """A gradient contained NaN or infinity."""


class ScheduleConfig(BaseModel):
    peak_lr: float = Field(default=0.05, gt=0)
    warmup_steps: NonNegativeInt = 1000
    total_steps: PositiveInt = 10000

    @model_validator(mode="after")
    def _warmup_before_end(self):
        if self.warmup_steps >= self.total_steps:
            raise ValueError(
                f"warmup_steps ({self.warmup_steps}) must be smaller than total_steps ({self.total_steps})"
            )
        return self


def lr_at(cfg, step):
    """Learning rate at 1-based ``step``: linear warmup, then cosine decay to 0."""
    if not 1 <= step <= cfg.total_steps:
        raise ValueError(f"step must be in [1, {cfg.total_steps}], got {step}")
    if step <= cfg.warmup_steps:
        return cfg.peak_lr * step / cfg.warmup_steps
    progress = (step - cfg.warmup_steps) / (cfg.total_steps - cfg.warmup_steps)
    return cfg.peak_lr * 0.5 * (1.0 + math.cos(math.pi * progress))


class NovoGrad:
    def __init__(self, parameters, beta1=0.8, beta2=0.25, weight_decay=0.001, eps=1e-8):
        self.parameters = list(parameters)
        self.beta1 = beta1
        self.beta2 = beta2
        self.weight_decay = weight_decay
        self.eps = eps
        self.step_count = 0
        self.state = {}

    def step(self, lr):
        for param in self.parameters:
            grad = param.tensor.grad
            if grad is None:
                continue
            if not np.all(np.isfinite(grad)):
                raise NonFiniteGradientError(f"Non-finite gradient in {param.name}")

        for param in self.parameters:
            grad = param.tensor.grad
            if grad is None:
                continue
            weights = param.tensor.data
            norm_sq = float(np.sum(np.square(grad, dtype=np.float64)))
            state = self.state.get(param.name)
            decay = self.weight_decay if param.decay else 0.0
            if state is None:
                v = norm_sq
                m = grad / (math.sqrt(v) + self.eps) + decay * weights
                state = self.state[param.name] = {"step": 0, "v": v, "m": m.astype(weights.dtype)}
            else:
                state["v"] = self.beta2 * state["v"] + (1.0 - self.beta2) * norm_sq
                update = grad / (math.sqrt(state["v"]) + self.eps) + decay * weights
                state["m"] = (self.beta1 * state["m"] + update).astype(weights.dtype)
            state["step"] += 1
            weights -= (lr * state["m"]).astype(weights.dtype)
        self.step_count += 1

    def zero_grad(self):
        for param in self.parameters:
            param.tensor.zero_grad()

    def state_dict(self):
        return {
            "step": self.step_count,
            "hyper": {
                "beta1": self.beta1,
                "beta2": self.beta2,
                "weight_decay": self.weight_decay,
                "eps": self.eps,
            },
            "params": {
                name: {"step": state["step"], "v": state["v"], "m": state["m"].copy()}
                for name, state in self.state.items()
            },
        }

    def load_state_dict(self, state_dict):
        known = {param.name for param in self.parameters}
        unknown = set(state_dict["params"]) - known
        if unknown:
            raise ValueError(f"Optimizer state has unknown parameters: {sorted(unknown)[:5]}")
        hyper = state_dict.get("hyper", {})
        self.beta1 = hyper.get("beta1", self.beta1)
        self.beta2 = hyper.get("beta2", self.beta2)
        self.weight_decay = hyper.get("weight_decay", self.weight_decay)
        self.eps = hyper.get("eps", self.eps)
        self.step_count = int(state_dict["step"])
        self.state = {
            name: {"step": int(state["step"]), "v": float(state["v"]), "m": np.array(state["m"])}
            for name, state in state_dict["params"].items()
        }
        logging.debug(f"Restored optimizer state for {len(self.state)} parameters at step {self.step_count}")
