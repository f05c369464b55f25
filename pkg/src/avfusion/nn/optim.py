"""SGD with momentum and Adam, both with time-based learning-rate decay.

The decayed rate is lr_t = lr0 / (1 + decay * t) with t counting completed
optimizer steps, so the first step uses lr0 exactly. ("Subtractive" or
exponential decay schedules would go here as alternative kinds.)
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("sgd_momentum", "adam")


@dataclass(frozen=True)
class OptimizerConfig:
    kind: str = "sgd_momentum"
    lr0: float = 0.003
    momentum: float = 0.5
    decay: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.98
    eps: float = 1e-8

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")

    def to_json(self) -> dict:
        return {
            "kind": self.kind, "lr0": self.lr0, "momentum": self.momentum,
            "decay": self.decay, "beta1": self.beta1, "beta2": self.beta2,
            "eps": self.eps,
        }

    @staticmethod
    def from_json(obj: dict) -> "OptimizerConfig":
        return OptimizerConfig(**obj)


@dataclass
class Optimizer:
    """Holds per-parameter slot buffers and the step counter.

    step() updates parameter arrays in place, so layers sharing those arrays
    see the new values without rebinding.
    """

    config: OptimizerConfig
    slots: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    t: int = 0

    def _slot(self, name: str, like: np.ndarray, key: str) -> np.ndarray:
        per_param = self.slots.setdefault(name, {})
        if key not in per_param:
            per_param[key] = np.zeros_like(like)
        return per_param[key]

    def step(self, params: dict[str, np.ndarray], grads: dict[str, np.ndarray]) -> None:
        cfg = self.config
        lr = cfg.lr0 / (1.0 + cfg.decay * self.t)
        self.t += 1
        for name in sorted(params):
            theta, g = params[name], grads[name]
            if theta.shape != g.shape:
                raise ValueError(f"{name}: gradient shape {g.shape} != {theta.shape}")
            if cfg.kind == "sgd_momentum":
                v = self._slot(name, theta, "v")
                v *= cfg.momentum
                v -= lr * g
                theta += v
            else:
                m = self._slot(name, theta, "m")
                v = self._slot(name, theta, "v")
                m *= cfg.beta1
                m += (1 - cfg.beta1) * g
                v *= cfg.beta2
                v += (1 - cfg.beta2) * g * g
                mhat = m / (1 - cfg.beta1 ** self.t)
                vhat = v / (1 - cfg.beta2 ** self.t)
                theta -= lr * mhat / (np.sqrt(vhat) + cfg.eps)

    def state_json(self) -> dict:
        """Scalar state for the checkpoint index; buffers persist separately."""
        return {"kind": self.config.kind, "hyperparams": self.config.to_json(), "t": self.t}


def make_optimizer(config: OptimizerConfig) -> Optimizer:
    return Optimizer(config=config)


def optimizer_step(params: dict[str, np.ndarray], grads: dict[str, np.ndarray],
                   state: Optimizer) -> Optimizer:
    """Functional wrapper: one in-place update, returns the advanced state."""
    state.step(params, grads)
    return state
