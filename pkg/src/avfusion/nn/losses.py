"""Training losses over a batch of per-target predictions.

The concordance loss is batch-wise: each target column contributes
1 - ccc(pred_col, truth_col) computed with population moments over the
batch, and combined losses mix that with mse or mae:

    loss = lam * ccc_loss + (1 - lam) * pointwise_loss

A zero-variance prediction or truth column under any ccc-containing loss
raises instead of returning 0: a silently "perfect" constant column would
mask a dead model.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import UndefinedCorrelationError

KINDS = ("mse", "mae", "ccc", "ccc_plus_mse", "ccc_plus_mae")
COMBINED = ("ccc_plus_mse", "ccc_plus_mae")


@dataclass(frozen=True)
class LossSpec:
    """Loss kind plus the concordance weight for combined kinds."""

    kind: str = "mae"
    ccc_weight: float = 0.5

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if self.kind in COMBINED and not 0.0 <= self.ccc_weight <= 1.0:
            raise ValueError(f"ccc_weight must be in [0, 1], got {self.ccc_weight}")

    @property
    def uses_ccc(self) -> bool:
        return self.kind.startswith("ccc")

    def to_json(self) -> dict:
        obj = {"kind": self.kind}
        if self.kind in COMBINED:
            obj["ccc_weight"] = self.ccc_weight
        return obj

    @staticmethod
    def from_json(obj: dict) -> "LossSpec":
        return LossSpec(kind=obj["kind"], ccc_weight=obj.get("ccc_weight", 0.5))


def _mse(pred, truth):
    diff = pred - truth
    return float((diff ** 2).mean()), 2.0 * diff / diff.size


def _mae(pred, truth):
    diff = pred - truth
    return float(np.abs(diff).mean()), np.sign(diff) / diff.size


def _ccc_loss(pred, truth):
    n, n_targets = pred.shape
    if n < 2:
        raise ValueError(f"ccc losses need batch >= 2, got {n}")
    total = 0.0
    grad = np.zeros_like(pred)
    for j in range(n_targets):
        p, t = pred[:, j], truth[:, j]
        pc, tc = p - p.mean(), t - t.mean()
        vp = float((pc ** 2).mean())
        vt = float((tc ** 2).mean())
        if vp == 0.0 or vt == 0.0:
            raise UndefinedCorrelationError(
                f"zero-variance {'prediction' if vp == 0.0 else 'truth'} column "
                f"{j} under a ccc loss"
            )
        cov = float((pc * tc).mean())
        gap = float(p.mean() - t.mean())
        denom = vp + vt + gap * gap
        c = 2.0 * cov / denom
        total += 1.0 - c
        # d ccc / d p_i = 2/(n*denom) * (tc_i - ccc*(pc_i + gap))
        grad[:, j] = -(2.0 / (n * denom)) * (tc - c * (pc + gap))
    return total / n_targets, grad / n_targets


def loss_eval(pred: np.ndarray, truth: np.ndarray, spec: LossSpec) -> tuple[float, np.ndarray]:
    """Scalar loss and its gradient w.r.t. the predictions.

    pred and truth are (batch, targets); multi-target losses average
    uniformly over targets (joint arousal/valence training).
    """
    pred = np.asarray(pred, dtype=float)
    truth = np.asarray(truth, dtype=float)
    if pred.shape != truth.shape or pred.ndim != 2:
        raise ValueError(f"pred/truth must match as (batch, targets): "
                         f"{pred.shape} vs {truth.shape}")
    if spec.kind == "mse":
        return _mse(pred, truth)
    if spec.kind == "mae":
        return _mae(pred, truth)
    if spec.kind == "ccc":
        return _ccc_loss(pred, truth)
    c_loss, c_grad = _ccc_loss(pred, truth)
    p_loss, p_grad = _mse(pred, truth) if spec.kind == "ccc_plus_mse" else _mae(pred, truth)
    lam = spec.ccc_weight
    return lam * c_loss + (1 - lam) * p_loss, lam * c_grad + (1 - lam) * p_grad
