"""Agreement and error metrics for arousal/valence regression.

Concordance here is Lin's coefficient with population (1/N) moments:

    ccc(x, y) = 2 cov(x, y) / (var(x) + var(y) + (mean(x) - mean(y))^2)

which penalizes both decorrelation and location/scale shift. Undefined
correlations raise :class:`UndefinedCorrelationError` instead of returning 0.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import UndefinedCorrelationError

TARGETS = ("arousal", "valence")


def _moments(x: np.ndarray, y: np.ndarray):
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    if x.size < 2:
        raise ValueError(f"need n >= 2, got n={x.size}")
    mx, my = x.mean(), y.mean()
    vx = float(((x - mx) ** 2).mean())
    vy = float(((y - my) ** 2).mean())
    cov = float(((x - mx) * (y - my)).mean())
    return mx, my, vx, vy, cov


def pearson(x: np.ndarray, y: np.ndarray) -> float:
    """Pearson correlation with population moments."""
    _, _, vx, vy, cov = _moments(x, y)
    if vx == 0.0 or vy == 0.0:
        raise UndefinedCorrelationError("pearson undefined for a constant input")
    return cov / np.sqrt(vx * vy)


def ccc(x: np.ndarray, y: np.ndarray) -> float:
    """Lin's concordance correlation coefficient (population moments)."""
    mx, my, vx, vy, cov = _moments(x, y)
    denom = vx + vy + (mx - my) ** 2
    if denom == 0.0:
        raise UndefinedCorrelationError(
            "ccc undefined: both inputs constant with equal means"
        )
    return 2.0 * cov / denom


def error_metrics(x: np.ndarray, y: np.ndarray) -> dict[str, float]:
    """Mean squared and mean absolute error between two aligned arrays."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {y.shape}")
    diff = x - y
    return {"mse": float((diff ** 2).mean()), "mae": float(np.abs(diff).mean())}


@dataclass(frozen=True)
class MetricsReport:
    """Per-target ccc/pcc/mse/mae over n samples."""

    per_target: dict[str, dict[str, float]]
    n: int

    def to_json(self) -> dict:
        return {"n": self.n, "targets": self.per_target}


def evaluate_predictions(
    pred: Mapping[str, np.ndarray], truth: Mapping[str, np.ndarray]
) -> MetricsReport:
    """Full metric set per target for aligned prediction/truth vectors."""
    per_target = {}
    n = None
    for target, p in pred.items():
        t = np.asarray(truth[target], dtype=float).ravel()
        p = np.asarray(p, dtype=float).ravel()
        n = p.size if n is None else n
        row = dict(error_metrics(p, t))
        row["ccc"] = ccc(p, t)
        row["pcc"] = pearson(p, t)
        per_target[target] = row
    return MetricsReport(per_target=per_target, n=int(n or 0))


@dataclass(frozen=True)
class PccMatrix:
    """Symmetric Pearson-correlation matrix between model prediction vectors.

    Cells involving a constant prediction vector are undefined and stored as
    NaN; the diagonal is 1 for every non-constant prediction.
    """

    labels: list[str]
    matrix: np.ndarray

    def to_csv(self) -> str:
        lines = ["," + ",".join(self.labels)]
        for label, row in zip(self.labels, self.matrix):
            cells = ",".join("" if np.isnan(v) else f"{v:.6f}" for v in row)
            lines.append(f"{label},{cells}")
        return "\n".join(lines) + "\n"


def pcc_matrix(predictions: Mapping[str, np.ndarray]) -> PccMatrix:
    """Pairwise Pearson correlations between named prediction vectors."""
    labels = list(predictions)
    vecs = [np.asarray(predictions[m], dtype=float).ravel() for m in labels]
    sizes = {v.size for v in vecs}
    if len(sizes) > 1:
        raise ValueError(f"prediction vectors differ in length: {sorted(sizes)}")
    if vecs and vecs[0].size < 2:
        raise ValueError("prediction vectors need length >= 2")
    m = len(labels)
    M = np.full((m, m), np.nan)
    for i in range(m):
        for j in range(i, m):
            try:
                M[i, j] = M[j, i] = pearson(vecs[i], vecs[j])
            except UndefinedCorrelationError:
                pass  # flagged as NaN
    return PccMatrix(labels=labels, matrix=M)


def render_table(rows: list[dict], columns: list[str], key_header: str = "model") -> str:
    """Aligned text table, one row per model/combination."""
    headers = [key_header] + columns
    cells = [[str(r[key_header])] + [
        f"{r[c]:.4f}" if isinstance(r[c], float) and np.isfinite(r[c]) else str(r[c])
        for c in columns
    ] for r in rows]
    widths = [max(len(h), *(len(c[i]) for c in cells)) if cells else len(h)
              for i, h in enumerate(headers)]
    def fmt(vals):
        return "  ".join(v.ljust(w) for v, w in zip(vals, widths)).rstrip()
    lines = [fmt(headers), fmt(["-" * w for w in widths])]
    lines.extend(fmt(c) for c in cells)
    return "\n".join(lines) + "\n"
