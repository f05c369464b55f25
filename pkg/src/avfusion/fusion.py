"""Late fusion: concatenated encoder representations into per-target
epsilon-SVR with an RBF kernel.

The dual is solved in beta space (beta_i = alpha_i - alpha_i*, one box
[-C, C] per point, sum(beta) = 0):

    minimize  0.5 beta' K beta - y' beta + epsilon * ||beta||_1

by sequential minimal optimization: pick the maximally KKT-violating pair,
solve the two-variable subproblem exactly (a piecewise quadratic in the
transfer t with breakpoints where either coefficient crosses zero), repeat
until the violation falls below tolerance. The kernel coefficient defaults
to gamma = 1 / n_features.

Penalty selection runs a grid search over C with grouped k-fold
cross-validation scored by concordance, per target, ties resolved toward
the smaller C.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .dataio import (DatasetManifest, FoldAssignment, UtteranceRecord,
                     kfold_split, read_aff1, write_aff1)
from .encoders import TrainedEncoder
from .errors import ConvergenceError, ManifestError
from .metrics import PccMatrix, ccc, pcc_matrix

TARGETS = ("arousal", "valence")
DEFAULT_C_GRID = (0.1, 0.3, 1.0, 3.0, 10.0, 30.0)


# ---------------------------------------------------------------------------
# Kernel
# ---------------------------------------------------------------------------

def rbf_kernel(x: np.ndarray, y: np.ndarray, gamma: float) -> float:
    """exp(-gamma * ||x - y||^2)."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.shape != y.shape:
        raise ValueError(f"dim mismatch: {x.shape} vs {y.shape}")
    if gamma <= 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    d = x - y
    return float(np.exp(-gamma * (d @ d)))


def rbf_kernel_matrix(A: np.ndarray, B: np.ndarray, gamma: float) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    sq = (A ** 2).sum(axis=1)[:, None] + (B ** 2).sum(axis=1)[None, :] - 2.0 * A @ B.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


# ---------------------------------------------------------------------------
# SMO solver
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SvrSolution:
    beta: np.ndarray      # alpha - alpha*, one per training point
    bias: float
    iterations: int
    kkt_violation: float  # residual at exit


def dual_objective(K: np.ndarray, y: np.ndarray, beta: np.ndarray,
                   epsilon: float) -> float:
    """Value of the maximization form of the dual at beta:
    y'beta - 0.5 beta'K beta - epsilon ||beta||_1. Adding training points can
    only grow the optimum (extra coefficients may stay at zero)."""
    return float(y @ beta - 0.5 * beta @ K @ beta - epsilon * np.abs(beta).sum())


def _solve_pair(beta_i: float, beta_j: float, g_i: float, g_j: float,
                eta: float, epsilon: float, C: float) -> float:
    """Exact minimizer of the two-variable subproblem in the transfer t
    (beta_i += t, beta_j -= t), a piecewise quadratic on the box-induced
    interval with breakpoints where beta_i + t or beta_j - t changes sign."""
    t_lo = max(-C - beta_i, beta_j - C)
    t_hi = min(C - beta_i, beta_j + C)
    delta = g_i - g_j

    def q(t: float) -> float:
        return (0.5 * eta * t * t + delta * t
                + epsilon * (abs(beta_i + t) + abs(beta_j - t)))

    candidates = {t_lo, t_hi}
    for b in (-beta_i, beta_j):
        if t_lo < b < t_hi:
            candidates.add(b)
    bounds = sorted(candidates)
    if eta > 0:
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            mid = 0.5 * (lo + hi)
            s1 = 1.0 if beta_i + mid >= 0 else -1.0
            s2 = 1.0 if beta_j - mid >= 0 else -1.0
            t_star = -(delta + epsilon * (s1 - s2)) / eta
            if lo <= t_star <= hi:
                candidates.add(t_star)
    return min(candidates, key=q)


def solve_svr_dual(K: np.ndarray, y: np.ndarray, C: float, epsilon: float,
                   tol: float = 1e-3, max_updates: int | None = None) -> SvrSolution:
    """SMO with maximal-violating-pair selection.

    Raises ConvergenceError (with the residual) if the update budget runs out
    before the KKT violation drops below tolerance.
    """
    y = np.asarray(y, dtype=float).ravel()
    n = y.size
    if C <= 0 or epsilon < 0:
        raise ValueError(f"need C > 0 and epsilon >= 0, got C={C}, epsilon={epsilon}")
    if max_updates is None:
        max_updates = max(20_000, 10 * n * n)
    beta = np.zeros(n)
    g = -y.copy()  # g = K beta - y, maintained incrementally

    def bounds():
        # cost rate of increasing beta_i (right derivative of |.|) and of
        # decreasing beta_j (left derivative); a pair (i, j) with
        # down_j > up_i + tol violates optimality
        s_up = np.where(beta >= 0, 1.0, -1.0)
        s_dn = np.where(beta > 0, 1.0, -1.0)
        up = np.where(beta < C, g + epsilon * s_up, np.inf)
        down = np.where(beta > -C, g + epsilon * s_dn, -np.inf)
        return up, down

    iterations = 0
    while True:
        up, down = bounds()
        i = int(np.argmin(up))
        j = int(np.argmax(down))
        violation = down[j] - up[i]
        if violation <= tol:
            break
        if iterations >= max_updates:
            raise ConvergenceError(
                f"SMO exhausted {max_updates} updates with KKT violation "
                f"{violation:.3e} > tol {tol:.0e}", residual=float(violation))
        eta = K[i, i] + K[j, j] - 2.0 * K[i, j]
        t = _solve_pair(beta[i], beta[j], g[i], g[j], max(eta, 0.0), epsilon, C)
        if abs(t) < 1e-15:
            raise ConvergenceError(
                f"SMO stalled with KKT violation {violation:.3e}",
                residual=float(violation))
        beta[i] += t
        beta[j] -= t
        g += t * (K[:, i] - K[:, j])
        iterations += 1

    # snap float residue to exact zero so the epsilon-subgradient branch
    # (and with it the bias interval) is unambiguous
    beta[np.abs(beta) < 1e-12 * max(1.0, C)] = 0.0
    up, down = bounds()
    lo = float(np.max(down[np.isfinite(down)])) if np.isfinite(down).any() else None
    hi = float(np.min(up[np.isfinite(up)])) if np.isfinite(up).any() else None
    if lo is None and hi is None:
        bias = 0.0
    elif lo is None:
        bias = -hi
    elif hi is None:
        bias = -lo
    else:
        bias = -(lo + hi) / 2.0
    return SvrSolution(beta=beta, bias=bias, iterations=iterations,
                       kkt_violation=float(max(0.0, down[j] - up[i])))


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------

@dataclass
class SvrModel:
    """Kernel expansion f(x) = sum_i coef_i k(sv_i, x) + bias."""

    support_vectors: np.ndarray  # (m, d)
    dual_coefs: np.ndarray       # (m,) values of alpha - alpha*
    bias: float
    gamma: float
    C: float
    epsilon: float

    def __post_init__(self):
        if self.gamma <= 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if np.any(np.abs(self.dual_coefs) > self.C * (1 + 1e-9)):
            raise ValueError("dual coefficients exceed the box [-C, C]")
        if self.dual_coefs.size and abs(self.dual_coefs.sum()) > 1e-8:
            raise ValueError("dual coefficients violate sum(alpha - alpha*) = 0")

    def predict(self, X: np.ndarray) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.support_vectors.size == 0:
            return np.full(X.shape[0], self.bias)
        if X.shape[1] != self.support_vectors.shape[1]:
            raise ValueError(f"dim mismatch: {X.shape[1]} vs "
                             f"{self.support_vectors.shape[1]}")
        K = rbf_kernel_matrix(X, self.support_vectors, self.gamma)
        return K @ self.dual_coefs + self.bias


def svr_train(X: np.ndarray, y: np.ndarray, C: float, epsilon: float = 0.1,
              gamma: float | None = None, tol: float = 1e-3,
              max_updates: int | None = None) -> SvrModel:
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    if X.ndim != 2 or X.shape[0] != y.size:
        raise ValueError(f"X {X.shape} does not align with y {y.shape}")
    if X.shape[0] < 2:
        raise ValueError(f"need n >= 2 training points, got {X.shape[0]}")
    if gamma is None:
        gamma = 1.0 / X.shape[1]
    K = rbf_kernel_matrix(X, X, gamma)
    sol = solve_svr_dual(K, y, C, epsilon, tol=tol, max_updates=max_updates)
    sv = np.abs(sol.beta) > 1e-12
    return SvrModel(support_vectors=X[sv].copy(), dual_coefs=sol.beta[sv].copy(),
                    bias=sol.bias, gamma=gamma, C=C, epsilon=epsilon)


def svr_predict(model: SvrModel, x: np.ndarray) -> float:
    return float(model.predict(np.atleast_2d(x))[0])


# ---------------------------------------------------------------------------
# Grid search
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class GridSearchResult:
    candidates: tuple[float, ...]
    mean_scores: tuple[float, ...]  # mean held-out-fold concordance per C
    chosen: float

    @property
    def best_score(self) -> float:
        return self.mean_scores[self.candidates.index(self.chosen)]


def grid_search_c(X: np.ndarray, y: np.ndarray, grid: Sequence[float],
                  fold_index: np.ndarray, epsilon: float = 0.1,
                  gamma: float | None = None, tol: float = 1e-3) -> GridSearchResult:
    """Mean held-out concordance per C over the given folds; the chosen C
    maximizes the mean, ties resolved toward the smaller value."""
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).ravel()
    grid = tuple(float(c) for c in grid)
    if not grid:
        raise ValueError("empty C grid")
    fold_index = np.asarray(fold_index, dtype=int)
    folds = sorted(set(fold_index.tolist()))
    for f in folds:
        if (fold_index == f).sum() < 2:
            raise ValueError(f"fold {f} holds < 2 validation points; "
                             "concordance is undefined")
    scores = []
    for C in grid:
        per_fold = []
        for f in folds:
            held = fold_index == f
            model = svr_train(X[~held], y[~held], C=C, epsilon=epsilon,
                              gamma=gamma, tol=tol)
            per_fold.append(ccc(model.predict(X[held]), y[held]))
        scores.append(float(np.mean(per_fold)))
    best = max(range(len(grid)), key=lambda idx: (scores[idx], -grid[idx]))
    return GridSearchResult(candidates=grid, mean_scores=tuple(scores),
                            chosen=grid[best])


# ---------------------------------------------------------------------------
# Fusion
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class FusionConfig:
    c_grid: tuple[float, ...] = DEFAULT_C_GRID
    epsilon: float = 0.1
    gamma: float | None = None  # None -> 1 / n_features
    tol: float = 1e-3
    folds: int = 5
    fold_seed: int = 0
    zscore: bool = True

    def to_json(self) -> dict:
        return {"c_grid": list(self.c_grid), "epsilon": self.epsilon,
                "gamma": self.gamma, "tol": self.tol, "folds": self.folds,
                "fold_seed": self.fold_seed, "zscore": self.zscore}

    @staticmethod
    def from_json(obj: dict) -> "FusionConfig":
        obj = dict(obj)
        obj["c_grid"] = tuple(obj.get("c_grid", DEFAULT_C_GRID))
        return FusionConfig(**obj)


@dataclass
class FusionModel:
    """Per-target SVRs over the z-scored concatenation of member
    representations, in declared member order."""

    members: list[str]
    scaler_mean: np.ndarray
    scaler_std: np.ndarray
    svr: dict[str, SvrModel]
    grid_results: dict[str, GridSearchResult]

    def transform(self, reps: np.ndarray) -> np.ndarray:
        return (reps - self.scaler_mean) / self.scaler_std

    def predict_features(self, reps: np.ndarray) -> dict[str, np.ndarray]:
        Z = self.transform(np.atleast_2d(reps))
        return {t: self.svr[t].predict(Z) for t in self.svr}


def fusion_features(encoders: Sequence[TrainedEncoder], manifest: DatasetManifest,
                    records: Sequence[UtteranceRecord]) -> np.ndarray:
    """Concatenated representations, one row per record, member order kept."""
    rows = []
    for record in records:
        parts = []
        for enc in encoders:
            if record.path_for(enc.config.modality) is None:
                raise ManifestError(
                    f"{record.utterance_id}: missing {enc.config.modality} "
                    f"needed by member {enc.name}")
            parts.append(enc.representation(record, manifest))
        rows.append(np.concatenate(parts))
    return np.stack(rows)


def fuse_train(encoders: Sequence[TrainedEncoder], manifest: DatasetManifest,
               config: FusionConfig = FusionConfig()) -> FusionModel:
    """Fit the late-fusion model on the training split.

    Pipeline: extract representations, z-score each dimension with training
    statistics (zero-variance dimensions fall back to unit scale), grid-search
    C per target under grouped folds, then train the final per-target SVR on
    the full training split with the chosen C.
    """
    train = manifest.split_records("train")
    if not train:
        raise ValueError("training split is empty")
    feats = fusion_features(encoders, manifest, train)
    if config.zscore:
        mean = feats.mean(axis=0)
        std = feats.std(axis=0)
        std[std == 0.0] = 1.0
    else:
        mean = np.zeros(feats.shape[1])
        std = np.ones(feats.shape[1])
    Z = (feats - mean) / std

    ids = [r.utterance_id for r in train]
    folds = kfold_split(ids, config.folds, config.fold_seed,
                        video_of={r.utterance_id: r.video_id for r in train})
    fold_index = folds.fold_indices(ids)

    svrs, grids = {}, {}
    for target in TARGETS:
        y = np.array([getattr(r, target) for r in train])
        grid = grid_search_c(Z, y, config.c_grid, fold_index,
                             epsilon=config.epsilon, gamma=config.gamma,
                             tol=config.tol)
        grids[target] = grid
        svrs[target] = svr_train(Z, y, C=grid.chosen, epsilon=config.epsilon,
                                 gamma=config.gamma, tol=config.tol)
    return FusionModel(members=[e.name for e in encoders], scaler_mean=mean,
                       scaler_std=std, svr=svrs, grid_results=grids)


def _combo_label(members: Sequence[str]) -> str:
    return " + ".join(members)


@dataclass(frozen=True)
class FusionReport:
    """Rows in the shape of the single/multi-modal result tables plus the
    cross-model correlation matrix of single-model validation predictions."""

    rows: list[dict]
    pcc: PccMatrix

    def to_json(self) -> dict:
        return {"rows": self.rows,
                "pcc": {"labels": self.pcc.labels,
                        "matrix": self.pcc.matrix.tolist()}}


def fuse_evaluate(combinations: Sequence[Sequence[str]],
                  encoders: Mapping[str, TrainedEncoder],
                  manifest: DatasetManifest,
                  config: FusionConfig = FusionConfig()) -> FusionReport:
    """Train and score every member combination.

    Per combination the row carries the grouped-CV concordance at the chosen
    C (the table columns: arousal, valence, mean) plus validation-split
    concordance; rows sort by mean CV concordance, descending. Single-member
    combinations also contribute their validation predictions (arousal then
    valence, concatenated) to the correlation matrix.
    """
    val = manifest.split_records("validation")
    if len(val) < 2:
        raise ValueError("fuse_evaluate needs a validation split with >= 2 records")
    truth = {t: np.array([getattr(r, t) for r in val]) for t in TARGETS}
    rows = []
    single_preds: dict[str, np.ndarray] = {}
    for members in combinations:
        members = list(members)
        missing = [m for m in members if m not in encoders]
        if missing:
            raise KeyError(f"unknown encoder member(s): {missing}")
        model = fuse_train([encoders[m] for m in members], manifest, config)
        reps = fusion_features([encoders[m] for m in members], manifest, val)
        preds = model.predict_features(reps)
        row = {"model": _combo_label(members)}
        for t in TARGETS:
            row[t] = model.grid_results[t].best_score
        row["mean"] = float(np.mean([row[t] for t in TARGETS]))
        for t in TARGETS:
            row[f"val_{t}"] = ccc(preds[t], truth[t])
            row[f"chosen_c_{t}"] = model.grid_results[t].chosen
        row["val_mean"] = float(np.mean([row[f"val_{t}"] for t in TARGETS]))
        rows.append(row)
        if len(members) == 1:
            single_preds[members[0]] = np.concatenate([preds[t] for t in TARGETS])
    rows.sort(key=lambda r: -r["mean"])
    matrix = pcc_matrix(single_preds) if single_preds else PccMatrix([], np.zeros((0, 0)))
    return FusionReport(rows=rows, pcc=matrix)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_fusion(model: FusionModel, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    write_aff1(directory / "scaler_mean.aff1", model.scaler_mean)
    write_aff1(directory / "scaler_std.aff1", model.scaler_std)
    meta = {"members": model.members, "targets": {}}
    for target, svr in model.svr.items():
        if svr.support_vectors.size:
            write_aff1(directory / f"{target}_sv.aff1", svr.support_vectors)
            write_aff1(directory / f"{target}_coefs.aff1", svr.dual_coefs)
        grid = model.grid_results[target]
        meta["targets"][target] = {
            "bias": svr.bias, "gamma": svr.gamma, "C": svr.C,
            "epsilon": svr.epsilon, "n_sv": int(svr.dual_coefs.size),
            "dim": int(model.scaler_mean.size),
            "grid": {"candidates": list(grid.candidates),
                     "mean_scores": list(grid.mean_scores),
                     "chosen": grid.chosen},
        }
    with open(directory / "fusion.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_fusion(directory: str | Path) -> FusionModel:
    directory = Path(directory)
    meta = json.loads((directory / "fusion.json").read_text())
    mean = read_aff1(directory / "scaler_mean.aff1").astype(float)
    std = read_aff1(directory / "scaler_std.aff1").astype(float)
    svrs, grids = {}, {}
    for target, info in meta["targets"].items():
        if info["n_sv"]:
            sv = read_aff1(directory / f"{target}_sv.aff1").astype(float)
            coefs = read_aff1(directory / f"{target}_coefs.aff1").astype(float)
        else:
            sv = np.zeros((0, info["dim"]))
            coefs = np.zeros(0)
        svrs[target] = SvrModel(support_vectors=np.atleast_2d(sv), dual_coefs=coefs,
                                bias=info["bias"], gamma=info["gamma"],
                                C=info["C"], epsilon=info["epsilon"])
        g = info["grid"]
        grids[target] = GridSearchResult(candidates=tuple(g["candidates"]),
                                         mean_scores=tuple(g["mean_scores"]),
                                         chosen=g["chosen"])
    return FusionModel(members=list(meta["members"]), scaler_mean=mean,
                       scaler_std=std, svr=svrs, grid_results=grids)
