"""Ablation harnesses: loss function, augmentation strategy, and
independent-vs-multitask heads.

Each harness trains variants of one base configuration that differ only in
the ablated setting and reports validation concordance per target, shaped
like the corresponding comparison tables. Orderings are dataset-specific,
so callers should assert shape and finiteness, not rankings.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .dataio import DatasetManifest
from .encoders import EncoderConfig, TrainedEncoder, build_encoder, train_encoder
from .errors import UndefinedCorrelationError
from .metrics import ccc, render_table
from .nn.losses import LossSpec

LOSS_KINDS = ("mse", "mae", "ccc_plus_mse", "ccc_plus_mae")
AUG_MODES = ("none", "ssa", "csa")


def _val_ccc(trained: TrainedEncoder, manifest: DatasetManifest) -> dict[str, float]:
    _, preds, truth = trained.predict_split(manifest, "validation")
    out = {}
    for t, p in preds.items():
        try:
            out[t] = ccc(p, truth[t])
        except (UndefinedCorrelationError, ValueError):
            out[t] = float("nan")
    return out


def run_loss_ablation(manifest: DatasetManifest, base: EncoderConfig,
                      kinds=LOSS_KINDS, ccc_weight: float = 0.5) -> list[dict]:
    """One row per loss kind, columns arousal/valence validation concordance."""
    rows = []
    for kind in kinds:
        cfg = replace(base, name=f"{base.name}-loss-{kind}",
                      loss=LossSpec(kind=kind, ccc_weight=ccc_weight))
        trained = train_encoder(build_encoder(cfg), manifest)
        rows.append({"loss": kind, **_val_ccc(trained, manifest)})
    return rows


def run_augmentation_ablation(manifest: DatasetManifest, base: EncoderConfig,
                              modes=AUG_MODES) -> list[dict]:
    """One row per augmentation mode (none / per-chunk sampling / contiguous
    window), columns arousal/valence validation concordance."""
    rows = []
    for mode in modes:
        cfg = replace(base, name=f"{base.name}-aug-{mode}", augmentation=mode)
        trained = train_encoder(build_encoder(cfg), manifest)
        rows.append({"augmentation": mode, **_val_ccc(trained, manifest)})
    return rows


def run_head_ablation(manifest: DatasetManifest, base: EncoderConfig) -> list[dict]:
    """Independent per-target heads vs one joint multitask head.

    The independent row trains one encoder per target and reports each
    encoder's score on its own target; the multitask row is a single model.
    """
    independent = {}
    for head in ("independent_arousal", "independent_valence"):
        cfg = replace(base, name=f"{base.name}-{head}", head=head)
        trained = train_encoder(build_encoder(cfg), manifest)
        independent.update(_val_ccc(trained, manifest))
    multitask_cfg = replace(base, name=f"{base.name}-multitask", head="multitask")
    multitask = _val_ccc(train_encoder(build_encoder(multitask_cfg), manifest), manifest)
    return [
        {"scheme": "independent", **independent},
        {"scheme": "multitask", **multitask},
    ]


def ablation_table(rows: list[dict], key: str) -> str:
    return render_table(rows, [c for c in rows[0] if c != key], key_header=key)
