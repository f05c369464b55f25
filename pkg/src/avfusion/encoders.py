"""Per-modality encoders assembled from the nn kernel.

Five architectures over precomputed features:

* ``vis_cnn1d``   frame features -> parallel 1D convolutions (widths 2..5) ->
                  per-width masked global max pool -> concat -> FC+relu -> head
* ``vis_lstm_attn`` frame features -> LSTM -> attention pooling -> FC+relu -> head
* ``text_mha``    token embeddings -> multi-head self-attention -> masked mean
                  -> FC+relu -> head
* ``aud_conv1d``  raw waveform -> 8 strided conv+relu layers -> masked global
                  pool -> head
* ``aud_mlp``     selected hand-crafted features -> FC stack -> head

Heads regress arousal and valence jointly (multitask, output dim 2) or one
target independently (dim 1); all non-head parameters are seeded per layer,
so the two head modes share identical trunk initializations for one seed.

Each architecture designates a penultimate representation for late fusion.
"""

from __future__ import annotations

import copy
import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable

import numpy as np

from . import dataio
from .dataio import (DatasetManifest, FeatureSequence, UtteranceRecord,
                     csa_sample, downsample_every_k, pad_truncate, ssa_sample)
from .errors import DivergenceError, ManifestError, UndefinedCorrelationError
from .metrics import ccc
from .nn.checkpoint import load_checkpoint, save_checkpoint
from .nn.layers import (Activation, AttentionPool, Conv1d, Conv1dMultiWidth,
                        Dense, GlobalPool, Layer, Lstm, MultiHeadAttention,
                        conv_window_mask)
from .nn.losses import LossSpec
from .nn.optim import Optimizer, OptimizerConfig, make_optimizer
from .rng import stream

ARCHS = ("vis_lstm_attn", "vis_cnn1d", "text_mha", "aud_conv1d", "aud_mlp")
HEADS = ("independent_arousal", "independent_valence", "multitask")
AUGMENTATIONS = ("none", "ssa", "csa")

ARCH_MODALITY = {
    "vis_lstm_attn": "visual",
    "vis_cnn1d": "visual",
    "text_mha": "text_emb",
    "aud_conv1d": "audio_wave",
    "aud_mlp": "audio_vec",
}

# (width, stride, channels) per layer; halves the length at every layer and
# grows channels toward the 256-D pooled feature.
DEFAULT_WAVE_STACK = (
    (8, 2, 16), (8, 2, 16), (8, 2, 32), (8, 2, 32),
    (8, 2, 64), (8, 2, 64), (8, 2, 128), (8, 2, 256),
)


@dataclass(frozen=True)
class EncoderConfig:
    name: str
    arch: str
    input_dim: int
    head: str = "multitask"
    loss: LossSpec = field(default_factory=LossSpec)
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)
    epochs: int = 50
    batch_size: int = 64
    seed: int = 0
    precision: str = "f64"
    # frame pipeline
    seq_len: int = 64
    downsample_k: int = 5
    augmentation: str = "none"
    ssa_chunk: int = 5
    csa_window: int = 64
    token_cap: int = 32
    # architecture sizes
    hidden: int = 256
    att_dim: int | None = None
    fc_dim: int = 256
    conv_widths: tuple[int, ...] = (2, 3, 4, 5)
    conv_channels: int = 64
    n_heads: int = 8
    head_dim: int = 64
    mlp_hidden: tuple[int, ...] = (256, 128)
    wave_len: int = 600000
    wave_stack: tuple[tuple[int, int, int], ...] = DEFAULT_WAVE_STACK
    wave_pool: str = "max"

    def __post_init__(self):
        if self.arch not in ARCHS:
            raise ValueError(f"arch must be one of {ARCHS}, got {self.arch!r}")
        if self.head not in HEADS:
            raise ValueError(f"head must be one of {HEADS}, got {self.head!r}")
        if self.augmentation not in AUGMENTATIONS:
            raise ValueError(f"augmentation must be one of {AUGMENTATIONS}")
        if self.augmentation != "none" and not self.arch.startswith("vis_"):
            raise ValueError("ssa/csa augmentation applies to frame sequences "
                             f"(vis_* archs), not {self.arch}")
        if self.precision not in ("f32", "f64"):
            raise ValueError(f"precision must be f32 or f64, got {self.precision!r}")
        if self.input_dim < 1 or self.epochs < 0 or self.batch_size < 1:
            raise ValueError("input_dim/batch_size must be >= 1 and epochs >= 0")

    @property
    def dtype(self):
        return np.float32 if self.precision == "f32" else np.float64

    @property
    def targets(self) -> tuple[str, ...]:
        if self.head == "multitask":
            return ("arousal", "valence")
        return (self.head.removeprefix("independent_"),)

    @property
    def n_out(self) -> int:
        return len(self.targets)

    @property
    def modality(self) -> str:
        return ARCH_MODALITY[self.arch]

    def to_json(self) -> dict:
        obj = {
            "name": self.name, "arch": self.arch, "input_dim": self.input_dim,
            "head": self.head, "loss": self.loss.to_json(),
            "optimizer": self.optimizer.to_json(), "epochs": self.epochs,
            "batch_size": self.batch_size, "seed": self.seed,
            "precision": self.precision, "seq_len": self.seq_len,
            "downsample_k": self.downsample_k, "augmentation": self.augmentation,
            "ssa_chunk": self.ssa_chunk, "csa_window": self.csa_window,
            "token_cap": self.token_cap, "hidden": self.hidden,
            "att_dim": self.att_dim, "fc_dim": self.fc_dim,
            "conv_widths": list(self.conv_widths),
            "conv_channels": self.conv_channels, "n_heads": self.n_heads,
            "head_dim": self.head_dim, "mlp_hidden": list(self.mlp_hidden),
            "wave_len": self.wave_len,
            "wave_stack": [list(layer) for layer in self.wave_stack],
            "wave_pool": self.wave_pool,
        }
        return obj

    @staticmethod
    def from_json(obj: dict) -> "EncoderConfig":
        obj = dict(obj)
        obj["loss"] = LossSpec.from_json(obj["loss"])
        obj["optimizer"] = OptimizerConfig.from_json(obj["optimizer"])
        obj["conv_widths"] = tuple(obj["conv_widths"])
        obj["mlp_hidden"] = tuple(obj["mlp_hidden"])
        obj["wave_stack"] = tuple(tuple(layer) for layer in obj["wave_stack"])
        return EncoderConfig(**obj)


def default_config(arch: str, name: str | None = None, **overrides) -> EncoderConfig:
    """Paper-scale defaults per architecture (input dims, optimizer)."""
    base = {
        "vis_lstm_attn": dict(input_dim=512),
        "vis_cnn1d": dict(input_dim=512),
        "text_mha": dict(input_dim=400,
                         optimizer=OptimizerConfig(kind="sgd_momentum", lr0=0.005,
                                                   momentum=0.5, decay=0.001)),
        "aud_conv1d": dict(input_dim=1,
                           optimizer=OptimizerConfig(kind="sgd_momentum", lr0=0.003,
                                                     momentum=0.5, decay=0.001)),
        "aud_mlp": dict(input_dim=256),
    }
    if arch not in base:
        raise ValueError(f"arch must be one of {ARCHS}, got {arch!r}")
    kwargs = dict(base[arch])
    kwargs.update(overrides)
    return EncoderConfig(name=name or arch, arch=arch, **kwargs)


# ---------------------------------------------------------------------------
# Architecture bodies
# ---------------------------------------------------------------------------

class _VisCnn(Layer):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        dt = cfg.dtype
        seed = cfg.seed
        self.widths = cfg.conv_widths
        self.conv = Conv1dMultiWidth(cfg.input_dim, cfg.conv_channels, cfg.conv_widths,
                                     stream(seed, "init.conv"), dtype=dt)
        self.pools = [GlobalPool("max") for _ in cfg.conv_widths]
        self.fc = Dense(len(cfg.conv_widths) * cfg.conv_channels, cfg.fc_dim,
                        stream(seed, "init.fc"), dtype=dt)
        self.relu = Activation("relu")
        self.head = Dense(cfg.fc_dim, cfg.n_out, stream(seed, "init.head"), dtype=dt)
        self._adopt("conv", self.conv)
        self._adopt("fc", self.fc)
        self._adopt("head", self.head)
        self.rep_dim = len(cfg.conv_widths) * cfg.conv_channels

    def forward(self, x, mask=None):
        maps = self.conv.forward(x)
        pooled = [pool.forward(m, conv_window_mask(mask, w) if mask is not None else None)
                  for pool, m, w in zip(self.pools, maps, self.widths)]
        rep = np.concatenate(pooled)
        hid = self.relu.forward(self.fc.forward(rep[None, :]))
        return self.head.forward(hid)[0], rep

    def backward(self, grad_pred):
        g = self.head.backward(grad_pred[None, :])
        g = self.fc.backward(self.relu.backward(g))[0]
        ch = g.size // len(self.pools)
        grads = [pool.backward(g[i * ch:(i + 1) * ch])
                 for i, pool in enumerate(self.pools)]
        return self.conv.backward(grads)


class _VisLstm(Layer):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        dt = cfg.dtype
        seed = cfg.seed
        att_dim = cfg.att_dim if cfg.att_dim is not None else cfg.hidden
        self.lstm = Lstm(cfg.input_dim, cfg.hidden, stream(seed, "init.lstm"), dtype=dt)
        self.attn = AttentionPool(cfg.hidden, att_dim, stream(seed, "init.attn"), dtype=dt)
        self.fc = Dense(cfg.hidden, cfg.fc_dim, stream(seed, "init.fc"), dtype=dt)
        self.relu = Activation("relu")
        self.head = Dense(cfg.fc_dim, cfg.n_out, stream(seed, "init.head"), dtype=dt)
        for prefix, child in (("lstm", self.lstm), ("attn", self.attn),
                              ("fc", self.fc), ("head", self.head)):
            self._adopt(prefix, child)
        self.rep_dim = cfg.hidden

    def forward(self, x, mask=None):
        H = self.lstm.forward(x, mask)
        ctx, _ = self.attn.forward(H, mask)
        hid = self.relu.forward(self.fc.forward(ctx[None, :]))
        return self.head.forward(hid)[0], ctx

    def backward(self, grad_pred):
        g = self.head.backward(grad_pred[None, :])
        gctx = self.fc.backward(self.relu.backward(g))[0]
        gH = self.attn.backward(gctx)
        return self.lstm.backward(gH)


class _TextMha(Layer):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        dt = cfg.dtype
        seed = cfg.seed
        self.mha = MultiHeadAttention(cfg.input_dim, cfg.n_heads, cfg.head_dim,
                                      stream(seed, "init.mha"), dtype=dt)
        self.pool = GlobalPool("avg")
        self.fc = Dense(cfg.input_dim, cfg.fc_dim, stream(seed, "init.fc"), dtype=dt)
        self.relu = Activation("relu")
        self.head = Dense(cfg.fc_dim, cfg.n_out, stream(seed, "init.head"), dtype=dt)
        self._adopt("mha", self.mha)
        self._adopt("fc", self.fc)
        self._adopt("head", self.head)
        self.rep_dim = cfg.fc_dim

    def forward(self, x, mask=None):
        enc = self.mha.forward(x, mask)
        mean = self.pool.forward(enc, mask)
        hid = self.relu.forward(self.fc.forward(mean[None, :]))
        return self.head.forward(hid)[0], hid[0]

    def backward(self, grad_pred):
        g = self.head.backward(grad_pred[None, :])
        gmean = self.fc.backward(self.relu.backward(g))[0]
        genc = self.pool.backward(gmean)
        return self.mha.backward(genc)


class _AudConv(Layer):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        dt = cfg.dtype
        seed = cfg.seed
        self.stack_spec = cfg.wave_stack
        self.convs, self.relus = [], []
        n_in = cfg.input_dim
        for i, (width, stride, channels) in enumerate(cfg.wave_stack):
            conv = Conv1d(n_in, channels, width, stream(seed, f"init.stack{i}"),
                          stride=stride, dtype=dt)
            self.convs.append(conv)
            self.relus.append(Activation("relu"))
            self._adopt(f"stack{i}", conv)
            n_in = channels
        self.pool = GlobalPool(cfg.wave_pool)
        self.head = Dense(n_in, cfg.n_out, stream(seed, "init.head"), dtype=dt)
        self._adopt("head", self.head)
        self.rep_dim = n_in

    def forward(self, x, mask=None):
        cur, curmask = x, mask
        for conv, relu, (width, stride, _) in zip(self.convs, self.relus, self.stack_spec):
            cur = relu.forward(conv.forward(cur))
            if curmask is not None:
                curmask = conv_window_mask(curmask, width, stride)
        rep = self.pool.forward(cur, curmask)
        return self.head.forward(rep[None, :])[0], rep

    def backward(self, grad_pred):
        g = self.head.backward(grad_pred[None, :])[0]
        g = self.pool.backward(g)
        for conv, relu in zip(reversed(self.convs), reversed(self.relus)):
            g = conv.backward(relu.backward(g))
        return g


class _AudMlp(Layer):
    def __init__(self, cfg: EncoderConfig):
        super().__init__()
        dt = cfg.dtype
        seed = cfg.seed
        self.fcs, self.relus = [], []
        n_in = cfg.input_dim
        for i, width in enumerate(cfg.mlp_hidden):
            fc = Dense(n_in, width, stream(seed, f"init.mlp{i}"), dtype=dt)
            self.fcs.append(fc)
            self.relus.append(Activation("relu"))
            self._adopt(f"mlp{i}", fc)
            n_in = width
        self.head = Dense(n_in, cfg.n_out, stream(seed, "init.head"), dtype=dt)
        self._adopt("head", self.head)
        self.rep_dim = n_in

    def forward(self, x, mask=None):
        cur = x[None, :]
        for fc, relu in zip(self.fcs, self.relus):
            cur = relu.forward(fc.forward(cur))
        return self.head.forward(cur)[0], cur[0]

    def backward(self, grad_pred):
        g = self.head.backward(grad_pred[None, :])
        for fc, relu in zip(reversed(self.fcs), reversed(self.relus)):
            g = fc.backward(relu.backward(g))
        return g[0]


_ARCH_BODIES = {
    "vis_cnn1d": _VisCnn,
    "vis_lstm_attn": _VisLstm,
    "text_mha": _TextMha,
    "aud_conv1d": _AudConv,
    "aud_mlp": _AudMlp,
}


class Encoder:
    """Untrained model: architecture body plus the input pipeline."""

    def __init__(self, config: EncoderConfig):
        self.config = config
        self.body = _ARCH_BODIES[config.arch](config)
        self.params = self.body.params
        self.grads = self.body.grads
        self.selected_idx: np.ndarray | None = None  # aud_mlp feature selection

    @property
    def rep_dim(self) -> int:
        return self.body.rep_dim

    def zero_grads(self):
        self.body.zero_grads()

    def forward(self, x, mask=None):
        """(predictions, representation) for one prepared input."""
        return self.body.forward(x, mask)

    def backward(self, grad_pred):
        return self.body.backward(grad_pred)

    # -- input pipeline ----------------------------------------------------

    def prepare(self, raw: np.ndarray, train: bool = False,
                aug_rng: np.random.Generator | None = None):
        """Raw stored array -> (input, mask) for this architecture.

        Training on frame sequences applies the configured augmentation with
        fresh draws; evaluation always uses the deterministic path
        (downsample every k, then pad/cap).
        """
        cfg = self.config
        raw = np.asarray(raw, dtype=cfg.dtype)
        if cfg.arch.startswith("vis_"):
            seq = FeatureSequence(raw)
            if train and cfg.augmentation == "ssa":
                seq = ssa_sample(seq, cfg.ssa_chunk, aug_rng)
            elif train and cfg.augmentation == "csa":
                seq = csa_sample(seq, cfg.csa_window, aug_rng)
            else:
                seq = downsample_every_k(seq, cfg.downsample_k)
            padded = pad_truncate(seq, cfg.seq_len)
            return padded.seq.data, padded.mask
        if cfg.arch == "text_mha":
            padded = pad_truncate(FeatureSequence(raw), cfg.token_cap)
            return padded.seq.data, padded.mask
        if cfg.arch == "aud_conv1d":
            wave = raw[:, None] if raw.ndim == 1 else raw
            padded = pad_truncate(FeatureSequence(wave), cfg.wave_len)
            return padded.seq.data, padded.mask
        # aud_mlp
        vec = raw.ravel()
        if self.selected_idx is not None:
            vec = vec[self.selected_idx]
        if vec.size != cfg.input_dim:
            raise ValueError(f"{cfg.name}: feature vector of dim {vec.size}, "
                             f"expected {cfg.input_dim}")
        return vec, None

    def load_input(self, record: UtteranceRecord, manifest: DatasetManifest,
                   train: bool = False, aug_rng=None):
        raw = manifest.load(record, self.config.modality)
        return self.prepare(raw, train=train, aug_rng=aug_rng)


def build_encoder(config: EncoderConfig) -> Encoder:
    """Wire an untrained encoder; all initial draws derive from config.seed."""
    return Encoder(config)


# ---------------------------------------------------------------------------
# Training
# ---------------------------------------------------------------------------

@dataclass
class TrainedEncoder:
    """Frozen parameters plus config, training history, and the optimizer
    state at the last step."""

    config: EncoderConfig
    params: dict[str, np.ndarray]
    history: list[dict]
    selected_idx: np.ndarray | None = None
    optimizer: Optimizer | None = None

    def __post_init__(self):
        self._encoder = build_encoder(self.config)
        self._encoder.selected_idx = self.selected_idx
        for name, value in self.params.items():
            self._encoder.params[name][...] = value
        self.params = self._encoder.params

    @property
    def name(self) -> str:
        return self.config.name

    @property
    def rep_dim(self) -> int:
        return self._encoder.rep_dim

    @property
    def targets(self) -> tuple[str, ...]:
        return self.config.targets

    def apply(self, x, mask=None):
        return self._encoder.forward(x, mask)

    def predict(self, record: UtteranceRecord, manifest: DatasetManifest) -> dict[str, float]:
        x, mask = self._encoder.load_input(record, manifest, train=False)
        preds, _ = self._encoder.forward(x, mask)
        return {t: float(v) for t, v in zip(self.config.targets, preds)}

    def representation(self, record: UtteranceRecord, manifest: DatasetManifest) -> np.ndarray:
        x, mask = self._encoder.load_input(record, manifest, train=False)
        _, rep = self._encoder.forward(x, mask)
        return rep

    def predict_split(self, manifest: DatasetManifest, split: str):
        """(ids, predictions per target, truth per target) over one split."""
        return _predict_split(self._encoder, manifest, split)


def _selection_scores(X: np.ndarray, records: list[UtteranceRecord],
                      targets: tuple[str, ...]) -> np.ndarray:
    scores = np.zeros(X.shape[1])
    for t in targets:
        y = np.array([getattr(r, t) for r in records])
        scores += dataio.abs_pearson_scores(X, y)
    return scores / len(targets)


def _fit_selection(encoder: Encoder, manifest: DatasetManifest,
                   records: list[UtteranceRecord]) -> None:
    """Supervised top-k selection over raw hand-crafted audio features,
    ranking columns by |Pearson| against the head's targets (averaged for
    the multitask head)."""
    cfg = encoder.config
    raw_dim = manifest.load(records[0], "audio_vec").ravel().size
    if raw_dim == cfg.input_dim:
        encoder.selected_idx = None
        return
    if raw_dim < cfg.input_dim:
        raise ValueError(f"{cfg.name}: stored feature dim {raw_dim} < input_dim "
                         f"{cfg.input_dim}")
    X = np.stack([manifest.load(r, "audio_vec").ravel() for r in records])
    scores = _selection_scores(X, records, cfg.targets)
    order = np.lexsort((np.arange(raw_dim), -scores))
    encoder.selected_idx = np.sort(order[:cfg.input_dim])


def _predict_split(encoder: Encoder, manifest: DatasetManifest, split: str):
    """Evaluation-path predictions and truth per target over one split."""
    records = manifest.split_records(split)
    targets = encoder.config.targets
    preds = {t: np.zeros(len(records)) for t in targets}
    truth = {t: np.array([getattr(r, t) for r in records]) for t in targets}
    for i, record in enumerate(records):
        x, mask = encoder.load_input(record, manifest, train=False)
        out, _ = encoder.forward(x, mask)
        for t, v in zip(targets, out):
            preds[t][i] = float(v)
    return [r.utterance_id for r in records], preds, truth


def _split_ccc(encoder: Encoder, manifest, split):
    out = {}
    _, preds, truth = _predict_split(encoder, manifest, split)
    for t, p in preds.items():
        try:
            out[t] = ccc(p, truth[t])
        except (UndefinedCorrelationError, ValueError):
            out[t] = math.nan
    return out


def train_encoder(model: Encoder, manifest: DatasetManifest) -> TrainedEncoder:
    """Mini-batch training, deterministic for a fixed config seed.

    Augmentation is re-drawn every epoch so that over training all frames get
    sampled; evaluation inside the loop always runs the deterministic path.
    The returned parameters are the best-validation-concordance snapshot
    (final parameters when there is no validation split).
    """
    cfg = model.config
    train_records = manifest.split_records("train")
    if not train_records:
        raise ValueError("training split is empty")
    has_val = len(manifest.split_records("validation")) > 0

    if cfg.arch == "aud_mlp":
        _fit_selection(model, manifest, train_records)

    optimizer = make_optimizer(cfg.optimizer)
    order_rng = stream(cfg.seed, f"train.{cfg.name}.batches")
    aug_rng = stream(cfg.seed, f"train.{cfg.name}.augment")

    targets = cfg.targets
    truth_all = np.array([[getattr(r, t) for t in targets] for r in train_records],
                         dtype=cfg.dtype)

    def snapshot():
        return {k: v.copy() for k, v in model.params.items()}

    best_params = snapshot()
    best_score = -np.inf
    history: list[dict] = []

    for epoch in range(cfg.epochs):
        perm = order_rng.permutation(len(train_records))
        losses = []
        for start in range(0, len(perm), cfg.batch_size):
            batch = perm[start:start + cfg.batch_size]
            if batch.size < 2 and cfg.loss.uses_ccc:
                continue  # batch concordance undefined on a single sample
            inputs = [model.load_input(train_records[i], manifest,
                                       train=True, aug_rng=aug_rng)
                      for i in batch]
            preds = np.stack([model.forward(x, m)[0] for x, m in inputs])
            loss, grad = _batch_loss(preds, truth_all[batch], cfg.loss)
            if not np.isfinite(loss):
                raise DivergenceError(f"non-finite loss at epoch {epoch}", epoch=epoch)
            losses.append(loss)
            model.zero_grads()
            for (x, m), g in zip(inputs, grad):
                model.forward(x, m)
                model.backward(g.astype(cfg.dtype))
            optimizer.step(model.params, model.grads)
        row = {"epoch": epoch, "train_loss": float(np.mean(losses)) if losses else math.nan}
        for t, v in _split_ccc(model, manifest, "train").items():
            row[f"train_ccc_{t}"] = v
        if has_val:
            val = _split_ccc(model, manifest, "validation")
            for t, v in val.items():
                row[f"val_ccc_{t}"] = v
            score = np.nanmean([val[t] for t in targets])
            if np.isfinite(score) and score > best_score:
                best_score = score
                best_params = snapshot()
        history.append(row)

    if not has_val or not np.isfinite(best_score):
        best_params = snapshot()
    return TrainedEncoder(config=cfg, params=best_params, history=history,
                          selected_idx=model.selected_idx, optimizer=optimizer)


def _batch_loss(preds: np.ndarray, truth: np.ndarray, spec: LossSpec):
    from .nn.losses import loss_eval
    return loss_eval(preds, truth, spec)


def encoder_predict(model: TrainedEncoder, record: UtteranceRecord,
                    manifest: DatasetManifest) -> dict[str, float]:
    """Deterministic forward pass on the evaluation path."""
    return model.predict(record, manifest)


def extract_representation(model: TrainedEncoder, record: UtteranceRecord,
                           manifest: DatasetManifest) -> np.ndarray:
    """The architecture's designated penultimate activation."""
    return model.representation(record, manifest)


# ---------------------------------------------------------------------------
# Persistence
# ---------------------------------------------------------------------------

def save_encoder(trained: TrainedEncoder, directory: str | Path) -> None:
    directory = Path(directory)
    arch = {"config": trained.config.to_json()}
    if trained.selected_idx is not None:
        arch["selected_idx"] = [int(i) for i in trained.selected_idx]
    save_checkpoint(directory, trained.params, arch, trained.optimizer)
    with open(directory / "history.csv", "w", newline="", encoding="utf-8") as fh:
        columns = list(trained.history[0]) if trained.history else ["epoch"]
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in trained.history:
            writer.writerow(row)


def load_encoder(directory: str | Path) -> TrainedEncoder:
    directory = Path(directory)
    config_probe = json.loads((directory / "index.json").read_text())
    cfg = EncoderConfig.from_json(config_probe["arch"]["config"])
    params, arch, optimizer = load_checkpoint(directory, dtype=cfg.dtype)
    selected = arch.get("selected_idx")
    history = []
    history_path = directory / "history.csv"
    if history_path.exists():
        with open(history_path, newline="", encoding="utf-8") as fh:
            for row in csv.DictReader(fh):
                history.append({k: (int(v) if k == "epoch" else float(v))
                                for k, v in row.items() if v != ""})
    return TrainedEncoder(
        config=cfg, params=params, history=history,
        selected_idx=np.asarray(selected, dtype=int) if selected is not None else None,
        optimizer=optimizer,
    )
