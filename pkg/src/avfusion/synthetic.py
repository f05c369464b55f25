"""Synthetic multimodal dataset with planted arousal/valence signals.

Each utterance draws arousal ~ U[0, 1] and valence ~ U[-1, 1] and embeds
them linearly along fixed random directions in every modality, on top of
i.i.d. Gaussian frame noise. The planted arousal component uses the centered
label 2a - 1 so both targets span [-1, 1] in feature space and are equally
hard; heads recover the affine map through their bias:

* visual     frames x 512, every frame carries the planted component
* audio_vec  256-D vector
* text_emb   tokens x 400
* audio_wave scalar waveform: two fixed orthogonal smooth profiles whose
             amplitudes encode the two targets

Utterances group into videos of a few utterances each so grouped fold
splitting has real work to do. Thresholded end-to-end checks rely on a
signal-to-noise ratio high enough that a correct model recovers the targets
and a broken one does not.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .dataio import DatasetManifest, UtteranceRecord, write_aff1, write_manifest
from .rng import stream


def _unit(rng: np.random.Generator, dim: int) -> np.ndarray:
    v = rng.standard_normal(dim)
    return v / np.linalg.norm(v)


def _wave_profiles(length: int) -> tuple[np.ndarray, np.ndarray]:
    t = np.arange(length)
    half = length // 2
    g1 = np.where(t < half, np.sin(np.pi * t / half), 0.0)
    g2 = np.where(t >= half, np.sin(np.pi * (t - half) / (length - half)), 0.0)
    return g1, g2


def make_synthetic_dataset(
    root: str | Path,
    n_train: int = 200,
    n_validation: int = 50,
    seed: int = 0,
    visual_dim: int = 512,
    audio_dim: int = 256,
    text_dim: int = 400,
    frames: tuple[int, int] = (25, 60),  # >= 25 raw frames keeps 5 valid rows
                                         # after 1-in-5 downsampling, enough for
                                         # the widest default filter
    tokens: tuple[int, int] = (5, 12),
    wave_len: int = 1600,
    signal: float = 2.0,
    noise: float = 0.3,
    utterances_per_video: int = 3,
    with_waveform: bool = True,
) -> Path:
    """Write feature files plus a manifest under `root`; returns the manifest path."""
    root = Path(root)
    (root / "features").mkdir(parents=True, exist_ok=True)
    rng = stream(seed, "synthetic")

    dir_a = {m: _unit(rng, d) for m, d in
             (("visual", visual_dim), ("audio_vec", audio_dim), ("text_emb", text_dim))}
    dir_v = {m: _unit(rng, d) for m, d in
             (("visual", visual_dim), ("audio_vec", audio_dim), ("text_emb", text_dim))}
    g1, g2 = _wave_profiles(wave_len)

    records = []
    total = n_train + n_validation
    for i in range(total):
        split = "train" if i < n_train else "validation"
        video = f"vid{i // utterances_per_video:04d}"
        uid = f"utt{i:04d}"
        arousal = float(rng.uniform(0.0, 1.0))
        valence = float(rng.uniform(-1.0, 1.0))
        a_sig = 2.0 * arousal - 1.0

        n_frames = int(rng.integers(frames[0], frames[1] + 1))
        vis = (noise * rng.standard_normal((n_frames, visual_dim))
               + signal * (a_sig * dir_a["visual"] + valence * dir_v["visual"]))
        vis_rel = f"features/{uid}_vis.aff1"
        write_aff1(root / vis_rel, vis)

        aud = (noise * rng.standard_normal(audio_dim)
               + signal * (a_sig * dir_a["audio_vec"] + valence * dir_v["audio_vec"]))
        aud_rel = f"features/{uid}_aud.aff1"
        write_aff1(root / aud_rel, aud)

        n_tokens = int(rng.integers(tokens[0], tokens[1] + 1))
        txt = (noise * rng.standard_normal((n_tokens, text_dim))
               + signal * (a_sig * dir_a["text_emb"] + valence * dir_v["text_emb"]))
        txt_rel = f"features/{uid}_txt.aff1"
        write_aff1(root / txt_rel, txt)

        wave_rel = None
        if with_waveform:
            wave = (noise * rng.standard_normal(wave_len)
                    + signal * (a_sig * g1 + valence * g2))
            wave_rel = f"features/{uid}_wav.aff1"
            write_aff1(root / wave_rel, wave)

        records.append(UtteranceRecord(
            utterance_id=uid, video_id=video, arousal=arousal, valence=valence,
            split=split, visual=vis_rel, audio_vec=aud_rel,
            audio_wave=wave_rel, text_emb=txt_rel,
        ))

    manifest = DatasetManifest(records=records, root=root)
    path = root / "manifest.jsonl"
    write_manifest(manifest, path)
    return path
