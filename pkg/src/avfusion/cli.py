"""Command-line pipeline: validate, train, extract, fuse, report, selftest.

Exit codes: 0 success, 1 validation/usage error, 2 numerical failure
(divergence, solver non-convergence, undefined correlation).

Every command is deterministic given the seed and inputs, writes only under
--out, and never mutates dataset files. All randomness fans out from the one
global seed through named per-component streams.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import dataio, fusion, metrics
from .dataio import MODALITIES, parse_manifest, read_aff1
from .encoders import (EncoderConfig, TrainedEncoder, build_encoder,
                       load_encoder, save_encoder, train_encoder)
from .errors import (AffFormatError, ConvergenceError, DivergenceError,
                     ManifestError, UndefinedCorrelationError)
from .fusion import FusionConfig, fuse_train, fusion_features, load_fusion, save_fusion
from .metrics import ccc, pcc_matrix, render_table

TARGETS = ("arousal", "valence")


def _write_json(path: Path, obj) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)
        fh.write("\n")


# ---------------------------------------------------------------------------
# validate
# ---------------------------------------------------------------------------

def _histogram(values, lo, hi, bins=10) -> list[str]:
    counts, edges = np.histogram(values, bins=bins, range=(lo, hi))
    peak = max(int(counts.max()), 1)
    return [f"  [{edges[i]:+.2f}, {edges[i+1]:+.2f}) {'#' * (1 + 40 * int(c) // peak) if c else '':44s} {c}"
            for i, c in enumerate(counts)]


def cmd_validate(args) -> int:
    manifest = parse_manifest(args.manifest)
    counts = {m: 0 for m in MODALITIES}
    for record in manifest:
        for modality in MODALITIES:
            if record.path_for(modality) is not None:
                read_aff1(manifest.resolve(record, modality))  # full payload check
                counts[modality] += 1
    print(f"{len(manifest)} records, label ranges "
          f"arousal [{manifest.label_ranges[0]}, {manifest.label_ranges[1]}] "
          f"valence [{manifest.label_ranges[2]}, {manifest.label_ranges[3]}]")
    for split in dataio.SPLITS:
        n = len(manifest.split_records(split))
        if n:
            print(f"split {split}: {n}")
    for modality, n in counts.items():
        print(f"modality {modality}: {n}")
    a_lo, a_hi, v_lo, v_hi = manifest.label_ranges
    print("arousal histogram")
    print("\n".join(_histogram([r.arousal for r in manifest], a_lo, a_hi)))
    print("valence histogram")
    print("\n".join(_histogram([r.valence for r in manifest], v_lo, v_hi)))
    print("ok")
    return 0


# ---------------------------------------------------------------------------
# train / extract
# ---------------------------------------------------------------------------

def _load_encoder_config(args) -> EncoderConfig:
    cfg = EncoderConfig.from_json(json.loads(Path(args.config).read_text()))
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.precision is not None:
        cfg = replace(cfg, precision=args.precision)
    return cfg


def _write_val_predictions(trained: TrainedEncoder, manifest, directory: Path) -> None:
    if not manifest.split_records("validation"):
        return
    ids, preds, truth = trained.predict_split(manifest, "validation")
    obj = {"encoder": trained.name, "ids": ids, "targets": list(trained.targets)}
    for t in trained.targets:
        obj[f"pred_{t}"] = [float(v) for v in preds[t]]
        obj[f"truth_{t}"] = [float(v) for v in truth[t]]
    _write_json(directory / "val_predictions.json", obj)


def cmd_train(args) -> int:
    manifest = parse_manifest(args.manifest)
    cfg = _load_encoder_config(args)
    trained = train_encoder(build_encoder(cfg), manifest)
    out = Path(args.out) / "encoders" / cfg.name
    save_encoder(trained, out)
    _write_val_predictions(trained, manifest, out)
    print(f"saved {out}")
    for split in ("train", "validation"):
        if not manifest.split_records(split):
            continue
        _, preds, truth = trained.predict_split(manifest, split)
        for t in trained.targets:
            try:
                value = ccc(preds[t], truth[t])
            except (UndefinedCorrelationError, ValueError):
                value = float("nan")
            print(f"{split} ccc {t}: {value:.4f}")
    return 0


def cmd_extract(args) -> int:
    manifest = parse_manifest(args.manifest)
    trained = load_encoder(args.model)
    records = (manifest.records if args.split == "all"
               else manifest.split_records(args.split))
    if not records:
        raise ManifestError(f"no records in split {args.split!r}")
    reps = np.stack([trained.representation(r, manifest) for r in records])
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    dataio.write_aff1(out / "representations.aff1", reps)
    _write_json(out / "representations.json", {
        "encoder": trained.name, "split": args.split, "dim": int(reps.shape[1]),
        "ids": [r.utterance_id for r in records],
    })
    print(f"wrote {reps.shape[0]} x {reps.shape[1]} representations to {out}")
    return 0


# ---------------------------------------------------------------------------
# fuse / report
# ---------------------------------------------------------------------------

def _parse_members(spec) -> list[str]:
    if isinstance(spec, str):
        return [m.strip() for m in spec.split("+") if m.strip()]
    return list(spec)


def cmd_fuse(args) -> int:
    manifest = parse_manifest(args.manifest)
    spec = json.loads(Path(args.config).read_text())
    members = _parse_members(spec["members"])
    name = spec.get("name") or "+".join(members)
    fusion_cfg = FusionConfig.from_json({k: v for k, v in spec.items()
                                         if k not in ("name", "members")})
    if args.seed is not None:
        fusion_cfg = replace(fusion_cfg, fold_seed=args.seed)
    encoders = {}
    for member in members:
        ckpt = Path(args.out) / "encoders" / member
        if not ckpt.exists():
            raise ManifestError(f"missing member checkpoint {ckpt}")
        encoders[member] = load_encoder(ckpt)
    model = fuse_train([encoders[m] for m in members], manifest, fusion_cfg)
    out = Path(args.out) / "fusions" / name
    save_fusion(model, out)

    row = {"model": " + ".join(members)}
    for t in TARGETS:
        row[t] = model.grid_results[t].best_score
        row[f"chosen_c_{t}"] = model.grid_results[t].chosen
    row["mean"] = float(np.mean([row[t] for t in TARGETS]))
    val_records = manifest.split_records("validation")
    if len(val_records) >= 2:
        reps = fusion_features([encoders[m] for m in members], manifest, val_records)
        preds = model.predict_features(reps)
        truth = {t: np.array([getattr(r, t) for r in val_records]) for t in TARGETS}
        for t in TARGETS:
            row[f"val_{t}"] = ccc(preds[t], truth[t])
        row["val_mean"] = float(np.mean([row[f"val_{t}"] for t in TARGETS]))
        _write_json(out / "val_predictions.json", {
            "members": members, "ids": [r.utterance_id for r in val_records],
            **{f"pred_{t}": [float(v) for v in preds[t]] for t in TARGETS},
            **{f"truth_{t}": [float(v) for v in truth[t]] for t in TARGETS},
        })
    _write_json(out / "row.json", row)
    print(render_table([row], [c for c in ("arousal", "valence", "mean") if c in row]))
    return 0


def cmd_report(args) -> int:
    run = Path(args.out)
    enc_rows, enc_preds = [], {}
    for val_path in sorted(run.glob("encoders/*/val_predictions.json")):
        obj = json.loads(val_path.read_text())
        row = {"model": obj["encoder"]}
        pieces = []
        for t in TARGETS:
            if f"pred_{t}" in obj:
                row[t] = ccc(np.array(obj[f"pred_{t}"]), np.array(obj[f"truth_{t}"]))
                pieces.append(np.array(obj[f"pred_{t}"]))
        present = [row[t] for t in TARGETS if t in row]
        row["mean"] = float(np.mean(present))
        enc_rows.append(row)
        enc_preds[obj["encoder"]] = (set(obj["targets"]), pieces)
    fus_rows = []
    for row_path in sorted(run.glob("fusions/*/row.json")):
        fus_rows.append(json.loads(row_path.read_text()))
    if not enc_rows and not fus_rows:
        raise ManifestError(f"no evaluations under {run}")

    report_dir = run / "report"
    report_dir.mkdir(parents=True, exist_ok=True)
    enc_rows.sort(key=lambda r: -r["mean"])
    fus_rows.sort(key=lambda r: -r["mean"])
    columns = ["arousal", "valence", "mean"]
    if enc_rows:
        rows = [{c: r.get(c, float("nan")) for c in ["model"] + columns} for r in enc_rows]
        (report_dir / "single_modal.txt").write_text(render_table(rows, columns))
        _write_json(report_dir / "single_modal.json", enc_rows)
    if fus_rows:
        rows = [{c: r.get(c, float("nan")) for c in ["model"] + columns} for r in fus_rows]
        (report_dir / "multi_modal.txt").write_text(render_table(rows, columns))
        _write_json(report_dir / "multi_modal.json", fus_rows)
    if enc_preds:
        target_sets = [ts for ts, _ in enc_preds.values()]
        common = set.intersection(*target_sets) if target_sets else set()
        if common:
            ordered = [t for t in TARGETS if t in common]
            vectors = {}
            for name, (ts, pieces) in enc_preds.items():
                obj = json.loads((run / "encoders" / name / "val_predictions.json").read_text())
                vectors[name] = np.concatenate([np.array(obj[f"pred_{t}"]) for t in ordered])
            matrix = pcc_matrix(vectors)
            (report_dir / "pcc_matrix.csv").write_text(matrix.to_csv())
    print(f"report written to {report_dir}")
    return 0


# ---------------------------------------------------------------------------
# selftest
# ---------------------------------------------------------------------------

def cmd_selftest(args) -> int:
    from .selftest import run_selftest
    return run_selftest(inject_gradient_fault=args.inject_gradient_fault)


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="avfusion",
        description="Multimodal arousal/valence regression pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate", help="check a manifest and every tensor payload")
    p.add_argument("--manifest", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("train", help="train one encoder from a JSON config")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--precision", choices=("f32", "f64"), default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("extract", help="write representations for a trained encoder")
    p.add_argument("--manifest", required=True)
    p.add_argument("--model", required=True, help="encoder checkpoint directory")
    p.add_argument("--out", required=True)
    p.add_argument("--split", default="all",
                   choices=("all", "train", "validation", "test"))
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("fuse", help="train and score one fusion combination")
    p.add_argument("--manifest", required=True)
    p.add_argument("--config", required=True,
                   help='JSON: {"members": ["encA", "encB"], ...svr options}')
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_fuse)

    p = sub.add_parser("report", help="aggregate run results into tables + PCC matrix")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_report)

    p = sub.add_parser("selftest", help="run the built-in property suites")
    p.add_argument("--inject-gradient-fault", action="store_true",
                   help="test hook: corrupt one backward pass to prove the "
                        "checker catches it")
    p.set_defaults(func=cmd_selftest)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if exc.code in (0, None) else 1
    try:
        return args.func(args)
    except (DivergenceError, ConvergenceError, UndefinedCorrelationError) as exc:
        # ordered first: UndefinedCorrelationError is a ValueError subclass
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 2
    except (ManifestError, AffFormatError, FileNotFoundError, KeyError,
            ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
