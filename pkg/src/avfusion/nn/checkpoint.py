"""Parameter persistence: one AFF1 tensor per named parameter plus a JSON
index carrying the architecture descriptor and optimizer state.

The index is written with sorted keys and no timestamps, so identical runs
produce byte-identical checkpoints.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..dataio import read_aff1, write_aff1
from .optim import Optimizer, OptimizerConfig

INDEX_NAME = "index.json"
FORMAT = "avfusion-checkpoint/1"


def save_checkpoint(directory: str | Path, params: dict[str, np.ndarray],
                    arch: dict, optimizer: Optimizer | None = None) -> None:
    directory = Path(directory)
    (directory / "params").mkdir(parents=True, exist_ok=True)
    index = {"format": FORMAT, "arch": arch, "params": {}, "optimizer": None}
    for name in sorted(params):
        rel = f"params/{name}.aff1"
        write_aff1(directory / rel, params[name])
        index["params"][name] = rel
    if optimizer is not None:
        (directory / "optimizer").mkdir(exist_ok=True)
        state = optimizer.state_json()
        state["slots"] = {}
        for pname in sorted(optimizer.slots):
            for key in sorted(optimizer.slots[pname]):
                rel = f"optimizer/{pname}.{key}.aff1"
                write_aff1(directory / rel, optimizer.slots[pname][key])
                state["slots"].setdefault(pname, {})[key] = rel
        index["optimizer"] = state
    with open(directory / INDEX_NAME, "w", encoding="utf-8") as fh:
        json.dump(index, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_checkpoint(directory: str | Path, dtype=np.float64):
    """Returns (params, arch, optimizer or None). Stored payloads are float32;
    arrays are cast to `dtype` on load."""
    directory = Path(directory)
    with open(directory / INDEX_NAME, "r", encoding="utf-8") as fh:
        index = json.load(fh)
    if index.get("format") != FORMAT:
        raise ValueError(f"{directory}: unknown checkpoint format {index.get('format')!r}")
    params = {name: read_aff1(directory / rel).astype(dtype)
              for name, rel in index["params"].items()}
    optimizer = None
    state = index.get("optimizer")
    if state is not None:
        optimizer = Optimizer(config=OptimizerConfig.from_json(state["hyperparams"]),
                              t=int(state["t"]))
        for pname, slots in state["slots"].items():
            optimizer.slots[pname] = {
                key: read_aff1(directory / rel).astype(dtype)
                for key, rel in slots.items()
            }
    return params, index["arch"], optimizer
