"""Checkpoint persistence: one VATT tensor file per named parameter.

``checkpoint.json`` records the training config, dataset dims, stage tag
and the parameter name list; each parameter/buffer lives in its own
``<module>.<param>.vatt`` file so any implementation can read them back.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np
import torch

from .config import TrainConfig
from .errors import CompatibilityError, DataFormatError
from .models import ModelState, build_model
from .tensorio import read_tensor, write_tensor

CHECKPOINT_VERSION = 1


def save_checkpoint(model: ModelState, directory: str | Path) -> Path:
    root = Path(directory)
    root.mkdir(parents=True, exist_ok=True)
    param_names = []
    for module_name, module in model.modules().items():
        for param_name, tensor in module.state_dict().items():
            full_name = f"{module_name}.{param_name}"
            write_tensor(root / f"{full_name}.vatt", tensor.detach().numpy())
            param_names.append(full_name)
    meta = {
        "format": "vatcmr.checkpoint",
        "version": CHECKPOINT_VERSION,
        "stage": model.stage,
        "num_classes": model.num_classes,
        "image_size": model.image_size,
        "audio_length": model.audio_length,
        "config": model.config.to_dict(),
        "parameters": param_names,
    }
    with open(root / "checkpoint.json", "w") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
    return root


def load_checkpoint(directory: str | Path) -> ModelState:
    root = Path(directory)
    meta_path = root / "checkpoint.json"
    if not meta_path.is_file():
        raise DataFormatError(f"missing checkpoint metadata {meta_path}")
    meta = json.loads(meta_path.read_text())
    if meta.get("format") != "vatcmr.checkpoint" or meta.get("version") != CHECKPOINT_VERSION:
        raise CompatibilityError(
            f"unsupported checkpoint format {meta.get('format')!r} version {meta.get('version')!r}"
        )

    config = TrainConfig.from_dict(meta["config"])
    model = build_model(
        config,
        num_classes=int(meta["num_classes"]),
        image_size=int(meta["image_size"]),
        audio_length=int(meta["audio_length"]),
    )
    model.stage = meta["stage"]

    stored = set(meta["parameters"])
    for module_name, module in model.modules().items():
        state = {}
        for param_name, tensor in module.state_dict().items():
            full_name = f"{module_name}.{param_name}"
            if full_name not in stored:
                raise CompatibilityError(f"checkpoint is missing parameter {full_name}")
            array = read_tensor(root / f"{full_name}.vatt")
            if tuple(array.shape) != tuple(tensor.shape):
                raise CompatibilityError(
                    f"parameter {full_name} has shape {array.shape}, expected {tuple(tensor.shape)}"
                )
            state[param_name] = torch.from_numpy(np.ascontiguousarray(array))
        module.load_state_dict(state)
    return model
