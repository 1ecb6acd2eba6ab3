"""
Run configuration: everything that, with a manifest and a seed, fixes a
training run.

Config files use the dotenv ``key=value`` format with ``#`` comments. Keys are
flat field names of the nested models (``channels=32``, ``peak_lr=0.05``,
``freq_masks=0``, ``seed=7``); explicit kernel widths use ``layout.<field>``
with comma-separated values. Command-line overrides are applied on top.
"""

import logging
from pathlib import Path
from typing import Literal, Optional

from dotenv import dotenv_values
from pydantic import BaseModel, Field, PositiveInt

try:
    from utils.frontend import SpecAugmentConfig
    from utils.model import CitrinetConfig, KernelLayout
    from utils.optim import ScheduleConfig
except ImportError:
    from src.utils.frontend import SpecAugmentConfig
    from src.utils.model import CitrinetConfig, KernelLayout
    from src.utils.optim import ScheduleConfig


class RunConfig(BaseModel):
    model: CitrinetConfig = CitrinetConfig()
    spec_augment: SpecAugmentConfig = SpecAugmentConfig()
    schedule: ScheduleConfig = ScheduleConfig()
    beta1: float = Field(default=0.8, ge=0.0, lt=1.0)
    beta2: float = Field(default=0.25, ge=0.0, lt=1.0)
    weight_decay: float = Field(default=0.001, ge=0.0)
    batch_size: PositiveInt = 32
    eval_every: PositiveInt = 50
    log_every: PositiveInt = 10
    tokenizer_path: Optional[str] = None
    seed: int = 0
    dtype: Literal["float32", "float64"] = "float32"


SECTIONS = {
    "model": CitrinetConfig,
    "spec_augment": SpecAugmentConfig,
    "schedule": ScheduleConfig,
}
LAYOUT_PREFIX = "layout."


def _section_for(key):
    for section, model in SECTIONS.items():
        if key in model.model_fields and key != "layout":
            return section
    if key in RunConfig.model_fields and key not in SECTIONS:
        return None
    raise ValueError(f"Unknown run config key: {key!r}")


def _clean(value):
    if value is None:
        return None
    text = str(value).strip()
    if text.lower() in ("", "none", "null"):
        return None
    return text


def build_run_config(values, base=None):
    """Apply flat ``key -> value`` settings on top of ``base`` (defaults if None)."""
    base = base or RunConfig()
    data = base.model_dump()
    layout = dict(data["model"]["layout"])
    layout_changed = False
    for key, value in values.items():
        if value is None:
            continue
        if key.startswith(LAYOUT_PREFIX):
            name = key[len(LAYOUT_PREFIX):]
            if name not in KernelLayout.model_fields:
                raise ValueError(f"Unknown kernel layout field: {name!r}")
            text = str(value)
            layout[name] = [int(v) for v in text.split(",")] if name.startswith("megablock") else int(text)
            layout_changed = True
            continue
        section = _section_for(key)
        cleaned = _clean(value) if isinstance(value, str) else value
        if section is None:
            data[key] = cleaned
        else:
            data[section][key] = cleaned
    if layout_changed:
        data["model"]["layout"] = layout
    return RunConfig.model_validate(data)


def load_run_config(path=None, overrides=None, base=None):
    """Layer the config file and then ``overrides`` on top of ``base``."""
    values = {}
    if path is not None:
        path = Path(path)
        if not path.exists():
            raise FileNotFoundError(f"Run config not found: {path}")
        values.update(dotenv_values(path))
        logging.info(f"Loaded run config from {path}")
    values.update({key: value for key, value in (overrides or {}).items() if value is not None})
    return build_run_config(values, base)


def run_config_lines(cfg):
    lines = []
    data = cfg.model_dump()
    for section in SECTIONS:
        for key, value in data[section].items():
            if key == "layout":
                for name, widths in value.items():
                    text = ",".join(str(w) for w in widths) if isinstance(widths, (list, tuple)) else str(widths)
                    lines.append(f"{LAYOUT_PREFIX}{name}={text}")
            else:
                lines.append(f"{key}={'none' if value is None else value}")
    for key, value in data.items():
        if key not in SECTIONS:
            lines.append(f"{key}={'none' if value is None else value}")
    return lines


def save_run_config(cfg, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("# Citrinet run config\n" + "\n".join(run_config_lines(cfg)) + "\n", encoding="utf-8")
    return path


DESK_VALUES = {
    "repeat": 1,
    "channels": 32,
    "gamma": 0.25,
    "epilog_channels": 64,
    "dropout_p": 0.0,
    "freq_masks": 0,
    "time_masks": 0,
    "peak_lr": 0.05,
    "warmup_steps": 30,
    "total_steps": 300,
    "batch_size": 10,
    "eval_every": 50,
    "log_every": 10,
}


def desk_run_config(seed=0, vocab_size=8):
    """Reduced model and schedule that memorizes the synthetic toy set on CPU."""
    return build_run_config({**DESK_VALUES, "vocab_size": vocab_size, "seed": seed})


def flat_config_keys():
    keys = []
    for model in SECTIONS.values():
        keys.extend(key for key in model.model_fields if key != "layout")
    keys.extend(key for key in RunConfig.model_fields if key not in SECTIONS)
    return keys


def add_run_config_arguments(parser):
    """Add one ``--flag`` per flat run-config key; unset flags keep file values."""
    group = parser.add_argument_group("run config overrides")
    for key in flat_config_keys():
        group.add_argument(f"--{key.replace('_', '-')}", dest=f"cfg_{key}", default=None, metavar="VALUE")
    group.add_argument("--config", default=None, help="Run config file (key=value lines)")
    return parser


def run_config_from_args(args, base_values=None):
    """Base values first, then the ``--config`` file, then explicit flags."""
    overrides = {}
    for key in flat_config_keys():
        value = getattr(args, f"cfg_{key}", None)
        if value is not None:
            overrides[key] = value
    base = None
    config_path = getattr(args, "config", None)
    if base_values:
        base = build_run_config(base_values)
        if config_path is not None and Path(config_path).exists():
            replaced = sorted(set(base_values) & set(dotenv_values(config_path)))
            if replaced:
                logging.info(f"{config_path} overrides base values for: {', '.join(replaced)}")
    return load_run_config(config_path, overrides, base)
