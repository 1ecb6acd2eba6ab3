"""
Architecture analytics that need no training: parameter counts, per-section
breakdown, receptive field, output-length contract and the scaled kernel layout.
"""

from dataclasses import dataclass, field

import pandas as pd

try:
    from utils.model import (
        Citrinet,
        count_parameters,
        encoder_output_length,
        parameter_breakdown,
        receptive_field,
    )
except ImportError:
    from src.utils.model import (
        Citrinet,
        count_parameters,
        encoder_output_length,
        parameter_breakdown,
        receptive_field,
    )


OUTPUT_LENGTH_FORMULA = "T_out = ceil(ceil(ceil(T / 2) / 2) / 2)"
EXAMPLE_FRAMES = (101, 1000, 1601)


@dataclass
class ArchitectureReport:
    config: object
    parameters: int
    breakdown: dict
    receptive_field: int
    se_context: str
    layout: object
    output_lengths: dict = field(default_factory=dict)

    @property
    def parameters_millions(self):
        return self.parameters / 1e6


def _se_context(cfg):
    if not cfg.se_enabled:
        return "none (SE disabled)"
    if cfg.se_window == "global":
        return "unbounded via SE (global pooling)"
    return f"{cfg.se_window} frames per SE window"


def analyze(cfg):
    """Describe the architecture of ``cfg`` without allocating trainable weights."""
    model = Citrinet(cfg, initialize=False)
    return ArchitectureReport(
        config=cfg,
        parameters=count_parameters(model),
        breakdown=parameter_breakdown(model),
        receptive_field=receptive_field(model),
        se_context=_se_context(cfg),
        layout=model.layout,
        output_lengths={frames: encoder_output_length(frames) for frames in EXAMPLE_FRAMES},
    )


def format_report_text(report):
    cfg = report.config
    layout = report.layout
    lines = [
        f"Citrinet R={cfg.repeat} C={cfg.channels} vocab={cfg.vocab_size} gamma={cfg.gamma if cfg.gamma is not None else 'none'}",
        f"Parameters: {report.parameters:,} ({report.parameters_millions:.2f}M)",
        "Breakdown: " + ", ".join(f"{name}={count:,}" for name, count in report.breakdown.items()),
        f"Receptive field: {report.receptive_field} frames (convolutions only); SE context: {report.se_context}",
        f"Output length: {OUTPUT_LENGTH_FORMULA}; "
        + ", ".join(f"{frames}->{out}" for frames, out in report.output_lengths.items()),
        f"Epilog channels: {cfg.epilog_channels}, SE reduction: {cfg.se_reduction}",
        "Kernel layout:",
        f"  prolog: {layout.prolog}",
        f"  megablock1: {list(layout.megablock1)}",
        f"  megablock2: {list(layout.megablock2)}",
        f"  megablock3: {list(layout.megablock3)}",
        f"  epilog: {layout.epilog}",
    ]
    return "\n".join(lines)


def parameter_sweep(base_cfg, channels=None, repeats=None, vocab_sizes=None):
    """Parameter counts over a grid of C, R and vocabulary sizes as a DataFrame."""
    rows = []
    for c in channels or [base_cfg.channels]:
        for r in repeats or [base_cfg.repeat]:
            for v in vocab_sizes or [base_cfg.vocab_size]:
                cfg = base_cfg.model_copy(update={"channels": c, "repeat": r, "vocab_size": v})
                count = count_parameters(Citrinet(cfg, initialize=False))
                rows.append({"channels": c, "repeat": r, "vocab_size": v, "parameters": count, "params_m": count / 1e6})
    return pd.DataFrame(rows)
