"""Semantic coded transmission simulator.

Deterministic desk-scale simulation of semantics-guided source-channel
coding for grayscale images over noisy OFDM channels.  Two semantic
chains (modular digital, integrated analog) and a classical
single-stream baseline share one front end: blockwise decorrelating
transform, per-region importance scoring, and importance-driven symbol
budgeting with channel-aware resource-block assignment.  A receiver-side
correction stage repairs blocks lost to channel errors from trusted
same-region statistics.
"""

from .config import ConfigError, TrialConfig, load_config
from .experiments import (CSV_HEADER, SweepRow, run_fig5_comparison,
                          run_rd_sweep, run_trials, write_comparison,
                          write_sweep_csv)
from .metrics import ReconstructionReport, compute_metrics
from .pipeline import TrialResult, load_scene, run_trial

__version__ = "0.1.0"

__all__ = [
    "CSV_HEADER",
    "ConfigError",
    "ReconstructionReport",
    "SweepRow",
    "TrialConfig",
    "TrialResult",
    "compute_metrics",
    "load_config",
    "load_scene",
    "run_fig5_comparison",
    "run_rd_sweep",
    "run_trials",
    "run_trial",
    "write_comparison",
    "write_sweep_csv",
    "__version__",
]
