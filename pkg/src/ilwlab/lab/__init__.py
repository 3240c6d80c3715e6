"""Experiment orchestration: configuration, runners, manifests and the
``lab`` command."""

from .config import Experiment, RunConfig, load_config, parse_config
from .experiments import (gate_scale, run, run_alpha_conserve,
                          run_converge_shallow, run_nf_verify, run_symbol_table,
                          run_tail_track)
from .manifest import RunManifest, verify_manifest

__all__ = [
    "Experiment", "RunConfig", "load_config", "parse_config", "gate_scale",
    "run", "run_alpha_conserve", "run_converge_shallow", "run_nf_verify",
    "run_symbol_table", "run_tail_track", "RunManifest", "verify_manifest",
]
