"""
DCWS - Shared Command Helpers
"""

import argparse
import logging
from pathlib import Path
from typing import Any, Dict, Optional

from dcws.config import get_settings, load_overrides, read_config_file, route_overrides
from dcws.models.experiment import ExperimentConfig
from dcws.models.network import LabelModelSpec
from dcws.models.solver import SolverConfig
from dcws.models.synth import PRESETS, SyntheticSpec
from dcws.services.storage import bundle_paths

logger = logging.getLogger(__name__)

# Exit codes
EXIT_OK = 0
EXIT_UNEXPECTED = 1
EXIT_INPUT = 2

# Nested ExperimentConfig fields are assembled from their own keys, never set directly.
_NESTED = {"synthetic", "data", "solver", "label_model"}
_EXPERIMENT_KEYS = {name for name in ExperimentConfig.model_fields if name not in _NESTED}


def fail(error: str) -> int:
    """Report an input error the way every subcommand does"""
    logger.error(error)
    return EXIT_INPUT


def output_dir(args: argparse.Namespace) -> Path:
    return Path(args.out) if getattr(args, "out", None) else get_settings().output_dir


def solver_overrides(config_path: Optional[Path]) -> Dict[str, Dict[str, Any]]:
    """solver / label_model keys from a fit config file"""
    if config_path is None:
        return {"solver": {}, "label_model": {}}
    return load_overrides(config_path, {"solver": SolverConfig, "label_model": LabelModelSpec})


def _route_experiment(values: Dict[str, str]) -> Dict[str, Dict[str, Any]]:
    routed = route_overrides(
        {key: value for key, value in values.items() if key not in _NESTED},
        {"synthetic": SyntheticSpec, "solver": SolverConfig, "label_model": LabelModelSpec, "experiment": ExperimentConfig},
    )
    routed["experiment"] = {key: value for key, value in routed["experiment"].items() if key in _EXPERIMENT_KEYS}
    nested = sorted(set(values) & _NESTED)
    if nested:
        raise ValueError(f"Config keys {', '.join(nested)} name whole sections; set their fields instead")
    return routed


def build_experiment_config(args: argparse.Namespace, **fixed) -> ExperimentConfig:
    """
    Assemble an ExperimentConfig from --preset, --spec, --config and flag overrides.

    Spec and config files are both flat key=value; config values win where
    both set a key. `fixed` entries override everything.
    """
    values: Dict[str, str] = {}
    for path in (getattr(args, "spec", None), getattr(args, "config", None)):
        if path is not None:
            values.update(read_config_file(path))
    routed = _route_experiment(values)

    experiment = dict(routed["experiment"])
    if getattr(args, "trials", None) is not None:
        experiment["trials"] = args.trials
    if getattr(args, "seed", None) is not None:
        experiment["seed"] = args.seed
    experiment["workers"] = args.workers if getattr(args, "workers", None) else get_settings().workers
    experiment.update(fixed)

    data_dir = getattr(args, "data_dir", None)
    if data_dir is not None:
        experiment["data"] = bundle_paths(data_dir)
    else:
        preset = getattr(args, "preset", None) or routed["synthetic"].get("benchmark", "dependent")
        experiment["synthetic"] = SyntheticSpec.from_preset(preset, **routed["synthetic"])

    return ExperimentConfig(
        solver=SolverConfig(**routed["solver"]),
        label_model=LabelModelSpec(**routed["label_model"]),
        **experiment,
    )


def add_experiment_arguments(parser: argparse.ArgumentParser) -> None:
    """Flags shared by `ablate` and `experiment`"""
    parser.add_argument("--spec", type=Path, help="Flat key=value benchmark/experiment file")
    parser.add_argument("--config", type=Path, help="Flat key=value solver/label-model/experiment file")
    parser.add_argument("--preset", choices=PRESETS, help="Benchmark preset the spec file starts from")
    parser.add_argument("--data-dir", type=Path, help="Directory written by `generate`, instead of generating")
    parser.add_argument("--trials", type=int, help="Number of trials")
    parser.add_argument("--seed", type=int, help="Master seed")
    parser.add_argument("--workers", type=int, help="Worker processes")
    parser.add_argument("--out", type=Path, help="Output directory")
