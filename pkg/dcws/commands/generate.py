"""
DCWS - generate: write a synthetic benchmark to disk
"""

import argparse
from pathlib import Path

from dcws.commands.common import EXIT_OK, output_dir
from dcws.config import load_overrides
from dcws.models.synth import PRESETS, SyntheticSpec
from dcws.services.storage import write_bundle
from dcws.services.synth import generate


def add_parser(subparsers) -> argparse.ArgumentParser:
    parser = subparsers.add_parser("generate", help="Generate a synthetic benchmark")
    parser.add_argument("--spec", type=Path, help="Flat key=value file of SyntheticSpec fields")
    parser.add_argument("--preset", choices=PRESETS, help="Preset the spec file starts from")
    parser.add_argument("--seed", type=int, help="Generator seed")
    parser.add_argument("--out", type=Path, help="Output directory")
    parser.set_defaults(handler=run)
    return parser


def run(args: argparse.Namespace) -> int:
    """Generate the benchmark and write its files plus manifest.json"""
    overrides = {}
    if args.spec is not None:
        overrides = load_overrides(args.spec, {"synthetic": SyntheticSpec})["synthetic"]
    if args.seed is not None:
        overrides["seed"] = args.seed
    preset = args.preset or overrides.get("benchmark", "dependent")
    spec = SyntheticSpec.from_preset(preset, **overrides)

    bundle = generate(spec)
    write_bundle(bundle, output_dir(args))
    return EXIT_OK
