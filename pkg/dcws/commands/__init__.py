"""
DCWS - Command-Line Subcommands
"""

from dcws.commands import generate, fit, evaluate, ablate, experiment

__all__ = ["generate", "fit", "evaluate", "ablate", "experiment"]
