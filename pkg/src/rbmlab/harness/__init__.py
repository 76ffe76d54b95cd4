"""Configuration, experiment runners, acceptance criteria and the CLI."""
from ..seeding import seed_derive
from .config import ExperimentConfig
from .experiments import run

__all__ = ["ExperimentConfig", "run", "seed_derive"]
