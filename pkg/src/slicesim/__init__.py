"""Energy-aware RAN slice activation: traffic, clustering, network model, bandit agents."""

from .bandit import DcmabAgent, ThompsonAgent, make_agent
from .clustering import ward_cluster
from .config import ExperimentConfig, load_config
from .env import reset, step
from .experiment import run_experiment

__version__ = "0.1.0"

__all__ = [
    "DcmabAgent",
    "ExperimentConfig",
    "ThompsonAgent",
    "load_config",
    "make_agent",
    "reset",
    "run_experiment",
    "step",
    "ward_cluster",
]
