"""Multi-agent PPO on DAG-structured tasks.

Agents sit on the nodes of a task DAG; only sink nodes earn environment
reward.  Training can add a goal-issuing leader and a learned reward
generator/distributor that propagates a synthetic-reward budget from the
sinks back through the graph.
"""

__version__ = "0.1.0"

from .config import ExperimentConfig, RunMode
from .dag import DagTopology
from .envs import make_env
from .ppo import PpoConfig, PpoLearner
from .reward_flow import RgdOutput, distribute, synthetic_budget
from .training import Trainer, train

__all__ = [
    "DagTopology",
    "ExperimentConfig",
    "PpoConfig",
    "PpoLearner",
    "RgdOutput",
    "RunMode",
    "Trainer",
    "distribute",
    "make_env",
    "synthetic_budget",
    "train",
    "__version__",
]
