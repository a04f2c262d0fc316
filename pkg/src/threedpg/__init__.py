"""3DPG and MADDPG multi-agent actor-critic learners over a simulated lossy network."""

from .config import RunConfig, desk_profile, load_config, paper_profile
from .env import EnvConfig
from .learner import Algo
from .netsim import NetworkConfig

__version__ = "0.1.0"

__all__ = ["Algo", "EnvConfig", "NetworkConfig", "RunConfig", "desk_profile", "load_config", "paper_profile"]
