"""Built-in multi-agent simulators and their rollout kernels."""

from .worlds import (
    AdditiveConfig,
    AdditiveLine,
    CoopNav,
    CoopNavConfig,
    Environment,
    GridWorld,
    GridWorldConfig,
    PredatorPrey,
    PredatorPreyConfig,
    Traffic,
    TrafficConfig,
    env_description,
    list_envs,
    make_env,
)

__all__ = [
    "AdditiveConfig",
    "AdditiveLine",
    "CoopNav",
    "CoopNavConfig",
    "Environment",
    "GridWorld",
    "GridWorldConfig",
    "PredatorPrey",
    "PredatorPreyConfig",
    "Traffic",
    "TrafficConfig",
    "env_description",
    "list_envs",
    "make_env",
]
