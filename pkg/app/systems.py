"""
Registry of built-in delay systems and the JSON model interface.

Custom dynamics go through the library API (DelayModel directly); the
registry only knows systems that can be described by a name and parameters,
e.g. {"system": "sat", "gamma": 1.2, "delta": 2, "alphabet": [[0], [2]]}.
"""

import logging
from typing import Callable, Dict

import numpy as np

from errors import ConfigError, ValidationError
from history_core import DelayModel

logger = logging.getLogger(__name__)

SAT_GAMMA_RANGE = (1.0, 1.2)

BUILTIN_SYSTEMS: Dict[str, Callable[..., DelayModel]] = {}


def register_system(name):
    """Decorator adding a model builder to BUILTIN_SYSTEMS under `name`"""
    def decorator(builder):
        BUILTIN_SYSTEMS[name] = builder
        return builder
    return decorator


def sat(x):
    """Saturation min{1, max{x, -1}}, elementwise"""
    return np.clip(x, -1.0, 1.0)


def sat_dynamics(gamma):
    def f(current, delayed):
        return sat(current) - gamma * sat(delayed)
    return f


@register_system("sat")
def sat_model(gamma: float, delta: int = 2, alphabet=((0,), (2,)), check_gamma: bool = True) -> DelayModel:
    """
    Scalar saturation system x(k+1) = sat(x(k)) - gamma * sat(x(k - d(k)))

    Args:
        gamma: Gain on the delayed term, in [1, 1.2] unless check_gamma is False
        delta: Maximum delay
        alphabet: Delay alphabet in mode order; (0,) is mode 1 and (2,) mode 2 by default
    """
    gamma = float(gamma)
    low, high = SAT_GAMMA_RANGE
    if check_gamma and not low <= gamma <= high:
        raise ValidationError(f"gamma must lie in [{low}, {high}] for the sat system, got {gamma}")
    return DelayModel(
        n=1,
        r=1,
        delta=int(delta),
        dynamics=sat_dynamics(gamma),
        alphabet=tuple(alphabet),
        name="sat",
        params={"gamma": gamma},
    )


def model_from_config(config: dict) -> DelayModel:
    """
    Build a DelayModel from its JSON description

    Args:
        config: Dict with a "system" key naming a registered builder; the
            remaining keys are passed to the builder as keyword arguments

    Returns:
        DelayModel
    """
    if "system" not in config:
        raise ConfigError("missing system name", field="system")
    name = config["system"]
    if name not in BUILTIN_SYSTEMS:
        raise ConfigError(f"unknown system '{name}', known: {sorted(BUILTIN_SYSTEMS)}", field="system")
    kwargs = {key: value for key, value in config.items() if key != "system"}
    if "alphabet" in kwargs:
        kwargs["alphabet"] = tuple(tuple(entry) if isinstance(entry, (list, tuple)) else (entry,)
                                   for entry in kwargs["alphabet"])
    try:
        model = BUILTIN_SYSTEMS[name](**kwargs)
    except TypeError as e:
        raise ConfigError(f"bad parameters for system '{name}': {e}", field="system") from e
    logger.debug(f"Built model '{name}' with delta={model.delta}, alphabet={list(model.alphabet)}")
    return model
