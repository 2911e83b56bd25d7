"""Concrete model families: energy storage, pure learning and flu control."""

from .energy import EnergyConstraintError, EnergyState, EnergyStorageModel, energy_step, forecast_roll
from .flu import (
    ControllerModel,
    FluConfig,
    FluControllerState,
    FluDecision,
    FluEnvironment,
    FluProblem,
    InformationHidingError,
    TwoAgentHarness,
    controller_step_flu,
    env_step_flu,
    flu_cost,
    observe_flu,
    two_agent_episode,
)
from .learning import LearningState, NoFinalDesignError, PureLearningModel

__all__ = [
    "ControllerModel", "EnergyConstraintError", "EnergyState", "EnergyStorageModel", "FluConfig",
    "FluControllerState", "FluDecision", "FluEnvironment", "FluProblem", "InformationHidingError",
    "LearningState", "NoFinalDesignError", "PureLearningModel", "TwoAgentHarness", "controller_step_flu",
    "energy_step", "env_step_flu", "flu_cost", "forecast_roll", "observe_flu", "two_agent_episode",
]
