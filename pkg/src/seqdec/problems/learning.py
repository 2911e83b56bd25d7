"""Pure learning (ranking and selection / bandit) model with independent normal beliefs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..belief import GaussianBelief, conjugate_update
from ..core import MAXIMIZE, CanonicalModel, argbest


class NoFinalDesignError(ValueError):
    pass


@dataclass(frozen=True)
class LearningState:
    beliefs: tuple[GaussianBelief, ...]
    n: int = 0

    @property
    def means(self) -> tuple[float, ...]:
        return tuple(b.mean for b in self.beliefs)

    @property
    def stds(self) -> tuple[float, ...]:
        return tuple(b.std for b in self.beliefs)

    def as_fields(self) -> dict[str, float]:
        out: dict[str, float] = {"n": float(self.n)}
        for i, b in enumerate(self.beliefs):
            out[f"mu_bar{i}"] = b.mean
            out[f"beta{i}"] = b.precision
        return out


@dataclass(frozen=True, eq=False)
class PureLearningModel(CanonicalModel):
    """``M`` alternatives with hidden means ``truths`` and noisy experiments.

    Contributions are the raw experimental outcomes (cumulative-reward
    reading); the final-reward objective uses :meth:`final_design` and
    :meth:`test_reward`.
    """

    truths: tuple[float, ...] = (0.2, 0.5, 0.8)
    sigma_w: float = 0.1
    prior_means: tuple[float, ...] | None = None
    prior_precisions: tuple[float, ...] | None = None
    budget: int = 30
    sense: str = field(default=MAXIMIZE, init=False)

    def __post_init__(self):
        M = len(self.truths)
        if M < 1:
            raise ValueError("need at least one alternative")
        if self.sigma_w < 0:
            raise ValueError("sigma_w must be >= 0")
        if self.budget < 0:
            raise ValueError("budget N must be >= 0")
        pm = self.prior_means if self.prior_means is not None else (0.0,) * M
        pp = self.prior_precisions if self.prior_precisions is not None else (0.0,) * M
        if len(pm) != M or len(pp) != M:
            raise ValueError("priors must have one entry per alternative")
        if any(b < 0 for b in pp):
            raise ValueError("prior precisions must be >= 0")
        object.__setattr__(self, "prior_means", tuple(float(v) for v in pm))
        object.__setattr__(self, "prior_precisions", tuple(float(v) for v in pp))

    @property
    def horizon(self) -> int:
        return self.budget

    @property
    def n_alternatives(self) -> int:
        return len(self.truths)

    @property
    def precision_w(self) -> float:
        return math.inf if self.sigma_w == 0 else 1.0 / self.sigma_w**2

    def initial_state(self, rng=None) -> LearningState:
        return LearningState(tuple(GaussianBelief(m, b) for m, b in zip(self.prior_means, self.prior_precisions)))

    def check_decision(self, state, x) -> str | None:
        if not (isinstance(x, (int, np.integer)) and 0 <= x < self.n_alternatives):
            return f"alternative must be an integer in [0, {self.n_alternatives})"
        return None

    def sample_exogenous(self, state, x, rng):
        z = rng.standard_normal(self.n_alternatives)
        return float(self.truths[x] + self.sigma_w * z[x])

    def transition(self, state: LearningState, x, w) -> LearningState:
        beliefs = list(state.beliefs)
        beliefs[x] = conjugate_update(beliefs[x], w, self.precision_w)
        return LearningState(tuple(beliefs), state.n + 1)

    def contribution(self, state, x, w=None) -> float:
        return float(w)

    def final_design(self, state: LearningState) -> int:
        if state.n == 0 and all(b.precision == 0 for b in state.beliefs):
            raise NoFinalDesignError("no basis for final design: budget is zero and priors are diffuse")
        return argbest(state.means)

    def test_reward(self, x: int, rng: np.random.Generator, K: int) -> list[float]:
        return [float(v) for v in self.truths[x] + self.sigma_w * rng.standard_normal(K)]

    def state_fields(self, state):
        return state.as_fields()

    def decision_fields(self, x):
        return {"x": float(x)}
