"""Canonical sequential decision model, simulation loop and objective evaluators.

A model is anything implementing the :class:`CanonicalModel` interface: a
sampler for the initial state, a feasibility test for decisions, a sampler
for the exogenous information, a transition function and a contribution
function, plus a horizon and an objective sense.  Decisions at time ``t`` are
made from ``S_t`` only; ``W_{t+1}`` is drawn after ``x_t`` is fixed.

All randomness is derived from a single master seed through
:func:`derive_stream`; nothing here touches global RNG state.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Sequence

import numpy as np

MINIMIZE = "minimize"
MAXIMIZE = "maximize"

_MASK64 = (1 << 64) - 1
# two-sided 95% normal quantile
Z95 = 1.959963984540054


class SimulationError(RuntimeError):
    """Raised when a trajectory cannot be simulated (e.g. infeasible decision)."""

    def __init__(self, message: str, *, step: int | None = None, replication: int | None = None):
        self.step = step
        self.replication = replication
        super().__init__(message)


class InfeasibleDecisionError(SimulationError):
    pass


# --------------------------------------------------------------------------
# random streams


def splitmix64(z: int) -> int:
    """SplitMix64 output finalizer (a bijection on 64-bit words)."""
    z = (z + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_stream(master_seed: int, replication: int, purpose: str) -> int:
    """Derive a 64-bit substream seed from ``(master_seed, replication, purpose)``.

    The pair ``(replication, purpose)`` is hashed with BLAKE2b (8-byte digest),
    xor-ed into the master seed and passed through the SplitMix64 finalizer.
    The result only depends on its arguments, so it is stable across runs and
    platforms.
    """
    key = f"{int(replication)}\x1f{purpose}".encode("utf-8")
    h = int.from_bytes(hashlib.blake2b(key, digest_size=8).digest(), "little")
    return splitmix64((int(master_seed) & _MASK64) ^ h)


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed) & _MASK64))


# --------------------------------------------------------------------------
# model interface


class CanonicalModel:
    """Base class for the five-element sequential decision model.

    Subclasses override the hooks below.  States and decisions may be any
    immutable Python values; ``state_fields``/``decision_fields`` flatten them
    into named scalars for logging.
    """

    horizon: int = 0
    sense: str = MINIMIZE
    # "cost": tune on logged contributions; "truth": tune on truth_metric
    tuning_objective: str = "cost"

    def initial_state(self, rng: np.random.Generator) -> Any:
        raise NotImplementedError

    def check_decision(self, state: Any, x: Any) -> str | None:
        """Return a description of the violated constraint, or None if feasible."""
        return None

    def sample_exogenous(self, state: Any, x: Any, rng: np.random.Generator) -> Any:
        raise NotImplementedError

    def transition(self, state: Any, x: Any, w: Any) -> Any:
        raise NotImplementedError

    def contribution(self, state: Any, x: Any, w: Any = None) -> float:
        raise NotImplementedError

    def observable(self, state: Any) -> Any:
        """The part of the state a policy is allowed to see."""
        return state

    def policy_view(self) -> Any:
        """Static model information a policy may be built from."""
        return self

    def truth_metric(self, state: Any) -> float:
        raise NotImplementedError(f"{type(self).__name__} has no truth-based objective")

    def state_fields(self, state: Any) -> dict[str, float]:
        return _flatten("s", state)

    def decision_fields(self, x: Any) -> dict[str, float]:
        return _flatten("x", x)


def _flatten(prefix: str, value: Any) -> dict[str, float]:
    if isinstance(value, (int, float, np.integer, np.floating)):
        return {prefix: float(value)}
    if isinstance(value, (tuple, list, np.ndarray)):
        out: dict[str, float] = {}
        for i, v in enumerate(value):
            out.update(_flatten(f"{prefix}{i}", v))
        return out
    if hasattr(value, "as_fields"):
        return dict(value.as_fields())
    raise TypeError(f"cannot flatten {type(value).__name__} for logging")


# --------------------------------------------------------------------------
# trajectories


@dataclass(frozen=True)
class StepRecord:
    t: int
    state: Any
    decision: Any
    exogenous: Any
    contribution: float
    truth: float | None = None


@dataclass
class Trajectory:
    policy_id: str
    master_seed: int
    records: list[StepRecord] = field(default_factory=list)
    total: float = 0.0
    final_state: Any = None

    @property
    def truth_total(self) -> float:
        s = 0.0
        for r in self.records:
            if r.truth is None:
                raise ValueError("trajectory was simulated without truth logging")
            s += r.truth
        return s


def _as_policy(policy: Any, model: CanonicalModel):
    """Accept a PolicySpec-like object (``build``) or a bare callable."""
    if hasattr(policy, "build"):
        built = policy.build(model.policy_view())
        return built, getattr(policy, "policy_id", type(policy).__name__)
    name = getattr(policy, "policy_id", getattr(policy, "__name__", type(policy).__name__))
    return policy, name


def simulate(
    model: CanonicalModel,
    policy: Any,
    master_seed: int,
    T: int | None = None,
    *,
    log_truth: bool = False,
) -> Trajectory:
    """Simulate one trajectory of ``T`` steps.

    The policy only ever receives ``model.observable(S_t)``.  Randomness for
    the initial state and the exogenous process come from separate
    substreams of ``master_seed``, so two policies run on the same seed see
    the same exogenous draws whenever the model draws a fixed number of
    variates per step.
    """
    if T is None:
        T = model.horizon
    if T < 0:
        raise ValueError("T must be nonnegative")
    if T > model.horizon:
        raise ValueError(f"T={T} exceeds model horizon {model.horizon}")
    decide, policy_id = _as_policy(policy, model)
    rng_init = make_rng(derive_stream(master_seed, 0, "init"))
    rng_exo = make_rng(derive_stream(master_seed, 0, "exogenous"))

    state = model.initial_state(rng_init)
    traj = Trajectory(policy_id=str(policy_id), master_seed=int(master_seed))
    total = 0.0
    for t in range(T):
        x = decide(model.observable(state))
        violation = model.check_decision(state, x)
        if violation is not None:
            raise InfeasibleDecisionError(f"step {t}: infeasible decision {x!r}: {violation}", step=t)
        w = model.sample_exogenous(state, x, rng_exo)
        c = float(model.contribution(state, x, w))
        truth = float(model.truth_metric(state)) if log_truth else None
        traj.records.append(StepRecord(t, state, x, w, c, truth))
        total += c
        state = model.transition(state, x, w)
    traj.total = total
    traj.final_state = state
    return traj


# --------------------------------------------------------------------------
# objectives


@dataclass(frozen=True)
class ObjectiveSpec:
    kind: str = "cumulative"  # "cumulative" | "final"
    replications: int = 1
    test_samples: int = 1

    def __post_init__(self):
        if self.kind not in ("cumulative", "final"):
            raise ValueError(f"unknown objective kind {self.kind!r}")
        if self.replications < 1:
            raise ValueError("replication count must be >= 1")
        if self.kind == "final" and self.test_samples < 1:
            raise ValueError("final-reward objective needs at least one test sample")


@dataclass(frozen=True)
class Estimate:
    mean: float
    std: float
    ci_half_width: float
    replications: int
    values: tuple[float, ...] = ()

    @classmethod
    def from_values(cls, values: Sequence[float]) -> "Estimate":
        vals = tuple(float(v) for v in values)
        n = len(vals)
        if n == 0:
            raise ValueError("no values")
        mean = math.fsum(vals) / n
        if n > 1:
            std = math.sqrt(math.fsum((v - mean) ** 2 for v in vals) / (n - 1))
        else:
            std = 0.0
        return cls(mean, std, Z95 * std / math.sqrt(n), n, vals)


def replication_seeds(master_seed: int, R: int, purpose: str = "replication") -> list[int]:
    return [derive_stream(master_seed, r, purpose) for r in range(R)]


def evaluate_cumulative(
    model: CanonicalModel,
    policy: Any,
    master_seed: int,
    R: int,
    *,
    T: int | None = None,
    purpose: str = "replication",
    objective: str = "cost",
) -> Estimate:
    """Mean/std/95% CI of the cumulative objective over ``R`` replications.

    ``objective="truth"`` sums ``model.truth_metric`` over the logged states
    instead of the contributions (simulator-only evaluation).
    """
    if R < 1:
        raise ValueError("R must be >= 1")
    values = []
    for r, seed in enumerate(replication_seeds(master_seed, R, purpose)):
        try:
            traj = simulate(model, policy, seed, T, log_truth=objective == "truth")
        except SimulationError as exc:
            raise SimulationError(f"replication {r}: {exc}", step=exc.step, replication=r) from exc
        values.append(traj.truth_total if objective == "truth" else traj.total)
    return Estimate.from_values(values)


def evaluate_final_reward(
    model: Any,
    search_policy: Any,
    master_seed: int,
    R: int,
    test_samples: int,
) -> Estimate:
    """Final-reward objective for a pure-learning model.

    Each replication runs the model's full experimental budget with the
    search policy, picks the final design with ``model.final_design`` and
    averages ``model.test_reward`` over ``test_samples`` fresh draws.
    """
    spec = ObjectiveSpec("final", R, test_samples)
    values = []
    for r, seed in enumerate(replication_seeds(master_seed, spec.replications)):
        try:
            traj = simulate(model, search_policy, seed, model.horizon)
        except SimulationError as exc:
            raise SimulationError(f"replication {r}: {exc}", step=exc.step, replication=r) from exc
        x_final = model.final_design(traj.final_state)
        rng_test = make_rng(derive_stream(seed, 0, "test"))
        draws = model.test_reward(x_final, rng_test, spec.test_samples)
        values.append(math.fsum(draws) / len(draws))
    return Estimate.from_values(values)


def paired_difference(a: Estimate, b: Estimate) -> Estimate:
    """Per-replication differences ``a - b`` (both on the same seed set)."""
    if a.replications != b.replications or not a.values:
        raise ValueError("paired difference needs estimates over the same replications")
    return Estimate.from_values([x - y for x, y in zip(a.values, b.values)])


def argbest(values: Sequence[float], sense: str = MAXIMIZE) -> int:
    """Index of the best value; ties break toward the lowest index."""
    best = 0
    for i in range(1, len(values)):
        if (values[i] > values[best]) if sense == MAXIMIZE else (values[i] < values[best]):
            best = i
    return best


class FunctionPolicy:
    """Wrap a plain function ``state -> decision`` as a named policy."""

    def __init__(self, fn: Callable[[Any], Any], policy_id: str = "function"):
        self.fn = fn
        self.policy_id = policy_id

    def __call__(self, state):
        return self.fn(state)
