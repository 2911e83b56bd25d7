"""Policy search by seeded Monte Carlo with common random numbers.

Every parameter value is evaluated on the same replication seeds, so
differences between rows of a tuning table reflect the parameters rather
than the sampled noise.
"""

from __future__ import annotations

import csv
import io
import itertools
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .core import MINIMIZE, Estimate, SimulationError, derive_stream, evaluate_cumulative, make_rng
from .policies import PolicySpec

GRID = "Grid"
RANDOM = "Random"


class TuningDomainError(ValueError):
    pass


@dataclass(frozen=True)
class ParameterDomain:
    """One tunable parameter: explicit ``values`` or a box ``[low, high]`` with optional ``step``."""

    name: str
    values: tuple[float, ...] | None = None
    low: float | None = None
    high: float | None = None
    step: float | None = None

    def __post_init__(self):
        if self.values is not None:
            if len(self.values) == 0:
                raise TuningDomainError(f"parameter {self.name!r} has an empty value list")
            object.__setattr__(self, "values", tuple(float(v) for v in self.values))
            return
        if self.low is None or self.high is None:
            raise TuningDomainError(f"parameter {self.name!r} needs values or low/high")
        if self.low > self.high:
            raise TuningDomainError(f"parameter {self.name!r}: low > high")
        if self.step is not None and not self.step > 0:
            raise TuningDomainError(f"parameter {self.name!r}: step must be > 0")

    def grid(self) -> tuple[float, ...]:
        if self.values is not None:
            return self.values
        if self.step is None:
            raise TuningDomainError(f"parameter {self.name!r} has no grid (give values or step)")
        n = int(np.floor((self.high - self.low) / self.step + 1e-9)) + 1
        return tuple(float(self.low + k * self.step) for k in range(n))

    def bounds(self) -> tuple[float, float]:
        if self.values is not None:
            return min(self.values), max(self.values)
        return self.low, self.high

    @classmethod
    def from_dict(cls, name: str, d: dict) -> "ParameterDomain":
        vals = d.get("values")
        return cls(name, tuple(vals) if vals is not None else None, d.get("low"), d.get("high"), d.get("step"))


@dataclass
class TuningProblem:
    model: Any
    policy: PolicySpec
    domain: Sequence[ParameterDomain]
    replications: int = 20
    master_seed: int = 0
    method: str = GRID
    samples: int = 20
    T: int | None = None

    def __post_init__(self):
        if not self.domain:
            raise TuningDomainError("parameter domain is empty")
        if self.replications < 1:
            raise TuningDomainError("replications must be >= 1")
        if self.method not in (GRID, RANDOM):
            raise TuningDomainError(f"unknown search method {self.method!r}")
        names = [d.name for d in self.domain]
        if len(set(names)) != len(names):
            raise TuningDomainError("duplicate parameter names")

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(d.name for d in self.domain)

    @property
    def sense(self) -> str:
        return self.model.sense


@dataclass
class TuningResult:
    names: tuple[str, ...]
    best_theta: tuple[float, ...]
    best: Estimate
    table: list[tuple[tuple[float, ...], Estimate]] = field(default_factory=list)
    master_seed: int = 0
    seeds: tuple[int, ...] = ()

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(list(self.names) + ["mean", "std", "ci_half_width", "replications", "master_seed"])
        for theta, est in self.table:
            w.writerow([repr(float(v)) for v in theta] + [repr(est.mean), repr(est.std), repr(est.ci_half_width), est.replications, self.master_seed])
        return buf.getvalue()


def evaluate_theta(problem: TuningProblem, theta: Sequence[float]) -> Estimate:
    """Objective estimate for one parameter vector on the shared ``"tune"`` seed set."""
    theta = tuple(float(v) for v in theta)
    if len(theta) != len(problem.domain):
        raise TuningDomainError(f"expected {len(problem.domain)} parameters, got {len(theta)}")
    for d, v in zip(problem.domain, theta):
        lo, hi = d.bounds()
        if not lo <= v <= hi:
            raise TuningDomainError(f"{d.name}={v} outside [{lo}, {hi}]")
    spec = problem.policy.with_params(dict(zip(problem.names, theta)))
    objective = getattr(problem.model, "tuning_objective", "cost")
    try:
        return evaluate_cumulative(
            problem.model, spec, problem.master_seed, problem.replications,
            T=problem.T, purpose="tune", objective=objective,
        )
    except SimulationError as exc:
        raise SimulationError(f"theta={dict(zip(problem.names, theta))}: {exc}", step=exc.step, replication=exc.replication) from exc


def _select(problem: TuningProblem, table) -> tuple[tuple[float, ...], Estimate]:
    minimize = problem.sense == MINIMIZE
    best = None
    for theta, est in table:
        if best is None:
            best = (theta, est)
            continue
        b_theta, b_est = best
        better = est.mean < b_est.mean if minimize else est.mean > b_est.mean
        if better or (est.mean == b_est.mean and theta < b_theta):
            best = (theta, est)
    return best


def _run(problem: TuningProblem, points: list[tuple[float, ...]]) -> TuningResult:
    # canonical order, one row per distinct point
    points = sorted(set(points))
    table = [(theta, evaluate_theta(problem, theta)) for theta in points]
    theta, est = _select(problem, table)
    seeds = tuple(derive_stream(problem.master_seed, r, "tune") for r in range(problem.replications))
    return TuningResult(problem.names, theta, est, table, problem.master_seed, seeds)


def grid_search(problem: TuningProblem) -> TuningResult:
    grids = [d.grid() for d in problem.domain]
    points = list(itertools.product(*grids))
    if not points:
        raise TuningDomainError("empty grid")
    return _run(problem, points)


def random_search(problem: TuningProblem, n: int | None = None) -> TuningResult:
    """``n`` uniform draws from the parameter box (explicit value lists are sampled uniformly)."""
    n = problem.samples if n is None else n
    if n < 1:
        raise TuningDomainError("need at least one sample")
    rng = make_rng(derive_stream(problem.master_seed, 0, "random-search"))
    points = []
    for _ in range(n):
        theta = []
        for d in problem.domain:
            if d.values is not None:
                theta.append(d.values[int(rng.integers(len(d.values)))])
            else:
                theta.append(float(rng.uniform(d.low, d.high)))
        points.append(tuple(theta))
    return _run(problem, points)


def tune(problem: TuningProblem) -> TuningResult:
    return grid_search(problem) if problem.method == GRID else random_search(problem)
