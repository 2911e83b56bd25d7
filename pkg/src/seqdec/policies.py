"""Policy function approximations, cost function approximations, value function
approximations and direct lookaheads, behind a single ``PolicySpec`` interface.

A :class:`PolicySpec` is a tag plus named parameters.  ``spec.build(view)``
turns it into a callable ``state -> decision`` for a given model view (the
flu controller model, an energy storage model or a pure-learning model).
Every argmax/argmin breaks ties toward the lowest candidate index.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Sequence

import numpy as np

from .belief import GaussianBelief
from .core import MAXIMIZE, MINIMIZE, argbest, derive_stream, simulate
from .problems.energy import EnergyStorageModel
from .problems.flu import ControllerModel, FluControllerState, FluDecision, FluProblem
from .problems.learning import PureLearningModel

TAGS = (
    "PFA-Observe",
    "PFA-Vaccinate",
    "PFA-Linear",
    "CFA-IE",
    "CFA-VaccinateArgmax",
    "VFA-Linear",
    "DLA-SimplifiedMdp",
    "Hybrid",
    # plumbing
    "PFA-Threshold",
    "Constant",
    "RoundRobin",
)

DEFAULT_RIDGE = 1e-6


class PolicyDomainError(ValueError):
    """Policy parameters outside their declared bounds."""


class FeatureError(ValueError):
    """A feature evaluated to a non-finite value."""


# --------------------------------------------------------------------------
# elementary rules


def pfa_observe(S: FluControllerState, theta_obs: float, region: int = 0) -> int:
    """Observe iff the coefficient of variation ``sigma_bar / mu_bar`` is at least ``theta_obs``.

    A nonpositive estimate always triggers an observation.
    """
    if theta_obs < 0:
        raise PolicyDomainError("theta_obs must be >= 0")
    mu = S.mu_bar[region]
    if mu <= 0:
        return 1
    return int(S.sigma_bar[region] / mu >= theta_obs)


def pfa_vaccinate(S: FluControllerState, theta_vac: float, theta_zeta: float, mu_vac: float, cap: float | None = None, region: int = 0) -> float:
    """``max{0, mu_bar + theta_zeta sigma_bar - mu_vac} / theta_vac``, capped at ``cap``."""
    if not theta_vac > 0:
        raise PolicyDomainError("theta_vac must be > 0")
    sd = S.sigma_bar[region]
    # an infinitely uncertain belief with theta_zeta = 0 carries no bonus
    bonus = 0.0 if theta_zeta == 0 else theta_zeta * sd
    x = max(0.0, S.mu_bar[region] + bonus - mu_vac) / theta_vac
    if cap is not None:
        x = min(x, cap)
    return x


def _ie_scores(beliefs: Sequence[GaussianBelief], theta_ie: float) -> list[float]:
    if theta_ie == 0:
        return [b.mean for b in beliefs]
    return [b.mean + theta_ie * b.std for b in beliefs]


def cfa_ie_select(beliefs: Sequence[GaussianBelief], theta_ie: float) -> int:
    """Interval estimation: ``argmax_i mu_bar_i + theta_ie sigma_bar_i``."""
    if not beliefs:
        raise ValueError("need at least one belief")
    return argbest(_ie_scores(beliefs, theta_ie), MAXIMIZE)


def cfa_vaccinate_argmax(beliefs: Sequence[GaussianBelief]) -> int:
    """Region with the highest estimated prevalence."""
    if not beliefs:
        raise ValueError("need at least one belief")
    return argbest([b.mean for b in beliefs], MAXIMIZE)


# --------------------------------------------------------------------------
# features


@dataclass(frozen=True)
class FeatureSet:
    """Named feature functions ``phi_f(state, decision)``."""

    names: tuple[str, ...]
    fns: tuple[Callable[..., float], ...]

    def __len__(self):
        return len(self.names)

    def __call__(self, *args) -> np.ndarray:
        out = np.empty(len(self.names))
        for k, (name, fn) in enumerate(zip(self.names, self.fns)):
            v = float(fn(*args))
            if not math.isfinite(v):
                raise FeatureError(f"feature {name!r} is not finite ({v})")
            out[k] = v
        return out

    def subset(self, names: Sequence[str]) -> "FeatureSet":
        idx = [self.names.index(n) for n in names]
        return FeatureSet(tuple(self.names[i] for i in idx), tuple(self.fns[i] for i in idx))


def flu_post_decision(cm: ControllerModel, S: FluControllerState, x: FluDecision) -> tuple[float, float]:
    """Predicted mean and the std left after the decision's observation (region 0)."""
    mu = cm.prior_mean_next(S, 0, x.vac[0])
    beta = cm.prior_precision_next(S, 0)
    if x.obs:
        beta = beta + cm.precision_w
    sd = 0.0 if math.isinf(beta) else (math.inf if beta == 0 else 1.0 / math.sqrt(beta))
    return mu, sd


def flu_value_features(cm: ControllerModel) -> FeatureSet:
    """Post-decision features ``[1, mu^x, (mu^x)^2, sd^x, (sd^x)^2]``."""

    def post(S, x):
        return flu_post_decision(cm, S, x)

    return FeatureSet(
        ("one", "mu_x", "mu_x_sq", "sd_x", "sd_x_sq"),
        (
            lambda S, x: 1.0,
            lambda S, x: post(S, x)[0],
            lambda S, x: post(S, x)[0] ** 2,
            lambda S, x: post(S, x)[1],
            lambda S, x: post(S, x)[1] ** 2,
        ),
    )


FLU_STATE_FEATURES = FeatureSet(
    ("one", "mu_bar", "sigma_bar"),
    (lambda S: 1.0, lambda S: S.mu_bar[0], lambda S: S.sigma_bar[0]),
)

ENERGY_STATE_FEATURES = FeatureSet(
    ("one", "price", "R"),
    (lambda S: 1.0, lambda S: S.p, lambda S: S.R),
)


def vfa_decision(
    S: Any,
    candidates: Sequence[Any],
    theta: Sequence[float],
    features: FeatureSet,
    contribution: Callable[[Any, Any], float],
    sense: str = MINIMIZE,
) -> Any:
    """``arg best_x C(S, x) + sum_f theta_f phi_f(S, x)`` over a finite candidate list."""
    if not candidates:
        raise ValueError("empty candidate set")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (len(features),):
        raise ValueError(f"need {len(features)} weights, got {theta.shape}")
    scores = [contribution(S, x) + float(theta @ features(S, x)) for x in candidates]
    return candidates[argbest(scores, sense)]


# --------------------------------------------------------------------------
# fitted value iteration


@dataclass
class VfaFit:
    theta: np.ndarray
    rmse: list[float]
    r2: list[float]
    n_samples: int
    regularized: bool = False


def _regress(Phi: np.ndarray, y: np.ndarray, ridge: float) -> tuple[np.ndarray, bool]:
    d = Phi.shape[1]
    if Phi.shape[0] >= d and np.linalg.matrix_rank(Phi) == d:
        theta, *_ = np.linalg.lstsq(Phi, y, rcond=None)
        return theta, False
    A = Phi.T @ Phi + ridge * np.eye(d)
    return np.linalg.solve(A, Phi.T @ y), True


def vfa_fit(
    problem: FluProblem,
    exploration_policy: Any,
    replications: int,
    sweeps: int,
    *,
    features: FeatureSet | None = None,
    master_seed: int = 0,
    T: int | None = None,
    ridge: float = DEFAULT_RIDGE,
) -> VfaFit:
    """Fit linear value weights by fitted value iteration.

    Trajectories ``S_0, x_0, ..., S_T`` are simulated once under the
    exploration policy, which also picks a terminal decision ``x_T``.  The
    post-decision value ``V(S_t, x_t)`` estimates the cost from ``t + 1`` on.
    Each sweep regresses the sampled values

        ``v_t = C(S_{t+1}, x*) + V(S_{t+1}, x* | theta)``  for ``t + 1 < T``,
        ``v_{T-1} = C(S_T, x_T)``,

    where ``x*`` is greedy with respect to the previous sweep's weights.
    """
    if sweeps < 1:
        raise ValueError("sweeps must be >= 1")
    if replications < 1:
        raise ValueError("replications must be >= 1")
    cm = problem.policy_view()
    feats = features or flu_value_features(cm)
    T = problem.horizon if T is None else T
    if T < 1:
        raise ValueError("fitting needs T >= 1")
    explore = exploration_policy.build(cm) if hasattr(exploration_policy, "build") else exploration_policy

    paths = []
    for seed in [derive_stream(master_seed, r, "vfa-fit") for r in range(replications)]:
        traj = simulate(problem, explore, seed, T)
        states = [problem.observable(r.state) for r in traj.records] + [problem.observable(traj.final_state)]
        decisions = [r.decision for r in traj.records]
        xT = explore(states[-1])
        paths.append((states, decisions, xT))

    Phi = np.array([feats(states[t], decisions[t]) for states, decisions, _ in paths for t in range(T)])
    theta = np.zeros(len(feats))
    rmse, r2 = [], []
    regularized = False
    for _ in range(sweeps):
        y = []
        for states, decisions, xT in paths:
            for t in range(T):
                S1 = states[t + 1]
                if t + 1 == T:
                    y.append(cm.cost(S1, xT))
                else:
                    cands = cm.candidates(S1)
                    y.append(min(cm.cost(S1, x) + float(theta @ feats(S1, x)) for x in cands))
        y = np.asarray(y)
        theta, reg = _regress(Phi, y, ridge)
        regularized = regularized or reg
        resid = y - Phi @ theta
        rmse.append(float(np.sqrt(np.mean(resid**2))))
        ss = float(np.sum((y - y.mean()) ** 2))
        r2.append(1.0 - float(np.sum(resid**2)) / ss if ss > 0 else 1.0)
    return VfaFit(theta, rmse, r2, Phi.shape[0], regularized)


# --------------------------------------------------------------------------
# direct lookahead on a discretized belief model


@dataclass(frozen=True)
class LookaheadConfig:
    horizon: int = 3
    mu_points: int = 61
    beta_points: int = 31
    gh_points: int = 7
    mu_max_factor: float = 3.0

    def __post_init__(self):
        if self.horizon < 0:
            raise PolicyDomainError("lookahead horizon must be >= 0")
        if self.mu_points < 2 or self.beta_points < 1 or self.gh_points < 1:
            raise PolicyDomainError("grid resolutions must be positive")
        if not self.mu_max_factor > 0:
            raise PolicyDomainError("mu_max_factor must be > 0")


class _Snapper:
    """Nearest grid point (ties to the smaller value) for grids given in any order."""

    def __init__(self, grid: np.ndarray):
        grid = np.asarray(grid, dtype=float)
        self.order = np.argsort(grid, kind="stable")
        self.sorted = grid[self.order]
        self.size = grid.size
        d = np.diff(self.sorted)
        self.step = None
        if self.size > 1 and np.all(np.isfinite(self.sorted)) and d[0] > 0 and np.allclose(d, d[0], rtol=1e-12, atol=0):
            self.step = float(d[0])

    def __call__(self, x: np.ndarray) -> np.ndarray:
        g = self.sorted
        x = np.asarray(x, dtype=float)
        if self.step is not None:
            # uniform grid: ceil(u - 1/2) rounds half-way points down
            k = np.ceil((x - g[0]) / self.step - 0.5)
            return self.order[np.clip(k, 0, self.size - 1).astype(np.intp)]
        j = np.searchsorted(g, x, side="left")
        lo = np.clip(j - 1, 0, self.size - 1)
        hi = np.clip(j, 0, self.size - 1)
        with np.errstate(invalid="ignore"):
            pick_lo = (x - g[lo]) <= (g[hi] - x)
        pick_lo |= hi == lo
        # exact hits on infinite points
        pick_lo &= ~((g[hi] == x) & (hi != lo))
        return self.order[np.where(pick_lo, lo, hi)]


def gauss_hermite(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and probability weights for a standard normal expectation."""
    z, w = np.polynomial.hermite_e.hermegauss(n)
    return z, w / w.sum()


def _stationary_precision(q: float, bw: float) -> float:
    """Fixed point of ``beta = 1/(1/beta + q) + beta_W`` (always observing)."""
    if math.isinf(bw):
        return math.inf
    # beta^2 q - beta_W q beta - beta_W = 0
    return (bw * q + math.sqrt((bw * q) ** 2 + 4 * q * bw)) / (2 * q)


class DlaSolver:
    """Backward DP over a discretized ``(mu_bar, beta)`` belief with drift frozen.

    The lookahead model holds the drift at the current ``delta_bar``, moves
    the mean by ``delta_bar - theta_vac_hat * x_vac``, inflates the variance
    by the assumed process variance, and treats an observation as a
    Gauss-Hermite mixture over the predictive distribution.  Next states
    snap to the nearest grid point, so the discretized DP is exact.
    """

    def __init__(self, cm: ControllerModel, config: LookaheadConfig = LookaheadConfig(), mu_grid=None, beta_grid=None):
        self.cm = cm
        self.config = config
        mu0 = cm.prior_mean[0] if cm.prior_mean[0] > 0 else 1.0
        if mu_grid is None:
            mu_grid = np.linspace(0.0, config.mu_max_factor * mu0, config.mu_points)
        if beta_grid is None:
            beta_grid = self.default_beta_grid()
        self.mu_grid = np.asarray(mu_grid, dtype=float)
        self.beta_grid = np.asarray(beta_grid, dtype=float)
        self._mu_snap = _Snapper(self.mu_grid)
        self._beta_snap = _Snapper(self._logb(self.beta_grid))
        self.z, self.w = gauss_hermite(config.gh_points)
        self._memo: dict = {}
        self.warnings: list[str] = []

    def default_beta_grid(self) -> np.ndarray:
        cm, c = self.cm, self.config
        b0, q, bw = cm.prior_precision, cm.process_var, cm.precision_w
        H = max(c.horizon, 1)
        lo = b0 if q == 0 else 1.0 / (1.0 / b0 + H * q)
        if math.isinf(bw):
            hi = b0 if q == 0 else 1.0 / q
        elif q == 0:
            hi = b0 + max(H, cm.horizon) * bw
        else:
            hi = max(b0 + H * bw, _stationary_precision(q, bw))
        grid = np.geomspace(lo, max(hi, lo), c.beta_points) if c.beta_points > 1 else np.array([b0])
        if math.isinf(bw) or math.isinf(b0):
            grid = np.append(grid, math.inf)
        return grid

    @staticmethod
    def _logb(b):
        b = np.asarray(b, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(b)

    def snap_mu(self, mu):
        return self._mu_snap(mu)

    def snap_beta(self, beta):
        return self._beta_snap(self._logb(beta))

    # -- model pieces ----------------------------------------------------

    def vac_grid(self, cap: float) -> np.ndarray:
        n = self.cm.vac_grid_size
        if not self.cm.vaccinates or cap <= 0 or n == 1:
            return np.zeros(1)
        return cap * np.arange(n) / (n - 1)

    def inflate(self, beta):
        q = self.cm.process_var
        beta = np.asarray(beta, dtype=float)
        if q == 0:
            return beta
        with np.errstate(divide="ignore"):
            return np.where(beta == 0, 0.0, 1.0 / (1.0 / beta + q))

    def sigma(self, beta):
        beta = np.asarray(beta, dtype=float)
        with np.errstate(divide="ignore"):
            return np.where(np.isinf(beta), 0.0, 1.0 / np.sqrt(beta))

    def obs_spread(self, beta_x):
        """Std of the posterior-mean change caused by one observation."""
        bw = self.cm.precision_w
        beta_x = np.asarray(beta_x, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            if math.isinf(bw):
                s = 1.0 / np.sqrt(beta_x)
            else:
                s = np.sqrt(bw / (beta_x * (beta_x + bw)))
        return np.where(np.isinf(beta_x), 0.0, s)

    def stage_cost(self, mu, beta, obs, vac):
        cm = self.cm
        return cm.c_obs * obs + cm.c_unc * self.sigma(beta) + cm.c_prev * mu + cm.c_vac * vac

    def _expected_next(self, V: np.ndarray, mu: np.ndarray, beta: np.ndarray, shifts: np.ndarray):
        """Expected next-stage value for both observation choices.

        ``mu`` has shape (M,), ``beta`` (B,), ``shifts`` (D,); returns
        arrays of shape (2, D, M, B).
        """
        bx = self.inflate(beta)
        mux = shifts[:, None] + mu[None, :]
        ib = self.snap_beta(bx)
        no_obs = V[self.snap_mu(mux)[:, :, None], ib[None, None, :]]
        ib_obs = self.snap_beta(bx + self.cm.precision_w)
        s = self.obs_spread(bx)
        mu_obs = mux[:, :, None, None] + s[None, None, :, None] * self.z[None, None, None, :]
        vals = V[self.snap_mu(mu_obs), ib_obs[None, None, :, None]]
        obs = vals @ self.w
        return np.stack([no_obs, obs])

    def solve(self, delta_bar: float, cap: float, steps: int | None = None) -> np.ndarray:
        """Value table with ``steps`` stages to go on the grid (memoized)."""
        steps = self.config.horizon - 1 if steps is None else steps
        key = (float(delta_bar), float(cap), steps)
        if key in self._memo:
            return self._memo[key]
        vac = self.vac_grid(cap)
        shifts = delta_bar - self.cm.theta_vac_hat * vac
        mu, beta = self.mu_grid, self.beta_grid
        V = np.zeros((mu.size, beta.size))
        cost = np.stack([
            self.stage_cost(mu[None, :, None], beta[None, None, :], o, vac[:, None, None]) for o in (0, 1)
        ])
        for _ in range(max(steps, 0)):
            Q = cost + self._expected_next(V, mu, beta, shifts)
            V = Q.reshape(-1, mu.size, beta.size).min(axis=0)
        if len(self._memo) > 64:
            self._memo.clear()
        self._memo[key] = V
        return V

    def q_values(self, mu: float, beta: float, delta_bar: float, cap: float) -> tuple[np.ndarray, np.ndarray]:
        """Q-values at an off-grid state for all (obs, vac) pairs, shape (2, D)."""
        vac = self.vac_grid(cap)
        cost = np.stack([self.stage_cost(mu, beta, o, vac) for o in (0, 1)])
        if self.config.horizon == 0:
            return cost, vac
        V = self.solve(delta_bar, cap)
        shifts = delta_bar - self.cm.theta_vac_hat * vac
        nxt = self._expected_next(V, np.array([mu]), np.array([beta]), shifts)[:, :, 0, 0]
        return cost + nxt, vac

    def decide(self, S: FluControllerState) -> FluDecision:
        mu, beta = S.mu_bar[0], S.beta[0]
        if not self.mu_grid.min() <= mu <= self.mu_grid.max():
            self.warnings.append(f"mu_bar={mu} outside the lookahead grid; clamped")
        finite_b = self.beta_grid[np.isfinite(self.beta_grid)]
        if math.isfinite(beta) and finite_b.size and not finite_b.min() <= beta <= finite_b.max():
            self.warnings.append(f"beta={beta} outside the lookahead grid; clamped")
        delta_bar = S.delta_bar if S.delta_bar is not None else 0.0
        Q, vac = self.q_values(mu, beta, delta_bar, self.cm.vac_cap(S))
        k = int(np.argmin(Q.reshape(-1)))
        obs, j = divmod(k, vac.size)
        return FluDecision(obs, (float(vac[j]),))


def dla_decision(S: FluControllerState, cm: ControllerModel, lookahead: LookaheadConfig | DlaSolver = LookaheadConfig()) -> FluDecision:
    solver = lookahead if isinstance(lookahead, DlaSolver) else DlaSolver(cm, lookahead)
    return solver.decide(S)


# --------------------------------------------------------------------------
# hybrids


def apply_inventory_cap(S: FluControllerState, x: FluDecision) -> FluDecision:
    """Scale vaccinations down so ``sum x_vac <= R``; ``x_obs`` is untouched."""
    if S.R is None:
        return x
    total = x.total_vac
    if total <= S.R:
        return x
    if S.R <= 0:
        return replace(x, vac=tuple(0.0 for _ in x.vac))
    if len(x.vac) == 1:
        return replace(x, vac=(S.R,))
    f = S.R / total
    return replace(x, vac=tuple(v * f for v in x.vac))


def hybrid_decision(S: FluControllerState, observe_policy: Callable, vaccinate_policy: Callable) -> FluDecision:
    xo = observe_policy(S)
    xv = vaccinate_policy(S)
    return apply_inventory_cap(S, FluDecision(xo.obs, xv.vac, xv.inv, xo.region))


# --------------------------------------------------------------------------
# specs


@dataclass(frozen=True)
class PolicySpec:
    """Tagged policy description; serializes losslessly to JSON."""

    tag: str
    params: dict = field(default_factory=dict)
    features: tuple[str, ...] | None = None
    policy_id: str | None = None
    components: dict | None = None

    def __post_init__(self):
        if self.tag not in TAGS:
            raise PolicyDomainError(f"unknown policy tag {self.tag!r}; expected one of {TAGS}")
        if self.tag == "Hybrid":
            comps = self.components or {}
            if set(comps) != {"observe", "vaccinate"}:
                raise PolicyDomainError("Hybrid needs exactly the components 'observe' and 'vaccinate'")
        if self.policy_id is None:
            object.__setattr__(self, "policy_id", self.tag)
        _check_bounds(self.params)

    # -- serialization ---------------------------------------------------

    def to_dict(self) -> dict:
        d: dict = {"tag": self.tag, "params": dict(self.params), "policy_id": self.policy_id}
        if self.features is not None:
            d["features"] = list(self.features)
        if self.components is not None:
            d["components"] = {k: v.to_dict() for k, v in self.components.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "PolicySpec":
        comps = d.get("components")
        if comps is not None:
            comps = {k: cls.from_dict(v) for k, v in comps.items()}
        feats = d.get("features")
        return cls(
            d["tag"],
            dict(d.get("params", {})),
            tuple(feats) if feats is not None else None,
            d.get("policy_id"),
            comps,
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "PolicySpec":
        return cls.from_dict(json.loads(text))

    # -- parameters ------------------------------------------------------

    def with_params(self, values: dict, policy_id: str | None = None) -> "PolicySpec":
        """Copy with parameters replaced; ``"observe.theta_ie"`` reaches into a component."""
        own = dict(self.params)
        nested: dict[str, dict] = {}
        for name, v in values.items():
            if "." in name:
                comp, sub = name.split(".", 1)
                nested.setdefault(comp, {})[sub] = v
            else:
                own[name] = v
        comps = self.components
        if nested:
            if comps is None or not set(nested) <= set(comps):
                raise PolicyDomainError(f"unknown components {sorted(set(nested) - set(comps or {}))}")
            comps = {k: (c.with_params(nested[k]) if k in nested else c) for k, c in comps.items()}
        return replace(self, params=own, components=comps, policy_id=policy_id or self.policy_id)

    def build(self, view: Any) -> Callable[[Any], Any]:
        if isinstance(view, ControllerModel):
            return _build_flu(self, view)
        if isinstance(view, EnergyStorageModel):
            return _build_energy(self, view)
        if isinstance(view, PureLearningModel):
            return _build_learning(self, view)
        raise PolicyDomainError(f"no policies for model view {type(view).__name__}")


_BOUNDS = {
    "theta_obs": lambda v: v >= 0,
    "theta_vac": lambda v: v > 0,
    "dose": lambda v: v >= 0,
    "horizon": lambda v: v >= 0,
    "mu_points": lambda v: v > 0,
    "beta_points": lambda v: v > 0,
    "gh_points": lambda v: v > 0,
    "sweeps": lambda v: v >= 1,
}


def _check_bounds(params: dict):
    for k, v in params.items():
        ok = _BOUNDS.get(k)
        if ok is not None and isinstance(v, (int, float)) and not ok(v):
            raise PolicyDomainError(f"parameter {k}={v} out of bounds")


class BuiltPolicy:
    """A callable policy with an id and a place to collect warnings."""

    def __init__(self, fn, policy_id: str, warnings: list[str] | None = None):
        self.fn = fn
        self.policy_id = policy_id
        self.warnings = warnings if warnings is not None else []

    def __call__(self, state):
        return self.fn(state)


def _order_up_to(cm: ControllerModel, params: dict):
    target = params.get("inv_target", cm.R0)

    def finish(S: FluControllerState, x: FluDecision) -> FluDecision:
        x = apply_inventory_cap(S, x)
        if S.R is None:
            return x
        return replace(x, inv=max(0.0, target - S.R + x.total_vac))

    return finish


def _weights(spec: PolicySpec, n: int) -> np.ndarray:
    w = spec.params.get("weights")
    if w is None:
        return np.zeros(n)
    w = np.asarray(w, dtype=float)
    if w.shape != (n,):
        raise PolicyDomainError(f"{spec.tag} needs {n} weights, got {w.shape}")
    return w


def _build_flu(spec: PolicySpec, cm: ControllerModel) -> BuiltPolicy:
    p = spec.params
    R = cm.regions
    finish = _order_up_to(cm, p)
    zero = (0.0,) * R

    def observe_rule(S):
        """(obs, region) from the coefficient-of-variation threshold."""
        th = p.get("theta_obs", 0.1)
        if R == 1:
            return pfa_observe(S, th), 0
        ratios = [math.inf if m <= 0 else s / m for m, s in zip(S.mu_bar, S.sigma_bar)]
        i = argbest(ratios, MAXIMIZE)
        return pfa_observe(S, th, i), i

    tag = spec.tag
    if tag == "PFA-Observe":
        def fn(S):
            o, i = observe_rule(S)
            return finish(S, FluDecision(o, zero, 0.0, i))

    elif tag == "PFA-Vaccinate":
        tv, tz, mv = p.get("theta_vac", 1.0), p.get("theta_zeta", 0.0), p.get("mu_vac", 0.0)
        if not tv > 0:
            raise PolicyDomainError("theta_vac must be > 0")

        def fn(S):
            o, i = observe_rule(S)
            cap = cm.vac_cap(S)
            vac = tuple(pfa_vaccinate(S, tv, tz, mv, cap, region=k) for k in range(R))
            return finish(S, FluDecision(o, vac if cm.vaccinates else zero, 0.0, i))

    elif tag == "PFA-Linear":
        feats = FLU_STATE_FEATURES.subset(spec.features) if spec.features else FLU_STATE_FEATURES
        w = _weights(spec, len(feats))

        def fn(S):
            o, i = observe_rule(S)
            v = min(max(float(w @ feats(S)), 0.0), cm.vac_cap(S))
            return finish(S, FluDecision(o, (v,) + zero[1:], 0.0, i))

    elif tag == "CFA-IE":
        th = p.get("theta_ie", 1.0)
        dose = p.get("dose")

        def fn(S):
            beliefs = S.beliefs()
            if R == 1:
                # observe when the uncertainty bonus outweighs the cost of looking
                o, i = int(th * S.sigma_bar[0] >= cm.c_obs), 0
            else:
                o, i = 1, cfa_ie_select(beliefs, th)
            vac = list(zero)
            if dose is not None and cm.vaccinates:
                vac[cfa_vaccinate_argmax(beliefs)] = min(dose, cm.vac_cap(S))
            return finish(S, FluDecision(o, tuple(vac), 0.0, i))

    elif tag == "CFA-VaccinateArgmax":
        dose = p.get("dose")

        def fn(S):
            o, i = observe_rule(S)
            vac = list(zero)
            if cm.vaccinates:
                cap = cm.vac_cap(S)
                vac[cfa_vaccinate_argmax(S.beliefs())] = cap if dose is None else min(dose, cap)
            return finish(S, FluDecision(o, tuple(vac), 0.0, i))

    elif tag == "VFA-Linear":
        if R != 1:
            raise PolicyDomainError("VFA-Linear is defined for single-region flu variants")
        feats = flu_value_features(cm)
        if spec.features:
            feats = feats.subset(spec.features)
        w = _weights(spec, len(feats))

        def fn(S):
            x = vfa_decision(S, cm.candidates(S), w, feats, cm.cost, MINIMIZE)
            return finish(S, x)

    elif tag == "DLA-SimplifiedMdp":
        if R != 1:
            raise PolicyDomainError("DLA-SimplifiedMdp is defined for single-region flu variants")
        cfg = LookaheadConfig(**{k: p[k] for k in ("horizon", "mu_points", "beta_points", "gh_points", "mu_max_factor") if k in p})
        solver = DlaSolver(cm, cfg)

        def fn(S):
            return finish(S, solver.decide(S))

        return BuiltPolicy(fn, spec.policy_id, solver.warnings)

    elif tag == "Hybrid":
        obs_pol = spec.components["observe"].build(cm)
        vac_pol = spec.components["vaccinate"].build(cm)

        def fn(S):
            return finish(S, hybrid_decision(S, obs_pol, vac_pol))

        return BuiltPolicy(fn, spec.policy_id, obs_pol.warnings + vac_pol.warnings)

    elif tag == "Constant":
        obs = int(p.get("obs", 0))
        vac = p.get("vac", 0.0)
        vac = tuple(vac) if isinstance(vac, (list, tuple)) else (float(vac),) * R

        def fn(S):
            return finish(S, FluDecision(obs, vac if cm.vaccinates else zero, 0.0, int(p.get("region", 0))))

    elif tag == "RoundRobin":
        state = {"t": 0}

        def fn(S):
            i = state["t"] % R
            state["t"] += 1
            return finish(S, FluDecision(1, zero, 0.0, i))

    else:
        raise PolicyDomainError(f"{tag} is not available for the flu problem")
    return BuiltPolicy(fn, spec.policy_id)


def _build_energy(spec: PolicySpec, m: EnergyStorageModel) -> BuiltPolicy:
    p = spec.params
    if spec.tag == "PFA-Linear":
        feats = ENERGY_STATE_FEATURES.subset(spec.features) if spec.features else ENERGY_STATE_FEATURES
        w = _weights(spec, len(feats))

        def fn(S):
            return m.clamp(S, float(w @ feats(S)))

    elif spec.tag == "PFA-Threshold":
        buy, sell = p.get("buy", m.price_mean - 5.0), p.get("sell", m.price_mean + 5.0)
        if buy > sell:
            raise PolicyDomainError("buy threshold must not exceed sell threshold")
        lo_hi = m.R_max / m.eta

        def fn(S):
            if S.p <= buy:
                return m.clamp(S, lo_hi)
            if S.p >= sell:
                return m.clamp(S, -lo_hi)
            return 0.0

    elif spec.tag == "Constant":
        x = float(p.get("x", 0.0))

        def fn(S):
            return m.clamp(S, x)

    else:
        raise PolicyDomainError(f"{spec.tag} is not available for the energy problem")
    return BuiltPolicy(fn, spec.policy_id)


def _build_learning(spec: PolicySpec, m: PureLearningModel) -> BuiltPolicy:
    p = spec.params
    if spec.tag == "CFA-IE":
        th = p.get("theta_ie", 1.0)

        def fn(S):
            return cfa_ie_select(S.beliefs, th)

    elif spec.tag == "RoundRobin":
        def fn(S):
            return S.n % m.n_alternatives

    elif spec.tag == "Constant":
        x = int(p.get("x", 0))

        def fn(S):
            return x

    else:
        raise PolicyDomainError(f"{spec.tag} is not available for the pure-learning problem")
    return BuiltPolicy(fn, spec.policy_id)
