"""Flu prevalence control as a two-agent problem.

The *environment* holds the true prevalence ``mu_t`` (one value per region)
together with everything that drives it: drift, vaccination effect, the
true transition model and the weather process.  It makes no decisions.

The *controller* holds only beliefs ``(mu_bar, beta)`` plus what it can see
directly (inventory ``R``, weather readings, drift beliefs) and decides
``x = (x_obs, x_vac, x_inv)``.  The two communicate through the decision
(sent to the environment, acting on ``mu`` from the next period on) and
through noisy observations returned only when ``x_obs = 1``.

Variants:

1. static truth, observe-or-not
2. random-walk truth, inventory and observed weather
3. random walk with an unknown drift
4. truth controlled by vaccinations
5. as 4, with a vaccine inventory
6. several regions, inventory coupling, the full true model (24-period lag,
   temperature term, quadratic vaccination effect); one region observed per
   period

Prevalence is in cases per 100,000; one period is one day.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields, replace
from typing import Any

import numpy as np

from ..belief import (
    GaussianBelief,
    GaussianDriftBelief,
    conjugate_update,
    drift_update,
    inflate,
)
from ..core import MINIMIZE, CanonicalModel, Trajectory, simulate

VARIANTS = (1, 2, 3, 4, 5, 6)
MU_LAGS = 24

# controller-visible state per variant, following the environment/controller table
CONTROLLER_SCHEMA = {
    1: ("mu_bar", "beta"),
    2: ("R", "temp", "hum", "mu_bar", "beta"),
    3: ("mu_bar", "beta", "delta_bar", "beta_delta"),
    4: ("mu_bar", "beta"),
    5: ("R", "mu_bar", "beta"),
    6: ("R", "mu_bar", "beta"),
}
# controller-side memory of its own past observations (never hidden values)
AUXILIARY_FIELDS = ("last_obs", "window")

ENVIRONMENT_SCHEMA = {
    1: ("mu",),
    2: ("mu", "temp", "hum"),
    3: ("mu", "delta"),
    4: ("mu", "last_vac", "theta_vac"),
    5: ("mu", "last_vac", "theta_vac"),
    6: ("mu", "last_vac", "theta_vac"),
}

# names a policy might try to reach for; all live in the environment only
HIDDEN_NAMES = frozenset(
    {"mu", "mu_true", "truth", "delta", "theta_vac", "last_vac", "env", "environment",
     "mu_hist", "temp_hist", "params", "sigma_mu"}
)


class InformationHidingError(AttributeError):
    """A policy tried to read environment-only information."""


class FluConstraintError(ValueError):
    pass


# --------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class FluConfig:
    variant: int = 1
    n_regions: int = 3
    mu0: Any = 50.0
    sigma_mu: float = 2.0
    drift: float = 0.0
    sigma_w: float = 5.0
    theta_vac: float = 0.5
    # controller's assumptions; None means "same as the environment"
    theta_vac_hat: float | None = None
    process_var_hat: float | None = None
    prior_mean: Any = 50.0
    prior_std: float = 20.0
    drift_prior_mean: float = 0.0
    drift_prior_std: float = 1.0
    c_obs: float = 1.0
    c_unc: float = 1.0
    c_prev: float = 0.0
    c_vac: float = 0.0
    c_inv: float = 0.0
    R0: float = 100.0
    vac_max: float = 100.0
    vac_grid_size: int = 21
    temp_mean: float = 20.0
    temp_std: float = 8.0
    temp_ar: float = 0.8
    hum_mean: float = 60.0
    hum_std: float = 10.0
    hum_ar: float = 0.8
    temp0: float | None = None
    hum0: float | None = None
    # true model, variant 6
    theta_mu0: float = 0.9
    theta_mu24: float = 0.1
    theta_temp: tuple[float, float, float] = (0.02, 0.01, 0.01)
    temp_threshold: float = 25.0
    theta_vac1: float = 0.5
    theta_vac2: float = 0.002
    # controller's approximate time-series model (theta^W_0..2) or None
    approx_model: tuple[float, float, float] | None = None
    horizon: int = 50

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"flu variant must be one of {VARIANTS}, got {self.variant}")
        n = self.regions
        for name in ("mu0", "prior_mean"):
            v = getattr(self, name)
            vals = (float(v),) * n if isinstance(v, (int, float)) else tuple(float(a) for a in v)
            if len(vals) != n:
                raise ValueError(f"{name} needs {n} entries")
            if name == "mu0" and any(a < 0 for a in vals):
                raise ValueError("initial prevalence must be >= 0")
            object.__setattr__(self, name, vals)
        object.__setattr__(self, "theta_temp", tuple(float(a) for a in self.theta_temp))
        if self.approx_model is not None:
            object.__setattr__(self, "approx_model", tuple(float(a) for a in self.approx_model))
            if len(self.approx_model) != 3:
                raise ValueError("approx_model needs three coefficients")
        nonneg = ("sigma_mu", "sigma_w", "prior_std", "drift_prior_std", "c_obs", "c_unc", "c_prev",
                  "c_vac", "c_inv", "R0", "vac_max", "temp_std", "hum_std")
        for name in nonneg:
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if not math.isfinite(self.prior_std):
            raise ValueError("prior_std must be finite")
        if self.vac_grid_size < 1:
            raise ValueError("vac_grid_size must be >= 1")
        if self.n_regions < 1:
            raise ValueError("n_regions must be >= 1")
        for name in ("temp_ar", "hum_ar"):
            if not -1 < getattr(self, name) < 1:
                raise ValueError(f"{name} must be in (-1, 1)")
        if self.horizon < 0:
            raise ValueError("horizon must be >= 0")

    @property
    def regions(self) -> int:
        return self.n_regions if self.variant == 6 else 1

    @property
    def has_inventory(self) -> bool:
        return self.variant in (2, 5, 6)

    @property
    def vaccinates(self) -> bool:
        return self.variant != 1

    @property
    def has_weather(self) -> bool:
        return self.variant in (2, 6)

    def to_dict(self) -> dict:
        d = asdict(self)
        for k, v in d.items():
            if isinstance(v, tuple):
                d[k] = list(v)
        return d


# --------------------------------------------------------------------------
# decisions


@dataclass(frozen=True)
class FluDecision:
    """``obs`` in {0, 1}; ``region`` is the region observed when ``obs = 1``."""

    obs: int = 0
    vac: tuple[float, ...] = (0.0,)
    inv: float = 0.0
    region: int = 0

    def __post_init__(self):
        if isinstance(self.vac, (int, float)):
            object.__setattr__(self, "vac", (float(self.vac),))
        else:
            object.__setattr__(self, "vac", tuple(float(v) for v in self.vac))

    @property
    def total_vac(self) -> float:
        return math.fsum(self.vac)

    def as_fields(self) -> dict[str, float]:
        out = {"x_obs": float(self.obs), "x_region": float(self.region)}
        for i, v in enumerate(self.vac):
            out[f"x_vac{i}"] = v
        out["x_inv"] = self.inv
        return out


# --------------------------------------------------------------------------
# environment agent


@dataclass(frozen=True)
class EnvParams:
    variant: int
    regions: int
    sigma_mu: float
    drift: float
    sigma_w: float
    theta_vac: float
    temp_mean: float
    temp_std: float
    temp_ar: float
    hum_mean: float
    hum_std: float
    hum_ar: float
    theta_mu0: float
    theta_mu24: float
    theta_temp: tuple[float, float, float]
    temp_threshold: float
    theta_vac1: float
    theta_vac2: float

    @classmethod
    def from_config(cls, cfg: FluConfig) -> "EnvParams":
        names = [f.name for f in fields(cls) if f.name != "regions"]
        return cls(regions=cfg.regions, **{n: getattr(cfg, n) for n in names})


@dataclass(frozen=True)
class FluNoise:
    """Standard-normal draws for one period; a fixed count regardless of the decision."""

    z_mu: tuple[float, ...]
    z_obs: tuple[float, ...]
    z_weather: tuple[float, float]

    @classmethod
    def draw(cls, rng: np.random.Generator, regions: int) -> "FluNoise":
        z = rng.standard_normal(2 * regions + 2)
        return cls(tuple(z[:regions]), tuple(z[regions : 2 * regions]), (float(z[-2]), float(z[-1])))


def temperature_pressure(temp: float, threshold: float) -> float:
    """``U = (max{0, temp - threshold})^2``."""
    return max(0.0, temp - threshold) ** 2


@dataclass(frozen=True)
class FluEnvironment:
    """Ground truth.  Only the harness (and its logging channel) reads it."""

    params: EnvParams
    mu: tuple[float, ...]
    last_vac: tuple[float, ...]
    temp: float | None = None
    hum: float | None = None
    # mu_hist[k][i] = mu_{t-k, i}, k = 0..24 (variant 6)
    mu_hist: tuple[tuple[float, ...], ...] = ()
    # temperatures at t, t-1, t-2 (variant 6)
    temp_hist: tuple[float, ...] = ()

    @classmethod
    def initial(cls, cfg: FluConfig) -> "FluEnvironment":
        p = EnvParams.from_config(cfg)
        temp = hum = None
        if cfg.has_weather:
            temp = cfg.temp_mean if cfg.temp0 is None else cfg.temp0
            hum = cfg.hum_mean if cfg.hum0 is None else cfg.hum0
        mu = tuple(cfg.mu0)
        hist = (mu,) * (MU_LAGS + 1) if cfg.variant == 6 else ()
        thist = (temp,) * 3 if cfg.variant == 6 else ()
        return cls(p, mu, (0.0,) * len(mu), temp, hum, hist, thist)

    @property
    def delta(self) -> float:
        return self.params.drift

    @property
    def theta_vac(self) -> float:
        return self.params.theta_vac

    def receive(self, vac: tuple[float, ...]) -> "FluEnvironment":
        """Take delivery of the controller's vaccination decision."""
        return replace(self, last_vac=tuple(float(v) for v in vac))

    def schema(self) -> tuple[str, ...]:
        return ENVIRONMENT_SCHEMA[self.params.variant]


def _ar1(x: float, mean: float, std: float, ar: float, z: float) -> float:
    return mean + ar * (x - mean) + std * math.sqrt(1.0 - ar * ar) * z


def env_step_flu(env: FluEnvironment, noise: FluNoise | np.random.Generator) -> FluEnvironment:
    """Advance the true prevalence one period using the delivered decision ``last_vac``."""
    p = env.params
    if isinstance(noise, np.random.Generator):
        noise = FluNoise.draw(noise, p.regions)
    v = p.variant
    if v == 1:
        return env
    temp, hum = env.temp, env.hum
    if temp is not None:
        temp = _ar1(temp, p.temp_mean, p.temp_std, p.temp_ar, noise.z_weather[0])
        hum = _ar1(hum, p.hum_mean, p.hum_std, p.hum_ar, noise.z_weather[1])
    if v in (2, 3, 4, 5):
        drift = p.drift if v == 3 else 0.0
        mu = tuple(
            max(0.0, m - p.theta_vac * x + drift + p.sigma_mu * z)
            for m, x, z in zip(env.mu, env.last_vac, noise.z_mu)
        )
        return replace(env, mu=mu, temp=temp, hum=hum)
    # variant 6: true model with lags, temperature pressure and quadratic vaccination effect
    U = [temperature_pressure(tk, p.temp_threshold) for tk in env.temp_hist]
    temp_term = sum(c * u for c, u in zip(p.theta_temp, U))
    lagged = env.mu_hist[MU_LAGS]
    mu = tuple(
        max(
            0.0,
            p.theta_mu0 * m
            + p.theta_mu24 * m24
            + temp_term
            - (p.theta_vac1 * x + p.theta_vac2 * x * x)
            + p.sigma_mu * z,
        )
        for m, m24, x, z in zip(env.mu, lagged, env.last_vac, noise.z_mu)
    )
    hist = (mu,) + env.mu_hist[:MU_LAGS]
    thist = (temp,) + env.temp_hist[:2]
    return replace(env, mu=mu, temp=temp, hum=hum, mu_hist=hist, temp_hist=thist)


def observe_flu(env: FluEnvironment, x_obs: int, noise: FluNoise | np.random.Generator, region: int = 0) -> float | None:
    """Noisy reading ``W = mu + eps`` of one region, or None when ``x_obs = 0``."""
    if not x_obs:
        return None
    if isinstance(noise, np.random.Generator):
        z = float(noise.standard_normal())
    else:
        z = noise.z_obs[region]
    return env.mu[region] + env.params.sigma_w * z


# --------------------------------------------------------------------------
# controller agent


@dataclass(frozen=True, slots=True)
class FluControllerState:
    """What the controller knows.  Per-region tuples have length 1 outside variant 6."""

    mu_bar: tuple[float, ...]
    beta: tuple[float, ...]
    R: float | None = None
    temp: float | None = None
    hum: float | None = None
    delta_bar: float | None = None
    beta_delta: float | None = None
    last_obs: float | None = None
    window: tuple[float, ...] | None = None

    def __getattr__(self, name):
        if name in HIDDEN_NAMES:
            raise InformationHidingError(f"controller state has no access to environment field {name!r}")
        raise AttributeError(name)

    def schema(self) -> tuple[str, ...]:
        """Populated belief/physical components, in table order."""
        order = ("R", "temp", "hum", "mu_bar", "beta", "delta_bar", "beta_delta")
        return tuple(n for n in order if object.__getattribute__(self, n) is not None)

    def populated(self) -> tuple[str, ...]:
        return tuple(f.name for f in fields(self) if object.__getattribute__(self, f.name) is not None)

    @property
    def sigma_bar(self) -> tuple[float, ...]:
        return tuple(math.inf if b == 0 else (0.0 if math.isinf(b) else 1.0 / math.sqrt(b)) for b in self.beta)

    @property
    def mean(self) -> float:
        return self.mu_bar[0]

    @property
    def std(self) -> float:
        return self.sigma_bar[0]

    def beliefs(self) -> list[GaussianBelief]:
        return [GaussianBelief(m, b) for m, b in zip(self.mu_bar, self.beta)]

    def drift_belief(self) -> GaussianDriftBelief | None:
        if self.delta_bar is None:
            return None
        return GaussianDriftBelief(self.delta_bar, self.beta_delta)

    def as_fields(self) -> dict[str, float]:
        out: dict[str, float] = {}
        if self.R is not None:
            out["R"] = self.R
        if self.temp is not None:
            out["temp"] = self.temp
            out["hum"] = self.hum
        for i, (m, b) in enumerate(zip(self.mu_bar, self.beta)):
            out[f"mu_bar{i}"] = m
            out[f"beta{i}"] = b
        if self.delta_bar is not None:
            out["delta_bar"] = self.delta_bar
            out["beta_delta"] = self.beta_delta
        return out


def _precision(std: float) -> float:
    return math.inf if std == 0 else 1.0 / std**2


@dataclass(frozen=True)
class ControllerModel:
    """Controller-side model: costs, assumed dynamics, decision grid.

    Built from the problem configuration but holding only what the
    controller may know (its own assumed vaccination effect and process
    noise, never the true ones unless configured equal).
    """

    variant: int
    regions: int
    precision_w: float
    theta_vac_hat: float
    process_var: float
    c_obs: float
    c_unc: float
    c_prev: float
    c_vac: float
    c_inv: float
    vac_max: float
    vac_grid_size: int
    prior_mean: tuple[float, ...]
    prior_precision: float
    drift_prior: tuple[float, float]
    approx_model: tuple[float, float, float] | None
    R0: float
    horizon: int
    sense: str = MINIMIZE

    def __getattr__(self, name):
        if name in HIDDEN_NAMES:
            raise InformationHidingError(f"controller model has no access to environment field {name!r}")
        raise AttributeError(name)

    @classmethod
    def from_config(cls, cfg: FluConfig) -> "ControllerModel":
        theta_hat = cfg.theta_vac if cfg.theta_vac_hat is None else cfg.theta_vac_hat
        if cfg.variant == 6 and cfg.theta_vac_hat is None:
            theta_hat = cfg.theta_vac1
        if cfg.variant == 1:
            q = 0.0
        else:
            q = cfg.sigma_mu**2 if cfg.process_var_hat is None else cfg.process_var_hat
        return cls(
            variant=cfg.variant,
            regions=cfg.regions,
            precision_w=_precision(cfg.sigma_w),
            theta_vac_hat=theta_hat,
            process_var=q,
            c_obs=cfg.c_obs,
            c_unc=cfg.c_unc,
            c_prev=cfg.c_prev,
            c_vac=cfg.c_vac,
            c_inv=cfg.c_inv,
            vac_max=cfg.vac_max,
            vac_grid_size=cfg.vac_grid_size,
            prior_mean=tuple(cfg.prior_mean),
            prior_precision=_precision(cfg.prior_std),
            drift_prior=(cfg.drift_prior_mean, _precision(cfg.drift_prior_std)),
            approx_model=cfg.approx_model,
            R0=cfg.R0,
            horizon=cfg.horizon,
        )

    @property
    def has_inventory(self) -> bool:
        return self.variant in (2, 5, 6)

    @property
    def vaccinates(self) -> bool:
        return self.variant != 1

    @property
    def spatial(self) -> bool:
        return self.variant == 6

    def initial_state(self, temp: float | None = None, hum: float | None = None) -> FluControllerState:
        n = self.regions
        return FluControllerState(
            mu_bar=tuple(self.prior_mean),
            beta=(self.prior_precision,) * n,
            R=self.R0 if self.has_inventory else None,
            temp=temp if self.variant == 2 else None,
            hum=hum if self.variant == 2 else None,
            delta_bar=self.drift_prior[0] if self.variant == 3 else None,
            beta_delta=self.drift_prior[1] if self.variant == 3 else None,
            window=() if self.approx_model is not None else None,
        )

    # -- decisions -------------------------------------------------------

    def vac_cap(self, ctrl: FluControllerState) -> float:
        if not self.vaccinates:
            return 0.0
        if self.has_inventory:
            return min(ctrl.R, self.vac_max)
        return self.vac_max

    def vac_grid(self, ctrl: FluControllerState, size: int | None = None) -> list[float]:
        cap = self.vac_cap(ctrl)
        n = self.vac_grid_size if size is None else size
        if cap <= 0 or n == 1:
            return [0.0]
        return [cap * k / (n - 1) for k in range(n)]

    def candidates(self, ctrl: FluControllerState, size: int | None = None) -> list[FluDecision]:
        """Enumerable decisions (single region): x_obs in {0, 1} times the x_vac grid."""
        grid = self.vac_grid(ctrl, size)
        return [FluDecision(obs, (v,)) for obs in (0, 1) for v in grid]

    def check(self, ctrl: FluControllerState, x: FluDecision) -> str | None:
        if x.obs not in (0, 1):
            return f"x_obs must be 0 or 1, got {x.obs}"
        if not 0 <= x.region < self.regions:
            return f"observed region {x.region} out of range"
        if len(x.vac) != self.regions:
            return f"x_vac needs {self.regions} entries, got {len(x.vac)}"
        if any(not (v >= 0) for v in x.vac) or not x.inv >= 0:
            return "vaccinations and inventory orders must be >= 0"
        if not self.vaccinates and x.total_vac > 0:
            return "variant 1 has no vaccination decision"
        if not self.has_inventory and x.inv > 0:
            return "this variant has no inventory"
        if self.has_inventory and x.total_vac > ctrl.R * (1 + 1e-12) + 1e-12:
            return f"coupling constraint: sum x_vac = {x.total_vac} > R = {ctrl.R}"
        return None

    # -- beliefs ---------------------------------------------------------

    def prior_mean_next(self, ctrl: FluControllerState, i: int, vac: float) -> float:
        """Controller's predicted mean for region ``i`` before the next observation.

        Floored at zero, as the truth is: prevalence cannot go negative.
        """
        shift = self.theta_vac_hat * vac
        if self.approx_model is not None and ctrl.window is not None and len(ctrl.window) >= 3 and self.regions == 1:
            a = self.approx_model
            return max(0.0, a[0] * ctrl.window[0] + a[1] * ctrl.window[1] + a[2] * ctrl.window[2] - shift)
        m = ctrl.mu_bar[i] - shift
        if ctrl.delta_bar is not None:
            m += ctrl.delta_bar
        return max(0.0, m)

    def prior_precision_next(self, ctrl: FluControllerState, i: int) -> float:
        return inflate(GaussianBelief(ctrl.mu_bar[i], ctrl.beta[i]), self.process_var).precision

    def step(
        self,
        ctrl: FluControllerState,
        x: FluDecision,
        W: float | None,
        temp: float | None = None,
        hum: float | None = None,
    ) -> FluControllerState:
        """Controller transition given its decision and (optional) observation."""
        violation = self.check(ctrl, x)
        if violation is not None:
            raise FluConstraintError(violation)
        mu_bar, beta = [], []
        for i in range(self.regions):
            prior = GaussianBelief(self.prior_mean_next(ctrl, i, x.vac[i]), self.prior_precision_next(ctrl, i))
            if W is not None and x.obs and x.region == i:
                prior = conjugate_update(prior, W, self.precision_w)
            mu_bar.append(prior.mean)
            beta.append(prior.precision)
        new = {"mu_bar": tuple(mu_bar), "beta": tuple(beta)}
        if ctrl.R is not None:
            new["R"] = ctrl.R + x.inv - x.total_vac
        if ctrl.temp is not None:
            new["temp"], new["hum"] = temp, hum
        observed = W is not None and x.obs == 1
        if ctrl.delta_bar is not None:
            d = ctrl.drift_belief()
            if observed and ctrl.last_obs is not None:
                # increment net of the controller's own vaccination effect
                d = drift_update(d, W + self.theta_vac_hat * x.vac[0], ctrl.last_obs, self.precision_w)
            new["delta_bar"], new["beta_delta"] = d.mean, d.precision
            new["last_obs"] = W if observed else None
        if ctrl.window is not None:
            new["window"] = ((W,) + ctrl.window)[:3] if observed else ctrl.window
        return replace(ctrl, **new)

    def cost(self, ctrl: FluControllerState, x: FluDecision) -> float:
        return flu_cost(ctrl, x, self)


def controller_step_flu(ctrl: FluControllerState, x: FluDecision, W: float | None, model: ControllerModel, **weather) -> FluControllerState:
    return model.step(ctrl, x, W, **weather)


def flu_cost(ctrl: FluControllerState, x: FluDecision, model: ControllerModel) -> float:
    """Controller cost ``c_obs x_obs + c_unc sum sigma_bar + c_prev sum mu_bar + c_vac sum x_vac + c_inv x_inv``.

    With ``c_prev = 0`` this is the observation-plus-uncertainty cost of the
    static model; ``c_prev * mu_bar`` is the linear belief-based
    prevalence cost used from variant 2 on.
    """
    cost = model.c_obs * x.obs
    if model.c_unc:
        cost += model.c_unc * math.fsum(ctrl.sigma_bar)
    if model.c_prev:
        cost += model.c_prev * math.fsum(ctrl.mu_bar)
    if model.c_vac:
        cost += model.c_vac * x.total_vac
    if model.c_inv:
        cost += model.c_inv * x.inv
    return cost


# --------------------------------------------------------------------------
# the combined simulator


@dataclass(frozen=True)
class FluSystemState:
    env: FluEnvironment
    ctrl: FluControllerState


class FluProblem(CanonicalModel):
    """Canonical-model wrapper running both agents; policies only see the controller."""

    def __init__(self, config: FluConfig):
        self.config = config
        self.controller = ControllerModel.from_config(config)
        self.horizon = config.horizon
        self.sense = MINIMIZE
        self.tuning_objective = "truth" if config.variant == 6 else "cost"

    def __repr__(self):
        return f"FluProblem(variant={self.config.variant})"

    def initial_state(self, rng=None) -> FluSystemState:
        env = FluEnvironment.initial(self.config)
        return FluSystemState(env, self.controller.initial_state(env.temp, env.hum))

    def observable(self, state: FluSystemState) -> FluControllerState:
        return state.ctrl

    def policy_view(self) -> ControllerModel:
        return self.controller

    def check_decision(self, state: FluSystemState, x) -> str | None:
        if not isinstance(x, FluDecision):
            return f"expected a FluDecision, got {type(x).__name__}"
        return self.controller.check(state.ctrl, x)

    def sample_exogenous(self, state, x, rng) -> FluNoise:
        return FluNoise.draw(rng, self.config.regions)

    def transition(self, state: FluSystemState, x: FluDecision, w: FluNoise) -> FluSystemState:
        env = env_step_flu(state.env.receive(x.vac), w)
        W = observe_flu(env, x.obs, w, x.region)
        ctrl = self.controller.step(state.ctrl, x, W, env.temp, env.hum)
        return FluSystemState(env, ctrl)

    def contribution(self, state: FluSystemState, x, w=None) -> float:
        return flu_cost(state.ctrl, x, self.controller)

    def truth_metric(self, state: FluSystemState) -> float:
        return math.fsum(state.env.mu)

    def state_fields(self, state: FluSystemState) -> dict[str, float]:
        out = state.ctrl.as_fields()
        for i, m in enumerate(state.env.mu):
            out[f"env_mu{i}"] = m
        return out

    def decision_fields(self, x: FluDecision) -> dict[str, float]:
        return x.as_fields()


# --------------------------------------------------------------------------
# two-agent harness


@dataclass
class EpisodeResult:
    trajectory: Trajectory
    env_log: list[dict]
    controller_log: list[dict]


@dataclass
class TwoAgentHarness:
    problem: FluProblem

    @classmethod
    def from_config(cls, cfg: FluConfig) -> "TwoAgentHarness":
        return cls(FluProblem(cfg))


def two_agent_episode(harness: TwoAgentHarness, policy, T: int, seed: int) -> EpisodeResult:
    """Run one episode and split the log into environment-side and controller-side views.

    The environment log holds the true prevalence for post-hoc evaluation;
    the policy never sees it.
    """
    traj = simulate(harness.problem, policy, seed, T, log_truth=True)
    env_log, ctrl_log = [], []
    for r in traj.records:
        env = r.state.env
        env_log.append({"t": r.t, "mu": env.mu, "last_vac": env.last_vac, "temp": env.temp, "hum": env.hum})
        ctrl_log.append({"t": r.t, "state": r.state.ctrl, "decision": r.decision, "cost": r.contribution})
    return EpisodeResult(traj, env_log, ctrl_log)
