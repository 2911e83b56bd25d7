"""Energy storage arbitrage with progressively richer price and forecast models.

Variants:

``base``             S = (R, p); the next price is an exogenous draw.
``ar_price``         S = (R, (p, p-1, p-2)); third-order autoregressive price.
``passive_learning`` adds the recursive least-squares estimate (theta_bar, M)
                     of the autoregressive coefficients.
``active_learning``  as passive learning, but the price also responds to the
                     decision through a fourth coefficient.
``rolling_forecast`` adds wind energy E and a rolling forecast vector f^E.

The decision ``x`` is a scalar: ``x > 0`` buys, ``x < 0`` sells, and the
storage level moves by ``eta * x``.  The contribution ``p * x`` is a cost,
so the model minimizes.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..belief import DEFAULT_RLS_LAMBDA, RlsState, rls_update
from ..core import MINIMIZE, CanonicalModel

VARIANTS = ("base", "ar_price", "passive_learning", "active_learning", "rolling_forecast")

# state composition per variant, in schema order
STATE_SCHEMA = {
    "base": ("R", "p"),
    "ar_price": ("R", "prices"),
    "passive_learning": ("R", "prices", "theta_bar", "M"),
    "active_learning": ("R", "prices", "theta_bar", "M"),
    "rolling_forecast": ("R", "E", "prices", "theta_bar", "M", "forecast"),
}


class EnergyConstraintError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class EnergyState:
    R: float
    prices: tuple[float, ...]  # (p_t, p_{t-1}, p_{t-2}); length 1 for the base model
    rls: RlsState | None = None
    E: float | None = None
    forecast: tuple[float, ...] | None = None

    @property
    def p(self) -> float:
        return self.prices[0]

    def schema(self) -> tuple[str, ...]:
        """Names of the populated state components."""
        names = ["R"]
        if self.E is not None:
            names.append("E")
        names.append("p" if len(self.prices) == 1 else "prices")
        if self.rls is not None:
            names += ["theta_bar", "M"]
        if self.forecast is not None:
            names.append("forecast")
        return tuple(names)

    def as_fields(self) -> dict[str, float]:
        out = {"R": self.R}
        for i, p in enumerate(self.prices):
            out[f"p_lag{i}"] = p
        if self.rls is not None:
            for i, th in enumerate(self.rls.theta):
                out[f"theta_bar{i}"] = float(th)
        if self.E is not None:
            out["E"] = self.E
        if self.forecast is not None:
            for k, f in enumerate(self.forecast, start=1):
                out[f"f_lead{k}"] = f
        return out


def forecast_roll(f, sigma: float, rng: np.random.Generator):
    """Roll a forecast vector ``f`` over leads ``1..H`` forward one period.

    Returns ``(E_next, f_next)`` where ``E_next = f[0] + N(0, sigma^2)`` and
    the lead-k entry of ``f_next`` is ``f[k] + N(0, k sigma^2)``.  The new
    last lead repeats the old last lead with ``N(0, H sigma^2)`` noise.
    Draws ``H + 1`` normals per call.
    """
    f = np.asarray(f, dtype=float)
    H = f.shape[0]
    if H < 1:
        raise ValueError("forecast horizon must be >= 1")
    z = rng.standard_normal(H + 1)
    E_next = float(f[0] + sigma * z[0])
    new = np.empty(H)
    leads = np.arange(1, H + 1)
    shifted = np.append(f[1:], f[-1])
    new[:] = shifted + sigma * np.sqrt(leads) * z[1:]
    return E_next, tuple(float(v) for v in new)


@dataclass(frozen=True, eq=False)
class EnergyStorageModel(CanonicalModel):
    variant: str = "base"
    R_max: float = 10.0
    eta: float = 0.9
    R0: float = 0.0
    # true price coefficients on (p_t, p_{t-1}, p_{t-2}[, x_t])
    theta: tuple[float, ...] = (0.7, 0.2, 0.05)
    theta_x: float = 0.1
    price_intercept: float = 0.0
    sigma_eps: float = 1.0
    # base model: p_{t+1} ~ N(price_mean, sigma_w^2)
    price_mean: float = 30.0
    sigma_w: float = 5.0
    p0: tuple[float, ...] = (30.0, 30.0, 30.0)
    rls_lambda: float = DEFAULT_RLS_LAMBDA
    H: int = 4
    sigma_f: float = 1.0
    f0: tuple[float, ...] = ()
    E0: float = 0.0
    decision_grid: tuple[float, ...] = ()
    horizon: int = 100
    sense: str = field(default=MINIMIZE, init=False)

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise ValueError(f"unknown energy variant {self.variant!r}; expected one of {VARIANTS}")
        if not 0 < self.eta <= 1:
            raise ValueError("efficiency must be in (0, 1]")
        if not 0 <= self.R0 <= self.R_max:
            raise ValueError("R0 must be in [0, R_max]")
        if len(self.theta) != 3:
            raise ValueError("theta must have three autoregressive coefficients")
        if self.sigma_eps < 0 or self.sigma_w < 0 or self.sigma_f < 0:
            raise ValueError("noise scales must be >= 0")
        if self.H < 1:
            raise ValueError("forecast horizon H must be >= 1")
        if len(self.p0) != 3:
            raise ValueError("p0 must hold (p_0, p_-1, p_-2)")

    # -- helpers ---------------------------------------------------------

    @property
    def learns(self) -> bool:
        return self.variant in ("passive_learning", "active_learning", "rolling_forecast")

    @property
    def n_features(self) -> int:
        return 4 if self.variant == "active_learning" else 3

    def bounds(self, R: float) -> tuple[float, float]:
        """Feasible decision interval: storage stays within ``[0, R_max]``."""
        return -R / self.eta, (self.R_max - R) / self.eta

    def candidates(self, state: EnergyState) -> list[float]:
        lo, hi = self.bounds(state.R)
        grid = self.decision_grid or tuple(np.linspace(-self.R_max, self.R_max, 21) / self.eta)
        return sorted({float(min(max(x, lo), hi)) for x in grid})

    def clamp(self, state: EnergyState, x: float) -> float:
        lo, hi = self.bounds(state.R)
        return float(min(max(x, lo), hi))

    def features(self, prices, x: float) -> np.ndarray:
        if self.variant == "active_learning":
            return np.array([prices[0], prices[1], prices[2], x])
        return np.array(prices[:3], dtype=float)

    # -- canonical model -------------------------------------------------

    def initial_state(self, rng=None) -> EnergyState:
        prices = (self.p0[0],) if self.variant == "base" else tuple(self.p0)
        rls = RlsState.initial(self.n_features, self.rls_lambda) if self.learns else None
        E = forecast = None
        if self.variant == "rolling_forecast":
            E = self.E0
            forecast = tuple(self.f0) if self.f0 else tuple([self.E0] * self.H)
            if len(forecast) != self.H:
                raise ValueError("f0 must have H entries")
        return EnergyState(self.R0, prices, rls, E, forecast)

    def check_decision(self, state: EnergyState, x) -> str | None:
        R_next = state.R + self.eta * float(x)
        tol = 1e-9 * max(1.0, self.R_max)
        if R_next < -tol:
            return f"sell {-x} exceeds inventory: x >= {-state.R / self.eta}"
        if R_next > self.R_max + tol:
            return f"buy {x} exceeds headroom: x <= {(self.R_max - state.R) / self.eta}"
        return None

    def sample_exogenous(self, state, x, rng):
        # fixed draw count per step keeps common random numbers aligned
        z = float(rng.standard_normal())
        if self.variant == "rolling_forecast":
            return (z, rng.standard_normal(self.H + 1))
        return (z,)

    def next_price(self, state: EnergyState, x: float, z: float) -> float:
        if self.variant == "base":
            return self.price_mean + self.sigma_w * z
        p = state.prices
        out = self.price_intercept + self.theta[0] * p[0] + self.theta[1] * p[1] + self.theta[2] * p[2]
        if self.variant == "active_learning":
            out += self.theta_x * x
        return out + self.sigma_eps * z

    def transition(self, state: EnergyState, x, w) -> EnergyState:
        return energy_step(self, state, float(x), w)

    def contribution(self, state: EnergyState, x, w=None) -> float:
        return state.p * float(x)

    def state_fields(self, state):
        return state.as_fields()

    def decision_fields(self, x):
        return {"x": float(x)}


class _ReplayRng:
    """Feeds pre-drawn normals to ``forecast_roll``."""

    def __init__(self, z):
        self.z = np.asarray(z)

    def standard_normal(self, n):
        return self.z[:n]


def energy_step(m: EnergyStorageModel, state: EnergyState, x: float, w) -> EnergyState:
    """Transition ``S_{t+1} = S^M(S_t, x_t, W_{t+1})`` for the storage model."""
    violation = m.check_decision(state, x)
    if violation is not None:
        raise EnergyConstraintError(violation)
    R_next = min(max(state.R + m.eta * x, 0.0), m.R_max)
    p_next = m.next_price(state, x, w[0])
    if m.variant == "base":
        return EnergyState(R_next, (p_next,))
    prices = (p_next, state.prices[0], state.prices[1])
    rls = state.rls
    if rls is not None:
        rls, _ = rls_update(rls, m.features(state.prices, x), p_next)
    E = forecast = None
    if m.variant == "rolling_forecast":
        E, forecast = forecast_roll(state.forecast, m.sigma_f, _ReplayRng(w[1]))
    return EnergyState(R_next, prices, rls, E, forecast)
