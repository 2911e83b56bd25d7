"""Finite hidden-state POMDPs: Bayes belief updates and finite-horizon belief-MDP solvers.

Conventions:

* ``transition[x, s, s2] = p(s2 | s, x)``
* ``observation[x, s2, w] = P(w | s2, x)`` -- the observation is emitted by the
  post-transition state and may depend on the action
* ``contribution[s, x] = c(s, x)``, maximized; the belief-level contribution
  is ``sum_s b(s) c(s, x)``

"No observation" is an ordinary observation symbol that has probability one
under the actions that do not observe.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Hashable, Sequence

import numpy as np

PROB_TOL = 1e-12
CLAMP_EPS = 1e-15
DEFAULT_TREE_CAP = 10**6


class PomdpError(ValueError):
    pass


class ImpossibleObservationError(PomdpError):
    pass


class ProblemSizeError(PomdpError):
    pass


@dataclass(frozen=True, eq=False)
class DiscretePomdp:
    transition: np.ndarray
    observation: np.ndarray
    contribution: np.ndarray
    horizon: int = 1
    states: tuple = ()
    actions: tuple = ()
    observations: tuple = ()

    def __post_init__(self):
        P = np.asarray(self.transition, dtype=float)
        O = np.asarray(self.observation, dtype=float)
        C = np.asarray(self.contribution, dtype=float)
        object.__setattr__(self, "transition", P)
        object.__setattr__(self, "observation", O)
        object.__setattr__(self, "contribution", C)
        if P.ndim != 3 or P.shape[1] != P.shape[2]:
            raise PomdpError(f"transition must have shape (A, K, K), got {P.shape}")
        A, K, _ = P.shape
        if O.ndim != 3 or O.shape[:2] != (A, K):
            raise PomdpError(f"observation must have shape (A, K, O), got {O.shape}")
        if C.shape != (K, A):
            raise PomdpError(f"contribution must have shape (K, A) = {(K, A)}, got {C.shape}")
        _check_rows(P, "transition")
        _check_rows(O, "observation_probs")
        if not np.all(np.isfinite(C)):
            raise PomdpError("contribution must be finite")
        if self.horizon < 0:
            raise PomdpError("horizon must be >= 0")
        for name, n in (("states", K), ("actions", A), ("observations", O.shape[2])):
            labels = getattr(self, name)
            if not labels:
                object.__setattr__(self, name, tuple(str(i) for i in range(n)))
            elif len(labels) != n:
                raise PomdpError(f"{name} has {len(labels)} labels, expected {n}")

    @property
    def n_states(self) -> int:
        return self.transition.shape[1]

    @property
    def n_actions(self) -> int:
        return self.transition.shape[0]

    @property
    def n_observations(self) -> int:
        return self.observation.shape[2]

    def belief_contribution(self, b: np.ndarray, x: int) -> float:
        return float(np.dot(b, self.contribution[:, x]))

    # JSON --------------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "states": list(self.states),
            "actions": list(self.actions),
            "observations": list(self.observations),
            "transition": self.transition.tolist(),
            "observation_probs": self.observation.tolist(),
            "contribution": self.contribution.tolist(),
            "horizon": int(self.horizon),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DiscretePomdp":
        required = {"states", "actions", "observations", "transition", "observation_probs", "contribution", "horizon"}
        missing = required - d.keys()
        if missing:
            raise PomdpError(f"missing fields: {sorted(missing)}")
        unknown = d.keys() - required
        if unknown:
            raise PomdpError(f"unknown fields: {sorted(unknown)}")
        return cls(
            transition=np.array(d["transition"], dtype=float),
            observation=np.array(d["observation_probs"], dtype=float),
            contribution=np.array(d["contribution"], dtype=float),
            horizon=int(d["horizon"]),
            states=tuple(str(s) for s in d["states"]),
            actions=tuple(str(a) for a in d["actions"]),
            observations=tuple(str(o) for o in d["observations"]),
        )

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "DiscretePomdp":
        return cls.from_dict(json.loads(text))


def _check_rows(T: np.ndarray, name: str):
    if np.any(T < 0) or not np.all(np.isfinite(T)):
        idx = tuple(int(i) for i in np.argwhere(~(T >= 0))[0])
        raise PomdpError(f"{name}{list(idx[:-1])} has a negative or non-finite entry")
    sums = T.sum(axis=-1)
    bad = np.argwhere(np.abs(sums - 1.0) > PROB_TOL)
    if len(bad):
        idx = [int(i) for i in bad[0]]
        raise PomdpError(f"{name}{idx} sums to {sums[tuple(idx)]!r}, not 1")


def validate_belief(b, K: int | None = None) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.ndim != 1 or (K is not None and b.shape[0] != K):
        raise PomdpError(f"belief must be a vector of length {K}")
    if np.any(b < 0) or abs(b.sum() - 1.0) > PROB_TOL:
        raise PomdpError(f"belief {b.tolist()} is not on the probability simplex")
    return b


def _clean(b: np.ndarray) -> np.ndarray:
    b = np.where(b < CLAMP_EPS, 0.0, b)
    return b / b.sum()


# --------------------------------------------------------------------------
# transition matrix from a transition function


def transition_matrix_from_function(
    step: Callable[[Hashable, Hashable, Any], Hashable],
    w_dist: Sequence[tuple[Any, float]] | dict,
    states: Sequence[Hashable],
    actions: Sequence[Hashable],
) -> np.ndarray:
    """``p(s'|s,x) = sum_w Pr[w] 1{s' = step(s, x, w)}`` as an (A, K, K) array."""
    atoms = list(w_dist.items()) if isinstance(w_dist, dict) else list(w_dist)
    probs = np.array([p for _, p in atoms], dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > PROB_TOL:
        raise PomdpError("w_dist is not a probability distribution")
    index = {s: i for i, s in enumerate(states)}
    P = np.zeros((len(actions), len(states), len(states)))
    for a, x in enumerate(actions):
        for i, s in enumerate(states):
            for w, pw in atoms:
                s2 = step(s, x, w)
                j = index.get(s2)
                if j is None:
                    raise PomdpError(f"step({s!r}, {x!r}, {w!r}) = {s2!r} is not a state")
                P[a, i, j] += pw
    return P


# --------------------------------------------------------------------------
# Bayes update


def predict(m: DiscretePomdp, b: np.ndarray, x: int) -> np.ndarray:
    """Prior pushed through the transition: ``sum_s p(s'|s,x) b(s)``."""
    return b @ m.transition[x]


def observation_likelihood(m: DiscretePomdp, b, x: int, w: int) -> float:
    """``P(w | b, x) = sum_s' P(w|s',x) sum_s p(s'|s,x) b(s)``."""
    b = np.asarray(b, dtype=float)
    return float(predict(m, b, x) @ m.observation[x, :, w])


def belief_update(m: DiscretePomdp, b, x: int, w: int) -> np.ndarray:
    """Posterior over the next hidden state after action ``x`` and observation ``w``."""
    b = np.asarray(b, dtype=float)
    joint = predict(m, b, x) * m.observation[x, :, w]
    z = joint.sum()
    if not z > 0:
        raise ImpossibleObservationError(
            f"observation {m.observations[w]!r} has zero probability under action {m.actions[x]!r}"
        )
    return _clean(joint / z)


def _successors(m: DiscretePomdp, b: np.ndarray, x: int):
    """(w, P(w|b,x), posterior) for every observation with positive probability."""
    pred = predict(m, b, x)
    joint = pred[:, None] * m.observation[x]  # (K, O)
    pw = joint.sum(axis=0)
    out = []
    for w in range(m.n_observations):
        if pw[w] > 0:
            out.append((w, float(pw[w]), _clean(joint[:, w] / pw[w])))
    return out


# --------------------------------------------------------------------------
# exact solver over the reachable belief tree


@dataclass
class PolicyNode:
    action: int | None
    value: float
    children: dict[int, "PolicyNode"] = field(default_factory=dict)


@dataclass
class ExactSolution:
    value: float
    action: int | None
    tree: PolicyNode
    nodes: int


def solve_exact_reachable(m: DiscretePomdp, b0, T: int | None = None, cap: int = DEFAULT_TREE_CAP) -> ExactSolution:
    """Backward recursion over every belief reachable from ``b0`` in ``T`` steps."""
    T = m.horizon if T is None else T
    b0 = validate_belief(b0, m.n_states)
    A, O = m.n_actions, m.n_observations
    size = sum((A * O) ** k for k in range(T + 1))
    if size > cap:
        raise ProblemSizeError(
            f"reachable belief tree has ~{size} nodes (cap {cap}); use solve_belief_grid instead"
        )
    counter = [0]

    def rec(b: np.ndarray, k: int) -> PolicyNode:
        counter[0] += 1
        if k == 0:
            return PolicyNode(None, 0.0)
        best: PolicyNode | None = None
        for x in range(A):
            q = m.belief_contribution(b, x)
            children = {}
            for w, pw, b2 in _successors(m, b, x):
                child = rec(b2, k - 1)
                children[w] = child
                q += pw * child.value
            if best is None or q > best.value:
                best = PolicyNode(x, q, children)
        return best

    root = rec(b0, T)
    return ExactSolution(root.value, root.action, root, counter[0])


# --------------------------------------------------------------------------
# brute force over all policy trees


def brute_force_value(m: DiscretePomdp, b0, T: int | None = None, cap: int = 5 * 10**6) -> float:
    """Best value over every history-dependent deterministic policy of depth ``T``.

    Every depth-k policy tree (an action at the root plus one depth-(k-1)
    subtree per observation) is enumerated explicitly and scored by its exact
    expected total, ``alpha(s) = c(s,x) + sum_{s',w} p(s'|s,x) P(w|s',x)
    alpha_w(s')``.  No maximization happens before the final step.
    """
    T = m.horizon if T is None else T
    b0 = validate_belief(b0, m.n_states)
    if T == 0:
        return 0.0
    A, K, O = m.n_actions, m.n_states, m.n_observations
    # M[x, w] maps a successor alpha-vector to its contribution at the parent
    M = np.einsum("xst,xtw->xwst", m.transition, m.observation)
    gamma = np.zeros((1, K))  # depth-0 trees
    for k in range(1, T):
        n_prev = gamma.shape[0]
        count = A * n_prev**O
        if count > cap:
            raise ProblemSizeError(f"{count} policy trees at depth {k} exceed cap {cap}")
        layers = []
        for x in range(A):
            g = np.einsum("wst,nt->wns", M[x], gamma)  # (O, n_prev, K)
            for combo in itertools.product(range(n_prev), repeat=O):
                alpha = m.contribution[:, x].copy()
                for w, j in enumerate(combo):
                    alpha += g[w, j]
                layers.append(alpha)
        gamma = np.array(layers)
    n_prev = gamma.shape[0]
    if A * n_prev**O > cap:
        raise ProblemSizeError(f"{A * n_prev**O} policy trees at depth {T} exceed cap {cap}")
    best = -math.inf
    for x in range(A):
        # scalar score of each subtree choice per observation, given b0
        bm = np.einsum("s,wst->wt", b0, M[x])  # (O, K)
        scores = bm @ gamma.T  # (O, n_prev)
        total = np.full((1,), float(b0 @ m.contribution[:, x]))
        for w in range(O):
            total = (total[:, None] + scores[w][None, :]).ravel()
        best = max(best, float(total.max()))
    return best


# --------------------------------------------------------------------------
# grid solver


def simplex_grid(K: int, n: int) -> np.ndarray:
    """All beliefs with entries in multiples of ``1/n`` (rows), lexicographic in the tail."""
    if K == 2:
        j = np.arange(n + 1)
        return np.column_stack([(n - j) / n, j / n])
    if K == 3:
        pts = [((n - i - j) / n, i / n, j / n) for i in range(n + 1) for j in range(n + 1 - i)]
        return np.array(pts)
    raise ProblemSizeError(f"grid solver supports K in {{2, 3}}, got K={K}")


class _GridIndex:
    """Barycentric interpolation on the regular simplex grid (Kuhn triangulation for K=3)."""

    def __init__(self, K: int, n: int):
        self.K, self.n = K, n
        if K == 3:
            self.offset = np.zeros(n + 2, dtype=int)
            for i in range(n + 1):
                self.offset[i + 1] = self.offset[i] + (n + 1 - i)

    def index(self, i, j=None):
        if self.K == 2:
            return i
        return self.offset[i] + j

    def interpolate(self, values: np.ndarray, b: np.ndarray) -> float:
        n = self.n
        if self.K == 2:
            u = min(max(b[1] * n, 0.0), float(n))
            i = min(int(math.floor(u)), n - 1) if n > 0 else 0
            f = u - i
            if f == 0 or n == 0:
                return float(values[i])
            return float((1 - f) * values[i] + f * values[i + 1])
        u = max(b[1] * n, 0.0)
        v = max(b[2] * n, 0.0)
        i = min(int(math.floor(u)), n)
        j = min(int(math.floor(v)), n - i)
        fu, fv = u - i, v - j
        if i + j == n:
            # on the outer face; fall back to the edge
            fu = fv = 0.0
        if fu + fv <= 1.0:
            w0 = 1.0 - fu - fv
            out = w0 * values[self.index(i, j)]
            if fu > 0:
                out += fu * values[self.index(i + 1, j)]
            if fv > 0:
                out += fv * values[self.index(i, j + 1)]
            return float(out)
        return float(
            (fu + fv - 1.0) * values[self.index(i + 1, j + 1)]
            + (1.0 - fu) * values[self.index(i, j + 1)]
            + (1.0 - fv) * values[self.index(i + 1, j)]
        )


@dataclass
class GridSolution:
    grid: np.ndarray  # (G, K)
    values: np.ndarray  # (T+1, G); values[k] = value with k steps to go
    policy: np.ndarray  # (T, G); policy[k-1] = greedy action with k steps to go
    resolution: int

    def value(self, b) -> float:
        b = np.asarray(b, dtype=float)
        return _GridIndex(self.grid.shape[1], self.resolution).interpolate(self.values[-1], b)

    def action(self, b, steps_to_go: int | None = None) -> int:
        k = self.policy.shape[0] if steps_to_go is None else steps_to_go
        idx = int(np.argmin(np.abs(self.grid - np.asarray(b)).sum(axis=1)))
        return int(self.policy[k - 1, idx])


def solve_belief_grid(m: DiscretePomdp, h: float, T: int | None = None) -> GridSolution:
    """Finite-horizon value iteration on the simplex grid with spacing ``h``.

    Successor beliefs that fall between grid points are valued by
    barycentric interpolation of the next-stage values.
    """
    T = m.horizon if T is None else T
    K = m.n_states
    if K not in (2, 3):
        raise ProblemSizeError(f"grid solver supports K in {{2, 3}}, got K={K}")
    n = int(round(1.0 / h))
    if n < 1 or abs(n * h - 1.0) > 1e-9:
        raise PomdpError(f"grid resolution h={h} must divide 1")
    grid = simplex_grid(K, n)
    G = grid.shape[0]
    index = _GridIndex(K, n)
    A = m.n_actions
    # successor structure does not depend on the stage
    succ = [[_successors(m, grid[g], x) for x in range(A)] for g in range(G)]
    immediate = grid @ m.contribution  # (G, A)
    values = np.zeros((T + 1, G))
    policy = np.zeros((T, G), dtype=int)
    for k in range(1, T + 1):
        nxt = values[k - 1]
        for g in range(G):
            best_q, best_x = -math.inf, 0
            for x in range(A):
                q = immediate[g, x]
                if k > 1:
                    for _, pw, b2 in succ[g][x]:
                        q += pw * index.interpolate(nxt, b2)
                if q > best_q:
                    best_q, best_x = q, x
            values[k, g] = best_q
            policy[k - 1, g] = best_x
    return GridSolution(grid, values, policy, n)


def fixed_action_value(m: DiscretePomdp, b0, x: int, T: int | None = None) -> float:
    """Expected total of always taking action ``x`` (an open-loop lower bound)."""
    T = m.horizon if T is None else T
    b = validate_belief(b0, m.n_states)
    total = 0.0
    for _ in range(T):
        total += m.belief_contribution(b, x)
        b = predict(m, b, x)
    return total


def random_pomdp(rng: np.random.Generator, K: int, A: int, O: int, T: int = 3, sparse: float = 0.0) -> DiscretePomdp:
    """Random instance for tests; ``sparse`` zeroes that fraction of entries."""

    def rows(shape):
        X = rng.random(shape)
        if sparse:
            X = np.where(rng.random(shape) < sparse, 0.0, X)
            empty = X.sum(axis=-1) == 0
            X[empty, 0] = 1.0
        return X / X.sum(axis=-1, keepdims=True)

    return DiscretePomdp(rows((A, K, K)), rows((A, K, O)), rng.normal(size=(K, A)), T)
