"""
Simulation parameters.
"""

import math
from dataclasses import dataclass, fields, replace
from typing import Optional

from tanglegame.walks.walk import MAX_STEPS, WalkParams

# exact greedy solves up to this size, Monte-Carlo beyond
GAME_SOLVER_CAP = 20000


@dataclass(frozen=True)
class SimConfig:
    """Parameters of one simulation run.

    Attributes
    ----------
    rate : float
        Arrival rate of new transactions per second (reattachments excluded).
    h : float
        Network delay in seconds; issuers see the tangle at t - h.
    q : float
        Backtracking probability of the walk.
    alpha : float
        Walk bias; ``inf`` for the max-weight walk.
    p_greedy : float
        Fraction of arrivals issued under the greedy strategy. Derived as
        gamma * theta when left as None; 0 when theta is None too.
    gamma : float
        Fraction of selfish nodes.
    theta : float
        Greedy mixture of the selfish nodes; p_greedy = gamma * theta.
        Derived from p_greedy and gamma when left as None.
    k_reattach : float
        Age in seconds after which an unconfirmed transaction is reissued;
        ``inf`` disables reattachment.
    m0 : int
        Number of subsequent probe walks defining the cost of a transaction.
    t_end : float
        Simulated horizon in seconds.
    warmup : float
        Transactions issued before this time are left out of the statistics.
    seed : int
        Seed of the run.
    n_nodes : int
        Number of selfish nodes N; only sets the deviation step gamma/N.
    redraws : int
        Re-runs of the second walk when both walks hit the same tip.
    conflict_redraws : int
        Re-draws of a conflicting pair before falling back to the default rule.
    max_walk_steps : int
        Step cap of a single walk.
    dense_cap, solver_cap : int
        View-size limits of the dense and of any exact exit solve.
    mc_samples : int
        Least number of walks per Monte-Carlo exit distribution; at
        least 100 per tip are used.
    """
    rate: float
    h: float = 1.0
    q: float = 1.0 / 3.0
    alpha: float = 0.01
    p_greedy: Optional[float] = None
    gamma: float = 1.0
    theta: Optional[float] = None
    k_reattach: float = 20.0
    m0: int = 250
    t_end: float = 400.0
    warmup: float = 0.0
    seed: int = 0
    n_nodes: int = 100
    redraws: int = 10
    conflict_redraws: int = 20
    max_walk_steps: int = MAX_STEPS
    dense_cap: int = 512
    solver_cap: int = GAME_SOLVER_CAP
    mc_samples: int = 200

    def __post_init__(self):
        if not self.rate > 0 or math.isinf(self.rate):
            raise ValueError("lambda must be a positive finite rate, got {}.".format(self.rate))
        if not self.h >= 0:
            raise ValueError("h must be >= 0, got {}.".format(self.h))
        if not 0 <= self.q < 0.5:
            raise ValueError("q must satisfy 0 <= q < 1/2, got {}.".format(self.q))
        if math.isnan(self.alpha) or self.alpha < 0:
            raise ValueError("alpha must be >= 0 (or inf), got {}.".format(self.alpha))
        if not 0 < self.gamma <= 1:
            raise ValueError("gamma must lie in (0, 1], got {}.".format(self.gamma))
        if self.p_greedy is None:
            theta = 0.0 if self.theta is None else self.theta
            if not 0 <= theta <= 1:
                raise ValueError("theta must lie in [0, 1], got {}.".format(theta))
            object.__setattr__(self, "p_greedy", self.gamma * theta)
        if not 0 <= self.p_greedy <= self.gamma:
            raise ValueError("p_greedy must lie in [0, gamma={}], got {}.".format(self.gamma, self.p_greedy))
        if self.theta is None:
            object.__setattr__(self, "theta", self.p_greedy / self.gamma)
        elif not 0 <= self.theta <= 1 or abs(self.gamma * self.theta - self.p_greedy) > 1e-12:
            raise ValueError("theta must lie in [0, 1] with p_greedy = gamma * theta, got theta={}.".format(self.theta))
        if not self.k_reattach > 0:
            raise ValueError("K_reattach must be > 0, got {}.".format(self.k_reattach))
        if self.m0 < 1:
            raise ValueError("M0 must be >= 1, got {}.".format(self.m0))
        if not self.t_end > 0 or math.isinf(self.t_end):
            raise ValueError("T_end must be a positive finite time, got {}.".format(self.t_end))
        if not 0 <= self.warmup < self.t_end:
            raise ValueError("warmup must satisfy 0 <= warmup < T_end={}, got {}.".format(self.t_end, self.warmup))
        for name in ("n_nodes", "max_walk_steps", "mc_samples"):
            if getattr(self, name) < 1:
                raise ValueError("{} must be >= 1, got {}.".format(name, getattr(self, name)))
        for name in ("redraws", "conflict_redraws", "dense_cap", "solver_cap"):
            if getattr(self, name) < 0:
                raise ValueError("{} must be >= 0, got {}.".format(name, getattr(self, name)))

    @property
    def walk_params(self):
        return WalkParams(alpha=self.alpha, q=self.q, max_steps=self.max_walk_steps)

    @property
    def reattachment(self):
        return not math.isinf(self.k_reattach)

    def with_p(self, p_greedy):
        """Copy at another greedy fraction, theta re-derived."""
        return replace(self, p_greedy=p_greedy, theta=None)

    def with_seed(self, seed):
        return replace(self, seed=int(seed))

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}
