"""
Tip-selecting random walk.

From a vertex x the walk backtracks with total probability q, split
uniformly over the two approved vertices, and moves forward with the
remaining mass to an approver y with weight exp(-alpha*(H_x - H_y)).
At the genesis q is taken as 0. Tips of the view are absorbing.
"""

import logging
import math
from dataclasses import dataclass

import numpy as np

from tanglegame.tangle.core import GENESIS, TangleError

logger = logging.getLogger(__name__)

MAX_STEPS = 10**6
START_RULES = {
    "genesis": lambda view: GENESIS,
}


class WalkError(RuntimeError):
    """A walk misbehaved: step cap exceeded or a transition asked at a tip."""


@dataclass(frozen=True)
class WalkParams:
    """Parameters of the tip-selecting walk.

    Attributes
    ----------
    alpha : float
        Bias towards heavier approvers; ``math.inf`` selects the
        max-weight walk.
    q : float
        Backtracking probability, in [0, 1/2).
    start : str
        Start rule, a key of `START_RULES`.
    max_steps : int
        Step cap per walk.
    """
    alpha: float = 0.0
    q: float = 1.0 / 3.0
    start: str = "genesis"
    max_steps: int = MAX_STEPS

    def __post_init__(self):
        if math.isnan(self.alpha) or self.alpha < 0:
            raise ValueError("alpha must be >= 0 (or inf), got {}.".format(self.alpha))
        if not 0 <= self.q < 0.5:
            raise ValueError("q must satisfy 0 <= q < 1/2, got {}.".format(self.q))
        if self.start not in START_RULES:
            raise ValueError("Unknown start rule {!r}; known: {}.".format(self.start, sorted(START_RULES)))
        if self.max_steps < 1:
            raise ValueError("max_steps must be >= 1, got {}.".format(self.max_steps))

    @property
    def is_infinite(self):
        return math.isinf(self.alpha)

    @classmethod
    def infinite(cls, q=0.0, max_steps=MAX_STEPS):
        return cls(alpha=math.inf, q=q, max_steps=max_steps)

    def key(self):
        return (self.alpha, self.q)


def start_vertex(view, params):
    return START_RULES[params.start](view)


def _forward_weights(weights, x, targets, alpha):
    """Unnormalised forward weights, shifted so the largest is 1."""
    gaps = weights[x] - weights[targets]
    if math.isinf(alpha):
        return (gaps == gaps.min()).astype(float)
    return np.exp(-alpha * (gaps - gaps.min()))


def transition_probs(view, x, params):
    """Transition law of the walk out of `x`.

    Parameters
    ----------
    view : View
        The view whose weights drive the walk.
    x : int
        Current vertex; must not be a tip of the view.
    params : WalkParams
        Walk parameters.

    Returns
    -------
    targets : np.ndarray(dtype=int)
        Forward targets (approvers, counting multiplicity) followed by the
        backtracking targets (the two approved vertices).
    probs : np.ndarray(dtype=float)
        Probability of each entry of `targets`.
    """
    if not view.contains(x):
        raise TangleError("Vertex {} is not in the view.".format(x))
    if view.is_tip(x):
        raise WalkError("Vertex {} is a tip; tips are absorbing.".format(x))
    forward = np.asarray(view.approvers(x), dtype=np.int64)
    assert len(forward) > 0, "non-tip without approvers"
    q = 0.0 if x == GENESIS else params.q
    weights = _forward_weights(view.weights, x, forward, params.alpha)
    probs = weights / weights.sum() * (1.0 - q)
    if q == 0.0:
        return forward, probs
    backward = np.asarray(view.parents(x), dtype=np.int64)
    return np.concatenate([forward, backward]), np.concatenate([probs, np.full(2, q / 2.0)])


def sample_walk(view, params, rng):
    """Run one walk from the start vertex and return the tip it stops at."""
    x = start_vertex(view, params)
    table = transition_table(view, params)
    tip_mask, keys, targets, row_ends = table.tip_mask, table.keys, table.targets, table.row_ends
    steps = 0
    while not tip_mask[x]:
        k = keys.searchsorted(x + rng.random(), side='right')
        x = int(targets[min(k, row_ends[x])])
        steps += 1
        if steps > params.max_steps:
            raise WalkError("Walk exceeded {} steps on a view of {} vertices.".format(params.max_steps, view.size))
    return x


def _weight_list(view):
    weights = view.cache.get("weight_list")
    if weights is None:
        weights = view.weights.tolist()
        view.cache["weight_list"] = weights
    return weights


def deterministic_walk(view, rng, max_steps=MAX_STEPS):
    """Max-weight walk from the genesis, uniform among equally heavy approvers."""
    x = GENESIS
    weights = _weight_list(view)
    approvers = view.tangle.approvers
    tip_mask = view.tip_mask
    size = view.size
    steps = 0
    while not tip_mask[x]:
        best, heavy = -1, []
        # approver lists are increasing, so a double approval shows up twice in a row
        for y in approvers[x]:
            if y >= size:
                break
            if weights[y] > best:
                best, heavy = weights[y], [y]
            elif weights[y] == best and y != heavy[-1]:
                heavy.append(y)
        x = heavy[0] if len(heavy) == 1 else heavy[rng.integers(len(heavy))]
        steps += 1
        if steps > max_steps:
            raise WalkError("Deterministic walk exceeded {} steps.".format(max_steps))
    return x


class TransitionTable():
    """Row-compressed transition law of the walk on one view.

    Rows are the view vertices; tip rows are empty. Inside row r the
    search keys are ``r + cumulative probability``, so one
    `np.searchsorted` call moves a whole population of walkers.

    Attributes
    ----------
    indptr : np.ndarray(dtype=int)
        Row boundaries into `targets`, `probs` and `keys`.
    sources, targets : np.ndarray(dtype=int)
        Edge endpoints, sorted by source.
    probs : np.ndarray(dtype=float)
        Transition probabilities.
    keys : np.ndarray(dtype=float)
        Search keys.
    """
    def __init__(self, view, params):
        n = view.size
        weights = view.weights.astype(float)
        tip_mask = view.tip_mask
        parents = view.tangle.parent_array(n)

        # forward edges x -> y for every approval y -> x
        children = np.repeat(np.arange(1, n, dtype=np.int64), 2)
        approved = parents[1:n].ravel()
        gaps = weights[approved] - weights[children]
        row_min = np.full(n, np.inf)
        np.minimum.at(row_min, approved, gaps)
        if params.is_infinite:
            forward_w = (gaps == row_min[approved]).astype(float)
        else:
            forward_w = np.exp(-params.alpha * (gaps - row_min[approved]))
        row_sum = np.bincount(approved, weights=forward_w, minlength=n)
        q_row = np.full(n, params.q)
        q_row[GENESIS] = 0.0
        forward_p = forward_w / row_sum[approved] * (1.0 - q_row[approved])

        sources = [approved]
        targets = [children]
        probs = [forward_p]
        if params.q > 0:
            movers = np.flatnonzero(~tip_mask[1:]) + 1
            sources.append(np.repeat(movers, 2))
            targets.append(parents[movers].ravel())
            probs.append(np.full(2 * len(movers), params.q / 2.0))
        sources = np.concatenate(sources)
        targets = np.concatenate(targets)
        probs = np.concatenate(probs)

        order = np.argsort(sources, kind='stable')
        self.sources = sources[order]
        self.targets = targets[order]
        self.probs = probs[order]
        counts = np.bincount(self.sources, minlength=n)
        self.indptr = np.concatenate([[0], np.cumsum(counts)])
        cumulative = np.cumsum(self.probs)
        offsets = np.concatenate([[0.0], cumulative])[self.indptr[:-1]]
        local = cumulative - offsets[self.sources]
        nonempty = counts > 0
        local[self.indptr[1:][nonempty] - 1] = 1.0
        self.keys = self.sources + local
        self.row_ends = self.indptr[1:] - 1
        self.tip_mask = tip_mask
        self.size = n

    def step(self, positions, rng):
        """Advance every walker in `positions` by one step."""
        u = rng.random(len(positions))
        k = np.searchsorted(self.keys, positions + u, side='right')
        k = np.minimum(k, self.row_ends[positions])
        return self.targets[k]


def transition_table(view, params):
    key = ("table", params.key())
    table = view.cache.get(key)
    if table is None:
        table = TransitionTable(view, params)
        view.cache[key] = table
    return table


def sample_walks(view, params, n, rng):
    """Run `n` independent walks together; returns the array of tips reached."""
    if n < 1:
        raise ValueError("Number of walks must be >= 1, got {}.".format(n))
    positions = np.full(n, start_vertex(view, params), dtype=np.int64)
    table = transition_table(view, params)
    active = np.flatnonzero(~table.tip_mask[positions])
    steps = 0
    while len(active):
        positions[active] = table.step(positions[active], rng)
        active = active[~table.tip_mask[positions[active]]]
        steps += 1
        if steps > params.max_steps:
            raise WalkError("Walks exceeded {} steps on a view of {} vertices.".format(params.max_steps, view.size))
    return positions
