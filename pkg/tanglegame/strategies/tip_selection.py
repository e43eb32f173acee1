"""
Tip selection strategies.

The default rule approves the tips of two independent walks; the greedy
rule approves the two tips where the default walk's exit distribution is
largest; the mixed rule plays greedy with probability theta.
"""

import logging
from dataclasses import dataclass

import numpy as np

from tanglegame.tangle.core import bits_at
from tanglegame.strategies.strategy import TipSelector
from tanglegame.walks.exit_distribution import DENSE_CAP, MC_SAMPLES, SOLVER_CAP, exit_distribution, mc_sample_count
from tanglegame.walks.walk import sample_walk

logger = logging.getLogger(__name__)

DEFAULT = "S0"
GREEDY = "S1"
REDRAWS = 10
CONFLICT_REDRAWS = 20


class NoConflictFreeTip(RuntimeError):
    """No tip of the view can take the transaction without a conflict."""


@dataclass(frozen=True)
class TipPair:
    """Ordered pair of view tips chosen for approval, with the rule that chose it."""
    first: int
    second: int
    label: str = DEFAULT

    def as_tuple(self):
        return (self.first, self.second)

    @property
    def is_duplicate(self):
        return self.first == self.second


def select_default(view, params, rng, redraws=REDRAWS):
    """Two independent walks; the second is re-run up to `redraws` times on a repeat."""
    first = sample_walk(view, params, rng)
    second = sample_walk(view, params, rng)
    attempts = 0
    while second == first and attempts < redraws and view.tip_count > 1:
        second = sample_walk(view, params, rng)
        attempts += 1
    return TipPair(int(first), int(second), DEFAULT)


def select_greedy(view, params, rng, dense_cap=DENSE_CAP, solver_cap=SOLVER_CAP, mc_samples=MC_SAMPLES):
    """The two most likely exit tips of the default walk, ties broken uniformly."""
    tips = view.tips
    if len(tips) == 1:
        return TipPair(int(tips[0]), int(tips[0]), GREEDY)
    distribution = exit_distribution(view, params, rng, dense_cap, solver_cap, mc_samples)
    shuffled = rng.permutation(len(distribution.tips))
    # rounding keeps solver noise from breaking exact ties
    scores = np.round(distribution.probabilities[shuffled], 12)
    ranked = shuffled[np.argsort(-scores, kind='stable')]
    return TipPair(int(distribution.tips[ranked[0]]), int(distribution.tips[ranked[1]]), GREEDY)


def select_mixed(view, theta, params, rng, redraws=REDRAWS, **greedy_kwargs):
    """Greedy with probability `theta`, default otherwise."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError("theta must lie in [0, 1], got {}.".format(theta))
    if rng.random() < theta:
        return select_greedy(view, params, rng, **greedy_kwargs)
    return select_default(view, params, rng, redraws)


def conflict_free(view, pair, logical_index=None, issuing=None):
    """Whether the pair and its past cones hold at most one issue per logical transaction.

    Parameters
    ----------
    view : View
        View the pair was drawn on.
    pair : TipPair
        Candidate pair.
    logical_index : dict(int, list[int]), Optional
        Issues of every logical transaction; the tangle's own index by default.
    issuing : int, Optional
        Logical id of the transaction about to be attached; none of its
        existing issues may lie in the cone.
    """
    tangle = view.tangle
    if logical_index is None:
        logical_index = tangle.logical_index
        member_ids, member_lids = tangle.reissue_members()
    else:
        reissued = [(lid, issues) for lid, issues in logical_index.items() if len(issues) > 1]
        member_ids = np.array([v for _, issues in reissued for v in issues], dtype=np.int64)
        member_lids = np.array([lid for lid, issues in reissued for _ in issues], dtype=np.int64)
    own = logical_index.get(issuing, ()) if issuing is not None else ()
    if not len(member_ids) and not own:
        return True
    cone = tangle.cone_bits(pair.as_tuple())
    if own and bits_at(cone, own).any():
        return False
    inside = member_lids[bits_at(cone, member_ids)]
    return len(np.unique(inside)) == len(inside)


class DefaultSelector(TipSelector):
    """Default two-walk strategy."""
    label = DEFAULT

    def __init__(self, params, redraws=REDRAWS):
        TipSelector.__init__(self, params)
        if redraws < 0:
            raise ValueError("redraws must be >= 0, got {}.".format(redraws))
        self.redraws = redraws

    def select(self, view, rng):
        return select_default(view, self.params, rng, self.redraws)


class GreedySelector(TipSelector):
    """Greedy strategy on the default walk's exit distribution."""
    label = GREEDY

    def __init__(self, params, dense_cap=DENSE_CAP, solver_cap=SOLVER_CAP, mc_samples=MC_SAMPLES):
        TipSelector.__init__(self, params)
        if mc_samples < 1:
            raise ValueError("mc_samples must be >= 1, got {}.".format(mc_samples))
        self.dense_cap = dense_cap
        self.solver_cap = solver_cap
        self.mc_samples = mc_samples
        self.sampled = False

    def select(self, view, rng):
        if not self.sampled and view.tip_count > 1 and (self.params.is_infinite or view.size > self.solver_cap):
            logger.warning("Greedy selection switches to Monte-Carlo at %d vertices (cap %d, %d walks)",
                           view.size, self.solver_cap, mc_sample_count(view, self.mc_samples))
            self.sampled = True
        return select_greedy(view, self.params, rng, self.dense_cap, self.solver_cap, self.mc_samples)


class MixedSelector(TipSelector):
    """Plays the greedy strategy with probability theta.

    Attributes
    ----------
    theta : float
        Probability of the greedy branch.
    greedy_draws : int
        Number of selections that took the greedy branch.
    """

    def __init__(self, params, theta, redraws=REDRAWS, **greedy_kwargs):
        TipSelector.__init__(self, params)
        if not 0.0 <= theta <= 1.0:
            raise ValueError("theta must lie in [0, 1], got {}.".format(theta))
        self.theta = theta
        self.default = DefaultSelector(params, redraws)
        self.greedy = GreedySelector(params, **greedy_kwargs)
        self.greedy_draws = 0

    def select(self, view, rng):
        if rng.random() < self.theta:
            self.greedy_draws += 1
            return self.greedy.select(view, rng)
        return self.default.select(view, rng)


def make_selector(kind, params, theta=None, **kwargs):
    """Build a selector from its name: ``default``, ``greedy`` or ``mixed``."""
    kind = kind.lower()
    if kind in ("default", DEFAULT.lower()):
        return DefaultSelector(params, **kwargs)
    elif kind in ("greedy", GREEDY.lower()):
        return GreedySelector(params, **kwargs)
    elif kind == "mixed":
        if theta is None:
            raise KeyError("Missing to specify `theta` for the mixed strategy.")
        return MixedSelector(params, theta, **kwargs)
    raise ValueError("Unknown strategy {}.".format(kind))


def admissible_tips(view, issuing):
    """Tips whose past cone holds no issue of the logical transaction `issuing`."""
    tangle = view.tangle
    tips = view.tips
    own = tangle.logical_index.get(issuing, ())
    if not len(own):
        return tips
    return np.array([t for t in tips if not tangle.reference_mask(t, own).any()], dtype=np.int64)


def choose_attachment(selector, fallback, view, rng, conflict_redraws=CONFLICT_REDRAWS, issuing=None):
    """Draw a conflict-free pair.

    The selector is asked up to `conflict_redraws` + 1 times, then the
    fallback (default) selector as often. As a last resort an admissible
    tip is paired with itself. An attached vertex always has a
    conflict-free cone; a reissue also needs a tip whose cone misses
    every earlier issue of the transaction.

    Returns
    -------
    pair : TipPair
        The pair to attach to.
    rejected : int
        Number of draws rejected as conflicting.

    Raises
    ------
    NoConflictFreeTip
        When reissuing and every tip already references an earlier issue.
    """
    candidates = view.tips if issuing is None else admissible_tips(view, issuing)
    if not len(candidates):
        raise NoConflictFreeTip("Every tip of a view of {} vertices references transaction {}."
                                .format(view.size, issuing))
    rejected = 0
    for chooser in dict.fromkeys((selector, fallback)):
        for _ in range(conflict_redraws + 1):
            pair = chooser(view, rng)
            if conflict_free(view, pair, issuing=issuing):
                return pair, rejected
            rejected += 1
        logger.warning("%d conflicting draws on a view of %d vertices", rejected, view.size)
    for tip in rng.permutation(candidates):
        pair = TipPair(int(tip), int(tip), fallback.label)
        if conflict_free(view, pair, issuing=issuing):
            return pair, rejected
    raise NoConflictFreeTip("No conflict-free tip in a view of {} vertices.".format(view.size))
