"""
Exit distribution of the tip-selecting walk.

The walk is an absorbing Markov chain whose absorbing states are the tips
of the view. With Q the transient-to-transient block and R the
transient-to-tip block, the exit law from the start vertex s is
e_s^T (I - Q)^{-1} R, obtained from one linear solve with (I - Q)^T.
"""

import logging
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import spsolve

from tanglegame.walks.walk import sample_walks, start_vertex, transition_table

logger = logging.getLogger(__name__)

DENSE_CAP = 512
SOLVER_CAP = 5000
MC_SAMPLES = 200
MC_PER_TIP = 100
RESIDUAL_TOL = 1e-10


class SolverCapExceeded(ValueError):
    """The view is too large for the exact solver."""


@dataclass(frozen=True)
class ExitDistribution:
    """Probability of the walk stopping at each tip of a view.

    Attributes
    ----------
    tips : np.ndarray(dtype=int)
        Tips of the view, increasing.
    probabilities : np.ndarray(dtype=float)
        Probability of each tip.
    method : str
        ``"exact"`` or ``"mc"``.
    """
    tips: np.ndarray
    probabilities: np.ndarray
    method: str = "exact"

    def __getitem__(self, tip):
        index = np.searchsorted(self.tips, tip)
        if index < len(self.tips) and self.tips[index] == tip:
            return float(self.probabilities[index])
        raise KeyError(tip)

    def __len__(self):
        return len(self.tips)

    def as_dict(self):
        return {int(t): float(p) for t, p in zip(self.tips, self.probabilities)}

    def total_variation(self, other):
        """Total-variation distance to another distribution on tips."""
        mine = self.as_dict()
        theirs = other.as_dict()
        support = set(mine) | set(theirs)
        return 0.5 * sum(abs(mine.get(t, 0.0) - theirs.get(t, 0.0)) for t in support)


def exit_distribution_exact(view, params, dense_cap=DENSE_CAP, solver_cap=SOLVER_CAP):
    """Exit distribution from an absorbing-chain linear solve.

    Parameters
    ----------
    view : View
        View to walk on.
    params : WalkParams
        Walk parameters; alpha must be finite.
    dense_cap : int
        Views with fewer vertices use a dense solve.
    solver_cap : int
        Largest view size accepted.

    Returns
    -------
    ExitDistribution
    """
    if params.is_infinite:
        raise ValueError("The exact solver needs a finite alpha.")
    if view.size > solver_cap:
        raise SolverCapExceeded("View of {} vertices exceeds the solver cap {}.".format(view.size, solver_cap))
    tips = view.tips
    start = start_vertex(view, params)
    if view.is_tip(start):
        probabilities = (tips == start).astype(float)
        return ExitDistribution(tips, probabilities, "exact")

    table = transition_table(view, params)
    transient = np.flatnonzero(~view.tip_mask)
    position = np.full(view.size, -1, dtype=np.int64)
    position[transient] = np.arange(len(transient))
    tip_position = np.full(view.size, -1, dtype=np.int64)
    tip_position[tips] = np.arange(len(tips))

    rows = position[table.sources]
    to_tip = view.tip_mask[table.targets]
    m = len(transient)
    rhs = np.zeros(m)
    rhs[position[start]] = 1.0

    q_rows, q_cols = rows[~to_tip], position[table.targets[~to_tip]]
    q_vals = table.probs[~to_tip]
    if view.size < dense_cap:
        system = np.eye(m)
        np.add.at(system, (q_rows, q_cols), -q_vals)
        try:
            visits = np.linalg.solve(system.T, rhs)
        except np.linalg.LinAlgError as err:
            raise RuntimeError("Singular absorbing-chain system on a view of {} vertices.".format(view.size)) from err
    else:
        q_matrix = sparse.coo_matrix((q_vals, (q_rows, q_cols)), shape=(m, m)).tocsr()
        system = (sparse.identity(m, format='csr') - q_matrix).T.tocsc()
        visits = spsolve(system, rhs)
        residual = np.abs(system @ visits - rhs).max()
        if residual > RESIDUAL_TOL:
            visits = visits + spsolve(system, rhs - system @ visits)
            residual = np.abs(system @ visits - rhs).max()
            if residual > RESIDUAL_TOL:
                logger.warning("Absorbing-chain residual %.3e above %.0e", residual, RESIDUAL_TOL)

    absorbed = np.bincount(tip_position[table.targets[to_tip]],
                           weights=visits[rows[to_tip]] * table.probs[to_tip],
                           minlength=len(tips))
    absorbed = np.clip(absorbed, 0.0, None)
    return ExitDistribution(tips, absorbed / absorbed.sum(), "exact")


def exit_distribution_mc(view, params, n_samples, rng):
    """Empirical exit frequencies of `n_samples` independent walks."""
    if n_samples < 1:
        raise ValueError("n_samples must be >= 1, got {}.".format(n_samples))
    tips = view.tips
    reached = sample_walks(view, params, n_samples, rng)
    counts = np.bincount(np.searchsorted(tips, reached), minlength=len(tips))
    return ExitDistribution(tips, counts / n_samples, "mc")


def mc_sample_count(view, mc_samples=MC_SAMPLES):
    """Walks used for a Monte-Carlo exit distribution: at least `MC_PER_TIP` per tip."""
    return max(mc_samples, MC_PER_TIP * view.tip_count)


def exit_distribution(view, params, rng, dense_cap=DENSE_CAP, solver_cap=SOLVER_CAP, mc_samples=MC_SAMPLES):
    """Exact exit distribution when affordable, Monte-Carlo otherwise.

    Views above `solver_cap` vertices and infinite alpha are sampled with
    `mc_sample_count` walks; the size is checked before any solve. Exact
    results are cached on the view.
    """
    if not params.is_infinite and view.size <= solver_cap:
        key = ("exit", params.key())
        distribution = view.cache.get(key)
        if distribution is None:
            distribution = exit_distribution_exact(view, params, dense_cap, solver_cap)
            view.cache[key] = distribution
        return distribution
    n_samples = mc_sample_count(view, mc_samples)
    logger.debug("Monte-Carlo exit distribution on a view of %d vertices, %d walks", view.size, n_samples)
    return exit_distribution_mc(view, params, n_samples, rng)
