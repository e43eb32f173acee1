"""
Cost, approval-time and queueing statistics over simulation outputs.
"""

import logging
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from tanglegame.strategies.tip_selection import DEFAULT, GREEDY

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CostSummary:
    """Mean normalised cost W/M0 per strategy label.

    Attributes
    ----------
    mean_s0, mean_s1 : float or None
        Mean cost of the default and of the greedy transactions; None when
        no eligible record carries the label.
    se_s0, se_s1 : float or None
        Standard errors of the means.
    n_s0, n_s1 : int
        Number of records behind each mean.
    p_greedy : float
        Greedy fraction of the runs.
    """
    mean_s0: Optional[float]
    mean_s1: Optional[float]
    se_s0: Optional[float]
    se_s1: Optional[float]
    n_s0: int
    n_s1: int
    p_greedy: float

    def mean(self, label):
        return self.mean_s0 if label == DEFAULT else self.mean_s1

    def se(self, label):
        return self.se_s0 if label == DEFAULT else self.se_s1

    @property
    def missing(self):
        """Labels without any eligible record."""
        return [label for label in (DEFAULT, GREEDY) if self.mean(label) is None]

    def as_row(self):
        return {"p": self.p_greedy, "mean_S0": self.mean_s0, "se_S0": self.se_s0,
                "mean_S1": self.mean_s1, "se_S1": self.se_s1}


@dataclass(frozen=True)
class LittleCheck:
    """Observed against predicted mean number of unconfirmed transactions."""
    observed: float
    predicted: float
    ratio: float
    p: float

    def as_row(self):
        return {"observed": self.observed, "predicted": self.predicted, "ratio": self.ratio, "p": self.p}


def cost_frame(outputs):
    """One row per eligible record: replica, strategy and cost W/M0."""
    rows = []
    for replica, output in enumerate(outputs):
        m0 = output.config.m0
        rows.extend((replica, r.strategy, r.w / m0) for r in output.eligible_records())
    return pd.DataFrame(rows, columns=["replica", "strategy", "cost"])


def _label_stats(costs):
    """Pooled mean and standard error of one label's costs."""
    if costs.empty:
        return None, None, 0
    mean = float(costs["cost"].mean())
    per_replica = costs.groupby("replica")["cost"].mean()
    if len(per_replica) > 1:
        se = float(per_replica.std(ddof=1) / math.sqrt(len(per_replica)))
    elif len(costs) > 1:
        se = float(costs["cost"].std(ddof=1) / math.sqrt(len(costs)))
    else:
        se = 0.0
    return mean, se, len(costs)


def mean_costs(outputs):
    """Mean cost of each strategy label pooled across replicas.

    Parameters
    ----------
    outputs : list[SimOutput]
        Replicas of one configuration.

    Returns
    -------
    CostSummary
        Pooled means; standard errors from the spread of replica means
        (record-level when a single replica is given).
    """
    outputs = list(outputs)
    if not outputs:
        raise ValueError("mean_costs needs at least one output.")
    frame = cost_frame(outputs)
    s0 = _label_stats(frame[frame["strategy"] == DEFAULT])
    s1 = _label_stats(frame[frame["strategy"] == GREEDY])
    summary = CostSummary(s0[0], s1[0], s0[1], s1[1], s0[2], s1[2], outputs[0].config.p_greedy)
    for label in summary.missing:
        logger.warning("No eligible %s records at p=%g", label, summary.p_greedy)
    return summary


def approval_delays(outputs):
    """Approval delays of the eligible, never reattached records; NaN when unapproved."""
    delays = []
    for output in outputs:
        for record in output.eligible_records():
            if record.reissues:
                continue
            delay = record.approval_delay
            delays.append(np.nan if delay is None else delay)
    return np.array(delays, dtype=float)


def approval_cdf(outputs, grid, approved_only=False):
    """Empirical probability that the first approval comes within t of issue.

    Parameters
    ----------
    outputs : list[SimOutput]
        Runs to pool.
    grid : array_like
        Increasing times.
    approved_only : bool
        Condition on eventually approved transactions; by default
        unapproved ones count as never approved.

    Returns
    -------
    np.ndarray
        CDF value at every grid point.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be a strictly increasing sequence of times.")
    delays = approval_delays(outputs)
    approved = np.sort(delays[~np.isnan(delays)])
    total = len(approved) if approved_only else len(delays)
    if total == 0:
        raise ValueError("No eligible transaction to build an approval CDF from.")
    return np.searchsorted(approved, grid, side='right') / total


def mean_approval_time(outputs):
    """Mean delay to first approval of the approved eligible records."""
    delays = approval_delays(outputs)
    delays = delays[~np.isnan(delays)]
    if not len(delays):
        return None
    return float(delays.mean())


def little_check(outputs, k_reattach=None, rate=None):
    """Compare the mean unconfirmed count with rate * K / p.

    p is the fraction of post-warmup transactions confirmed at their first
    deadline check. Needs outputs produced in memory, since deadline checks
    are not part of the CSV files.
    """
    outputs = list(outputs)
    if not outputs:
        raise ValueError("little_check needs at least one output.")
    config = outputs[0].config
    k_reattach = config.k_reattach if k_reattach is None else k_reattach
    rate = config.rate if rate is None else rate
    if math.isinf(k_reattach):
        raise ValueError("little_check needs reattachment enabled (finite K).")

    checked = [r for o in outputs for r in o.records if r.issue_time >= o.config.warmup and r.checks > 0]
    if not checked:
        raise ValueError("No deadline check recorded; little_check needs in-memory outputs.")
    p = sum(1 for r in checked if r.confirmed and r.reissues == 0) / len(checked)
    observed = float(np.mean([o.unconfirmed_series[o.unconfirmed_series[:, 0] >= o.config.warmup, 1].mean()
                              for o in outputs]))
    if p == 0:
        logger.warning("No transaction confirmed at its first check; prediction undefined")
        return LittleCheck(observed, math.nan, math.nan, p)
    predicted = rate * k_reattach / p
    return LittleCheck(observed, predicted, observed / predicted, p)


def relative_cost_increase(cost_at_p, cost_at_zero):
    """(W(p) - W(0)) / W(0) of the default transactions.

    Both arguments are mean costs or CostSummary objects, whose default
    mean is used.
    """
    if isinstance(cost_at_p, CostSummary):
        cost_at_p = cost_at_p.mean_s0
    if isinstance(cost_at_zero, CostSummary):
        cost_at_zero = cost_at_zero.mean_s0
    if cost_at_p is None or cost_at_zero is None:
        raise ValueError("Both default costs are needed for a relative increase.")
    if cost_at_zero <= 0:
        raise ValueError("Relative cost increase undefined for a baseline cost of {}.".format(cost_at_zero))
    return (cost_at_p - cost_at_zero) / cost_at_zero


def absolute_gain(summary):
    """Cost saved by the greedy strategy, mean_S0 - mean_S1."""
    if summary.mean_s0 is None or summary.mean_s1 is None:
        return None
    return summary.mean_s0 - summary.mean_s1
