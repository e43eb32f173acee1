"""
One-dimensional game between the default and the greedy strategy.

Costs of both strategies are measured on a grid of greedy fractions p,
smoothed by least-squares quartics, and their crossing p_bar is the
equilibrium candidate. The crossing is stable when the greedy-minus-default
cost difference increases through it.
"""

import logging
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import pandas as pd
from numpy.polynomial import Polynomial
from scipy.optimize import bisect

from tanglegame.analysis.metrics import CostSummary, absolute_gain, mean_costs, relative_cost_increase
from tanglegame.simulation.simulator import run_replicas

logger = logging.getLogger(__name__)

DEGREE = 4
ROOT_TOL = 1e-6
SCAN_POINTS = 2001
FLAT_SLOPE = 1e-12

INTERIOR = "interior"
ALL_GREEDY = "all_greedy"
ALL_DEFAULT = "all_default"


class SweepError(RuntimeError):
    """A run of the sweep failed; `partial` holds the points already measured."""

    def __init__(self, message, partial):
        RuntimeError.__init__(self, message)
        self.partial = partial


def _fit(p, values, degree):
    """Least-squares polynomial through the available points, or None."""
    keep = np.array([v is not None for v in values])
    if not keep.any():
        return None
    x = np.asarray(p, dtype=float)[keep]
    y = np.array([v for v in values if v is not None], dtype=float)
    if len(x) <= degree:
        logger.warning("Only %d points for a degree-%d fit; using degree %d", len(x), degree, len(x) - 1)
        degree = len(x) - 1
    return Polynomial.fit(x, y, degree)


@dataclass
class CostCurves:
    """Measured and fitted cost curves of both strategies.

    Attributes
    ----------
    p : np.ndarray
        Greedy fractions, strictly increasing inside [0, 1].
    summaries : list[CostSummary]
        Measured costs at every grid point.
    fit_s0, fit_s1 : Polynomial or None
        Least-squares fits of the default and greedy costs; the greedy fit
        only uses points where greedy records exist.
    """
    p: np.ndarray
    summaries: list
    fit_s0: Optional[Polynomial] = None
    fit_s1: Optional[Polynomial] = None

    @classmethod
    def from_means(cls, p, mean_s0, mean_s1, degree=DEGREE):
        """Curves from plain mean values, e.g. noiseless synthetic costs."""
        summaries = [CostSummary(m0, m1, 0.0, 0.0, 1, 1, float(x)) for x, m0, m1 in zip(p, mean_s0, mean_s1)]
        return fit_curves(p, summaries, degree)

    @property
    def mean_s0(self):
        return [s.mean_s0 for s in self.summaries]

    @property
    def mean_s1(self):
        return [s.mean_s1 for s in self.summaries]

    @property
    def fitted(self):
        return self.fit_s0 is not None and self.fit_s1 is not None

    def difference(self, p):
        """Fitted greedy minus default cost."""
        return self.fit_s1(p) - self.fit_s0(p)

    def span(self):
        """Range of p covered by both fits, inside [0, 1]."""
        s0 = [x for x, m in zip(self.p, self.mean_s0) if m is not None]
        s1 = [x for x, m in zip(self.p, self.mean_s1) if m is not None]
        return max(min(s0), min(s1), 0.0), min(max(s0), max(s1), 1.0)


def fit_curves(p, summaries, degree=DEGREE):
    """Fit both cost curves over the grid `p`."""
    p = np.asarray(p, dtype=float)
    if len(p) != len(summaries):
        raise ValueError("Grid of {} points for {} summaries.".format(len(p), len(summaries)))
    if np.any(p < 0) or np.any(p > 1) or np.any(np.diff(p) <= 0):
        raise ValueError("The p grid must be strictly increasing inside [0, 1].")
    fit_s0 = _fit(p, [s.mean_s0 for s in summaries], degree)
    fit_s1 = _fit(p, [s.mean_s1 for s in summaries], degree)
    return CostCurves(p, list(summaries), fit_s0, fit_s1)


def sweep(base_config, p_grid, replicas, processes=1, degree=DEGREE, on_point=None):
    """Measure both cost curves over `p_grid` and fit them.

    Parameters
    ----------
    base_config : SimConfig
        Configuration shared by all points; p_greedy is replaced.
    p_grid : array_like
        Greedy fractions.
    replicas : int
        Runs per point; every point reuses the same replica seeds.
    processes : int
        Worker processes per point.
    degree : int
        Degree of the least-squares fits.
    on_point : callable, Optional
        Called as ``on_point(p, outputs, summary)`` after each point.

    Returns
    -------
    CostCurves
    """
    p_grid = np.asarray(p_grid, dtype=float)
    if np.any(p_grid < 0) or np.any(p_grid > 1) or np.any(np.diff(p_grid) <= 0):
        raise ValueError("The p grid must be strictly increasing inside [0, 1].")
    if replicas < 1:
        raise ValueError("replicas must be >= 1, got {}.".format(replicas))
    summaries = []
    for p in p_grid:
        logger.info("Sweep point p=%g (%d replicas)", p, replicas)
        try:
            outputs = run_replicas(base_config.with_p(float(p)), replicas, processes)
        except Exception as err:
            done = p_grid[:len(summaries)]
            partial = CostCurves(done, summaries)
            raise SweepError("Sweep failed at p={}: {}".format(p, err), partial) from err
        summary = mean_costs(outputs)
        summaries.append(summary)
        if on_point is not None:
            on_point(float(p), outputs, summary)
    return fit_curves(p_grid, summaries, degree)


def crossing_roots(curves, tol=ROOT_TOL):
    """Every root in (0, 1) of the fitted cost difference, inside the data span."""
    if not curves.fitted:
        raise ValueError("Both cost curves must be fitted before looking for a crossing.")
    lo, hi = curves.span()
    if hi <= lo:
        return []
    grid = np.linspace(lo, hi, SCAN_POINTS)
    values = curves.difference(grid)
    roots = []
    for i in range(len(grid) - 1):
        a, b = values[i], values[i + 1]
        if a == 0.0:
            roots.append(float(grid[i]))
        elif a * b < 0:
            roots.append(float(bisect(curves.difference, grid[i], grid[i + 1], xtol=tol)))
    if values[-1] == 0.0:
        roots.append(float(grid[-1]))
    return [r for r in roots if 0.0 < r < 1.0]


def find_crossing(curves, tol=ROOT_TOL):
    """Smallest root in (0, 1) of the fitted greedy minus default cost, or None."""
    roots = crossing_roots(curves, tol)
    if len(roots) > 1:
        logger.info("Cost curves cross %d times: %s", len(roots), ", ".join("{:.6f}".format(r) for r in roots))
    return roots[0] if roots else None


def raw_crossing(curves):
    """Piecewise-linear crossing of the measured means, or None."""
    points = [(x, s.mean_s1 - s.mean_s0) for x, s in zip(curves.p, curves.summaries)
              if s.mean_s0 is not None and s.mean_s1 is not None]
    for (x0, d0), (x1, d1) in zip(points, points[1:]):
        if d0 == 0.0 and 0.0 < x0 < 1.0:
            return float(x0)
        if d0 * d1 < 0:
            return float(x0 - d0 * (x1 - x0) / (d1 - d0))
    if points and points[-1][1] == 0.0 and 0.0 < points[-1][0] < 1.0:
        return float(points[-1][0])
    return None


@dataclass(frozen=True)
class StabilityResult:
    """Deviation test at a crossing.

    Attributes
    ----------
    stable : bool
        The cost difference increases through the crossing.
    slope : float
        Derivative of the fitted greedy minus default cost at p_bar.
    p_minus, p_plus : float
        Deviation points p_bar -/+ gamma/N, clamped to [0, 1].
    cost_bar : float
        Fitted default cost at p_bar.
    s1_plus : float
        Greedy cost paid by a node switching to greedy (at p_plus).
    s0_minus : float
        Default cost paid by a node switching to default (at p_minus).
    clamped : bool
        A deviation point was moved back into [0, 1].
    degenerate : bool
        The difference is flat at the crossing.
    """
    stable: bool
    slope: float
    p_minus: float
    p_plus: float
    cost_bar: float
    s1_plus: float
    s0_minus: float
    clamped: bool = False
    degenerate: bool = False

    @property
    def deviations_raise_cost(self):
        """Both unilateral switches cost the switcher more than staying."""
        return self.s1_plus > self.cost_bar and self.s0_minus > self.cost_bar


def classify_stability(curves, p_bar, gamma, n_nodes):
    """Stability of the crossing `p_bar` against one node switching strategy."""
    if not 0.0 < p_bar < 1.0:
        raise ValueError("p_bar must be interior, got {}.".format(p_bar))
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1], got {}.".format(gamma))
    if n_nodes < 1:
        raise ValueError("N must be >= 1, got {}.".format(n_nodes))
    step = gamma / n_nodes
    p_minus, p_plus = p_bar - step, p_bar + step
    clamped = p_minus < 0.0 or p_plus > 1.0
    if clamped:
        logger.warning("Deviation points around p_bar=%g clamped to [0, 1]", p_bar)
        p_minus, p_plus = max(p_minus, 0.0), min(p_plus, 1.0)
    slope = float(curves.fit_s1.deriv()(p_bar) - curves.fit_s0.deriv()(p_bar))
    degenerate = abs(slope) < FLAT_SLOPE
    return StabilityResult(
        stable=slope > 0 and not degenerate,
        slope=slope,
        p_minus=p_minus,
        p_plus=p_plus,
        cost_bar=float(curves.fit_s0(p_bar)),
        s1_plus=float(curves.fit_s1(p_plus)),
        s0_minus=float(curves.fit_s0(p_minus)),
        clamped=clamped,
        degenerate=degenerate,
    )


def theta0(p_bar, gamma, regime=INTERIOR):
    """Equilibrium greedy mixture of the selfish nodes, min(p_bar/gamma, 1)."""
    if not 0.0 < gamma <= 1.0:
        raise ValueError("gamma must lie in (0, 1], got {}.".format(gamma))
    if p_bar is None:
        if regime == ALL_GREEDY:
            return 1.0
        elif regime == ALL_DEFAULT:
            return 0.0
        raise ValueError("An interior regime needs p_bar.")
    return min(p_bar / gamma, 1.0)


@dataclass
class EquilibriumReport:
    """Outcome of the equilibrium analysis.

    Attributes
    ----------
    p_bar : float or None
        Smallest fitted crossing in (0, 1).
    regime : str
        ``interior``, ``all_greedy`` or ``all_default``.
    stable : bool
        Stability of the crossing; False without one.
    theta0 : dict(float, float)
        Equilibrium mixture for every requested gamma.
    roots : list[float]
        All fitted crossings.
    raw_p_bar : float or None
        Crossing of the measured means.
    stability : dict(float, StabilityResult)
        Deviation test for every gamma.
    gains, relative_increase : list
        Absolute greedy gain and relative default-cost increase per grid point.
    """
    p_bar: Optional[float]
    regime: str
    stable: bool
    theta0: dict
    roots: list = field(default_factory=list)
    raw_p_bar: Optional[float] = None
    stability: dict = field(default_factory=dict)
    gains: list = field(default_factory=list)
    relative_increase: list = field(default_factory=list)

    def print_summary(self):
        line = '='*50
        print(line)
        print("{:<50}".format("Equilibrium Results"))
        print(line)
        print("{:<30} {:>16}".format("regime", self.regime))
        if self.p_bar is not None:
            print("{:<30} {:>16.12f}".format("p_bar", self.p_bar))
        if self.raw_p_bar is not None:
            print("{:<30} {:>16.12f}".format("raw p_bar", self.raw_p_bar))
        print("{:<30} {:>16}".format("stable", str(self.stable)))
        for gamma, value in self.theta0.items():
            print("{:<30} {:>16.12f}".format("theta0 (gamma={:g})".format(gamma), value))


def _relative_series(curves):
    baseline = None
    if len(curves.p) and curves.p[0] == 0.0:
        baseline = curves.summaries[0].mean_s0
    series = []
    for summary in curves.summaries:
        if baseline is None or baseline <= 0 or summary.mean_s0 is None:
            series.append(None)
        else:
            series.append(relative_cost_increase(summary.mean_s0, baseline))
    return series


def analyse(curves, gammas=(1.0,), n_nodes=100):
    """Locate the equilibrium of fitted curves and derive theta0 per gamma."""
    roots = crossing_roots(curves)
    p_bar = roots[0] if roots else None
    if len(roots) > 1:
        logger.info("Cost curves cross %d times; keeping p_bar=%.6f", len(roots), p_bar)
    lo, _ = curves.span()
    stability = {}
    if p_bar is not None:
        stability = {gamma: classify_stability(curves, p_bar, gamma, n_nodes) for gamma in gammas}
        stable = next(iter(stability.values())).stable if stability else False
    else:
        stable = False
    if p_bar is not None and stable:
        regime = INTERIOR
    elif curves.difference(lo if p_bar is None else 0.5 * (lo + p_bar)) < 0:
        # greedy cheaper below the crossing (or everywhere)
        regime = ALL_GREEDY
    else:
        regime = ALL_DEFAULT
    thetas = {gamma: theta0(p_bar if regime == INTERIOR else None, gamma, regime) for gamma in gammas}
    return EquilibriumReport(
        p_bar=p_bar,
        regime=regime,
        stable=stable,
        theta0=thetas,
        roots=roots,
        raw_p_bar=raw_crossing(curves),
        stability=stability,
        gains=[absolute_gain(s) for s in curves.summaries],
        relative_increase=_relative_series(curves),
    )


def equilibrium_frame(curves, report):
    """equilibrium.csv table: one row per grid point, report values repeated."""
    frame = pd.DataFrame({
        "p": curves.p,
        "mean_S0": [np.nan if m is None else m for m in curves.mean_s0],
        "mean_S1": [np.nan if m is None else m for m in curves.mean_s1],
        "fit_S0": curves.fit_s0(curves.p) if curves.fit_s0 is not None else np.nan,
        "fit_S1": curves.fit_s1(curves.p) if curves.fit_s1 is not None else np.nan,
        "gain": [np.nan if g is None else g for g in report.gains],
        "relative_increase": [np.nan if r is None else r for r in report.relative_increase],
    })
    frame["p_bar"] = np.nan if report.p_bar is None else report.p_bar
    frame["raw_p_bar"] = np.nan if report.raw_p_bar is None else report.raw_p_bar
    frame["regime"] = report.regime
    frame["stable"] = report.stable
    for gamma, value in report.theta0.items():
        frame["theta0_{:g}".format(gamma)] = value
    return frame
