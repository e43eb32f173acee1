"""
Desk-scale experiments.

Each function runs one experiment family and returns its headline numbers;
the tests marked ``slow`` check their bounds and orderings.
"""

import logging
import math

import numpy as np

from tanglegame.analysis.equilibrium import analyse, sweep
from tanglegame.analysis.metrics import approval_cdf, little_check, mean_costs, relative_cost_increase
from tanglegame.simulation.config import SimConfig
from tanglegame.simulation.simulator import run_replicas

logger = logging.getLogger(__name__)

GRID = (0.0,) + tuple(float(p) for p in np.linspace(0.02, 0.5, 10))
REGIMES = (0.01, 0.05, 0.5, 1.0)


def base_config(rate, alpha=0.01, **kwargs):
    """Baseline parameters: q=1/3, h=1, K=20, M0 growing with the rate."""
    m0 = 250 if rate <= 25 else 500
    settings = dict(rate=rate, q=1.0 / 3.0, h=1.0, alpha=alpha, m0=m0, t_end=400.0, warmup=100.0, k_reattach=20.0)
    settings.update(kwargs)
    return SimConfig(**settings)


def approval_within(rate, t=5.0, replicas=5, processes=1, **kwargs):
    """Fraction of non-reattached transactions approved within `t` seconds."""
    outputs = run_replicas(base_config(rate, **kwargs), replicas, processes)
    return float(approval_cdf(outputs, [t])[0])


def equilibrium(rate, alpha=0.01, grid=GRID, replicas=5, processes=1, gammas=(1.0,), **kwargs):
    """Cost curves and equilibrium report at one rate and bias."""
    curves = sweep(base_config(rate, alpha, **kwargs), grid, replicas, processes)
    return curves, analyse(curves, gammas)


def equilibrium_direction(replicas=5, processes=1, **kwargs):
    """Crossings at rates 25 and 50; the faster network should cross earlier."""
    p_bars = {}
    for rate in (25, 50):
        _, report = equilibrium(rate, replicas=replicas, processes=processes, **kwargs)
        p_bars[rate] = report.p_bar
        logger.info("lambda=%d: p_bar=%s (%s)", rate, report.p_bar, report.regime)
    return p_bars


def high_alpha_costs(rate=25, alpha=0.5, grid=GRID, replicas=5, processes=1, **kwargs):
    """Greedy gain and harm to default issuers in the strongly biased regime.

    Returns
    -------
    gains : list[float or None]
        mean_S0 - mean_S1 per grid point.
    increases : list[float or None]
        Relative default-cost increase per grid point.
    """
    config = base_config(rate, alpha, **kwargs)
    summaries = [mean_costs(run_replicas(config.with_p(p), replicas, processes)) for p in grid]
    baseline = summaries[0]
    gains, increases = [], []
    for summary in summaries:
        gains.append(None if summary.mean_s1 is None else summary.mean_s0 - summary.mean_s1)
        increases.append(relative_cost_increase(summary, baseline))
    return gains, increases


def small_p_costs(rate=25, p=0.1, alpha=0.01, replicas=5, processes=1, **kwargs):
    """Mean costs of both strategies with few greedy issuers, without reattachment."""
    config = base_config(rate, alpha, p_greedy=p, k_reattach=math.inf, **kwargs)
    return mean_costs(run_replicas(config, replicas, processes))


def alpha_regimes(rate=25, alphas=REGIMES, replicas=5, processes=1, **kwargs):
    """Equilibrium regime and p_bar for every walk bias."""
    results = {}
    for alpha in alphas:
        _, report = equilibrium(rate, alpha, replicas=replicas, processes=processes, **kwargs)
        results[alpha] = (report.regime, report.p_bar)
    return results


def little_ratio(rate=25, replicas=5, processes=1, **kwargs):
    """Observed over predicted mean unconfirmed count."""
    check = little_check(run_replicas(base_config(rate, **kwargs), replicas, processes))
    if math.isnan(check.ratio):
        logger.warning("Little check undefined: no confirmation at a first deadline")
    return check
