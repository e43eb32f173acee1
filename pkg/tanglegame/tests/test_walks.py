"""
Test the tip-selecting walk.
"""
import math

import pytest
import numpy as np

from tanglegame.tangle.core import GENESIS, TangleError, new_tangle
from tanglegame.walks.walk import WalkError, WalkParams, TransitionTable
from tanglegame.walks.walk import transition_probs, sample_walk, sample_walks, deterministic_walk
from tanglegame.testdata.cache import build, chain, eight_vertex_dag, open_diamond, random_tangle
from tanglegame.testdata.cache import transition_example


def full(tangle):
    return tangle.snapshot(tangle.last_timestamp, 0.0)


def grouped(targets, probs):
    out = {}
    for t, p in zip(targets, probs):
        out[int(t)] = out.get(int(t), 0.0) + p
    return out


def heavy_light():
    """Genesis approvers 1 (weight 5) and 2 (weight 3); tips 6 and 8."""
    return build([(0, 0), (0, 0), (1, 1), (3, 3), (4, 4), (5, 5), (2, 2), (7, 7)])


def test_walk_params():
    with pytest.raises(ValueError):
        WalkParams(q=0.5)
    with pytest.raises(ValueError):
        WalkParams(alpha=-1.0)
    with pytest.raises(ValueError):
        WalkParams(alpha=math.nan)
    with pytest.raises(ValueError):
        WalkParams(start="tips")
    with pytest.raises(ValueError):
        WalkParams(max_steps=0)
    params = WalkParams.infinite()
    assert params.is_infinite
    assert params.q == 0.0
    assert not WalkParams().is_infinite


def test_transition_worked_example():
    """Weight gaps 1 and 2 with alpha = ln 2 and q = 1/3."""
    view = full(transition_example())
    targets, probs = transition_probs(view, 1, WalkParams(alpha=math.log(2), q=1.0 / 3.0))
    assert list(targets) == [2, 3, 0, 0]
    np.testing.assert_allclose(probs, [4 / 9, 2 / 9, 1 / 6, 1 / 6], atol=1e-15)
    assert abs(probs[2:].sum() - 1.0 / 3.0) < 1e-15


def test_transition_genesis_no_backtrack():
    view = full(open_diamond())
    for alpha in (0.0, 0.5, 3.0):
        targets, probs = transition_probs(view, GENESIS, WalkParams(alpha=alpha, q=1.0 / 3.0))
        assert grouped(targets, probs) == pytest.approx({1: 0.5, 2: 0.5}, abs=1e-15)


def test_transition_uniform_at_zero_alpha():
    view = full(transition_example())
    targets, probs = transition_probs(view, 1, WalkParams(alpha=0.0, q=0.25))
    np.testing.assert_allclose(probs[:2], [0.375, 0.375], atol=1e-15)


def test_transition_errors():
    view = full(chain())
    with pytest.raises(WalkError):
        transition_probs(view, 2, WalkParams())
    with pytest.raises(TangleError):
        transition_probs(view, 5, WalkParams())


def test_transition_sums_to_one():
    for tangle in (eight_vertex_dag(), random_tangle(80, seed=1)):
        view = full(tangle)
        for params in (WalkParams(0.0, 0.0), WalkParams(0.5, 1.0 / 3.0), WalkParams(2.0, 0.2),
                       WalkParams.infinite(0.1)):
            for x in range(view.size):
                if view.is_tip(x):
                    continue
                targets, probs = transition_probs(view, x, params)
                assert abs(probs.sum() - 1.0) < 1e-12
                assert np.all(probs >= 0)
                assert all(view.contains(t) for t in targets)


def test_transition_monotone_in_alpha():
    view = full(transition_example())
    heavy = [transition_probs(view, 1, WalkParams(alpha=a, q=1.0 / 3.0))[1][0] for a in (0.0, 0.1, 0.5, 1.0, 5.0)]
    assert all(b >= a for a, b in zip(heavy, heavy[1:]))


def test_transition_table_matches_rows():
    view = full(random_tangle(60, seed=2))
    for params in (WalkParams(0.3, 1.0 / 3.0), WalkParams(0.0, 0.0), WalkParams.infinite(0.2)):
        table = TransitionTable(view, params)
        for x in range(view.size):
            lo, hi = table.indptr[x], table.indptr[x + 1]
            if view.is_tip(x):
                assert lo == hi
                continue
            expected = grouped(*transition_probs(view, x, params))
            assert grouped(table.targets[lo:hi], table.probs[lo:hi]) == pytest.approx(expected, abs=1e-12)


def test_sample_walk_simple():
    rng = np.random.default_rng(0)
    params = WalkParams(alpha=0.1, q=1.0 / 3.0)
    assert sample_walk(full(new_tangle()), params, rng) == GENESIS
    view = full(chain())
    assert {sample_walk(view, params, rng) for _ in range(200)} == {2}
    assert set(sample_walks(view, params, 500, rng)) == {2}


def test_sample_walk_symmetric():
    """Two equal tips: frequencies 1/2 within 4 sigma."""
    rng = np.random.default_rng(1)
    view = full(open_diamond())
    n = 100000
    tips = sample_walks(view, WalkParams(alpha=1.0, q=0.0), n, rng)
    assert abs(np.mean(tips == 1) - 0.5) < 4 * math.sqrt(0.25 / n)
    scalar = [sample_walk(view, WalkParams(alpha=1.0, q=0.0), rng) for _ in range(10000)]
    assert abs(np.mean(np.array(scalar) == 1) - 0.5) < 4 * math.sqrt(0.25 / 10000)


def test_walk_step_cap():
    rng = np.random.default_rng(2)
    view = full(chain())
    params = WalkParams(alpha=0.0, q=1.0 / 3.0, max_steps=1)
    with pytest.raises(WalkError):
        sample_walk(view, params, rng)
    with pytest.raises(WalkError):
        sample_walks(view, params, 10, rng)
    with pytest.raises(WalkError):
        deterministic_walk(view, rng, max_steps=1)
    with pytest.raises(ValueError):
        sample_walks(view, params, 0, rng)


def test_deterministic_walk():
    rng = np.random.default_rng(3)
    assert deterministic_walk(full(chain()), rng) == 2
    view = full(heavy_light())
    assert view.cumulative_weight(1) == 5
    assert view.cumulative_weight(2) == 3
    assert {deterministic_walk(view, rng) for _ in range(100)} == {6}


def test_deterministic_walk_ties():
    rng = np.random.default_rng(4)
    view = full(open_diamond())
    n = 10000
    tips = np.array([deterministic_walk(view, rng) for _ in range(n)])
    assert abs(np.mean(tips == 1) - 0.5) < 4 * math.sqrt(0.25 / n)


def test_deterministic_walk_follows_heaviest():
    """Every step goes to an approver at least as heavy as its siblings."""
    view = full(random_tangle(100, seed=7))
    weights = view.weights
    tip = deterministic_walk(view, np.random.default_rng(5))
    assert view.is_tip(tip)
    reachable, frontier = set(), [GENESIS]
    while frontier:
        x = frontier.pop()
        if x in reachable:
            continue
        reachable.add(x)
        approvers = view.approvers(x)
        if approvers:
            top = max(weights[a] for a in approvers)
            frontier.extend(a for a in approvers if weights[a] == top)
    assert tip in reachable
