"""
Test attachment strategies.
"""
import logging
import math

import pytest
import numpy as np

from tanglegame.tangle.core import GENESIS, new_tangle
from tanglegame.walks.walk import WalkParams
from tanglegame.strategies.strategy import TipSelector
from tanglegame.strategies.tip_selection import DEFAULT, GREEDY, TipPair, DefaultSelector, GreedySelector
from tanglegame.strategies.tip_selection import MixedSelector, make_selector, choose_attachment, conflict_free
from tanglegame.strategies.tip_selection import NoConflictFreeTip, admissible_tips
from tanglegame.strategies.tip_selection import select_default, select_greedy, select_mixed
from tanglegame.testdata.cache import build, open_diamond, random_tangle, reissue_tangle, three_tips


def full(tangle):
    return tangle.snapshot(tangle.last_timestamp, 0.0)


def test_selector_base():
    """Test base TipSelector class."""
    with pytest.raises(TypeError):
        TipSelector("params")
    selector = TipSelector(WalkParams())
    with pytest.raises(NotImplementedError):
        selector.select(full(new_tangle()), np.random.default_rng(0))
    assert selector.selections == 0
    assert selector.label is None


def test_genesis_only_pairs():
    view = full(new_tangle())
    rng = np.random.default_rng(0)
    assert select_default(view, WalkParams(), rng).as_tuple() == (GENESIS, GENESIS)
    assert select_greedy(view, WalkParams(), rng).as_tuple() == (GENESIS, GENESIS)
    assert select_default(view, WalkParams(), rng).is_duplicate


def test_default_redraws():
    """Two symmetric tips: a duplicate survives ten re-draws with probability 2**-11."""
    view = full(open_diamond())
    rng = np.random.default_rng(1)
    pairs = [select_default(view, WalkParams(alpha=0.0, q=0.0), rng) for _ in range(1000)]
    assert sum(p.is_duplicate for p in pairs) <= 5
    assert all(p.label == DEFAULT for p in pairs)
    assert {p.first for p in pairs} == {1, 2}


def test_greedy_top_two():
    view = full(three_tips())
    rng = np.random.default_rng(2)
    pairs = [select_greedy(view, WalkParams(alpha=0.0, q=0.0), rng) for _ in range(200)]
    assert all(p.first == 5 for p in pairs)
    assert {p.second for p in pairs} == {3, 4}
    assert all(p.label == GREEDY for p in pairs)


def test_greedy_ties_uniform():
    view = full(open_diamond())
    rng = np.random.default_rng(3)
    n = 4000
    firsts = np.array([select_greedy(view, WalkParams(alpha=0.2), rng).first for _ in range(n)])
    assert abs(np.mean(firsts == 1) - 0.5) < 4 * math.sqrt(0.25 / n)


def test_greedy_deterministic_without_ties():
    view = full(three_tips())
    params = WalkParams(alpha=0.5, q=1.0 / 3.0)
    pairs = {select_greedy(view, params, np.random.default_rng(s)).as_tuple() for s in range(5)}
    assert len(pairs) == 1


def test_mixed():
    view = full(open_diamond())
    rng = np.random.default_rng(4)
    params = WalkParams(alpha=0.1)
    assert all(select_mixed(view, 0.0, params, rng).label == DEFAULT for _ in range(50))
    assert all(select_mixed(view, 1.0, params, rng).label == GREEDY for _ in range(50))
    with pytest.raises(ValueError):
        select_mixed(view, 1.5, params, rng)
    selector = MixedSelector(params, 0.5)
    n = 10000
    for _ in range(n):
        selector(view, rng)
    assert selector.selections == n
    assert abs(selector.greedy_draws / n - 0.5) < 4 * math.sqrt(0.25 / n)


def test_make_selector():
    params = WalkParams()
    assert isinstance(make_selector("default", params), DefaultSelector)
    assert isinstance(make_selector("S1", params), GreedySelector)
    assert make_selector("mixed", params, theta=0.3).theta == 0.3
    with pytest.raises(KeyError):
        make_selector("mixed", params)
    with pytest.raises(ValueError):
        make_selector("selfish", params)
    with pytest.raises(ValueError):
        DefaultSelector(params, redraws=-1)
    with pytest.raises(ValueError):
        GreedySelector(params, mc_samples=0)
    with pytest.raises(ValueError):
        MixedSelector(params, -0.1)


def test_selected_tips_are_view_tips():
    tangle = random_tangle(80, seed=9)
    view = tangle.snapshot(60.0, 0.0)
    size = tangle.size
    rng = np.random.default_rng(5)
    for kind in ("default", "greedy"):
        selector = make_selector(kind, WalkParams(alpha=0.2))
        for _ in range(20):
            pair = selector(view, rng)
            assert view.is_tip(pair.first) and view.is_tip(pair.second)
    assert tangle.size == size


def test_conflict_free():
    tangle = reissue_tangle()
    view = full(tangle)
    assert conflict_free(full(random_tangle(30)), TipPair(29, 28))
    assert conflict_free(view, TipPair(6, 9))
    assert conflict_free(view, TipPair(8, 9))
    assert not conflict_free(view, TipPair(6, 8))
    assert not conflict_free(view, TipPair(6, 8), logical_index=tangle.logical_index)
    assert conflict_free(view, TipPair(9, 9), issuing=2)
    assert not conflict_free(view, TipPair(6, 6), issuing=2)
    assert not conflict_free(view, TipPair(8, 9), issuing=2)


def test_choose_attachment():
    view = full(reissue_tangle())
    rng = np.random.default_rng(6)
    params = WalkParams(alpha=0.0)
    default = DefaultSelector(params)
    greedy = GreedySelector(params)
    for selector in (default, greedy):
        for _ in range(30):
            pair, rejected = choose_attachment(selector, default, view, rng, conflict_redraws=2)
            assert conflict_free(view, pair)
            assert rejected >= 0
            pair, _ = choose_attachment(selector, default, view, rng, conflict_redraws=0, issuing=2)
            assert pair.as_tuple() == (9, 9)


def test_admissible_tips():
    view = full(reissue_tangle())
    assert admissible_tips(view, 2).tolist() == [9]
    assert admissible_tips(view, 99).tolist() == view.tips.tolist()


def test_reissue_without_admissible_tip():
    """Every tip of a chain references its first transaction."""
    view = full(build([(0, 0), (1, 1), (2, 2)]))
    rng = np.random.default_rng(7)
    default = DefaultSelector(WalkParams(alpha=0.0))
    assert admissible_tips(view, 1).tolist() == []
    with pytest.raises(NoConflictFreeTip):
        choose_attachment(default, default, view, rng, issuing=1)
    pair, rejected = choose_attachment(default, default, view, rng)
    assert pair.as_tuple() == (3, 3)
    assert rejected == 0


def test_greedy_sampling_warned_once(caplog):
    view = full(random_tangle(40, seed=6))
    selector = GreedySelector(WalkParams(), solver_cap=10, mc_samples=50)
    rng = np.random.default_rng(3)
    with caplog.at_level(logging.WARNING, logger="tanglegame.strategies.tip_selection"):
        for _ in range(3):
            pair = selector.select(view, rng)
            assert view.is_tip(pair.first) and view.is_tip(pair.second)
    warnings = [r for r in caplog.records if "Monte-Carlo" in r.getMessage()]
    assert len(warnings) == 1
    assert selector.sampled
    assert not GreedySelector(WalkParams()).sampled
