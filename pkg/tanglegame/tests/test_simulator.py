"""
Test the event loop.
"""
import math

import pytest
import numpy as np
import pandas as pd

from tanglegame.simulation.config import SimConfig
from tanglegame.simulation.simulator import SimulationError, TangleSimulator, TxRecord
from tanglegame.simulation.simulator import confirmation_confidence, replica_seeds, run, run_replicas
from tanglegame.strategies.tip_selection import DEFAULT, GREEDY, NoConflictFreeTip
from tanglegame.tangle.core import GENESIS
from tanglegame.testdata.cache import build


def small(**kwargs):
    settings = dict(rate=5.0, h=1.0, alpha=0.05, m0=10, t_end=20.0, k_reattach=5.0, seed=11)
    settings.update(kwargs)
    return SimConfig(**settings)


def test_config_validation():
    with pytest.raises(ValueError):
        SimConfig(rate=0.0)
    with pytest.raises(ValueError):
        SimConfig(rate=1.0, q=0.5)
    with pytest.raises(ValueError):
        SimConfig(rate=1.0, p_greedy=0.6, gamma=0.5)
    with pytest.raises(ValueError):
        SimConfig(rate=1.0, p_greedy=0.2, gamma=0.5, theta=0.5)
    with pytest.raises(ValueError):
        SimConfig(rate=1.0, warmup=500.0, t_end=400.0)
    with pytest.raises(ValueError):
        SimConfig(rate=1.0, m0=0)
    config = SimConfig(rate=1.0, p_greedy=0.2, gamma=0.5)
    assert config.theta == pytest.approx(0.4)
    assert config.with_p(0.1).theta == pytest.approx(0.2)
    derived = SimConfig(rate=1.0, gamma=0.5, theta=0.4)
    assert derived.p_greedy == pytest.approx(0.2)
    assert derived.with_p(0.1).theta == pytest.approx(0.2)
    assert SimConfig(rate=1.0).p_greedy == 0.0
    assert SimConfig(rate=1.0).theta == 0.0
    with pytest.raises(ValueError):
        SimConfig(rate=1.0, theta=1.5)
    assert not SimConfig(rate=1.0, k_reattach=math.inf).reattachment
    assert SimConfig(rate=1.0, alpha=math.inf).walk_params.is_infinite


def test_record_properties():
    record = TxRecord(3, DEFAULT, [3, 9], [1.0, 21.0], first_approval_time=2.5,
                      probe_outcomes=np.array([True, False, True]))
    assert record.reissues == 1
    assert record.issue_time == 1.0
    assert record.w == 2
    assert record.n_probes == 3
    assert record.approval_delay == 1.5
    assert TxRecord(1, GREEDY, [1], [0.5]).approval_delay is None


def test_delay_hides_everything():
    output = run(small(rate=25.0, t_end=1.0, h=1.0))
    tangle = output.tangle
    assert tangle.size == len(output.records) + 1
    assert all(v.approves == (GENESIS, GENESIS) for v in tangle.vertices[1:])


def test_no_greedy_at_zero_p():
    output = run(small(p_greedy=0.0))
    assert all(r.strategy == DEFAULT for r in output.records)
    output = run(small(p_greedy=1.0))
    assert all(r.strategy == GREEDY for r in output.records)


def test_run_invariants():
    config = small(p_greedy=0.3, t_end=30.0)
    output = run(config)
    tangle = output.tangle
    arrivals = len(output.records)
    assert arrivals > 0
    for row, record in enumerate(output.records):
        assert record.n_probes == min(config.m0, arrivals - row - 1)
        assert 0 <= record.w <= config.m0
        assert record.logical_id == record.vertex_ids[0]
        assert tangle.logical_index[record.logical_id] == record.vertex_ids
    for vertex in tangle.vertices[1:]:
        cutoff = vertex.timestamp - config.h
        for parent in vertex.approves:
            assert parent == GENESIS or tangle.vertices[parent].timestamp <= cutoff
            earlier = [a for a in tangle.approvers[parent] if a < vertex.id]
            assert all(tangle.vertices[a].timestamp > cutoff for a in earlier)
    # no attached cone holds two issues of one transaction
    for vid in range(1, tangle.size):
        cone = tangle.unpacked_past(vid)
        lids = [tangle.vertices[x].logical_id for x in np.flatnonzero(cone)] + [tangle.vertices[vid].logical_id]
        lids = [lid for lid in lids if lid >= 0]
        assert len(lids) == len(set(lids))
    assert output.tip_series.shape == (arrivals, 2)
    assert np.all(np.diff(output.tip_series[:, 0]) > 0)
    assert set(output.rejected_draws) == {DEFAULT, GREEDY}


def test_determinism():
    first = run(small(p_greedy=0.5))
    second = run(small(p_greedy=0.5))
    pd.testing.assert_frame_equal(first.transactions_frame(), second.transactions_frame())
    pd.testing.assert_frame_equal(first.tips_frame(), second.tips_frame())
    pd.testing.assert_frame_equal(first.unconfirmed_frame(), second.unconfirmed_frame())
    other = run(small(p_greedy=0.5, seed=12))
    assert not first.tips_frame().equals(other.tips_frame())


def test_frames():
    config = small()
    output = run(config)
    frame = output.transactions_frame()
    assert list(frame.columns) == ["logical_id", "strategy", "issue_time", "first_approval_time", "W", "reissues"]
    assert str(frame["W"].dtype) == "Int64"
    assert frame["W"].isna().sum() == min(config.m0, len(frame))
    assert list(output.tips_frame().columns) == ["time", "L"]
    assert list(output.unconfirmed_frame().columns) == ["time", "count"]
    eligible = output.eligible_records()
    assert all(r.n_probes == config.m0 and r.issue_time >= config.warmup for r in eligible)


def test_print_summary(capsys):
    run(small()).print_summary()
    captured = capsys.readouterr()
    assert "Tangle Simulation Results" in captured.out
    assert "mean cost S0" in captured.out


def test_poisson_arrivals():
    """Arrival counts have Poisson mean and variance."""
    config = small(rate=10.0, t_end=20.0, k_reattach=math.inf, m0=2)
    counts = np.array([len(o.records) for o in run_replicas(config, 30)])
    mean = config.rate * config.t_end
    assert abs(counts.mean() - mean) < 4 * math.sqrt(mean / len(counts))
    assert abs(counts.var(ddof=1) - mean) < 4 * mean * math.sqrt(2.0 / (len(counts) - 1))


def test_replicas():
    seeds = replica_seeds(7, 3)
    assert len(set(seeds)) == 3
    assert seeds == replica_seeds(7, 3)
    outputs = run_replicas(small(seed=7), 3)
    assert [o.seed for o in outputs] == seeds
    assert all(o.tangle is None for o in outputs)
    with pytest.raises(ValueError):
        run_replicas(small(), 0)


def reattach_setup():
    """Tip 1 abandoned next to the heavy chain 2 <- 3 <- 4 <- 5."""
    config = small(rate=1.0, t_end=100.0, k_reattach=20.0)
    simulator = TangleSimulator(config)
    for t, parents in enumerate([(0, 0), (0, 0), (2, 2), (3, 3), (4, 4)], start=1):
        vid = simulator.tangle.attach(parents, float(t))
        simulator.open_record(vid, DEFAULT, float(t))
    return simulator


def test_reattach_check():
    simulator = reattach_setup()
    assert simulator.reattach_check(20.5) == []
    reissued = simulator.reattach_check(26.0)
    assert len(reissued) == 1
    records = simulator.records
    assert records[0].vertex_ids == [1, reissued[0]]
    assert records[0].logical_id == 1
    assert simulator.tangle.vertices[reissued[0]].logical_id == 1
    assert simulator.tangle.vertices[reissued[0]].reissue_index == 1
    assert not simulator.tangle.references(reissued[0], 1)
    assert all(r.confirmed for r in records[1:])
    assert not records[0].confirmed
    assert all(r.checks == 1 for r in records)


def test_reattach_confirms_any_issue():
    """The original issue counts once the heavy chain absorbs it."""
    simulator = reattach_setup()
    reissued = simulator.reattach_check(26.0)
    assert len(reissued) == 1
    tangle = simulator.tangle
    for t, parents in [(27.0, (1, 5)), (28.0, (7, 7)), (29.0, (8, 8))]:
        tangle.attach(parents, t)
    assert tangle.references(9, 1)
    assert not tangle.references(9, reissued[0])
    assert simulator.reattach_check(30.0) == []
    record = simulator.records[0]
    assert record.confirmed
    assert record.checks == 2
    assert record.vertex_ids == [1, reissued[0]]


def test_reissue_deferred(monkeypatch):
    def refuse(*args, **kwargs):
        raise NoConflictFreeTip("no admissible tip")

    simulator = reattach_setup()
    monkeypatch.setattr("tanglegame.simulation.simulator.choose_attachment", refuse)
    assert simulator.reattach_check(26.0) == []
    record = simulator.records[0]
    assert not record.confirmed
    assert record.deferrals == 1
    assert record.vertex_ids == [1]
    assert simulator._deadlines[-1] == (46.0, 0)
    assert simulator.tangle.size == 6


def test_repeated_reissues_run_through():
    """Transactions reissued more than once no longer abort the run."""
    config = small(t_end=40.0)
    output = run(config)
    assert sum(r.reissues for r in output.records) >= 1
    tangle = output.tangle
    for record in output.records:
        assert tangle.logical_index[record.logical_id] == record.vertex_ids
        for index in range(1, len(record.vertex_ids)):
            later = record.vertex_ids[index]
            assert not tangle.reference_mask(later, record.vertex_ids[:index]).any()


@pytest.mark.slow
@pytest.mark.parametrize("seed", [1, 2, 3])
def test_long_run_with_reattachment(seed):
    config = SimConfig(rate=25.0, alpha=0.01, p_greedy=0.2, m0=250, k_reattach=20.0, t_end=120.0, seed=seed)
    output = run(config, keep_tangle=False)
    assert output.records[-1].issue_time > 5 * config.k_reattach
    assert any(r.checks >= 2 for r in output.records)
    assert output.unconfirmed_series[-1, 1] < len(output.records)


def test_reattach_nothing_abandoned():
    config = small(rate=1.0, t_end=100.0, k_reattach=20.0)
    simulator = TangleSimulator(config)
    for t, parents in enumerate([(0, 0), (1, 1), (2, 2)], start=1):
        vid = simulator.tangle.attach(parents, float(t))
        simulator.open_record(vid, DEFAULT, float(t))
    assert simulator.reattach_check(30.0) == []
    assert all(r.confirmed for r in simulator.records)


def test_confirmation_confidence():
    tangle = build([(0, 0), (0, 0), (1, 1), (3, 3), (4, 4), (5, 5), (2, 2), (7, 7)])
    view = tangle.snapshot(tangle.last_timestamp, 0.0)
    rng = np.random.default_rng(0)
    assert confirmation_confidence(view, GENESIS, 20, rng) == 1.0
    assert confirmation_confidence(view, 8, 20, rng) == 0.0
    assert confirmation_confidence(view, 4, 20, rng) == 1.0
    with pytest.raises(ValueError):
        confirmation_confidence(view, 4, 0, rng)


def test_simulation_error():
    with pytest.raises(SimulationError):
        run(small(rate=20.0, h=0.0, t_end=10.0, max_walk_steps=1))
    with pytest.raises(TypeError):
        TangleSimulator({"rate": 1.0})
