"""
Continuous-time tangle simulation.

Transactions arrive as a Poisson process. Each arrival sees the tangle
delayed by h, is labelled greedy or default, attaches to a conflict-free
tip pair and triggers one probe walk that updates the cost of every
transaction still inside its probe horizon. Transactions left unconfirmed
by the max-weight walk after K seconds are reissued.
"""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from multiprocessing import Pool
from typing import Optional

import numpy as np
import pandas as pd

from tanglegame.simulation.config import SimConfig
from tanglegame.strategies.tip_selection import DEFAULT, GREEDY, DefaultSelector, GreedySelector, NoConflictFreeTip
from tanglegame.strategies.tip_selection import choose_attachment
from tanglegame.tangle.core import new_tangle
from tanglegame.walks.walk import deterministic_walk, sample_walk

logger = logging.getLogger(__name__)

LABELS = (DEFAULT, GREEDY)


class SimulationError(RuntimeError):
    """A walk or solver failure inside the event loop."""


@dataclass
class TxRecord:
    """Bookkeeping of one logical transaction and all of its issues.

    Attributes
    ----------
    logical_id : int
        Vertex id of the first issue.
    strategy : str
        ``S0`` or ``S1``.
    vertex_ids, issue_times : list
        One entry per issue, oldest first.
    first_approval_time : float or None
        Earliest time any issue was approved.
    probe_outcomes : np.ndarray(dtype=bool)
        One entry per probe walk; True when the probe tip did not reference
        the transaction.
    confirmed : bool
        Some issue referenced by the max-weight walk at a deadline check.
    checks : int
        Number of deadline checks performed.
    deferrals : int
        Checks whose reissue found no admissible tip.
    """
    logical_id: int
    strategy: str
    vertex_ids: list
    issue_times: list
    first_approval_time: Optional[float] = None
    probe_outcomes: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=bool))
    confirmed: bool = False
    checks: int = 0
    deferrals: int = 0

    @property
    def reissues(self):
        return len(self.vertex_ids) - 1

    @property
    def issue_time(self):
        return self.issue_times[0]

    @property
    def n_probes(self):
        return len(self.probe_outcomes)

    @property
    def w(self):
        """Number of probes that missed the transaction."""
        return int(self.probe_outcomes.sum())

    @property
    def approval_delay(self):
        if self.first_approval_time is None:
            return None
        return self.first_approval_time - self.issue_time


@dataclass
class SimOutput:
    """Result of one simulation run.

    Attributes
    ----------
    config : SimConfig
        Configuration of the run.
    records : list[TxRecord]
        One record per arrival, in arrival order.
    tip_series : np.ndarray
        (n, 2) array of (arrival time, live tip count).
    unconfirmed_series : np.ndarray
        (n, 2) array of (arrival time, unconfirmed logical transactions).
    rejected_draws : dict(str, int)
        Tip pairs rejected as conflicting, per strategy label.
    seed : int
        Seed echo.
    tangle : Tangle or None
        The final tangle, unless dropped to save memory.
    """
    config: SimConfig
    records: list
    tip_series: np.ndarray
    unconfirmed_series: np.ndarray
    rejected_draws: dict
    seed: int
    tangle: object = None

    def eligible_records(self, label=None):
        """Post-warmup records with a complete probe horizon."""
        m0 = self.config.m0
        warmup = self.config.warmup
        return [r for r in self.records
                if r.issue_time >= warmup and r.n_probes == m0 and (label is None or r.strategy == label)]

    def transactions_frame(self):
        """transactions.csv table; W is missing until the probe horizon completes."""
        m0 = self.config.m0
        frame = pd.DataFrame({
            "logical_id": [r.logical_id for r in self.records],
            "strategy": [r.strategy for r in self.records],
            "issue_time": [r.issue_time for r in self.records],
            "first_approval_time": [np.nan if r.first_approval_time is None else r.first_approval_time
                                    for r in self.records],
            "W": pd.array([r.w if r.n_probes == m0 else None for r in self.records], dtype="Int64"),
            "reissues": [r.reissues for r in self.records],
        })
        return frame

    def tips_frame(self):
        return pd.DataFrame({"time": self.tip_series[:, 0], "L": self.tip_series[:, 1].astype(np.int64)})

    def unconfirmed_frame(self):
        return pd.DataFrame({"time": self.unconfirmed_series[:, 0],
                             "count": self.unconfirmed_series[:, 1].astype(np.int64)})

    def print_summary(self):
        """Print the main figures of the run."""
        line = '='*50
        print(line)
        print("{:<50}".format("Tangle Simulation Results"))
        print(line)
        print("{:<30} {:>16d}".format("seed", self.seed))
        print("{:<30} {:>16d}".format("transactions", len(self.records)))
        print("{:<30} {:>16d}".format("reissues", sum(r.reissues for r in self.records)))
        for label in LABELS:
            eligible = self.eligible_records(label)
            if eligible:
                cost = np.mean([r.w for r in eligible]) / self.config.m0
                print("{:<30} {:>16.12f}".format("mean cost " + label, cost))
            print("{:<30} {:>16d}".format("rejected draws " + label, self.rejected_draws.get(label, 0)))
        if len(self.tip_series):
            print("{:<30} {:>16.12f}".format("mean tips", self.tip_series[:, 1].mean()))


class TangleSimulator():
    """Event loop of one simulation run.

    Attributes
    ----------
    config : SimConfig
        Run parameters.
    tangle : Tangle
        The growing DAG.
    records : list[TxRecord]
        Records in arrival order; the record index equals the arrival index.
    selectors : dict(str, TipSelector)
        Attachment strategy of each label.

    Methods
    -------
    run(self)
        Simulate until T_end and return the SimOutput.
    reattach_check(self, now)
        Check due deadlines and reissue unconfirmed transactions.

    """
    def __init__(self, config, keep_tangle=True):
        if not isinstance(config, SimConfig):
            raise TypeError("config must be an instance of tanglegame.simulation.config.SimConfig")
        self.config = config
        self.keep_tangle = keep_tangle
        self.rng = np.random.default_rng(config.seed)
        self.params = config.walk_params
        self.tangle = new_tangle()
        self.selectors = {
            DEFAULT: DefaultSelector(self.params, config.redraws),
            GREEDY: GreedySelector(self.params, config.dense_cap, config.solver_cap, config.mc_samples),
        }
        self.records = []
        self.rejected_draws = {label: 0 for label in LABELS}
        self._record_of_vertex = {}
        self._first_vertex = np.zeros(1024, dtype=np.int64)
        self._outcomes = np.zeros((1024, config.m0), dtype=bool)
        self._reissued_rows = set()
        self._deadlines = deque()
        self._unconfirmed = 0
        self._tip_series = []
        self._unconfirmed_series = []
        self._now = 0.0

    def run(self):
        """Simulate arrivals until T_end."""
        config = self.config
        logger.info("Simulating lambda=%g, p_greedy=%g, alpha=%g up to T_end=%g (seed %d)",
                    config.rate, config.p_greedy, config.alpha, config.t_end, config.seed)
        now = 0.0
        while True:
            now += self.rng.exponential(1.0 / config.rate)
            if now >= config.t_end:
                break
            if now <= self.tangle.last_timestamp:
                now = float(np.nextafter(self.tangle.last_timestamp, math.inf))
            self._now = now
            try:
                self._arrival(now)
                if config.reattachment:
                    self.reattach_check(now)
            except RuntimeError as err:
                raise SimulationError("At t={:.6f}s with {} vertices: {}".format(now, self.tangle.size, err)) from err
        return self._finish()

    def _arrival(self, now):
        view = self.tangle.snapshot(now, self.config.h)
        label = GREEDY if self.rng.random() < self.config.p_greedy else DEFAULT
        vid = self._issue(view, label, now)
        row = self.open_record(vid, label, now)
        self._record_probe(view, row)
        self._tip_series.append((now, self.tangle.live_tip_count))
        self._unconfirmed_series.append((now, self._unconfirmed))

    def _select(self, view, label, issuing=None):
        pair, rejected = choose_attachment(self.selectors[label], self.selectors[DEFAULT], view, self.rng,
                                           self.config.conflict_redraws, issuing=issuing)
        self.rejected_draws[label] += rejected
        return pair

    def _issue(self, view, label, timestamp, record=None):
        if record is None:
            pair = self._select(view, label)
            vid = self.tangle.attach(pair.as_tuple(), timestamp, issuer=LABELS.index(label))
        else:
            pair = self._select(view, label, issuing=record.logical_id)
            vid = self.tangle.attach(pair.as_tuple(), timestamp, issuer=LABELS.index(label),
                                     logical_id=record.logical_id, reissue_index=record.reissues + 1)
        self._note_approvals(vid, pair, timestamp)
        return vid

    def _note_approvals(self, vid, pair, timestamp):
        approvers = self.tangle.first_approvers(vid + 1)
        for parent in set(pair.as_tuple()):
            if approvers[parent] != vid:
                continue
            row = self._record_of_vertex.get(parent)
            if row is not None and self.records[row].first_approval_time is None:
                self.records[row].first_approval_time = timestamp

    def open_record(self, vid, label, now):
        """Track vertex `vid` as a new logical transaction and return its record index."""
        row = len(self.records)
        if row >= len(self._first_vertex):
            self._first_vertex = np.concatenate([self._first_vertex, np.zeros_like(self._first_vertex)])
            self._outcomes = np.concatenate([self._outcomes, np.zeros_like(self._outcomes)])
        self.records.append(TxRecord(vid, label, [vid], [now]))
        self._first_vertex[row] = vid
        self._record_of_vertex[vid] = row
        self._unconfirmed += 1
        if self.config.reattachment:
            self._push_deadline(now + self.config.k_reattach, row)
        return row

    def _push_deadline(self, deadline, row):
        # the queue stays sorted
        if self._deadlines and self._deadlines[-1][0] > deadline:
            deadline = self._deadlines[-1][0]
        self._deadlines.append((deadline, row))

    def _record_probe(self, view, arrival):
        """Probe walk of arrival `arrival` against every record inside its horizon."""
        first = max(0, arrival - self.config.m0)
        if first == arrival:
            return
        tip = sample_walk(view, self.params, self.rng)
        rows = np.arange(first, arrival)
        referenced = self.tangle.reference_mask(tip, self._first_vertex[first:arrival])
        self._reissued_rows = {row for row in self._reissued_rows if row >= first}
        for row in self._reissued_rows:
            if not referenced[row - first]:
                referenced[row - first] = self.tangle.reference_mask(tip, self.records[row].vertex_ids).any()
        self._outcomes[rows, arrival - rows - 1] = ~referenced

    def reattach_check(self, now):
        """Check every deadline due by `now`.

        A transaction with any issue referenced by the tip of one max-weight
        walk on the delayed view is confirmed; otherwise it is reissued and
        gets a new deadline. A reissue with no admissible tip is deferred by
        another K seconds.

        Returns
        -------
        list[int]
            Ids of the vertices issued as reattachments.
        """
        if not self._deadlines or self._deadlines[0][0] > now:
            return []
        view = self.tangle.snapshot(now, self.config.h)
        tip = deterministic_walk(view, self.rng, self.params.max_steps)
        due = []
        while self._deadlines and self._deadlines[0][0] <= now:
            due.append(self._deadlines.popleft()[1])
        reissued = []
        for row in due:
            record = self.records[row]
            record.checks += 1
            if self.tangle.reference_mask(tip, record.vertex_ids).any():
                record.confirmed = True
                self._unconfirmed -= 1
                continue
            try:
                reissued.append(self._reissue(row, view))
            except NoConflictFreeTip as err:
                logger.debug("t=%.3f: reissue of %d deferred: %s", now, record.logical_id, err)
                record.deferrals += 1
                self._push_deadline(now + self.config.k_reattach, row)
        if reissued:
            logger.debug("t=%.3f: %d reissues", now, len(reissued))
        return reissued

    def _reissue(self, row, view):
        record = self.records[row]
        timestamp = float(np.nextafter(self.tangle.last_timestamp, math.inf))
        vid = self._issue(view, record.strategy, timestamp, record)
        record.vertex_ids.append(vid)
        record.issue_times.append(timestamp)
        self._record_of_vertex[vid] = row
        if row >= len(self.records) - self.config.m0:
            self._reissued_rows.add(row)
        self._push_deadline(timestamp + self.config.k_reattach, row)
        return vid

    def _finish(self):
        arrivals = len(self.records)
        m0 = self.config.m0
        for row, record in enumerate(self.records):
            n_probes = min(m0, arrivals - row - 1)
            record.probe_outcomes = self._outcomes[row, :n_probes].copy()
        if self.config.reattachment:
            horizon = 2 * self.config.k_reattach
            stale = sum(1 for r in self.records
                        if not r.confirmed and self._now - r.issue_times[-1] > horizon and r.n_probes < m0)
            if stale:
                logger.warning("%d transactions unresolved after %g seconds", stale, horizon)
        logger.info("Finished: %d transactions, %d vertices", arrivals, self.tangle.size)
        return SimOutput(
            config=self.config,
            records=self.records,
            tip_series=np.array(self._tip_series, dtype=float).reshape(-1, 2),
            unconfirmed_series=np.array(self._unconfirmed_series, dtype=float).reshape(-1, 2),
            rejected_draws=dict(self.rejected_draws),
            seed=self.config.seed,
            tangle=self.tangle if self.keep_tangle else None,
        )


def run(config, keep_tangle=True):
    """Run one simulation and return its SimOutput."""
    return TangleSimulator(config, keep_tangle).run()


def _run_detached(config):
    return run(config, keep_tangle=False)


def replica_seeds(seed, replicas):
    """Independent replica seeds derived from a master seed."""
    children = np.random.SeedSequence(seed).spawn(replicas)
    return [int(child.generate_state(1)[0]) for child in children]


def run_replicas(config, replicas, processes=1):
    """Independent runs with seeds spawned from ``config.seed``, in seed order.

    The tangles are dropped from the outputs.
    """
    if replicas < 1:
        raise ValueError("replicas must be >= 1, got {}.".format(replicas))
    configs = [config.with_seed(seed) for seed in replica_seeds(config.seed, replicas)]
    if processes > 1 and replicas > 1:
        with Pool(min(processes, replicas)) as pool:
            return pool.map(_run_detached, configs)
    outputs = []
    for index, replica in enumerate(configs):
        logger.info("Replica %d/%d", index + 1, replicas)
        outputs.append(_run_detached(replica))
    return outputs


def confirmation_confidence(view, v, m_walks, rng):
    """Fraction of `m_walks` max-weight walks whose tip references `v`."""
    if m_walks < 1:
        raise ValueError("m_walks must be >= 1, got {}.".format(m_walks))
    if not view.contains(v):
        raise ValueError("Vertex {} is not in the view.".format(v))
    hits = sum(view.references(deterministic_walk(view, rng), v) for _ in range(m_walks))
    return hits / m_walks
