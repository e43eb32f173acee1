"""
Tangle data model.

Vertices, approval edges, tips, cones and cumulative weights of the growing
DAG, plus the time-delayed snapshots (views) that issuers work on.

Every vertex stores its past cone as a packed little-endian bitset, so
reference tests are a single bit lookup and cumulative weights are column
counts over those bitsets.
"""

import bisect
import logging
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

GENESIS = 0
_NO_APPROVER = np.iinfo(np.int64).max


class TangleError(ValueError):
    """Malformed attachment, or a query about a vertex outside a view."""


@dataclass(frozen=True)
class Vertex:
    """A transaction of the tangle.

    Attributes
    ----------
    id : int
        Dense index, assigned in attachment order; the genesis is 0.
    timestamp : float
        Attachment time in simulated seconds.
    approves : tuple(int, int)
        The two approved vertices (may coincide); empty for the genesis.
    issuer : int
        Index of the issuing node class.
    logical_id : int
        Shared by all reattachments of one logical transaction.
    reissue_index : int
        0 for the first issue, k for the k-th reattachment.
    """
    id: int
    timestamp: float
    approves: tuple = ()
    issuer: int = -1
    logical_id: int = -1
    reissue_index: int = 0

    @property
    def is_genesis(self):
        return not self.approves


def bit_is_set(packed, index):
    """Test bit `index` of a packed little-endian bitset."""
    byte = index >> 3
    if byte >= len(packed):
        return False
    return bool((packed[byte] >> (index & 7)) & 1)


def bits_at(packed, ids):
    """Vectorised `bit_is_set` for an integer array `ids`."""
    ids = np.asarray(ids, dtype=np.int64)
    mask = np.zeros(ids.shape, dtype=bool)
    inside = ids < 8 * len(packed)
    sub = ids[inside]
    mask[inside] = ((packed[sub >> 3] >> (sub & 7).astype(np.uint8)) & 1).astype(bool)
    return mask


def _grow(array, size, fill):
    """Return `array` with capacity for at least `size` entries."""
    if len(array) >= size:
        return array
    extra = np.full(max(size, 2 * len(array)) - len(array), fill, dtype=array.dtype)
    return np.concatenate([array, extra])


class Tangle():
    """Append-only timestamped DAG of transactions.

    Attributes
    ----------
    vertices : list[Vertex]
        Vertices in attachment order.
    approvers : list[list[int]]
        Incoming-edge sources of every vertex, in increasing id order
        (a double approval appears twice).
    logical_index : dict(int, list[int])
        Vertex ids of every issue of a logical transaction.

    """
    def __init__(self):
        genesis = Vertex(id=GENESIS, timestamp=0.0)
        self.vertices = [genesis]
        self.approvers = [[]]
        self.logical_index = {}
        self.reissued = set()
        self._member_ids = []
        self._member_lids = []
        self._members = None
        self._timestamps = [0.0]
        self._past = [np.zeros(1, dtype=np.uint8)]
        self._parents = np.full((64, 2), -1, dtype=np.int64)
        self._first_approver = np.full(64, _NO_APPROVER, dtype=np.int64)
        self._live_tips = 1
        # referencer counts for the latest cutoff served, advanced incrementally
        self._counted = 1
        self._referencers = np.zeros(64, dtype=np.int64)
        # a view only depends on its size; consecutive snapshots of equal size share state
        self._last_view = None

    def __len__(self):
        return len(self.vertices)

    @property
    def size(self):
        return len(self.vertices)

    @property
    def edge_count(self):
        return 2 * (len(self.vertices) - 1)

    @property
    def last_timestamp(self):
        return self._timestamps[-1]

    @property
    def live_tip_count(self):
        """Number of tips of the undelayed tangle."""
        return self._live_tips

    def live_tips(self):
        """Ids of the tips of the undelayed tangle."""
        return np.flatnonzero(self._first_approver[:len(self.vertices)] == _NO_APPROVER)

    def attach(self, parents, timestamp, issuer=-1, logical_id=None, reissue_index=0):
        """Append a vertex approving `parents` and return its id.

        Parameters
        ----------
        parents : tuple(int, int)
            Approved vertices; equal ids give a double edge.
        timestamp : float
            Must be strictly larger than every existing timestamp.
        issuer : int
            Issuer index stored on the vertex.
        logical_id : int, Optional
            Logical transaction id; defaults to the new vertex id.
        reissue_index : int
            Reattachment counter of the logical transaction.

        """
        if len(parents) != 2:
            raise TangleError("A vertex approves exactly two vertices, got {}.".format(len(parents)))
        vid = len(self.vertices)
        for parent in parents:
            if not isinstance(parent, (int, np.integer)) or not 0 <= parent < vid:
                raise TangleError("Unknown parent vertex {}.".format(parent))
        timestamp = float(timestamp)
        if not timestamp > self._timestamps[-1]:
            raise TangleError("Non-increasing timestamp {} after {}.".format(timestamp, self._timestamps[-1]))
        first, second = int(parents[0]), int(parents[1])
        if logical_id is None:
            logical_id = vid

        past = np.zeros((vid >> 3) + 1, dtype=np.uint8)
        for parent in {first, second}:
            parent_past = self._past[parent]
            past[:len(parent_past)] |= parent_past
            past[parent >> 3] |= np.uint8(1 << (parent & 7))

        if self._parents.shape[0] <= vid:
            extra = np.full(self._parents.shape, -1, dtype=np.int64)
            self._parents = np.concatenate([self._parents, extra])
        self._parents[vid] = (first, second)
        self._first_approver = _grow(self._first_approver, vid + 1, _NO_APPROVER)
        for parent in {first, second}:
            if self._first_approver[parent] == _NO_APPROVER:
                self._first_approver[parent] = vid
                self._live_tips -= 1
        self._live_tips += 1

        self.vertices.append(Vertex(vid, timestamp, (first, second), issuer, logical_id, reissue_index))
        self.approvers.append([])
        self.approvers[first].append(vid)
        self.approvers[second].append(vid)
        self._timestamps.append(timestamp)
        self._past.append(past)
        self._register_issue(logical_id, vid)
        return vid

    def _register_issue(self, logical_id, vid):
        issues = self.logical_index.setdefault(logical_id, [])
        issues.append(vid)
        if len(issues) == 2:
            self.reissued.add(logical_id)
            self._member_ids.extend(issues)
            self._member_lids.extend([logical_id, logical_id])
        elif len(issues) > 2:
            self._member_ids.append(vid)
            self._member_lids.append(logical_id)
        else:
            return
        self._members = None

    def reissue_members(self):
        """Vertex ids and logical ids of every issue of a reissued transaction."""
        if self._members is None:
            self._members = (np.array(self._member_ids, dtype=np.int64),
                             np.array(self._member_lids, dtype=np.int64))
        return self._members

    def snapshot(self, now, h):
        """View of the tangle as known at `now` under network delay `h`."""
        if now < 0 or h < 0:
            raise ValueError("Snapshot needs now >= 0 and h >= 0, got now={}, h={}.".format(now, h))
        view = View(self, now - h)
        if self._last_view is not None and self._last_view.size == view.size:
            view.share(self._last_view)
        self._last_view = view
        return view

    def first_approval_time(self, v):
        """Timestamp of the first vertex approving `v`, or None."""
        approver = self._first_approver[v]
        if approver == _NO_APPROVER:
            return None
        return self._timestamps[approver]

    def references(self, u, v):
        """Whether `u` references `v` (reflexive)."""
        return u == v or bit_is_set(self._past[u], v)

    def reference_mask(self, u, ids):
        """Vectorised `references(u, v)` for every v in `ids`."""
        ids = np.asarray(ids, dtype=np.int64)
        return (ids == u) | bits_at(self._past[u], ids)

    def cone_bits(self, ids):
        """Packed bitset of the given vertices together with their past cones."""
        top = max(ids)
        cone = np.zeros((top >> 3) + 1, dtype=np.uint8)
        for v in set(int(i) for i in ids):
            past = self._past[v]
            cone[:len(past)] |= past
            cone[v >> 3] |= np.uint8(1 << (v & 7))
        return cone

    def parent_array(self, count):
        """(count, 2) array of parents; the genesis row holds -1."""
        return self._parents[:count]

    def first_approvers(self, count):
        return self._first_approver[:count]

    def unpacked_past(self, y):
        """Boolean membership vector of the past cone of `y` over ids < y."""
        return np.unpackbits(self._past[y], bitorder='little')[:y].astype(bool)

    def referencer_counts(self, count):
        """Number of referencers of every vertex among the first `count` vertices."""
        if count >= self._counted:
            self._referencers = _grow(self._referencers, count, 0)
            for y in range(self._counted, count):
                self._referencers[:y] += np.unpackbits(self._past[y], bitorder='little')[:y]
            self._counted = count
            return self._referencers[:count].copy()
        counts = np.zeros(count, dtype=np.int64)
        for y in range(1, count):
            counts[:y] += np.unpackbits(self._past[y], bitorder='little')[:y]
        return counts


class View():
    """Immutable snapshot of a tangle at a cutoff time.

    A vertex belongs to the view iff its timestamp is at most the cutoff;
    the genesis always belongs. Tips and cumulative weights are computed
    inside the view and cached on first use.

    Attributes
    ----------
    tangle : Tangle
        The tangle the view was taken from.
    cutoff_time : float
        Latest visible timestamp.
    size : int
        Number of visible vertices; they are exactly ids 0..size-1.
    cache : dict
        Per-view memo used by the walk engine.

    """
    def __init__(self, tangle, cutoff_time):
        if not isinstance(tangle, Tangle):
            raise TypeError("A view must be taken from a Tangle.")
        self.tangle = tangle
        self.cutoff_time = float(cutoff_time)
        self.size = max(1, bisect.bisect_right(tangle._timestamps, self.cutoff_time))
        self.cache = {}
        self._weights = None
        self._tip_mask = None

    def __len__(self):
        return self.size

    def share(self, other):
        """Reuse the weights, tips and walk cache of a view of the same size."""
        if other.tangle is not self.tangle or other.size != self.size:
            raise TangleError("Only views of one tangle with equal size can share state.")
        self.cache = other.cache
        self._weights = other.weights
        self._tip_mask = other.tip_mask

    def __contains__(self, x):
        return self.contains(x)

    def contains(self, x):
        return 0 <= x < self.size

    def _check(self, x):
        if not self.contains(x):
            raise TangleError("Vertex {} is not in the view (size {}).".format(x, self.size))

    @property
    def weights(self):
        """Cumulative weights H of all view vertices."""
        if self._weights is None:
            weights = self.tangle.referencer_counts(self.size) + 1
            weights.setflags(write=False)
            self._weights = weights
        return self._weights

    @property
    def tip_mask(self):
        if self._tip_mask is None:
            mask = self.tangle.first_approvers(self.size) >= self.size
            mask.setflags(write=False)
            self._tip_mask = mask
        return self._tip_mask

    @property
    def tips(self):
        """Ids of the vertices without approvers inside the view."""
        return np.flatnonzero(self.tip_mask)

    @property
    def tip_count(self):
        return int(self.tip_mask.sum())

    def is_tip(self, x):
        return bool(self.tip_mask[x])

    def vertex(self, x):
        self._check(x)
        return self.tangle.vertices[x]

    def parents(self, x):
        self._check(x)
        return self.tangle.vertices[x].approves

    def approvers(self, x):
        """Approvers of `x` visible in the view, counting multiplicity."""
        self._check(x)
        sources = self.tangle.approvers[x]
        return sources[:bisect.bisect_left(sources, self.size)]

    def in_degree(self, x):
        return len(self.approvers(x))

    def cumulative_weight(self, x):
        self._check(x)
        return int(self.weights[x])

    def references(self, u, v):
        self._check(u)
        self._check(v)
        return self.tangle.references(u, v)

    def past_cone(self, x):
        self._check(x)
        return set(np.flatnonzero(self.tangle.unpacked_past(x)).tolist())

    def future_cone(self, x):
        self._check(x)
        past = self.tangle._past
        return {y for y in range(x + 1, self.size) if bit_is_set(past[y], x)}

    def to_dot(self):
        """DOT rendering: one node `id:weight` per vertex, one edge per approval."""
        lines = ["digraph tangle {", "  rankdir=RL;"]
        weights = self.weights
        for x in range(self.size):
            lines.append('  {} [label="{}:{}"];'.format(x, x, weights[x]))
        for y in range(1, self.size):
            for x in self.tangle.vertices[y].approves:
                lines.append("  {} -> {};".format(y, x))
        lines.append("}")
        return "\n".join(lines) + "\n"


def new_tangle():
    """Tangle holding only the genesis."""
    return Tangle()


def attach(tangle, parents, timestamp, issuer=-1, logical_id=None, reissue_index=0):
    return tangle.attach(parents, timestamp, issuer, logical_id, reissue_index)


def snapshot(tangle, now, h):
    return tangle.snapshot(now, h)


def cumulative_weight(view, x):
    return view.cumulative_weight(x)


def references(view, u, v):
    return view.references(u, v)


def past_cone(view, x):
    return view.past_cone(x)


def future_cone(view, x):
    return view.future_cone(x)


def to_dot(view):
    return view.to_dot()
