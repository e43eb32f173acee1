"""
Hand-built tangles and data files used by the tests.
"""

import os

import numpy as np

from tanglegame.tangle.core import new_tangle


class DataCache():
    """Paths of the packaged data files, keyed by file name without extension."""

    def __init__(self):
        self.data_dir = os.path.join(os.path.dirname(os.path.dirname(__file__)), "data")
        self.files = {}
        for name in sorted(os.listdir(self.data_dir)):
            if name.endswith(".cfg"):
                self.files[os.path.splitext(name)[0]] = os.path.join(self.data_dir, name)


cache = DataCache()


def build(edges, logical_ids=None):
    """Tangle from a list of parent pairs; vertex k+1 gets timestamp k+1."""
    logical_ids = logical_ids or {}
    tangle = new_tangle()
    for index, parents in enumerate(edges, start=1):
        lid = logical_ids.get(index)
        reissue = 0 if lid is None else len(tangle.logical_index.get(lid, ()))
        tangle.attach(parents, float(index), logical_id=lid, reissue_index=reissue)
    return tangle


def chain():
    """0 <- 1 <- 2."""
    return build([(0, 0), (1, 1)])


def diamond():
    """a=1 and b=2 approve the genesis, c=3 approves both."""
    return build([(0, 0), (0, 0), (1, 2)])


def open_diamond():
    """Two symmetric tips 1 and 2 on the genesis."""
    return build([(0, 0), (0, 0)])


def transition_example():
    """x=1 on the genesis, y1=2 approves (x, genesis), y2=3 approves (x, y1).

    H(x) - H(y1) = 1 and H(x) - H(y2) = 2.
    """
    return build([(0, 0), (1, 0), (1, 2)])


def eight_vertex_dag():
    """Eight vertices with tips 6 and 7 and a double edge 6 -> 4."""
    return build([(0, 0), (0, 1), (1, 1), (2, 3), (2, 0), (4, 4), (3, 5)])


def three_tips():
    """Tips 3, 4 and 5 of uneven exit probability."""
    return build([(0, 0), (1, 1), (2, 2), (1, 1), (0, 0)])


def reissue_tangle():
    """Ten vertices where 5 reissues the orphaned 2.

    Tips are 6 (above the reissue), 8 (above the original) and 9 (neither).
    """
    edges = [(0, 0), (0, 0), (1, 1), (3, 3), (4, 4), (5, 5), (4, 4), (2, 2), (7, 7)]
    return build(edges, logical_ids={2: 2, 5: 2})


def random_tangle(n, seed=0, window=8):
    """`n` vertices, each approving two uniform picks among the `window` latest ones."""
    rng = np.random.default_rng(seed)
    tangle = new_tangle()
    for vid in range(1, n):
        low = max(0, vid - window)
        parents = rng.integers(low, vid, size=2)
        tangle.attach((int(parents[0]), int(parents[1])), float(vid))
    return tangle
