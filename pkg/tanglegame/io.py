"""
Result files.

Every file is written to a temporary sibling first and renamed into place,
so a failed run never leaves a partially written file behind.
"""

import logging
import math
import os
import tempfile

import numpy as np
import pandas as pd

from tanglegame.simulation.simulator import SimOutput, TxRecord

logger = logging.getLogger(__name__)

FLOAT_FORMAT = "%.12g"
TRANSACTIONS = "transactions.csv"
TIPS = "tips.csv"
UNCONFIRMED = "unconfirmed.csv"
MANIFEST = "manifest.txt"


def _atomic(path, write):
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    handle, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    os.close(handle)
    try:
        write(tmp)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.remove(tmp)
        raise
    logger.debug("Wrote %s", path)
    return path


def write_frame(frame, path):
    """Write a DataFrame as CSV."""
    return _atomic(path, lambda tmp: frame.to_csv(tmp, header=True, index=False, float_format=FLOAT_FORMAT))


def write_text(text, path):
    def write(tmp):
        with open(tmp, "w") as handle:
            handle.write(text)
    return _atomic(path, write)


def write_sim_output(output, directory):
    """Write transactions.csv, tips.csv and unconfirmed.csv of one run."""
    return [write_frame(output.transactions_frame(), os.path.join(directory, TRANSACTIONS)),
            write_frame(output.tips_frame(), os.path.join(directory, TIPS)),
            write_frame(output.unconfirmed_frame(), os.path.join(directory, UNCONFIRMED))]


def write_manifest(spec, directory):
    """Echo the resolved experiment in the configuration format."""
    from tanglegame.tanglegame import format_config
    header = "# tanglegame run manifest\n# seed {}\n".format(spec.config.seed)
    return write_text(header + format_config(spec), os.path.join(directory, MANIFEST))


def write_dot(view, path):
    return write_text(view.to_dot(), path)


def read_sim_output(directory):
    """Rebuild a SimOutput, without its tangle, from a directory of run files.

    Probe outcomes are not stored individually; a record with a complete
    horizon gets W misses followed by M0 - W hits, which preserves every
    cost statistic. Deadline checks are not stored either.
    """
    from tanglegame.tanglegame import parse_config
    with open(os.path.join(directory, MANIFEST)) as handle:
        spec = parse_config(handle.read())
    config = spec.config
    transactions = pd.read_csv(os.path.join(directory, TRANSACTIONS), dtype={"W": "Int64"})
    records = []
    for row in transactions.itertuples(index=False):
        outcomes = np.zeros(0, dtype=bool) if pd.isna(row.W) else np.arange(config.m0) < int(row.W)
        first_approval = None if pd.isna(row.first_approval_time) else float(row.first_approval_time)
        reissues = int(row.reissues)
        records.append(TxRecord(
            logical_id=int(row.logical_id),
            strategy=str(row.strategy),
            vertex_ids=[int(row.logical_id)] + [-1] * reissues,
            issue_times=[float(row.issue_time)] + [math.nan] * reissues,
            first_approval_time=first_approval,
            probe_outcomes=outcomes,
        ))
    tips = pd.read_csv(os.path.join(directory, TIPS))
    unconfirmed = pd.read_csv(os.path.join(directory, UNCONFIRMED))
    return SimOutput(
        config=config,
        records=records,
        tip_series=tips[["time", "L"]].to_numpy(dtype=float).reshape(-1, 2),
        unconfirmed_series=unconfirmed[["time", "count"]].to_numpy(dtype=float).reshape(-1, 2),
        rejected_draws={},
        seed=config.seed,
        tangle=None,
    )
