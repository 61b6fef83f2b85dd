import numpy as np
import pytest

from oniondos import network

DEFAULT_TABLE_SEED = 1
DEFAULT_TRACE_SEED = 2


@pytest.fixture(scope="session")
def default_table():
    return network.generate_synthetic_network(network.NetworkGenConfig(),
                                              seed=DEFAULT_TABLE_SEED)


@pytest.fixture(scope="session")
def default_traces(default_table):
    return network.generate_lifecycle_traces(default_table, 100,
                                             seed=DEFAULT_TRACE_SEED)


@pytest.fixture(scope="session")
def deployed_like_table():
    # Composition implied by the measured guard-only/exit-only/guard-exit
    # bandwidths (605/300/365 MB/s): eta ~ .48, zeta ~ .263.
    cfg = network.NetworkGenConfig(n=1000, gamma=0.70, eta=0.48, zeta=0.263)
    return network.generate_synthetic_network(cfg, seed=3)


def make_table(rows, seed=None):
    """Small hand-built tables: rows of (id, bw, guard, exit, rel, presence)."""
    ids, bw, g, e, rel, pres = zip(*rows)
    return network.RelayTable(tuple(ids), np.array(bw), np.array(g, dtype=bool),
                              np.array(e, dtype=bool), np.array(rel, float),
                              np.array(pres, float), generation_seed=seed)


def make_traces(table, statuses):
    return network.TraceSet(table.ids, np.asarray(statuses, dtype=np.int8))
