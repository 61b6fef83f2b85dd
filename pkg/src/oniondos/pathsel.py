"""Position- and flag-dependent bandwidth-weighted relay selection.

A relay is chosen for a circuit position with probability proportional to
its weighted bandwidth, where the weight depends on the position and the
relay's Guard/Exit flags:

    position  guard-only  exit-only  guard-exit  unflagged
    guard        1.0         0.0       w_E0         0.0
    middle      w_G0        w_E0       w_Z          1.0
    exit         0.0         1.0       w_G0         0.0

with w_G0 = 1 - 1/(3*gamma), w_E0 = 1 - 1/(3*eta) and w_Z = w_G0 * w_E0,
clamped to 0 when the flagged bandwidth share is at or below one third of
the network total.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, NoEligibleRelayError
from .network import RelayTable, network_stats

GUARD_LIST_SIZE = 3

# Rejection draws below implement renormalization-after-exclusion exactly:
# conditioning a categorical draw on "not excluded" is the renormalized
# distribution.  The cap only bounds pathological exclusion sets.
_MAX_REJECTIONS = 64


class Position(enum.Enum):
    GUARD = "guard"
    MIDDLE = "middle"
    EXIT = "exit"


@dataclass(frozen=True)
class WeightSet:
    w_G0: float
    w_E0: float
    w_Z: float

    @classmethod
    def from_ratios(cls, gamma: float, eta: float) -> "WeightSet":
        w_g0 = 1.0 - 1.0 / (3.0 * gamma) if 3.0 * gamma > 1.0 else 0.0
        w_e0 = 1.0 - 1.0 / (3.0 * eta) if 3.0 * eta > 1.0 else 0.0
        return cls(w_G0=w_g0, w_E0=w_e0, w_Z=w_g0 * w_e0)

    @classmethod
    def for_table(cls, table: RelayTable) -> "WeightSet":
        summary = network_stats(table)
        return cls.from_ratios(summary.gamma, summary.eta)


@dataclass(frozen=True)
class GuardList:
    """The fixed 3-relay set a client draws entry relays from."""

    guards: tuple[str, str, str]

    def __post_init__(self):
        if len(self.guards) != GUARD_LIST_SIZE:
            raise ConfigError(f"guard list must hold exactly {GUARD_LIST_SIZE} relays")
        if len(set(self.guards)) != GUARD_LIST_SIZE:
            raise ConfigError("guard list relays must be distinct")


def position_weight(has_guard_flag: bool, has_exit_flag: bool,
                    position: Position, w: WeightSet) -> float:
    if position is Position.GUARD:
        if has_guard_flag:
            return w.w_E0 if has_exit_flag else 1.0
        return 0.0
    if position is Position.EXIT:
        if has_exit_flag:
            return w.w_G0 if has_guard_flag else 1.0
        return 0.0
    # middle
    if has_guard_flag and has_exit_flag:
        return w.w_Z
    if has_guard_flag:
        return w.w_G0
    if has_exit_flag:
        return w.w_E0
    return 1.0


def position_weight_vector(table: RelayTable, position: Position,
                           w: WeightSet | None = None) -> np.ndarray:
    """Weighted bandwidth of every relay for ``position`` (unnormalized)."""
    if w is None:
        w = WeightSet.for_table(table)
    g, e = table.guard_flag, table.exit_flag
    if position is Position.GUARD:
        factors = np.where(g, np.where(e, w.w_E0, 1.0), 0.0)
    elif position is Position.EXIT:
        factors = np.where(e, np.where(g, w.w_G0, 1.0), 0.0)
    else:
        factors = np.where(g & e, w.w_Z,
                           np.where(g, w.w_G0, np.where(e, w.w_E0, 1.0)))
    return table.bandwidth.astype(np.float64) * factors


def _availability_mask(table: RelayTable, available) -> np.ndarray:
    if available is None:
        return np.ones(len(table), dtype=bool)
    if isinstance(available, np.ndarray):
        if available.shape != (len(table),):
            raise ConfigError("availability mask shape must match table size")
        return available.astype(bool)
    mask = np.zeros(len(table), dtype=bool)
    for rid in available:
        mask[table.index_of(rid)] = True
    return mask


def selection_distribution(table: RelayTable, position: Position,
                           exclude=frozenset(), available=None,
                           w: WeightSet | None = None) -> dict[str, float]:
    """Probability of each relay for ``position`` after exclusions.

    Relay ids in ``exclude`` and relays outside ``available`` get zero
    probability and are omitted from the returned map, which sums to 1.
    """
    weights = position_weight_vector(table, position, w)
    weights = np.where(_availability_mask(table, available), weights, 0.0)
    for rid in exclude:
        weights[table.index_of(rid)] = 0.0
    total = weights.sum()
    if total <= 0.0:
        raise NoEligibleRelayError(f"no eligible relay for position {position.value}")
    return {table.ids[i]: weights[i] / total for i in np.nonzero(weights)[0]}


class PositionSampler:
    """Cumulative-sum sampler for one position over a fixed table.

    Per-trial availability masks are applied lazily and cached, so repeated
    draws within a trial cost one binary search each.
    """

    def __init__(self, table: RelayTable, position: Position,
                 w: WeightSet | None = None):
        self.table = table
        self.position = position
        self.weights = position_weight_vector(table, position, w)
        self._cache: dict[int | None, tuple[np.ndarray, np.ndarray, float]] = {}

    def _prepared(self, mask: np.ndarray | None, cache_key):
        if cache_key is not None and cache_key in self._cache:
            return self._cache[cache_key]
        weights = self.weights if mask is None else np.where(mask, self.weights, 0.0)
        cumsum = np.cumsum(weights)
        entry = (weights, cumsum, float(cumsum[-1]) if len(cumsum) else 0.0)
        if cache_key is not None:
            self._cache[cache_key] = entry
        return entry

    def draw(self, rng, exclude_idx=(), mask: np.ndarray | None = None,
             cache_key=None) -> int:
        """Index of one relay drawn from the renormalized distribution that
        excludes ``exclude_idx`` and anything outside ``mask``."""
        weights, cumsum, total = self._prepared(mask, cache_key)
        if total <= 0.0:
            raise NoEligibleRelayError(
                f"no eligible relay for position {self.position.value}")
        excluded = set(exclude_idx)
        for _ in range(_MAX_REJECTIONS):
            i = int(np.searchsorted(cumsum, rng.random() * total, side="right"))
            if i not in excluded:
                return i
        adjusted = weights.copy()
        adjusted[list(excluded)] = 0.0
        remaining = adjusted.sum()
        if remaining <= 0.0:
            raise NoEligibleRelayError(
                f"no eligible relay for position {self.position.value}")
        return int(rng.choice(len(adjusted), p=adjusted / remaining))


def choose_guard_list(table: RelayTable, rng, available=None) -> GuardList:
    """Draw 3 distinct guards sequentially, without replacement, from the
    guard-position distribution (restricted to ``available`` if given)."""
    mask = _availability_mask(table, available)
    eligible = int((table.guard_flag & mask).sum())
    if eligible < GUARD_LIST_SIZE:
        raise NoEligibleRelayError(
            f"need at least {GUARD_LIST_SIZE} available guard relays, have {eligible}")
    sampler = PositionSampler(table, Position.GUARD)
    chosen: list[int] = []
    for _ in range(GUARD_LIST_SIZE):
        chosen.append(sampler.draw(rng, exclude_idx=chosen,
                                   mask=None if available is None else mask,
                                   cache_key=0 if available is not None else None))
    return GuardList(tuple(table.ids[i] for i in chosen))


def build_path(table: RelayTable, guard_list: GuardList, rng, available=None,
               samplers: tuple[PositionSampler, PositionSampler] | None = None,
               mask: np.ndarray | None = None,
               cache_key=None) -> tuple[str, str, str]:
    """Build one (entry, middle, exit) path.

    The entry is uniform over the guard list regardless of availability
    (an unavailable entry is the caller's build failure to detect).  Middle
    and exit are drawn sequentially from their position distributions over
    available relays, excluding already-chosen ids; this renormalization
    keeps all three relays distinct.
    """
    if mask is None:
        mask = None if available is None else _availability_mask(table, available)
    if samplers is None:
        samplers = (PositionSampler(table, Position.MIDDLE),
                    PositionSampler(table, Position.EXIT))
    middle_sampler, exit_sampler = samplers
    entry_idx = table.index_of(guard_list.guards[int(rng.integers(GUARD_LIST_SIZE))])
    middle_idx = middle_sampler.draw(rng, exclude_idx=(entry_idx,),
                                     mask=mask, cache_key=cache_key)
    exit_idx = exit_sampler.draw(rng, exclude_idx=(entry_idx, middle_idx),
                                 mask=mask, cache_key=cache_key)
    return table.ids[entry_idx], table.ids[middle_idx], table.ids[exit_idx]
