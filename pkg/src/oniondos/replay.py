"""Trace-replay simulation of circuit construction under attack.

Each simulated client fixes a 3-relay guard list from the relays present in
trial 0, picks a random trial t, and then tries up to ``attempt_cap`` times
to build a circuit over the relays in the consensus at t.  An attempt fails
if a chosen relay's probe failed at t (status 0), if the chosen entry guard
is absent, or if the attacker kills the circuit; the first surviving
attempt ends the build with its control status.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np

from .attacker import (AttackerSpec, CircuitStatus, Decision, classify_circuit,
                       decide)
from .errors import ConfigError, NoEligibleRelayError
from .network import RelayTable, TraceSet
from .pathsel import GuardList, Position, PositionSampler, choose_guard_list


class BuildResult(enum.Enum):
    SUCCESS_CONTROLLED = "success_controlled"
    SUCCESS_UNCONTROLLED = "success_uncontrolled"
    GAVE_UP = "gave_up"


@dataclass(frozen=True)
class BuildOutcome:
    result: BuildResult
    attempts_used: int
    trial: int
    path: tuple[str, str, str] | None = None  # set on success, for auditing


@dataclass(frozen=True)
class ControlStats:
    circuits_built: int
    controlled_fraction: float
    bootstrap_median: float
    bootstrap_q1: float
    bootstrap_q3: float


class _ReplayContext:
    """Shared per-experiment state: samplers, masks, compromised lookup."""

    def __init__(self, traces: TraceSet, table: RelayTable, spec: AttackerSpec):
        if traces.relay_ids != table.ids:
            raise ConfigError("trace relay ids must match the table")
        self.traces = traces
        self.table = table
        self.spec = spec
        self.samplers = (PositionSampler(table, Position.MIDDLE),
                         PositionSampler(table, Position.EXIT))
        self.compromised_mask = np.zeros(len(table), dtype=bool)
        for rid in spec.compromised:
            self.compromised_mask[table.index_of(rid)] = True
        self._trial_masks: dict[int, np.ndarray] = {}

    def trial_mask(self, t: int) -> np.ndarray:
        mask = self._trial_masks.get(t)
        if mask is None:
            mask = self.traces.statuses[:, t] != -1
            self._trial_masks[t] = mask
        return mask

    def guard_list(self, rng) -> GuardList:
        return choose_guard_list(self.table, rng, available=self.trial_mask(0))


def simulate_circuit_build(traces: TraceSet, table: RelayTable,
                           guard_list: GuardList, spec: AttackerSpec,
                           attempt_cap: int, rng, trial: int | None = None,
                           _ctx: _ReplayContext | None = None) -> BuildOutcome:
    """Run one client's build loop within a single randomly chosen trial.

    Draw order per attempt: entry (uniform over the guard list), then
    middle, then exit from availability-restricted position distributions.
    A fully built path fails on any status-0 relay before the attacker's
    kill decision is rolled.
    """
    if attempt_cap < 1:
        raise ConfigError("attempt_cap must be >= 1")
    ctx = _ctx if _ctx is not None else _ReplayContext(traces, table, spec)
    t = int(rng.integers(traces.trial_count)) if trial is None else trial
    mask = ctx.trial_mask(t)
    statuses = traces.statuses[:, t]

    for attempt in range(1, attempt_cap + 1):
        entry_id = guard_list.guards[int(rng.integers(len(guard_list.guards)))]
        entry = table.index_of(entry_id)
        if statuses[entry] == -1:
            continue
        try:
            _, middle_id, exit_id = _finish_path(ctx, entry, mask, t, rng)
        except NoEligibleRelayError:
            continue
        middle, exit_ = table.index_of(middle_id), table.index_of(exit_id)
        if statuses[entry] == 0 or statuses[middle] == 0 or statuses[exit_] == 0:
            continue
        comp = (bool(ctx.compromised_mask[entry]),
                bool(ctx.compromised_mask[middle]),
                bool(ctx.compromised_mask[exit_]))
        status = classify_circuit(*comp)
        if decide(status, spec, comp, rng) is Decision.KILL:
            continue
        result = (BuildResult.SUCCESS_CONTROLLED
                  if status is CircuitStatus.CONTROLLED
                  else BuildResult.SUCCESS_UNCONTROLLED)
        return BuildOutcome(result, attempt, t, (entry_id, middle_id, exit_id))
    return BuildOutcome(BuildResult.GAVE_UP, attempt_cap, t)


def _finish_path(ctx: _ReplayContext, entry_idx: int, mask, trial: int, rng):
    middle_sampler, exit_sampler = ctx.samplers
    middle = middle_sampler.draw(rng, exclude_idx=(entry_idx,), mask=mask,
                                 cache_key=trial)
    exit_ = exit_sampler.draw(rng, exclude_idx=(entry_idx, middle), mask=mask,
                              cache_key=trial)
    return entry_idx, ctx.table.ids[middle], ctx.table.ids[exit_]


def client_rng(seed: int, client: int) -> np.random.Generator:
    """Stream for one client, independent of execution order."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), int(client)]))


def _run_client_range(traces, table, spec, start, count, attempt_cap, seed):
    ctx = _ReplayContext(traces, table, spec)
    outcomes = []
    for c in range(start, start + count):
        rng = client_rng(seed, c)
        guard_list = ctx.guard_list(rng)
        outcomes.append(simulate_circuit_build(traces, table, guard_list, spec,
                                               attempt_cap, rng, _ctx=ctx))
    return outcomes


def run_attack_experiment(traces: TraceSet, table: RelayTable, spec: AttackerSpec,
                          n_clients: int, attempt_cap: int = 120,
                          seed: int = 0, jobs: int = 1) -> list[BuildOutcome]:
    """One build per client, each with a fresh guard list drawn at trial 0.

    Deterministic for a fixed seed regardless of ``jobs``: every client's
    stream derives from (seed, client index) and worker results merge back
    in client order.
    """
    if n_clients < 0:
        raise ConfigError("n_clients must be >= 0")
    if jobs <= 1 or n_clients < 2 * jobs:
        return _run_client_range(traces, table, spec, 0, n_clients,
                                 attempt_cap, seed)
    from concurrent.futures import ProcessPoolExecutor

    bounds = np.linspace(0, n_clients, jobs + 1).astype(int)
    chunks = [(int(a), int(b - a)) for a, b in zip(bounds[:-1], bounds[1:]) if b > a]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        futures = [pool.submit(_run_client_range, traces, table, spec,
                               start, count, attempt_cap, seed)
                   for start, count in chunks]
        outcomes = []
        for fut in futures:
            outcomes.extend(fut.result())
    return outcomes


def controlled_fraction(outcomes, include_gave_up: bool = False) -> float:
    """Fraction of built circuits that are controlled.

    Gave-up clients are excluded from the denominator unless
    ``include_gave_up``; the controlled share is reported among circuits
    that actually got built.
    """
    controlled = sum(1 for o in outcomes if o.result is BuildResult.SUCCESS_CONTROLLED)
    if include_gave_up:
        denom = len(outcomes)
    else:
        denom = sum(1 for o in outcomes if o.result is not BuildResult.GAVE_UP)
    return controlled / denom if denom else 0.0


def bootstrap_stats(outcomes, n_boot: int = 1000, resample_size: int | None = None,
                    seed: int = 0, include_gave_up: bool = False) -> ControlStats:
    """Median and quartiles of the controlled fraction over bootstrap
    resamples (with replacement) of the outcome population."""
    if not outcomes:
        raise ConfigError("bootstrap needs at least one outcome")
    if n_boot < 1:
        raise ConfigError("n_boot must be >= 1")
    size = len(outcomes) if resample_size is None else int(resample_size)
    if size < 1:
        raise ConfigError("resample_size must be >= 1")
    codes = np.array([2 if o.result is BuildResult.SUCCESS_CONTROLLED
                      else (1 if o.result is BuildResult.SUCCESS_UNCONTROLLED else 0)
                      for o in outcomes], dtype=np.int8)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x626f6f74]))
    fractions = np.empty(n_boot)
    for b in range(n_boot):
        sample = codes[rng.integers(len(codes), size=size)]
        controlled = int((sample == 2).sum())
        denom = size if include_gave_up else int((sample != 0).sum())
        fractions[b] = controlled / denom if denom else 0.0
    q1, med, q3 = np.percentile(fractions, [25, 50, 75])
    return ControlStats(
        circuits_built=int((codes != 0).sum()),
        controlled_fraction=controlled_fraction(outcomes, include_gave_up),
        bootstrap_median=float(med), bootstrap_q1=float(q1), bootstrap_q3=float(q3))


def circuit_failure_rate(traces: TraceSet, table: RelayTable,
                         n_circuits_per_trial: int = 100, resamples: int = 10,
                         resample_size: int = 100, seed: int = 0) -> np.ndarray:
    """Natural circuit-failure rate per trial, attacker-free.

    Relays are chosen uniformly at random (no bandwidth weighting) among
    those in the consensus, respecting Guard/Exit flags; a circuit fails if
    any chosen relay's probe failed.  Per trial the constructed circuits
    are resampled with replacement ``resamples`` times and the median
    failed proportion is reported.
    """
    if traces.relay_ids != table.ids:
        raise ConfigError("trace relay ids must match the table")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6661696c]))
    rates = np.empty(traces.trial_count)
    all_idx = np.arange(len(table))
    for t in range(traces.trial_count):
        statuses = traces.statuses[:, t]
        present = statuses != -1
        guards = all_idx[present & table.guard_flag]
        exits = all_idx[present & table.exit_flag]
        middles = all_idx[present]
        if len(guards) == 0 or len(exits) == 0 or len(middles) < 3:
            raise NoEligibleRelayError(f"trial {t}: not enough relays in consensus")
        failed = np.empty(n_circuits_per_trial, dtype=bool)
        for c in range(n_circuits_per_trial):
            entry = int(rng.choice(guards))
            exit_pool = exits[exits != entry]
            if len(exit_pool) == 0:
                raise NoEligibleRelayError(f"trial {t}: no exit distinct from entry")
            exit_ = int(rng.choice(exit_pool))
            middle_pool = middles[(middles != entry) & (middles != exit_)]
            if len(middle_pool) == 0:
                raise NoEligibleRelayError(f"trial {t}: no middle relay left")
            middle = int(rng.choice(middle_pool))
            failed[c] = (statuses[entry] == 0 or statuses[middle] == 0
                         or statuses[exit_] == 0)
        medians = [failed[rng.integers(n_circuits_per_trial, size=resample_size)].mean()
                   for _ in range(resamples)]
        rates[t] = float(np.median(medians))
    return rates
