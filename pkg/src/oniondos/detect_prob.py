"""Probabilistic two-phase detection of circuit-killing relays.

Phase one screens every guard- or exit-flagged relay through circuits with
a trusted endpoint (an operator-run relay that is honest, always up, and
indistinguishable from any other relay) over ``suspect_trials`` consecutive
trials; relays whose failure rate reaches the suspect cutoff rate become
suspects.  Phase two pairs suspect guards with suspect exits around a
trusted middle over the following ``guilt_trials`` trials; a pair whose
failure rate over co-present trials is at or below the guilty cutoff rate
marks both members guilty.

The two cutoffs trade false positives against false negatives in opposite
directions: raising the suspect cutoff admits fewer suspects, raising the
guilty cutoff convicts more pairs.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .attacker import AttackerSpec, uncontrolled_kill_prob
from .errors import ConfigError
from .network import RelayTable, TraceSet


@dataclass(frozen=True)
class DetectionConfig:
    scr: float = 1.0              # suspect cutoff rate
    gcr: float = 0.0              # guilty cutoff rate
    suspect_trials: int = 5       # phase-one window length
    guilt_trials: int = 5         # phase-two window length
    pair_sample: int | None = 20  # complementary pairs per suspect; None = all
    freeze_guilt_trial: bool = False
    label_all_guards: bool = False  # context-aware mode: every guard starts suspect

    def __post_init__(self):
        for name in ("scr", "gcr"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name}={v} outside [0,1]")
        if self.suspect_trials < 1 or self.guilt_trials < 1:
            raise ConfigError("trial windows must be >= 1")
        if self.pair_sample is not None and self.pair_sample < 1:
            raise ConfigError("pair_sample must be >= 1 or None")
        if self.label_all_guards and self.pair_sample is not None:
            # With every guard a suspect, sampling complements is unsound;
            # force exhaustive pairing.
            object.__setattr__(self, "pair_sample", None)

    def window(self) -> int:
        return self.suspect_trials + self.guilt_trials


@dataclass
class SuspectResult:
    suspects_guard: frozenset[str]
    suspects_exit: frozenset[str]
    failure_rates: dict[str, float]
    screened: frozenset[str]
    probes_used: int

    @property
    def suspects(self) -> frozenset[str]:
        return self.suspects_guard | self.suspects_exit


@dataclass
class GuiltResult:
    guilty: frozenset[str]
    pair_rates: dict[tuple[str, str], float]
    eligible: frozenset[str]
    probes_used: int


@dataclass
class PhaseRates:
    fp: float | None
    fn: float | None


@dataclass
class ProbReport:
    suspects_guard: frozenset[str]
    suspects_exit: frozenset[str]
    guilty: frozenset[str]
    fp_suspect: float | None
    fn_suspect: float | None
    fp_guilty: float | None
    fn_guilty: float | None
    probes_used: int
    suspect_rates: dict[str, float]
    best_pair_rates: dict[str, float]


@dataclass
class DetectionSummary:
    reports: list[ProbReport]

    def quartiles(self, metric: str) -> tuple[float, float, float]:
        values = [getattr(r, metric) for r in self.reports
                  if getattr(r, metric) is not None]
        if not values:
            return (float("nan"),) * 3
        q1, med, q3 = np.percentile(values, [25, 50, 75])
        return float(q1), float(med), float(q3)


def _simulate_probe_successes(traces, table, spec, relay_idx, trials,
                              as_position, rng):
    """Per-(relay, trial) probe success matrix for trusted-endpoint circuits.

    A probe of relay R succeeds iff R's probe succeeded in that trial
    (status 1) and the attacker does not kill the circuit.  The trusted
    endpoint never fails; only R's compromise matters.
    """
    statuses = traces.statuses[np.ix_(relay_idx, trials)]
    success = statuses == 1
    comp = np.array([table.ids[i] in spec.compromised for i in relay_idx])
    if comp.any():
        if as_position == "exit":
            kill_p = np.array([
                uncontrolled_kill_prob(spec, False, False, True) if c else 0.0
                for c in comp])
        else:
            kill_p = np.array([
                uncontrolled_kill_prob(spec, True, False, False) if c else 0.0
                for c in comp])
        killed = rng.random(statuses.shape) < kill_p[:, None]
        success &= ~killed
    return statuses, success


def suspect_phase(traces: TraceSet, table: RelayTable, spec: AttackerSpec,
                  config: DetectionConfig, start_trial: int, rng) -> SuspectResult:
    """Screen flagged relays over ``suspect_trials`` consecutive trials.

    Failure rate = 1 - successes / in-consensus probes; relays never in
    consensus during the window are excluded rather than classified.
    """
    l = config.suspect_trials
    if start_trial < 0 or start_trial + l > traces.trial_count:
        raise ConfigError("suspect window does not fit the trace length")
    trials = np.arange(start_trial, start_trial + l)
    all_idx = np.arange(len(table))
    rates: dict[str, float] = {}
    suspects = {"guard": set(), "exit": set()}
    screened: set[str] = set()
    probes = 0

    for position, flag in (("guard", table.guard_flag), ("exit", table.exit_flag)):
        relay_idx = all_idx[flag]
        statuses, success = _simulate_probe_successes(
            traces, table, spec, relay_idx, trials, position, rng)
        in_consensus = (statuses != -1).sum(axis=1)
        # One circuit per trial the candidate is actually listed in.
        probes += int(in_consensus.sum())
        successes = success.sum(axis=1)
        for row, i in enumerate(relay_idx):
            if in_consensus[row] == 0:
                continue
            rid = table.ids[i]
            rate = 1.0 - successes[row] / in_consensus[row]
            # Keep the worse of the two screens for guard-exit relays.
            rates[rid] = max(rate, rates.get(rid, 0.0))
            screened.add(rid)
            if rate >= config.scr:
                suspects[position].add(rid)

    if config.label_all_guards:
        # Context-blind guards never kill, so phase one cannot see them;
        # treat every screened guard as an initial suspect.
        suspects["guard"] |= {r for r in screened if table.guard_flag[table.index_of(r)]}

    return SuspectResult(frozenset(suspects["guard"]), frozenset(suspects["exit"]),
                         rates, frozenset(screened), probes)


def _pair_kill_prob(spec: AttackerSpec, guard_comp: bool, exit_comp: bool) -> float:
    if guard_comp and exit_comp:
        return 1.0 - spec.p_permit
    if guard_comp or exit_comp:
        return uncontrolled_kill_prob(spec, guard_comp, False, exit_comp)
    return 0.0


def guilt_phase(traces: TraceSet, table: RelayTable, spec: AttackerSpec,
                config: DetectionConfig, suspects: SuspectResult,
                guilt_start: int, rng) -> GuiltResult:
    """Pair suspect guards with suspect exits around a trusted middle.

    Pair failure rate counts only trials where both relays are in the
    consensus; a pair succeeds when both probes succeed and the circuit is
    not killed.  Pairs with no co-presence are skipped.  A relay is guilty
    if any of its pairs has failure rate <= gcr.
    """
    lp = config.guilt_trials
    if guilt_start < 0 or guilt_start + lp > traces.trial_count:
        raise ConfigError("guilt window does not fit the trace length")
    if config.freeze_guilt_trial:
        trials = np.full(lp, guilt_start)
    else:
        trials = np.arange(guilt_start, guilt_start + lp)

    guards = sorted(suspects.suspects_guard)
    exits = sorted(suspects.suspects_exit)
    pairs: set[tuple[str, str]] = set()
    if config.pair_sample is None:
        pairs = {(g, e) for g in guards for e in exits if g != e}
    else:
        # Every suspect draws its own pair_sample complementary partners;
        # pairs drawn from both sides collapse into one probe schedule.
        for g in guards:
            pool = [e for e in exits if e != g]
            if pool:
                take = min(config.pair_sample, len(pool))
                picked = rng.choice(len(pool), size=take, replace=False)
                pairs.update((g, pool[i]) for i in picked)
        for e in exits:
            pool = [g for g in guards if g != e]
            if pool:
                take = min(config.pair_sample, len(pool))
                picked = rng.choice(len(pool), size=take, replace=False)
                pairs.update((pool[i], e) for i in picked)

    pair_list = sorted(pairs)
    pair_rates: dict[tuple[str, str], float] = {}
    guilty: set[str] = set()
    eligible: set[str] = set()
    if not pair_list:
        return GuiltResult(frozenset(), {}, frozenset(), probes_used=0)

    gi = np.array([table.index_of(g) for g, _ in pair_list])
    ei = np.array([table.index_of(e) for _, e in pair_list])
    sg = traces.statuses[gi][:, trials]
    se = traces.statuses[ei][:, trials]
    co_present = (sg != -1) & (se != -1)
    n_co = co_present.sum(axis=1)
    both_up = (sg == 1) & (se == 1)
    kill_p = np.array([_pair_kill_prob(spec, g in spec.compromised,
                                       e in spec.compromised)
                       for g, e in pair_list])
    survived = both_up & (rng.random((len(pair_list), lp)) >= kill_p[:, None])
    rates = np.where(n_co > 0, 1.0 - survived.sum(axis=1) / np.maximum(n_co, 1), np.nan)

    for row, pair in enumerate(pair_list):
        if n_co[row] == 0:
            continue
        rate = float(rates[row])
        pair_rates[pair] = rate
        eligible.update(pair)
        if rate <= config.gcr:
            guilty.update(pair)

    # The consensus is public, so circuits are only attempted in trials
    # where both relays are listed; absent trials cost no probe.
    return GuiltResult(frozenset(guilty), pair_rates, frozenset(eligible),
                       probes_used=int(n_co.sum()))


def evaluate(labeled, eligible, compromised) -> PhaseRates:
    """False-positive and false-negative rates against ground truth.

    fp = honest relays labeled / honest eligible; fn = compromised relays
    not labeled / compromised eligible.  Empty eligible pools yield None
    (undefined), never 0.
    """
    labeled, eligible, compromised = set(labeled), set(eligible), set(compromised)
    honest = eligible - compromised
    comp = eligible & compromised
    fp = len(labeled & honest) / len(honest) if honest else None
    fn = len(comp - labeled) / len(comp) if comp else None
    return PhaseRates(fp=fp, fn=fn)


def run_detection(traces: TraceSet, table: RelayTable, spec: AttackerSpec,
                  config: DetectionConfig, start_trial: int, rng) -> ProbReport:
    """One suspect+guilt pass starting at ``start_trial``."""
    suspects = suspect_phase(traces, table, spec, config, start_trial, rng)
    guilt = guilt_phase(traces, table, spec, config, suspects,
                        start_trial + config.suspect_trials, rng)
    s_rates = evaluate(suspects.suspects, suspects.screened, spec.compromised)
    g_rates = evaluate(guilt.guilty, guilt.eligible, spec.compromised)
    best_pair: dict[str, float] = {}
    for (g, e), rate in guilt.pair_rates.items():
        for rid in (g, e):
            best_pair[rid] = min(rate, best_pair.get(rid, 1.0))
    return ProbReport(
        suspects_guard=suspects.suspects_guard,
        suspects_exit=suspects.suspects_exit,
        guilty=guilt.guilty,
        fp_suspect=s_rates.fp, fn_suspect=s_rates.fn,
        fp_guilty=g_rates.fp, fn_guilty=g_rates.fn,
        probes_used=suspects.probes_used + guilt.probes_used,
        suspect_rates=suspects.failure_rates,
        best_pair_rates=best_pair)


def run_detection_experiment(traces: TraceSet, table: RelayTable,
                             spec: AttackerSpec, config: DetectionConfig,
                             repetitions: int, seed: int = 0) -> DetectionSummary:
    """Repeat detection with random admissible start trials."""
    if repetitions < 1:
        raise ConfigError("repetitions must be >= 1")
    latest_start = traces.trial_count - config.window()
    if latest_start < 0:
        raise ConfigError(
            f"window of {config.window()} trials does not fit "
            f"{traces.trial_count} trace trials")
    reports = []
    for rep in range(repetitions):
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), rep]))
        start = int(rng.integers(latest_start + 1))
        reports.append(run_detection(traces, table, spec, config, start, rng))
    return DetectionSummary(reports)
