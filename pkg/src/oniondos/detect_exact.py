"""Deterministic compromised-relay detection via circuit probes.

Against an always-kill attacker (kill and permit probabilities both 1.0),
a probe of a k-relay circuit fails exactly when the circuit contains a
compromised relay without both endpoints being compromised.  Fixing a set
X of k-1 relays and probing (x1, y, x2, ..., x_{k-1}) for every other
relay y splits the world into three cases:

* all probes succeed  -> both endpoint relays of X are compromised; any
  other relay is compromised iff appending it as the exit of a circuit
  through X yields a successful probe;
* mixed results       -> X is entirely honest and the failing y's are
  exactly the compromised relays;
* all probes fail     -> either X is honest and everything else is
  compromised, or exactly one relay in X is compromised (two compromised
  members of X would make some endpoint pair succeed for every y); probing
  (x, ..., y) rows for each x in X identifies which.

For k = 3 the pair round of the all-fail case is, relay for relay, the
initial round, so its results are reused and the probe count stays within
3n.  Natural failures are handled by repeating each probe r times and
reading failure only if all r attempts fail.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Protocol

import numpy as np

from .errors import ConfigError
from .network import RelayTable, TraceSet
from .attacker import AttackerSpec, classify_circuit, CircuitStatus, uncontrolled_kill_prob


class ProbeOutcome(enum.Enum):
    SUCCEED = "succeed"
    FAIL = "fail"


class Verdict(enum.Enum):
    COMPROMISED = "compromised"
    HONEST = "honest"


class ProbeOracle(Protocol):
    probe_count: int

    def probe(self, path: tuple[str, ...]) -> ProbeOutcome: ...


@dataclass
class ExactReport:
    classification: dict[str, Verdict]
    ambiguous_all_or_none: bool
    probes_used: int

    def compromised(self) -> frozenset[str]:
        return frozenset(r for r, v in self.classification.items()
                         if v is Verdict.COMPROMISED)


class SimulatedKillOracle:
    """Probe oracle over a known compromised set.

    A probe fails when the circuit is compromised but not controlled
    (the always-kill attacker) or, with probability ``failure_prob``, for
    natural reasons.  Natural failures across attempts are independent.
    """

    def __init__(self, compromised, failure_prob: float = 0.0, rng=None):
        if not 0.0 <= failure_prob < 1.0:
            raise ConfigError("failure_prob must lie in [0,1)")
        self.compromised = frozenset(compromised)
        self.failure_prob = failure_prob
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.probe_count = 0

    def probe(self, path: tuple[str, ...]) -> ProbeOutcome:
        self.probe_count += 1
        if _killed_by_naive_attacker(path, self.compromised):
            return ProbeOutcome.FAIL
        if self.failure_prob and self.rng.random() < self.failure_prob:
            return ProbeOutcome.FAIL
        return ProbeOutcome.SUCCEED


class TraceBackedOracle:
    """Probe oracle that replays lifecycle traces.

    Each attempt draws a fresh trial (repetitions spread over time); the
    probe fails if any relay on the path is absent or failed at that trial,
    or if the attacker kills the circuit per ``spec``.
    """

    def __init__(self, table: RelayTable, traces: TraceSet, spec: AttackerSpec,
                 rng=None):
        if traces.relay_ids != table.ids:
            raise ConfigError("trace relay ids must match the table")
        self.table = table
        self.traces = traces
        self.spec = spec
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.probe_count = 0

    def probe(self, path: tuple[str, ...]) -> ProbeOutcome:
        self.probe_count += 1
        t = int(self.rng.integers(self.traces.trial_count))
        for rid in path:
            if self.traces.status(rid, t) != 1:
                return ProbeOutcome.FAIL
        comp = [rid in self.spec.compromised for rid in path]
        entry_c, exit_c = comp[0], comp[-1]
        middle_c = any(comp[1:-1])
        status = classify_circuit(entry_c, middle_c, exit_c)
        if status is CircuitStatus.UNCOMPROMISED:
            return ProbeOutcome.SUCCEED
        if status is CircuitStatus.CONTROLLED:
            kill_p = 1.0 - self.spec.p_permit
        else:
            kill_p = uncontrolled_kill_prob(self.spec, entry_c, middle_c, exit_c)
        if self.rng.random() < kill_p:
            return ProbeOutcome.FAIL
        return ProbeOutcome.SUCCEED


def _killed_by_naive_attacker(path, compromised) -> bool:
    on_path = [r in compromised for r in path]
    return any(on_path) and not (on_path[0] and on_path[-1])


def probe_with_retries(oracle: ProbeOracle, path: tuple[str, ...],
                       r: int) -> ProbeOutcome:
    """Fail only if all r attempts fail; short-circuits on first success.
    Transport errors propagate and are never read as a failed probe."""
    if r < 1:
        raise ConfigError("retry count must be >= 1")
    for _ in range(r):
        if oracle.probe(path) is ProbeOutcome.SUCCEED:
            return ProbeOutcome.SUCCEED
    return ProbeOutcome.FAIL


def required_repetitions(f: float, probe_budget: int, epsilon: float) -> int:
    """Smallest r with (1 - f^r)^m >= 1 - epsilon, seeded by the bound
       r > (ln ln (1/(1-eps)) - ln m) / ln f.

    ``f`` is the natural per-attempt circuit failure probability, ``m`` the
    number of probes the detection run will issue, ``epsilon`` the total
    misclassification budget.
    """
    if probe_budget < 1:
        raise ConfigError("probe_budget must be >= 1")
    if not 0.0 < epsilon < 1.0:
        raise ConfigError("epsilon must lie in (0,1)")
    if f < 0.0 or f >= 1.0:
        raise ConfigError("f must lie in [0,1)")
    if f == 0.0:
        return 1
    bound = (math.log(math.log(1.0 / (1.0 - epsilon))) - math.log(probe_budget)) \
        / math.log(f)
    r = max(1, math.floor(bound) + 1)
    # The log bound uses e^-x >= 1-x and can undershoot by one; verify the
    # exact inequality directly.
    while (1.0 - f ** r) ** probe_budget < 1.0 - epsilon:
        r += 1
    return r


def detect_exact(oracle: ProbeOracle, relay_ids, k: int = 3, retries: int = 1,
                 randomize_x: bool = False, rng=None,
                 interior_order_rng=None) -> ExactReport:
    """Classify every relay as compromised or honest.

    Correct whenever the attacker always kills compromised-uncontrolled
    circuits and always permits controlled ones, probes fail only through
    such kills (or are hardened against noise via ``retries``), and the
    number of compromised relays c satisfies 2 <= c < n.  When c = 0 (or
    c = n) every probe succeeds and the report marks all relays compromised
    with ``ambiguous_all_or_none`` set: those two worlds are
    indistinguishable by kill-probing alone.

    ``randomize_x`` picks the fixed set X at random instead of taking the
    first k-1 ids; ``interior_order_rng`` shuffles the interior arrangement
    used in the all-fail case (any fixed order is valid).
    """
    ids = sorted(relay_ids)
    n = len(ids)
    if k < 3:
        raise ConfigError("path length k must be >= 3")
    if n <= k:
        raise ConfigError(f"need more than k={k} relays, have {n}")
    start_count = oracle.probe_count

    if randomize_x:
        chooser = rng if rng is not None else np.random.default_rng(0)
        x_set = [ids[i] for i in sorted(chooser.choice(n, size=k - 1, replace=False))]
    else:
        x_set = ids[:k - 1]
    others = [r for r in ids if r not in set(x_set)]

    # Reuse policy: repeated identical probe paths reuse their outcome when
    # noiseless; under retries only a path that already defines a round is
    # reused (for k=3 the all-fail pair round is the initial round).
    seen: dict[tuple[str, ...], ProbeOutcome] = {}
    memoize_all = retries == 1

    def run_probe(path: tuple[str, ...]) -> ProbeOutcome:
        if len(set(path)) != len(path):
            raise ConfigError(f"probe path repeats a relay: {path}")
        if path in seen and (memoize_all or path in initial_paths):
            return seen[path]
        outcome = probe_with_retries(oracle, path, retries)
        seen[path] = outcome
        return outcome

    initial_paths: set[tuple[str, ...]] = set()

    def initial_path(y: str) -> tuple[str, ...]:
        return (x_set[0], y, *x_set[1:])

    for y in others:
        initial_paths.add(initial_path(y))
    initial = {y: run_probe(initial_path(y)) for y in others}
    succeeded = [y for y, o in initial.items() if o is ProbeOutcome.SUCCEED]

    if len(succeeded) == len(others):
        classification, ambiguous = _case_all_succeed(run_probe, x_set, others)
    elif succeeded:
        classification = {r: Verdict.HONEST for r in x_set}
        for y in others:
            classification[y] = (Verdict.HONEST if initial[y] is ProbeOutcome.SUCCEED
                                 else Verdict.COMPROMISED)
        ambiguous = False
    else:
        classification, ambiguous = _case_all_fail(run_probe, x_set, others,
                                                   interior_order_rng)
    return ExactReport(classification={r: classification[r] for r in ids},
                       ambiguous_all_or_none=ambiguous,
                       probes_used=oracle.probe_count - start_count)


def _case_all_succeed(run_probe, front: list[str], others: list[str]):
    """Endpoints of ``front`` are compromised; classify the rest.

    ``front`` is an arrangement of X of length k-1; the relay y under test
    rides the exit slot of (front..., y), so the probe survives iff the
    circuit is controlled, i.e. iff y is compromised.  Interior members of
    X get the same treatment via one rearranged probe each.
    """
    classification = {front[0]: Verdict.COMPROMISED, front[-1]: Verdict.COMPROMISED}
    for y in others:
        outcome = run_probe((*front, y))
        classification[y] = (Verdict.COMPROMISED if outcome is ProbeOutcome.SUCCEED
                             else Verdict.HONEST)
    filler = others[0]
    for i in range(1, len(front) - 1):
        path = (*front[:i], filler, *front[i + 1:], front[i])
        outcome = run_probe(path)
        classification[front[i]] = (Verdict.COMPROMISED
                                    if outcome is ProbeOutcome.SUCCEED
                                    else Verdict.HONEST)
    ambiguous = all(v is Verdict.COMPROMISED for v in classification.values())
    return classification, ambiguous


def _case_all_fail(run_probe, x_set: list[str], others: list[str],
                   interior_order_rng):
    """Either X is honest and everything else compromised, or exactly one
    member of X is compromised."""
    def arrange(interior: list[str]) -> list[str]:
        if interior_order_rng is not None and len(interior) > 1:
            interior = list(interior)
            interior_order_rng.shuffle(interior)
        return interior

    k_minus_1 = len(x_set)
    # Pair round: if both x_i and x_j were compromised the pair would
    # succeed for every y.  For k=3 these probes coincide with the initial
    # round and are answered from it.
    for i in range(k_minus_1):
        for j in range(i + 1, k_minus_1):
            interior = arrange([x for idx, x in enumerate(x_set) if idx not in (i, j)])
            outcomes = {y: run_probe((x_set[i], y, *interior, x_set[j]))
                        for y in others}
            if all(o is ProbeOutcome.SUCCEED for o in outcomes.values()):
                front = [x_set[i], *interior, x_set[j]]
                return _case_all_succeed(run_probe, front, others)

    # Row round: at most one member of X is compromised now.  A probe
    # (x, ..., y) survives iff it is controlled, which needs x compromised
    # (the interior holds the rest of X) and y compromised.
    for x in x_set:
        interior = arrange([r for r in x_set if r != x])
        row = {y: run_probe((x, *interior, y)) for y in others}
        row_successes = [y for y, o in row.items() if o is ProbeOutcome.SUCCEED]
        if row_successes:
            classification = {r: Verdict.HONEST for r in x_set}
            classification[x] = Verdict.COMPROMISED
            for y in others:
                classification[y] = (Verdict.COMPROMISED if y in set(row_successes)
                                     else Verdict.HONEST)
            return classification, False

    # Every row failed: a lone compromised member of X would leave a single
    # compromised relay in the whole network, below the assumed minimum of
    # two.  X is honest; everything else is compromised.
    classification = {r: Verdict.HONEST for r in x_set}
    classification.update({y: Verdict.COMPROMISED for y in others})
    return classification, False
