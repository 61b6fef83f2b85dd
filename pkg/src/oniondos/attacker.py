"""Attacker parameterization, relay-compromise strategies, and the
per-circuit kill/permit decision.

The attacker is described by the bandwidth she compromises (as ratios g, e
of guard and exit bandwidth), a kill probability for circuits she sits on
without controlling, and a permit probability for circuits whose entry and
exit she both controls.  Context-aware variants split the kill probability
by whether the deciding relay can observe the attack context.
"""

from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ShortfallError
from .network import RelayTable

_EPS = 1e-12


class Strategy(enum.Enum):
    TOP_BANDWIDTH = "top_bandwidth"
    RELIABLE = "reliable"


class ContextMode(enum.Enum):
    NONE = "none"
    ALL_POSITIONS = "all_positions"
    EXIT_ONLY = "exit_only"


class CircuitStatus(enum.Enum):
    UNCOMPROMISED = "uncompromised"
    COMPROMISED_UNCONTROLLED = "compromised_uncontrolled"
    CONTROLLED = "controlled"


class Decision(enum.Enum):
    KILL = "kill"
    PERMIT = "permit"


@dataclass(frozen=True)
class AttackerSpec:
    """Full attacker description.

    ``p_kill_aware``/``p_kill_unaware`` default to ``p_kill`` and only
    matter in EXIT_ONLY context mode.  ``permit_controlled_off_context``
    decides what happens to a controlled circuit whose context is not
    satisfied in EXIT_ONLY mode (the controlling exit can always tell).
    Zero g/e/p_permit are allowed so the no-attacker baseline stays
    representable; experiment setup warns when an "active" attacker is
    configured with them.
    """

    target_g: float = 0.0
    target_e: float = 0.0
    p_kill: float = 1.0
    p_permit: float = 1.0
    p_kill_aware: float | None = None
    p_kill_unaware: float | None = None
    strategy: Strategy = Strategy.TOP_BANDWIDTH
    context_mode: ContextMode = ContextMode.NONE
    permit_controlled_off_context: bool = True
    compromised: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        for name in ("target_g", "target_e", "p_kill", "p_permit"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name}={v} outside [0,1]")
        for name in ("p_kill_aware", "p_kill_unaware"):
            v = getattr(self, name)
            if v is None:
                object.__setattr__(self, name, self.p_kill)
            elif not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name}={v} outside [0,1]")

    def is_active(self) -> bool:
        return self.target_g > 0 and self.target_e > 0 and self.p_permit > 0

    def with_compromised(self, compromised) -> "AttackerSpec":
        return AttackerSpec(
            target_g=self.target_g, target_e=self.target_e,
            p_kill=self.p_kill, p_permit=self.p_permit,
            p_kill_aware=self.p_kill_aware, p_kill_unaware=self.p_kill_unaware,
            strategy=self.strategy, context_mode=self.context_mode,
            permit_controlled_off_context=self.permit_controlled_off_context,
            compromised=frozenset(compromised))

    def validate_against(self, table: RelayTable) -> None:
        """Compromised relays must exist and carry the Guard or Exit flag."""
        for rid in self.compromised:
            i = table.index_of(rid)
            if not (table.guard_flag[i] or table.exit_flag[i]):
                raise ConfigError(f"compromised relay {rid} has neither Guard nor Exit flag")


@dataclass(frozen=True)
class CompromisedFractions:
    g: float
    e: float
    z: float
    gamma0_c: float
    eta0_c: float
    zeta_c: float


def attacker_spec_from_json(path) -> AttackerSpec:
    with open(path, encoding="utf-8") as fh:
        raw = json.load(fh)
    if not isinstance(raw, dict):
        raise ConfigError("attacker config must be a JSON object")
    known = {"target_g", "target_e", "p_kill", "p_permit", "p_kill_aware",
             "p_kill_unaware", "strategy", "context_mode",
             "permit_controlled_off_context"}
    unknown = set(raw) - known
    if unknown:
        raise ConfigError(f"unknown attacker config keys: {sorted(unknown)}")
    kwargs = dict(raw)
    if "strategy" in kwargs:
        kwargs["strategy"] = Strategy(kwargs["strategy"])
    if "context_mode" in kwargs:
        kwargs["context_mode"] = ContextMode(kwargs["context_mode"])
    return AttackerSpec(**kwargs)


def _candidate_order(table: RelayTable, eligible: np.ndarray) -> list[int]:
    """Eligible relay indices, descending from the 90th bandwidth percentile.

    Relays above the percentile are appended afterwards (ascending, nearest
    first) as a fallback pool; big, conspicuous relays are compromised last.
    """
    p90 = np.percentile(table.bandwidth, 90)
    idx = np.nonzero(eligible)[0]
    below = sorted((i for i in idx if table.bandwidth[i] <= p90),
                   key=lambda i: (-table.bandwidth[i], table.ids[i]))
    above = sorted((i for i in idx if table.bandwidth[i] > p90),
                   key=lambda i: (table.bandwidth[i], table.ids[i]))
    return below + above


def compromise_relays(table: RelayTable, target_g: float, target_e: float,
                      strategy: Strategy = Strategy.TOP_BANDWIDTH) -> frozenset[str]:
    """Pick relays to compromise until both bandwidth targets are met.

    Guard-exit relays are taken first (they pay into both ratios) until
    either target is reached, then single-flag relays of the deficient type.
    RELIABLE restricts candidates to relays simultaneously in the top 75%
    by bandwidth and by presence.  Deterministic: ties break by relay id.
    """
    if not 0.0 <= target_g <= 1.0 or not 0.0 <= target_e <= 1.0:
        raise ConfigError("targets must lie in [0,1]")
    if target_g == 0.0 and target_e == 0.0:
        return frozenset()

    eligible = np.ones(len(table), dtype=bool)
    if strategy is Strategy.RELIABLE:
        eligible &= table.bandwidth >= np.percentile(table.bandwidth, 25)
        eligible &= table.presence >= np.percentile(table.presence, 25)

    bw = table.bandwidth.astype(np.float64)
    G = bw[table.guard_flag].sum()
    E = bw[table.exit_flag].sum()
    chosen: list[int] = []
    got_g = got_e = 0.0

    def add(i):
        nonlocal got_g, got_e
        chosen.append(i)
        if table.guard_flag[i]:
            got_g += bw[i] / G
        if table.exit_flag[i]:
            got_e += bw[i] / E

    gx_pool = _candidate_order(table, eligible & table.guard_flag & table.exit_flag)
    for i in gx_pool:
        if got_g >= target_g - _EPS or got_e >= target_e - _EPS:
            break
        add(i)

    if got_g < target_g - _EPS:
        for i in _candidate_order(table, eligible & table.guard_flag & ~table.exit_flag):
            if got_g >= target_g - _EPS:
                break
            add(i)
    if got_e < target_e - _EPS:
        for i in _candidate_order(table, eligible & table.exit_flag & ~table.guard_flag):
            if got_e >= target_e - _EPS:
                break
            add(i)

    shortfalls = []
    if got_g < target_g - _EPS:
        shortfalls.append(f"guard ratio {got_g:.4f} < target {target_g}")
    if got_e < target_e - _EPS:
        shortfalls.append(f"exit ratio {got_e:.4f} < target {target_e}")
    if shortfalls:
        raise ShortfallError("compromise targets unreachable: " + "; ".join(shortfalls))
    return frozenset(table.ids[i] for i in chosen)


def compromised_fractions(table: RelayTable, compromised) -> CompromisedFractions:
    """Measured compromise ratios and their total-bandwidth counterparts."""
    mask = np.zeros(len(table), dtype=bool)
    for rid in compromised:
        mask[table.index_of(rid)] = True
    bw = table.bandwidth.astype(np.float64)
    T = bw.sum()
    G = bw[table.guard_flag].sum()
    E = bw[table.exit_flag].sum()
    Z = bw[table.guard_flag & table.exit_flag].sum()
    Gc = bw[mask & table.guard_flag].sum()
    Ec = bw[mask & table.exit_flag].sum()
    Zc = bw[mask & table.guard_flag & table.exit_flag].sum()
    return CompromisedFractions(
        g=Gc / G if G else 0.0,
        e=Ec / E if E else 0.0,
        z=Zc / Z if Z else 0.0,
        gamma0_c=(Gc - Zc) / T,
        eta0_c=(Ec - Zc) / T,
        zeta_c=Zc / T)


def uncontrolled_kill_prob(spec: AttackerSpec, entry_comp: bool, middle_comp: bool,
                           exit_comp: bool, context_satisfied: bool = True) -> float:
    """Kill probability for a compromised-but-uncontrolled circuit."""
    if spec.context_mode is ContextMode.NONE:
        return spec.p_kill
    if spec.context_mode is ContextMode.ALL_POSITIONS:
        # Any relay can evaluate the context; off-context circuits pass.
        return spec.p_kill if context_satisfied else 0.0
    # EXIT_ONLY: a compromised exit can tell; guards/middles cannot.
    if exit_comp:
        return spec.p_kill_aware if context_satisfied else 0.0
    return spec.p_kill_unaware


def classify_circuit(entry_comp: bool, middle_comp: bool, exit_comp: bool) -> CircuitStatus:
    if entry_comp and exit_comp:
        return CircuitStatus.CONTROLLED
    if entry_comp or middle_comp or exit_comp:
        return CircuitStatus.COMPROMISED_UNCONTROLLED
    return CircuitStatus.UNCOMPROMISED


def decide(status: CircuitStatus, spec: AttackerSpec,
           positions: tuple[bool, bool, bool], rng,
           context_satisfied: bool = True) -> Decision:
    """One kill/permit decision for a built circuit.

    ``positions`` flags which of (entry, middle, exit) are compromised and
    must be consistent with ``status``.
    """
    entry_comp, middle_comp, exit_comp = positions
    if classify_circuit(entry_comp, middle_comp, exit_comp) is not status:
        raise ConfigError(f"positions {positions} inconsistent with status {status}")
    if status is CircuitStatus.UNCOMPROMISED:
        return Decision.PERMIT
    if status is CircuitStatus.CONTROLLED:
        if not context_satisfied:
            if spec.context_mode is ContextMode.ALL_POSITIONS:
                return Decision.PERMIT
            if (spec.context_mode is ContextMode.EXIT_ONLY
                    and spec.permit_controlled_off_context):
                return Decision.PERMIT
        return Decision.KILL if rng.random() < 1.0 - spec.p_permit else Decision.PERMIT
    p = uncontrolled_kill_prob(spec, entry_comp, middle_comp, exit_comp, context_satisfied)
    return Decision.KILL if rng.random() < p else Decision.PERMIT
