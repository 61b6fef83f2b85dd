"""Synthetic relay populations, lifecycle traces, and their file formats.

A relay table is the simulated consensus: per-relay bandwidth, Guard/Exit
flags, and two behavioural parameters that drive lifecycle traces:

* ``presence``    -- probability the relay appears in the consensus in a trial
* ``reliability`` -- probability a probe of the relay succeeds given presence

A trace set records, for every (relay, trial) pair, one of three statuses:
-1 (absent from consensus), 0 (present, probe failed), 1 (probe succeeded).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace

import numpy as np

from .errors import ConfigError, GenerationError, ParseError

# z-score of the 90th percentile of a standard normal; used to convert a
# (median, p90) pair into log-normal (mu, sigma).
_Z90 = 1.2815515655446004

# Caps the log-normal bandwidth tail.  Without it a single relay can carry
# >10% of total bandwidth and ratio targets become unreachable at n ~ 2500.
_BW_CAP = 2.0e7

# Reliability/presence are drawn from a three-component Beta mixture:
# effectively-dead relays (listed but unreachable), flaky relays, and solid
# relays.  Component membership couples the two parameters, mirroring the
# empirical fact that relays that stay in the consensus also answer probes.
_DEAD_SHARE, _FLAKY_SHARE = 0.11, 0.11
_SOLID_SHARE = 1.0 - _DEAD_SHARE - _FLAKY_SHARE
_DEAD_REL_MEAN, _FLAKY_REL_MEAN = 0.005, 0.18
_DEAD_PRES_MEAN, _FLAKY_PRES_MEAN = 0.20, 0.75
_REL_CONC = {"dead": 40.0, "flaky": 9.0, "solid": 40.0}
_PRES_CONC = {"dead": 30.0, "flaky": 30.0, "solid": 40.0}

# Flag classes, in fixed order: guard-exit, guard-only, exit-only, unflagged.
_CLASSES = ("gx", "g0", "e0", "none")


@dataclass(frozen=True)
class Relay:
    """One relay row; a convenience view over the table's column arrays."""

    id: str
    bandwidth: int
    has_guard_flag: bool
    has_exit_flag: bool
    reliability: float
    presence: float

    def __post_init__(self):
        if self.bandwidth <= 0:
            raise ConfigError(f"relay {self.id}: bandwidth must be positive")
        for name in ("reliability", "presence"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"relay {self.id}: {name}={v} outside [0,1]")


@dataclass
class RelayTable:
    """Column-oriented relay population.

    ``generation_seed`` is provenance metadata only; it is not serialized
    and does not participate in equality.
    """

    ids: tuple[str, ...]
    bandwidth: np.ndarray
    guard_flag: np.ndarray
    exit_flag: np.ndarray
    reliability: np.ndarray
    presence: np.ndarray
    generation_seed: int | None = None
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        n = len(self.ids)
        self.bandwidth = np.asarray(self.bandwidth, dtype=np.int64)
        self.guard_flag = np.asarray(self.guard_flag, dtype=bool)
        self.exit_flag = np.asarray(self.exit_flag, dtype=bool)
        self.reliability = np.asarray(self.reliability, dtype=np.float64)
        self.presence = np.asarray(self.presence, dtype=np.float64)
        for arr, name in ((self.bandwidth, "bandwidth"),
                          (self.guard_flag, "guard_flag"),
                          (self.exit_flag, "exit_flag"),
                          (self.reliability, "reliability"),
                          (self.presence, "presence")):
            if arr.shape != (n,):
                raise ConfigError(f"{name} has shape {arr.shape}, expected ({n},)")
        if len(set(self.ids)) != n:
            raise ConfigError("relay ids must be unique")
        if np.any(self.bandwidth <= 0):
            raise ConfigError("all bandwidths must be positive")
        if np.any((self.reliability < 0) | (self.reliability > 1)):
            raise ConfigError("reliability outside [0,1]")
        if np.any((self.presence < 0) | (self.presence > 1)):
            raise ConfigError("presence outside [0,1]")
        if not self.guard_flag.any() or not self.exit_flag.any():
            raise ConfigError("table needs at least one guard and one exit relay")
        self._index = {rid: i for i, rid in enumerate(self.ids)}

    def __len__(self):
        return len(self.ids)

    def __eq__(self, other):
        if not isinstance(other, RelayTable):
            return NotImplemented
        return (self.ids == other.ids
                and np.array_equal(self.bandwidth, other.bandwidth)
                and np.array_equal(self.guard_flag, other.guard_flag)
                and np.array_equal(self.exit_flag, other.exit_flag)
                and np.array_equal(self.reliability, other.reliability)
                and np.array_equal(self.presence, other.presence))

    def index_of(self, relay_id: str) -> int:
        return self._index[relay_id]

    def relay(self, relay_id: str) -> Relay:
        i = self._index[relay_id]
        return Relay(self.ids[i], int(self.bandwidth[i]),
                     bool(self.guard_flag[i]), bool(self.exit_flag[i]),
                     float(self.reliability[i]), float(self.presence[i]))

    def relays(self):
        for rid in self.ids:
            yield self.relay(rid)


@dataclass
class TraceSet:
    """Per-relay lifecycle statuses over ``trial_count`` trials.

    ``statuses[i, t]`` is the status of relay ``relay_ids[i]`` at trial t,
    one of {-1, 0, 1}.
    """

    relay_ids: tuple[str, ...]
    statuses: np.ndarray
    _index: dict[str, int] = field(init=False, repr=False)

    def __post_init__(self):
        self.statuses = np.asarray(self.statuses, dtype=np.int8)
        if self.statuses.ndim != 2 or self.statuses.shape[0] != len(self.relay_ids):
            raise ConfigError("statuses must be (n_relays, trial_count)")
        if self.statuses.shape[1] < 1:
            raise ConfigError("trial_count must be >= 1")
        bad = ~np.isin(self.statuses, (-1, 0, 1))
        if bad.any():
            raise ConfigError("statuses must lie in {-1, 0, 1}")
        if len(set(self.relay_ids)) != len(self.relay_ids):
            raise ConfigError("trace relay ids must be unique")
        self._index = {rid: i for i, rid in enumerate(self.relay_ids)}

    @property
    def trial_count(self) -> int:
        return self.statuses.shape[1]

    def status(self, relay_id: str, trial: int) -> int:
        return int(self.statuses[self._index[relay_id], trial])

    def __eq__(self, other):
        if not isinstance(other, TraceSet):
            return NotImplemented
        return (self.relay_ids == other.relay_ids
                and np.array_equal(self.statuses, other.statuses))


@dataclass(frozen=True)
class BandwidthSummary:
    """Aggregate guard/exit/guard-exit bandwidths and their ratios."""

    G: float
    E: float
    T: float
    G0: float
    E0: float
    Z: float
    gamma: float
    eta: float
    zeta: float
    gamma0: float
    eta0: float


@dataclass(frozen=True)
class NetworkGenConfig:
    """Targets and distribution anchors for synthetic population generation.

    Bandwidths follow a piecewise log-normal: the body is pinned to the
    (median, p90) anchors per flag class and the tail is winsorized at a cap
    so that ratio targets stay reachable.
    """

    n: int = 2500
    gamma: float = 0.70
    eta: float = 0.40
    zeta: float = 0.30
    trial_count: int = 100
    bw_median_gx: float = 333_000.0
    bw_median_g0: float = 385_000.0
    bw_p90_gx: float = 5_800_000.0
    bw_p90_g0: float = 4_400_000.0
    rel_mean: float = 0.805
    presence_mean: float = 0.88

    def __post_init__(self):
        if self.n < 10:
            raise ConfigError("n must be >= 10")
        if self.trial_count < 1:
            raise ConfigError("trial_count must be >= 1")
        for name in ("gamma", "eta", "zeta"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name}={v} outside [0,1]")
        if self.gamma <= 0 or self.eta <= 0:
            raise ConfigError("gamma and eta must be positive (guards and exits must exist)")
        if self.zeta > min(self.gamma, self.eta):
            raise ConfigError(
                f"infeasible targets: zeta={self.zeta} exceeds min(gamma, eta)="
                f"{min(self.gamma, self.eta)} (guard-exit bandwidth is a subset of both)")
        if self.gamma + self.eta - self.zeta > 1.0 + 1e-12:
            raise ConfigError("infeasible targets: gamma + eta - zeta exceeds 1")
        for name in ("bw_median_gx", "bw_median_g0", "bw_p90_gx", "bw_p90_g0"):
            if getattr(self, name) <= 0:
                raise ConfigError(f"{name} must be positive")
        if self.bw_p90_gx <= self.bw_median_gx or self.bw_p90_g0 <= self.bw_median_g0:
            raise ConfigError("p90 anchors must exceed the medians")
        for name in ("rel_mean", "presence_mean"):
            v = getattr(self, name)
            if not 0.05 < v < 0.995:
                raise ConfigError(f"{name}={v} outside (0.05, 0.995)")


def _lognormal_params(median: float, p90: float) -> tuple[float, float]:
    mu = math.log(median)
    sigma = math.log(p90 / median) / _Z90
    return mu, sigma


def _winsorized_lognormal_mean(mu: float, sigma: float, cap: float) -> float:
    # E[min(X, cap)] for X ~ LogNormal(mu, sigma)
    ln_cap = math.log(cap)
    phi = lambda x: 0.5 * (1.0 + math.erf(x / math.sqrt(2.0)))
    below = math.exp(mu + sigma * sigma / 2.0) * phi((ln_cap - mu - sigma * sigma) / sigma)
    return below + cap * (1.0 - phi((ln_cap - mu) / sigma))


def _class_bw_params(config: NetworkGenConfig) -> dict[str, tuple[float, float]]:
    gx = _lognormal_params(config.bw_median_gx, config.bw_p90_gx)
    g0 = _lognormal_params(config.bw_median_g0, config.bw_p90_g0)
    # No published anchors for exit-only or unflagged relays: exit-only
    # reuses the guard-exit shape, unflagged relays skew smaller.
    none = _lognormal_params(0.6 * min(config.bw_median_gx, config.bw_median_g0), 2.0e6)
    return {"gx": gx, "g0": g0, "e0": gx, "none": none}


def _beta_mixture(rng, component, means, concentrations):
    out = np.empty(component.shape[0])
    for ci, name in enumerate(("dead", "flaky", "solid")):
        mask = component == ci
        if not mask.any():
            continue
        mean, conc = means[name], concentrations[name]
        out[mask] = rng.beta(mean * conc, (1.0 - mean) * conc, size=mask.sum())
    return np.clip(out, 0.0, 1.0)


def _solve_solid_mean(overall, dead_mean, flaky_mean):
    solid = (overall - _DEAD_SHARE * dead_mean - _FLAKY_SHARE * flaky_mean) / _SOLID_SHARE
    return min(max(solid, 0.05), 0.9995)


def _greedy_reflag(bandwidth, klass, targets, tol=0.005, max_iters=400):
    """Move single relays between flag classes until measured bandwidth
    ratios are within ``tol`` of (gamma, eta, zeta).  Returns the class
    vector; raises GenerationError if the residual stays above 0.02."""
    bw = bandwidth.astype(np.float64)
    T = bw.sum()
    g_of = np.array([1.0, 1.0, 0.0, 0.0])   # guard membership per class
    e_of = np.array([1.0, 0.0, 1.0, 0.0])   # exit membership per class
    z_of = np.array([1.0, 0.0, 0.0, 0.0])   # guard-exit membership per class
    tg, te, tz = targets
    klass = klass.copy()

    for _ in range(max_iters):
        G = bw[g_of[klass] > 0].sum()
        E = bw[e_of[klass] > 0].sum()
        Z = bw[z_of[klass] > 0].sum()
        err_g, err_e, err_z = G / T - tg, E / T - te, Z / T - tz
        if max(abs(err_g), abs(err_e), abs(err_z)) <= tol:
            return klass
        # Candidate error after flipping relay i to class c, for all (i, c).
        dg = (g_of[None, :] - g_of[klass][:, None]) * bw[:, None] / T
        de = (e_of[None, :] - e_of[klass][:, None]) * bw[:, None] / T
        dz = (z_of[None, :] - z_of[klass][:, None]) * bw[:, None] / T
        cand = np.abs(err_g + dg) + np.abs(err_e + de) + np.abs(err_z + dz)
        best = np.unravel_index(np.argmin(cand), cand.shape)
        if cand[best] >= abs(err_g) + abs(err_e) + abs(err_z) - 1e-15:
            break
        klass[best[0]] = best[1]

    G = bw[g_of[klass] > 0].sum()
    E = bw[e_of[klass] > 0].sum()
    Z = bw[z_of[klass] > 0].sum()
    worst = max(abs(G / T - tg), abs(E / T - te), abs(Z / T - tz))
    if worst > 0.02:
        raise GenerationError(
            f"flag assignment missed ratio targets by {worst:.4f} (> 0.02); "
            "increase n or adjust anchors")
    return klass


def generate_synthetic_network(config: NetworkGenConfig, seed: int) -> RelayTable:
    """Generate a relay population whose bandwidth ratios hit the targets.

    Deterministic for a fixed (config, seed).  Measured gamma/eta/zeta land
    within +-0.02 absolute of the targets or GenerationError is raised.
    """
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x6e657477]))
    n = config.n

    shares = {
        "gx": config.zeta,
        "g0": config.gamma - config.zeta,
        "e0": config.eta - config.zeta,
        "none": 1.0 - config.gamma - config.eta + config.zeta,
    }
    bw_params = _class_bw_params(config)
    means = {c: _winsorized_lognormal_mean(*bw_params[c], _BW_CAP) for c in _CLASSES}
    q = np.array([shares[c] / means[c] for c in _CLASSES])
    q = q / q.sum()

    klass = rng.choice(len(_CLASSES), size=n, p=q)
    bandwidth = np.empty(n)
    for ci, cname in enumerate(_CLASSES):
        mask = klass == ci
        mu, sigma = bw_params[cname]
        bandwidth[mask] = rng.lognormal(mu, sigma, size=mask.sum())
    bandwidth = np.maximum(np.minimum(bandwidth, _BW_CAP), 1.0).round().astype(np.int64)

    klass = _greedy_reflag(bandwidth, klass,
                           (config.gamma, config.eta, config.zeta))
    guard = np.isin(klass, (0, 1))
    exit_ = np.isin(klass, (0, 2))

    # Dead/flaky membership concentrates among low-bandwidth relays (the
    # well-provisioned end of the network is also the stable end), with the
    # population shares preserved: P(bad | rank q) ~ 3 (1-q)^2 * share.
    q = (np.argsort(np.argsort(bandwidth, kind="stable"), kind="stable") + 0.5) / n
    tilt = 3.0 * (1.0 - q) ** 2
    p_dead = _DEAD_SHARE * tilt
    p_flaky = _FLAKY_SHARE * tilt
    u = rng.random(n)
    component = np.where(u < p_dead, 0, np.where(u < p_dead + p_flaky, 1, 2))
    rel_means = {"dead": _DEAD_REL_MEAN, "flaky": _FLAKY_REL_MEAN,
                 "solid": _solve_solid_mean(config.rel_mean, _DEAD_REL_MEAN, _FLAKY_REL_MEAN)}
    pres_means = {"dead": _DEAD_PRES_MEAN, "flaky": _FLAKY_PRES_MEAN,
                  "solid": _solve_solid_mean(config.presence_mean, _DEAD_PRES_MEAN, _FLAKY_PRES_MEAN)}
    reliability = _beta_mixture(rng, component, rel_means, _REL_CONC)
    presence = _beta_mixture(rng, component, pres_means, _PRES_CONC)

    width = max(5, len(str(n - 1)))
    ids = tuple(f"r{i:0{width}d}" for i in range(n))
    table = RelayTable(ids, bandwidth, guard, exit_, reliability, presence,
                       generation_seed=int(seed))

    summary = network_stats(table)
    for name, got, want in (("gamma", summary.gamma, config.gamma),
                            ("eta", summary.eta, config.eta),
                            ("zeta", summary.zeta, config.zeta)):
        if abs(got - want) > 0.02:
            raise GenerationError(f"measured {name}={got:.4f} misses target {want} by > 0.02")
    return table


def generate_lifecycle_traces(table: RelayTable, trial_count: int, seed: int) -> TraceSet:
    """Draw per-(relay, trial) statuses: absent with 1 - presence, else
    success with probability reliability.  Trials are independent."""
    if trial_count < 1:
        raise ConfigError("trial_count must be >= 1")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x74726163]))
    n = len(table)
    present = rng.random((n, trial_count)) < table.presence[:, None]
    success = rng.random((n, trial_count)) < table.reliability[:, None]
    statuses = np.where(present, np.where(success, 1, 0), -1).astype(np.int8)
    return TraceSet(table.ids, statuses)


def network_stats(table: RelayTable) -> BandwidthSummary:
    """Sum bandwidth by flag membership and derive the dimensionless ratios."""
    bw = table.bandwidth.astype(np.float64)
    T = float(bw.sum())
    G = float(bw[table.guard_flag].sum())
    E = float(bw[table.exit_flag].sum())
    Z = float(bw[table.guard_flag & table.exit_flag].sum())
    return BandwidthSummary(
        G=G, E=E, T=T, G0=G - Z, E0=E - Z, Z=Z,
        gamma=G / T, eta=E / T, zeta=Z / T,
        gamma0=(G - Z) / T, eta0=(E - Z) / T)


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

_TABLE_HEADER = "id,bandwidth_bps,guard,exit,reliability,presence"
_TRACE_HEADER = "relay_id,trial,status"


def write_relay_table(table: RelayTable, path) -> None:
    lines = [_TABLE_HEADER]
    for i, rid in enumerate(table.ids):
        # float repr round-trips exactly
        lines.append(f"{rid},{table.bandwidth[i]},{int(table.guard_flag[i])},"
                     f"{int(table.exit_flag[i])},{float(table.reliability[i])!r},"
                     f"{float(table.presence[i])!r}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_relay_table(path) -> RelayTable:
    ids, bw, guard, exit_, rel, pres = [], [], [], [], [], []
    seen = set()
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != _TABLE_HEADER:
            raise ParseError(f"expected header {_TABLE_HEADER!r}, got {header!r}", line=1)
        for lineno, raw in enumerate(fh, start=2):
            raw = raw.strip()
            if not raw:
                continue
            parts = raw.split(",")
            if len(parts) != 6:
                raise ParseError(f"expected 6 fields, got {len(parts)}", line=lineno)
            rid, bw_s, g_s, e_s, rel_s, pres_s = parts
            if rid in seen:
                raise ParseError(f"duplicate relay id {rid!r}", line=lineno)
            seen.add(rid)
            try:
                bw_v = int(bw_s)
                g_v, e_v = _parse_bool(g_s), _parse_bool(e_s)
                rel_v, pres_v = float(rel_s), float(pres_s)
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            if bw_v <= 0:
                raise ParseError(f"bandwidth must be positive, got {bw_v}", line=lineno)
            if not (0.0 <= rel_v <= 1.0 and 0.0 <= pres_v <= 1.0):
                raise ParseError("reliability/presence outside [0,1]", line=lineno)
            ids.append(rid); bw.append(bw_v); guard.append(g_v); exit_.append(e_v)
            rel.append(rel_v); pres.append(pres_v)
    if not ids:
        raise ParseError("relay table has no rows")
    return RelayTable(tuple(ids), np.array(bw), np.array(guard), np.array(exit_),
                      np.array(rel), np.array(pres))


def _parse_bool(s: str) -> bool:
    if s == "0":
        return False
    if s == "1":
        return True
    raise ValueError(f"boolean field must be 0 or 1, got {s!r}")


def write_traces(traces: TraceSet, path) -> None:
    # Rows sorted by (trial, relay_id); relay ids are zero-padded so the
    # lexicographic sort is also the numeric one.
    order = np.argsort(np.array(traces.relay_ids))
    lines = [_TRACE_HEADER]
    for t in range(traces.trial_count):
        col = traces.statuses[:, t]
        for i in order:
            lines.append(f"{traces.relay_ids[i]},{t},{col[i]}")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def read_traces(path, table: RelayTable | None = None) -> TraceSet:
    """Parse a trace CSV.  When ``table`` is given, relay ids must be a
    subset of the table's ids."""
    entries: dict[str, dict[int, int]] = {}
    known = set(table.ids) if table is not None else None
    max_trial = -1
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != _TRACE_HEADER:
            raise ParseError(f"expected header {_TRACE_HEADER!r}, got {header!r}", line=1)
        for lineno, raw in enumerate(fh, start=2):
            raw = raw.strip()
            if not raw:
                continue
            parts = raw.split(",")
            if len(parts) != 3:
                raise ParseError(f"expected 3 fields, got {len(parts)}", line=lineno)
            rid, trial_s, status_s = parts
            if known is not None and rid not in known:
                raise ParseError(f"unknown relay id {rid!r}", line=lineno)
            try:
                trial, status = int(trial_s), int(status_s)
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
            if status not in (-1, 0, 1):
                raise ParseError(f"status must be -1, 0 or 1, got {status}", line=lineno)
            if trial < 0:
                raise ParseError(f"trial must be >= 0, got {trial}", line=lineno)
            per_relay = entries.setdefault(rid, {})
            if trial in per_relay:
                raise ParseError(f"duplicate (relay, trial) pair ({rid!r}, {trial})",
                                 line=lineno)
            per_relay[trial] = status
            max_trial = max(max_trial, trial)
    if not entries:
        raise ParseError("trace file has no rows")
    trial_count = max_trial + 1
    relay_ids = tuple(sorted(entries))
    statuses = np.empty((len(relay_ids), trial_count), dtype=np.int8)
    for i, rid in enumerate(relay_ids):
        per_relay = entries[rid]
        if len(per_relay) != trial_count:
            missing = next(t for t in range(trial_count) if t not in per_relay)
            raise ParseError(
                f"relay {rid!r} is missing trial {missing} (every relay needs "
                f"all {trial_count} trials)")
        for t, s in per_relay.items():
            statuses[i, t] = s
    return TraceSet(relay_ids, statuses)


_CONFIG_KEYS = {f.name for f in fields(NetworkGenConfig)}
_INT_KEYS = {"n", "trial_count"}


def read_gen_config(path) -> NetworkGenConfig:
    """Parse the flat key=value generator config format."""
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"expected key=value, got {line!r}", line=lineno)
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in _CONFIG_KEYS:
                raise ParseError(f"unknown key {key!r}", line=lineno)
            if key in values:
                raise ParseError(f"duplicate key {key!r}", line=lineno)
            try:
                values[key] = int(value) if key in _INT_KEYS else float(value)
            except ValueError as exc:
                raise ParseError(str(exc), line=lineno) from exc
    return NetworkGenConfig(**values)


def write_gen_config(config: NetworkGenConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for f in fields(NetworkGenConfig):
            fh.write(f"{f.name}={getattr(config, f.name)!r}\n".replace("'", ""))


def perfect_variant(table: RelayTable) -> RelayTable:
    """Copy of the table with reliability = presence = 1 for every relay."""
    ones = np.ones(len(table))
    return replace(table, reliability=ones.copy(), presence=ones.copy())
