"""Closed-form model of attack effectiveness.

Given network ratios (gamma, eta, zeta), compromise ratios (g, e, z) and
the attacker's kill/permit probabilities, this module evaluates:

* the probability that a compromised relay is selected per position
  (``g_star``, ``m_star``, ``e_star``) under bandwidth weighting;
* ``u_j``, the probability a single build attempt is unsuccessful when j of
  the client's 3 guards are compromised;
* the eventual-control probability: the chance that the first successful
  circuit a client builds (within an attempt cap) is attacker-controlled.

All quantities use ratio identities: gamma0' = g*gamma - z*zeta and
eta0' = e*eta - z*zeta.  Mildly negative derived ratios are tolerated --
published compromise conventions (e.g. z = 1.5 g on a network with
eta = 0.40, zeta = 0.30) overdraw the exit-only share by a fraction of a
percent -- but inputs are rejected whenever a resulting selection
probability leaves [0, 1].
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, DegenerateNetworkError, InfeasibleParametersError
from .pathsel import WeightSet

_PROB_SLACK = 1e-9
# Geometric series (u^K - 1)/(u - 1) switches to its limit K at u = 1.
_GEO_SINGULARITY_TOL = 1e-12

SWEEPABLE = ("g", "e", "p_kill", "p_permit")


@dataclass(frozen=True)
class AnalyticInputs:
    gamma: float
    eta: float
    zeta: float
    g: float
    e: float
    z: float
    p_kill: float = 1.0
    p_permit: float = 1.0
    p_kill_aware: float | None = None
    p_kill_unaware: float | None = None
    attempt_cap: int = 120
    exit_only_context: bool = False

    def __post_init__(self):
        for name in ("gamma", "eta", "zeta", "g", "e", "z",
                     "p_kill", "p_permit"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name}={v} outside [0,1]")
        for name in ("p_kill_aware", "p_kill_unaware"):
            v = getattr(self, name)
            if v is None:
                object.__setattr__(self, name, self.p_kill)
            elif not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name}={v} outside [0,1]")
        if self.zeta > min(self.gamma, self.eta) + 1e-12:
            raise ConfigError("zeta cannot exceed min(gamma, eta)")
        if self.gamma + self.eta - self.zeta > 1.0 + 1e-12:
            raise ConfigError("gamma + eta - zeta cannot exceed 1")
        if self.attempt_cap < 1:
            raise ConfigError("attempt_cap must be >= 1")

    @property
    def gamma0(self):
        return self.gamma - self.zeta

    @property
    def eta0(self):
        return self.eta - self.zeta

    @property
    def zeta_c(self):
        return self.z * self.zeta

    @property
    def gamma0_c(self):
        return self.g * self.gamma - self.z * self.zeta

    @property
    def eta0_c(self):
        return self.e * self.eta - self.z * self.zeta

    def weights(self) -> WeightSet:
        return WeightSet.from_ratios(self.gamma, self.eta)


@dataclass(frozen=True)
class CompromiseProbs:
    g_star: float
    m_star: float
    e_star: float


def compromise_probs(inputs: AnalyticInputs) -> CompromiseProbs:
    """Per-position compromised-selection probabilities.

        g* = (gamma0' + zeta' w_E0) / (gamma0 + zeta w_E0)
        e* = (eta0'   + zeta' w_G0) / (eta0   + zeta w_G0)
        m  = (gamma0' w_G0 + eta0' w_E0 + zeta' w_Z)
             / (1 - gamma0 (1-w_G0) - eta0 (1-w_E0) - zeta (1-w_Z))
    """
    w = inputs.weights()
    den_g = inputs.gamma0 + inputs.zeta * w.w_E0
    den_e = inputs.eta0 + inputs.zeta * w.w_G0
    den_m = 1.0 - (inputs.gamma0 * (1.0 - w.w_G0)
                   + inputs.eta0 * (1.0 - w.w_E0)
                   + inputs.zeta * (1.0 - w.w_Z))
    if den_g <= 0.0 or den_e <= 0.0 or den_m <= 0.0:
        raise DegenerateNetworkError(
            "a selection denominator is zero; the network has no guard or "
            "no exit bandwidth")
    g_star = (inputs.gamma0_c + inputs.zeta_c * w.w_E0) / den_g
    e_star = (inputs.eta0_c + inputs.zeta_c * w.w_G0) / den_e
    m_star = (inputs.gamma0_c * w.w_G0 + inputs.eta0_c * w.w_E0
              + inputs.zeta_c * w.w_Z) / den_m
    for name, v in (("g_star", g_star), ("m_star", m_star), ("e_star", e_star)):
        if not -_PROB_SLACK <= v <= 1.0 + _PROB_SLACK:
            raise InfeasibleParametersError(
                f"{name}={v:.6g} outside [0,1]: compromise ratios (g={inputs.g}, "
                f"e={inputs.e}, z={inputs.z}) are mutually inconsistent on this network")
    clamp = lambda v: min(max(v, 0.0), 1.0)
    return CompromiseProbs(clamp(g_star), clamp(m_star), clamp(e_star))


def unsuccessful_prob(j: int, inputs: AnalyticInputs,
                      probs: CompromiseProbs | None = None) -> float:
    """Probability one build attempt fails with j compromised guards.

    Base form:
        u_j = (1 - p_permit) (j/3) e*
              + p_kill [ (j/3)(1-e*) + (1-j/3) e* + (1-j/3)(1-e*) m ]

    With ``exit_only_context`` the kill term splits: a compromised exit
    applies p_kill_aware to the (1-j/3) e* share, everything else (relays
    that cannot observe the context) applies p_kill_unaware.
    """
    if j not in (0, 1, 2, 3):
        raise ConfigError("j must be one of 0..3")
    p = probs if probs is not None else compromise_probs(inputs)
    frac = j / 3.0
    controlled = frac * p.e_star
    out = (1.0 - inputs.p_permit) * controlled
    if inputs.exit_only_context:
        out += inputs.p_kill_aware * (1.0 - frac) * p.e_star
        out += inputs.p_kill_unaware * (frac * (1.0 - p.e_star)
                                        + (1.0 - frac) * (1.0 - p.e_star) * p.m_star)
    else:
        out += inputs.p_kill * (frac * (1.0 - p.e_star)
                                + (1.0 - frac) * p.e_star
                                + (1.0 - frac) * (1.0 - p.e_star) * p.m_star)
    return out


def _geometric_factor(u: float, cap: int) -> float:
    if abs(u - 1.0) < _GEO_SINGULARITY_TOL:
        return float(cap)
    return (1.0 - u ** cap) / (1.0 - u)


def eventual_control_prob(inputs: AnalyticInputs) -> float:
    """Probability the client's first successful circuit is controlled.

    Sums over j = 1..3 compromised guards in the client's guard list:

        sum_j C(3,j) (1-g*)^(3-j) (g*)^j
              * p_permit (j/3) e* * (u_j^K - 1)/(u_j - 1)
    """
    probs = compromise_probs(inputs)
    if probs.g_star == 0.0:
        return 0.0
    terms = []
    for j in (1, 2, 3):
        u = unsuccessful_prob(j, inputs, probs)
        weight = math.comb(3, j) * (1.0 - probs.g_star) ** (3 - j) * probs.g_star ** j
        per_attempt = inputs.p_permit * (j / 3.0) * probs.e_star
        terms.append(weight * per_attempt * _geometric_factor(u, inputs.attempt_cap))
    return min(max(math.fsum(terms), 0.0), 1.0)


@dataclass(frozen=True)
class SweepResult:
    axis1_name: str
    axis1_values: tuple[float, ...]
    axis2_name: str
    axis2_values: tuple[float, ...]
    values: np.ndarray  # shape (len(axis1), len(axis2)); axis1 indexes rows


def coupled_z(g: float, e: float, factor: float = 1.5) -> float:
    """Guard-exit compromise ratio used when sweeping g or e.

    The preferred-guard-exit strategy yields z proportional to the smaller
    target (the guard-exit phase stops when the first target is reached),
    so sweeps couple z to min(g, e).
    """
    return min(factor * min(g, e), 1.0)


def sweep(base: AnalyticInputs, axis1_name: str, axis1_values,
          axis2_name: str, axis2_values, z_factor: float = 1.5,
          couple_z: bool = True) -> SweepResult:
    """Evaluate eventual_control_prob over a 2-D parameter grid.

    Rows follow axis1, columns axis2.  When g or e is swept and
    ``couple_z`` is set, z is re-derived per cell via ``coupled_z``.
    """
    for name in (axis1_name, axis2_name):
        if name not in SWEEPABLE:
            raise ConfigError(f"cannot sweep {name!r}; choose from {SWEEPABLE}")
    if axis1_name == axis2_name:
        raise ConfigError("sweep axes must differ")
    a1 = tuple(float(v) for v in axis1_values)
    a2 = tuple(float(v) for v in axis2_values)
    values = np.empty((len(a1), len(a2)))
    for i, v1 in enumerate(a1):
        for k, v2 in enumerate(a2):
            point = replace(base, **{axis1_name: v1, axis2_name: v2})
            if couple_z and ("g" in (axis1_name, axis2_name)
                             or "e" in (axis1_name, axis2_name)):
                point = replace(point, z=coupled_z(point.g, point.e, z_factor))
            values[i, k] = eventual_control_prob(point)
    return SweepResult(axis1_name, a1, axis2_name, a2, values)
