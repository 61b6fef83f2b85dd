import itertools

import numpy as np
import pytest
from scipy import stats as sstats

from oniondos import pathsel
from oniondos.errors import NoEligibleRelayError
from oniondos.pathsel import Position, WeightSet

from conftest import make_table


GUARD_ONLY = (True, False)
EXIT_ONLY = (False, True)
GUARD_EXIT = (True, True)
UNFLAGGED = (False, False)


def test_weight_formulas_at_published_ratios():
    w = WeightSet.from_ratios(0.70, 0.40)
    assert w.w_G0 == pytest.approx(1 - 1 / 2.1)
    assert w.w_E0 == pytest.approx(1 - 1 / 1.2)
    assert w.w_Z == pytest.approx((1 - 1 / 2.1) * (1 - 1 / 1.2))


def test_weights_clamp_below_one_third():
    w = WeightSet.from_ratios(0.2, 0.3)
    assert w.w_G0 == 0.0 and w.w_E0 == 0.0 and w.w_Z == 0.0
    w = WeightSet.from_ratios(1.0, 1 / 3)
    assert w.w_E0 == 0.0
    assert 0.0 <= w.w_G0 <= 1.0


def test_position_weight_table():
    w = WeightSet.from_ratios(0.70, 0.40)
    cases = {
        (GUARD_ONLY, Position.GUARD): 1.0,
        (EXIT_ONLY, Position.GUARD): 0.0,
        (GUARD_EXIT, Position.GUARD): w.w_E0,
        (UNFLAGGED, Position.GUARD): 0.0,
        (GUARD_ONLY, Position.MIDDLE): w.w_G0,
        (EXIT_ONLY, Position.MIDDLE): w.w_E0,
        (GUARD_EXIT, Position.MIDDLE): w.w_Z,
        (UNFLAGGED, Position.MIDDLE): 1.0,
        (GUARD_ONLY, Position.EXIT): 0.0,
        (EXIT_ONLY, Position.EXIT): 1.0,
        (GUARD_EXIT, Position.EXIT): w.w_G0,
        (UNFLAGGED, Position.EXIT): 0.0,
    }
    for (flags, position), expected in cases.items():
        assert pathsel.position_weight(*flags, position, w) == expected


def _four_relay_table():
    return make_table([
        ("g", 1000, True, False, 1.0, 1.0),
        ("e", 2000, False, True, 1.0, 1.0),
        ("x", 3000, True, True, 1.0, 1.0),
        ("m", 4000, False, False, 1.0, 1.0),
    ])


def test_selection_distribution_middle_matches_hand_computation():
    table = _four_relay_table()
    # gamma = 4000/10000, eta = 5000/10000 -> w_G0 = 1-1/1.2, w_E0 = 1-1/1.5
    w_g0 = 1 - 1 / 1.2
    w_e0 = 1 - 1 / 1.5
    weighted = {"g": 1000 * w_g0, "e": 2000 * w_e0, "x": 3000 * w_g0 * w_e0,
                "m": 4000 * 1.0}
    total = sum(weighted.values())
    dist = pathsel.selection_distribution(table, Position.MIDDLE)
    assert set(dist) == set(weighted)
    for rid, wv in weighted.items():
        assert dist[rid] == pytest.approx(wv / total, abs=1e-12)
    assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)


def test_selection_distribution_single_and_symmetric():
    single = make_table([("a", 10, True, True, 1, 1), ("b", 10, False, False, 1, 1)])
    assert pathsel.selection_distribution(single, Position.EXIT) == {"a": 1.0}
    pair = make_table([("a", 500, True, False, 1, 1), ("b", 500, True, False, 1, 1),
                       ("e", 100, False, True, 1, 1)])
    dist = pathsel.selection_distribution(pair, Position.GUARD)
    assert dist["a"] == pytest.approx(0.5) and dist["b"] == pytest.approx(0.5)


def test_selection_distribution_exclusions():
    table = _four_relay_table()
    dist = pathsel.selection_distribution(table, Position.EXIT, exclude={"e"})
    assert "e" not in dist and "g" not in dist and "m" not in dist
    assert dist["x"] == pytest.approx(1.0)
    with pytest.raises(NoEligibleRelayError):
        pathsel.selection_distribution(table, Position.EXIT, exclude={"e", "x"})


def _sequential_inclusion_oracle(weights, k=3):
    """Exact marginal inclusion probabilities for sequential sampling
    without replacement, by enumerating ordered k-tuples."""
    ids = list(weights)
    total = {rid: 0.0 for rid in ids}
    for perm in itertools.permutations(ids, k):
        p = 1.0
        remaining = sum(weights.values())
        for rid in perm:
            p *= weights[rid] / remaining
            remaining -= weights[rid]
        for rid in perm:
            total[rid] += p
    return total


def test_choose_guard_list_matches_sequential_oracle():
    table = make_table([
        ("g0", 1000, True, False, 1, 1),
        ("g1", 2500, True, False, 1, 1),
        ("g2", 400, True, False, 1, 1),
        ("g3", 1800, True, False, 1, 1),
        ("g4", 900, True, False, 1, 1),
        ("e0", 700, False, True, 1, 1),
    ])
    weights = {"g0": 1000, "g1": 2500, "g2": 400, "g3": 1800, "g4": 900}
    expected = _sequential_inclusion_oracle(weights)
    rng = np.random.default_rng(123)
    draws = 100_000
    counts = {rid: 0 for rid in weights}
    for _ in range(draws):
        for rid in pathsel.choose_guard_list(table, rng).guards:
            counts[rid] += 1
    for rid, p in expected.items():
        sigma = np.sqrt(draws * p * (1 - p))
        assert abs(counts[rid] - draws * p) <= 3 * sigma, rid


def test_choose_guard_list_edge_cases():
    exactly3 = make_table([
        ("g0", 10, True, False, 1, 1), ("g1", 20, True, False, 1, 1),
        ("g2", 30, True, False, 1, 1), ("e", 5, False, True, 1, 1)])
    gl = pathsel.choose_guard_list(exactly3, np.random.default_rng(0))
    assert set(gl.guards) == {"g0", "g1", "g2"}

    rng1 = np.random.default_rng(42)
    rng2 = np.random.default_rng(42)
    big = _four_relay_table()
    with pytest.raises(NoEligibleRelayError):
        pathsel.choose_guard_list(big, rng1)  # only 2 guard-flagged relays

    table = exactly3
    assert (pathsel.choose_guard_list(table, rng1).guards
            == pathsel.choose_guard_list(table, rng2).guards)


def _rich_table():
    rows = [(f"g{i}", 1000 + 137 * i, True, False, 1.0, 1.0) for i in range(5)]
    rows += [(f"e{i}", 800 + 211 * i, False, True, 1.0, 1.0) for i in range(6)]
    rows += [(f"m{i}", 500 + 97 * i, False, False, 1.0, 1.0) for i in range(9)]
    return make_table(rows)


def test_build_path_distinct_relays():
    table = _rich_table()
    guard_list = pathsel.GuardList(("g0", "g1", "g2"))
    rng = np.random.default_rng(7)
    for _ in range(10_000):
        path = pathsel.build_path(table, guard_list, rng)
        assert len(set(path)) == 3


def test_build_path_entry_uniform_over_guard_list():
    table = _rich_table()
    guard_list = pathsel.GuardList(("g0", "g1", "g2"))
    rng = np.random.default_rng(8)
    counts = {g: 0 for g in guard_list.guards}
    n = 10_000
    for _ in range(n):
        entry, _, _ = pathsel.build_path(table, guard_list, rng)
        counts[entry] += 1
    for c in counts.values():
        assert abs(c - n / 3) <= 3 * np.sqrt(n * (1 / 3) * (2 / 3))


def test_build_path_exit_marginal_matches_distribution_oracle():
    # eta < 1/3 here, so exit-flagged relays have zero middle weight and the
    # guard list is guard-only: exclusions never perturb the exit support
    # and the exit marginal equals the position distribution exactly.
    table = _rich_table()
    available = {rid for rid in table.ids if rid not in {"e5", "m8"}}
    guard_list = pathsel.GuardList(("g0", "g1", "g2"))
    expected = pathsel.selection_distribution(table, Position.EXIT,
                                              available=available)
    assert "e5" not in expected
    rng = np.random.default_rng(9)
    n = 20_000
    counts = {rid: 0 for rid in expected}
    for _ in range(n):
        _, _, exit_id = pathsel.build_path(table, guard_list, rng,
                                           available=available)
        counts[exit_id] += 1
    observed = [counts[rid] for rid in sorted(expected)]
    wanted = [n * expected[rid] for rid in sorted(expected)]
    assert sstats.chisquare(observed, wanted).pvalue > 0.01


def test_build_path_no_eligible_exit():
    table = make_table([
        ("g0", 10, True, False, 1, 1), ("g1", 10, True, False, 1, 1),
        ("g2", 10, True, False, 1, 1), ("m0", 10, False, False, 1, 1),
        ("e0", 10, False, True, 1, 1)])
    guard_list = pathsel.GuardList(("g0", "g1", "g2"))
    available = set(table.ids) - {"e0"}
    with pytest.raises(NoEligibleRelayError):
        pathsel.build_path(table, guard_list, np.random.default_rng(0),
                           available=available)


def test_distributions_normalize_on_generated_table(default_table):
    for position in Position:
        dist = pathsel.selection_distribution(default_table, position)
        assert sum(dist.values()) == pytest.approx(1.0, abs=1e-12)
        flags = {Position.GUARD: default_table.guard_flag,
                 Position.EXIT: default_table.exit_flag}
        if position in flags:
            eligible = {default_table.ids[i]
                        for i in np.nonzero(flags[position])[0]}
            assert set(dist) <= eligible
