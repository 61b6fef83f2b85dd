import numpy as np
import pytest

from oniondos import detect_prob
from oniondos.attacker import (AttackerSpec, ContextMode, Strategy,
                               compromise_relays)
from oniondos.detect_prob import (DetectionConfig, evaluate, guilt_phase,
                                  run_detection, run_detection_experiment,
                                  suspect_phase)
from oniondos.errors import ConfigError

from conftest import make_table, make_traces


def _fixture(statuses_by_relay, guard=("G",), exit_=("E",)):
    rows = []
    for rid in statuses_by_relay:
        rows.append((rid, 1000, rid in guard or rid.startswith("g"),
                     rid in exit_ or rid.startswith("e"), 1.0, 1.0))
    table = make_table(rows)
    statuses = np.array([statuses_by_relay[rid] for rid in table.ids],
                        dtype=np.int8)
    return table, make_traces(table, statuses)


def test_always_failing_relay_is_suspect_at_any_cutoff():
    table, traces = _fixture({
        "G": [0, 0, 0, 0, 0, 1, 1, 1, 1, 1],
        "E": [1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
    })
    for scr in (0.1, 0.5, 1.0):
        cfg = DetectionConfig(scr=scr, suspect_trials=5, guilt_trials=5)
        res = suspect_phase(traces, table, AttackerSpec(), cfg, 0,
                            np.random.default_rng(0))
        assert "G" in res.suspects_guard
        assert "E" not in res.suspects_exit


def test_single_success_clears_relay_at_full_cutoff():
    table, traces = _fixture({
        "G": [0, 0, 1, 0, 0, 1, 1, 1, 1, 1],
        "E": [1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
    })
    cfg = DetectionConfig(scr=1.0, suspect_trials=5, guilt_trials=5)
    res = suspect_phase(traces, table, AttackerSpec(), cfg, 0,
                        np.random.default_rng(0))
    assert "G" not in res.suspects_guard


def test_never_present_relay_excluded():
    table, traces = _fixture({
        "G": [-1, -1, -1, -1, -1, 1, 1, 1, 1, 1],
        "E": [1, 1, 1, 1, 1, 1, 1, 1, 1, 1],
    })
    cfg = DetectionConfig(scr=1.0, suspect_trials=5, guilt_trials=5)
    res = suspect_phase(traces, table, AttackerSpec(), cfg, 0,
                        np.random.default_rng(0))
    assert "G" not in res.screened
    assert "G" not in res.suspects


def test_naive_reliable_attacker_no_suspect_false_negatives(default_table,
                                                            default_traces):
    comp = compromise_relays(default_table, 0.10, 0.10, Strategy.RELIABLE)
    spec = AttackerSpec(target_g=.10, target_e=.10,
                        strategy=Strategy.RELIABLE).with_compromised(comp)
    rng = np.random.default_rng(0)
    for l in (1, 5, 15):
        cfg = DetectionConfig(scr=1.0, suspect_trials=l, guilt_trials=1)
        res = suspect_phase(default_traces, default_table, spec, cfg, 10, rng)
        rates = evaluate(res.suspects, res.screened, comp)
        assert rates.fn == 0.0


def test_perfect_pair_guilty_at_zero_cutoff():
    table, traces = _fixture({
        "G": [0, 0, 0, 0, 0, 1, 1, 1, 1, 1],
        "E": [0, 0, 0, 0, 0, 1, 1, 1, 1, 1],
    })
    spec = AttackerSpec(target_g=1, target_e=1, p_kill=1.0,
                        p_permit=1.0).with_compromised({"G", "E"})
    cfg = DetectionConfig(scr=1.0, gcr=0.0, suspect_trials=5, guilt_trials=5)
    report = run_detection(traces, table, spec, cfg, 0, np.random.default_rng(1))
    # both relays fail every probe in the suspect window (killed), then pair
    # up perfectly under permit in the guilt window
    assert report.guilty == {"G", "E"}


def test_unreliable_honest_suspect_rarely_guilty():
    # Low-reliability honest relay: suspect often, guilty almost never.
    rng_tables = np.random.default_rng(0)
    guilty_count = 0
    for seed in range(100):
        rows = [("g0", 1000, True, False, 0.05, 1.0),
                ("e0", 1000, False, True, 1.0, 1.0),
                ("e1", 1000, False, True, 0.05, 1.0)]
        table = make_table(rows)
        rng = np.random.default_rng(seed)
        statuses = np.where(rng.random((3, 10)) < [[0.05], [1.0], [0.05]], 1, 0)
        traces = make_traces(table, statuses.astype(np.int8))
        cfg = DetectionConfig(scr=0.5, gcr=0.0, suspect_trials=5, guilt_trials=5)
        report = run_detection(traces, table, AttackerSpec(), cfg, 0, rng)
        guilty_count += "g0" in report.guilty
    assert guilty_count <= 10


def test_guilt_skips_pairs_with_no_copresence():
    table, traces = _fixture({
        "G": [0, 0, 0, 0, 0, -1, -1, -1, -1, -1],
        "E": [0, 0, 0, 0, 0, 1, 1, 1, 1, 1],
    })
    cfg = DetectionConfig(scr=1.0, gcr=1.0, suspect_trials=5, guilt_trials=5)
    sus = suspect_phase(traces, table, AttackerSpec(), cfg, 0,
                        np.random.default_rng(0))
    assert sus.suspects == {"G", "E"}
    guilt = guilt_phase(traces, table, AttackerSpec(), cfg, sus, 5,
                        np.random.default_rng(0))
    assert guilt.pair_rates == {}
    assert guilt.guilty == frozenset()
    assert "G" not in guilt.eligible


def test_guilty_subset_of_suspects(default_table, default_traces):
    comp = compromise_relays(default_table, 0.08, 0.08, Strategy.RELIABLE)
    spec = AttackerSpec(target_g=.08, target_e=.08, p_kill=.8, p_permit=.8,
                        strategy=Strategy.RELIABLE).with_compromised(comp)
    cfg = DetectionConfig(scr=0.4, gcr=0.3, suspect_trials=8, guilt_trials=8)
    rng = np.random.default_rng(5)
    sus = suspect_phase(default_traces, default_table, spec, cfg, 20, rng)
    guilt = guilt_phase(default_traces, default_table, spec, cfg, sus, 28, rng)
    assert guilt.guilty <= sus.suspects


def test_cutoff_monotonicity(default_table, default_traces):
    comp = compromise_relays(default_table, 0.08, 0.08, Strategy.RELIABLE)
    spec = AttackerSpec(target_g=.08, target_e=.08, p_kill=.8, p_permit=.8,
                        strategy=Strategy.RELIABLE).with_compromised(comp)
    suspects_by_scr = []
    for scr in (0.2, 0.5, 0.8):
        cfg = DetectionConfig(scr=scr, suspect_trials=8, guilt_trials=8)
        res = suspect_phase(default_traces, default_table, spec, cfg, 20,
                            np.random.default_rng(5))
        suspects_by_scr.append(res.suspects)
    assert suspects_by_scr[2] <= suspects_by_scr[1] <= suspects_by_scr[0]

    base_cfg = DetectionConfig(scr=0.4, suspect_trials=8, guilt_trials=8,
                               pair_sample=None)
    sus = suspect_phase(default_traces, default_table, spec, base_cfg, 20,
                        np.random.default_rng(5))
    guilty_by_gcr = []
    for gcr in (0.1, 0.4, 0.7):
        cfg = DetectionConfig(scr=0.4, gcr=gcr, suspect_trials=8,
                              guilt_trials=8, pair_sample=None)
        guilt = guilt_phase(default_traces, default_table, spec, cfg, sus, 28,
                            np.random.default_rng(6))
        guilty_by_gcr.append(guilt.guilty)
    assert guilty_by_gcr[0] <= guilty_by_gcr[1] <= guilty_by_gcr[2]


def test_evaluate_degenerate_detectors():
    eligible = {"a", "b", "c", "d"}
    comp = {"a", "b"}
    perfect = evaluate({"a", "b"}, eligible, comp)
    assert perfect.fp == 0.0 and perfect.fn == 0.0
    everything = evaluate(eligible, eligible, comp)
    assert everything.fp == 1.0 and everything.fn == 0.0
    undefined = evaluate(set(), set(), comp)
    assert undefined.fp is None and undefined.fn is None


def test_scr_sweep_false_positive_shift(default_traces, default_table):
    # Dropping the suspect cutoff from 1.0 to .25 roughly moves the honest
    # false-positive rate from ~10% to ~25% (+-.07 absolute).
    spec = AttackerSpec()
    results = {}
    for scr in (1.0, 0.25):
        cfg = DetectionConfig(scr=scr, suspect_trials=15, guilt_trials=5)
        fps = []
        for rep in range(60):
            rng = np.random.default_rng([21, rep])
            start = int(rng.integers(100 - 20 + 1))
            res = suspect_phase(default_traces, default_table, spec, cfg,
                                start, rng)
            fps.append(evaluate(res.suspects, res.screened, frozenset()).fp)
        results[scr] = float(np.median(fps))
    assert abs(results[1.0] - 0.10) <= 0.07
    assert abs(results[0.25] - 0.25) <= 0.07


def test_probe_budget_at_defaults(default_table, default_traces):
    comp = compromise_relays(default_table, 0.10, 0.10, Strategy.RELIABLE)
    spec = AttackerSpec(target_g=.10, target_e=.10,
                        strategy=Strategy.RELIABLE).with_compromised(comp)
    summary = run_detection_experiment(default_traces, default_table, spec,
                                       DetectionConfig(), repetitions=20, seed=1)
    assert max(r.probes_used for r in summary.reports) <= 17 * len(default_table)


def test_window_must_fit_traces(default_table, default_traces):
    cfg = DetectionConfig(suspect_trials=60, guilt_trials=60)
    with pytest.raises(ConfigError):
        run_detection_experiment(default_traces, default_table, AttackerSpec(),
                                 cfg, repetitions=1)
    with pytest.raises(ConfigError):
        suspect_phase(default_traces, default_table, AttackerSpec(),
                      DetectionConfig(suspect_trials=20), 90,
                      np.random.default_rng(0))


def test_frozen_guilt_trial_variant():
    table, traces = _fixture({
        "G": [0, 0, 1, 1, 1],
        "E": [0, 0, 1, 0, 0],
    })
    spec = AttackerSpec()
    sus = suspect_phase(traces, table, spec,
                        DetectionConfig(scr=1.0, suspect_trials=2, guilt_trials=3),
                        0, np.random.default_rng(0))
    assert sus.suspects == {"G", "E"}
    rolling = guilt_phase(traces, table, spec,
                          DetectionConfig(scr=1.0, gcr=0.5, suspect_trials=2,
                                          guilt_trials=3),
                          sus, 2, np.random.default_rng(0))
    frozen = guilt_phase(traces, table, spec,
                         DetectionConfig(scr=1.0, gcr=0.5, suspect_trials=2,
                                         guilt_trials=3, freeze_guilt_trial=True),
                         sus, 2, np.random.default_rng(0))
    # rolling window sees E fail twice (rate 2/3); frozen repeats trial 2
    # where both succeed (rate 0)
    assert rolling.pair_rates[("G", "E")] == pytest.approx(2 / 3)
    assert frozen.pair_rates[("G", "E")] == pytest.approx(0.0)


def test_context_aware_mode_labels_all_guards(default_table, default_traces):
    comp = compromise_relays(default_table, 0.05, 0.05, Strategy.RELIABLE)
    spec = AttackerSpec(target_g=.05, target_e=.05, p_kill=1.0,
                        p_kill_unaware=0.0, context_mode=ContextMode.EXIT_ONLY,
                        strategy=Strategy.RELIABLE).with_compromised(comp)
    cfg = DetectionConfig(scr=1.0, gcr=0.0, suspect_trials=5, guilt_trials=5,
                          label_all_guards=True)
    assert cfg.pair_sample is None  # forced exhaustive pairing
    rng = np.random.default_rng(3)
    sus = suspect_phase(default_traces, default_table, spec, cfg, 40, rng)
    guards_screened = {r for r in sus.screened
                       if default_table.guard_flag[default_table.index_of(r)]}
    assert guards_screened <= sus.suspects_guard
    # compromised guards never kill the guard-screen circuits, yet stay
    # reachable for guilt detection through the suspect pool
    comp_guards = {r for r in comp
                   if default_table.guard_flag[default_table.index_of(r)]}
    assert comp_guards & sus.screened <= sus.suspects_guard


def test_experiment_deterministic(default_table, default_traces):
    comp = compromise_relays(default_table, 0.05, 0.05, Strategy.RELIABLE)
    spec = AttackerSpec(target_g=.05, target_e=.05,
                        strategy=Strategy.RELIABLE).with_compromised(comp)
    a = run_detection_experiment(default_traces, default_table, spec,
                                 DetectionConfig(), repetitions=5, seed=9)
    b = run_detection_experiment(default_traces, default_table, spec,
                                 DetectionConfig(), repetitions=5, seed=9)
    assert [r.guilty for r in a.reports] == [r.guilty for r in b.reports]
    assert a.quartiles("fp_suspect") == b.quartiles("fp_suspect")
