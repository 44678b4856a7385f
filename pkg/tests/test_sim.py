import math
from dataclasses import replace
from fractions import Fraction

import pytest

from echoring.sim import (
    DEFAULT_CRYPTO_MODEL,
    EventQueue,
    SimScenario,
    anonymity_prob,
    derive_seed,
    load_scenario,
    parse_scenario,
    rows_to_csv,
    rows_to_jsonl,
    run_scenario,
    sweep,
)
from oracles import anonymity_enumeration


# -- anonymity probability -----------------------------------------------------

def test_anonymity_published_values():
    assert anonymity_prob(2, 3, 1) == 1
    assert anonymity_prob(2, 3, 2) == Fraction(1, 3)


def test_anonymity_matches_enumeration_small_cases():
    for r in range(1, 9):
        for t in range(1, r + 1):
            for j in range(1, t + 1):
                assert anonymity_prob(t, r, j) == anonymity_enumeration(t, r, j), (t, r, j)


def test_anonymity_monotone_and_edges():
    assert anonymity_prob(5, 5, 1) == 1  # guessing everyone finds everyone
    assert anonymity_prob(5, 5, 5) == 1
    probs = [anonymity_prob(4, 10, j) for j in range(1, 5)]
    assert all(a >= b for a, b in zip(probs, probs[1:]))
    with pytest.raises(ValueError):
        anonymity_prob(3, 2, 1)
    with pytest.raises(ValueError):
        anonymity_prob(2, 3, 3)
    with pytest.raises(ValueError):
        anonymity_prob(2, 3, 0)


# -- event queue ------------------------------------------------------------------

def test_event_queue_orders_by_time_then_insertion():
    q = EventQueue()
    q.push(2.0, "b")
    q.push(1.0, "a")
    q.push(2.0, "c")
    order = [q.pop()[1] for _ in range(3)]
    assert order == ["a", "b", "c"]
    assert q.now == 2.0
    with pytest.raises(ValueError):
        q.push(1.0, "past")


# -- single runs --------------------------------------------------------------------

BASE = SimScenario(vehicle_count=150, threshold=3, ring_size=20, seed=5,
                   detection_radius_m=300.0)


def test_run_scenario_deterministic():
    assert run_scenario(BASE) == run_scenario(BASE)
    different = run_scenario(replace(BASE, seed=6))
    assert different != run_scenario(BASE)


def test_run_scenario_invariants():
    for seed in range(25):
        m = run_scenario(replace(BASE, seed=seed))
        assert m.replies_received <= m.willing_in_range
        if m.success:
            assert not m.timed_out
            assert m.aggregation_delay_s <= BASE.session_timeout_s
            assert m.non_crypto_delay_s >= 0
            assert math.isclose(
                m.aggregation_delay_s,
                m.crypto_time_s + m.non_crypto_delay_s,
            )
        else:
            assert m.aggregation_delay_s is None
        if m.event_time_s is not None:
            assert 0.1 * BASE.duration_s <= m.event_time_s <= 0.5 * BASE.duration_s


def test_no_witnesses_means_timeout():
    # Detection radius tuned so that usually at most one vehicle sees the
    # event: sessions open but starve, and the timeout is recorded.
    lonely = replace(BASE, detection_radius_m=110.0, threshold=6, ring_size=20)
    outcomes = [run_scenario(replace(lonely, seed=s)) for s in range(15)]
    assert all(not m.success for m in outcomes)
    assert all(m.timed_out or not m.initiator_found for m in outcomes)
    starved = [m for m in outcomes if m.initiator_found and m.willing_in_range == 0]
    assert starved and all(m.timed_out for m in starved)


def test_dense_network_low_threshold_rate():
    # Frozen from this simulator's own seeded runs: 92/100 at the
    # default 200 m detection radius (the misses are events that no
    # second witness saw).  Recompute deliberately if the model changes.
    dense = SimScenario(vehicle_count=250, threshold=2, ring_size=20, seed=1000)
    wins = sum(
        run_scenario(replace(dense, seed=derive_seed("dense", i))).success
        for i in range(100)
    )
    assert wins == 92


def test_crypto_mode_real_runs_the_protocol(toy_material):
    sc = replace(BASE, crypto_mode="real", vehicle_count=60, threshold=2,
                 ring_size=9, seed=12, detection_radius_m=400.0)
    m = run_scenario(sc, authority=toy_material)
    m2 = run_scenario(sc, authority=toy_material)
    assert m == m2
    assert m.initiator_found
    if m.success:
        assert m.replies_received >= 1


def test_scenario_validation():
    with pytest.raises(ValueError):
        SimScenario(threshold=15, ring_size=20).validate()
    with pytest.raises(ValueError):
        SimScenario(comm_range_m=5000.0).validate()
    with pytest.raises(ValueError):
        SimScenario(crypto_mode="imaginary").validate()
    with pytest.raises(ValueError):
        SimScenario(vehicle_count=0).validate()
    with pytest.raises(ValueError):
        run_scenario(SimScenario(loss_rate=1.5))


def test_density_reporting():
    assert math.isclose(SimScenario(vehicle_count=50).density_per_km2, 8.680555555555555)
    assert math.isclose(SimScenario(vehicle_count=250).density_per_km2, 43.40277777777778)


# -- sweeps ----------------------------------------------------------------------

def test_sweep_trends_and_determinism():
    rows = sweep(BASE, vehicle_counts=[50, 250], thresholds=[2, 6], runs=25)
    assert len(rows) == 4
    table = {(r["vehicle_count"], r["threshold"]): r for r in rows}
    # more witnesses help; higher thresholds hurt
    assert table[(250, 2)]["validation_probability"] >= table[(50, 2)]["validation_probability"]
    assert table[(50, 2)]["validation_probability"] >= table[(50, 6)]["validation_probability"]
    assert table[(250, 2)]["validation_probability"] >= table[(250, 6)]["validation_probability"]
    # byte-identical replay
    again = sweep(BASE, vehicle_counts=[50, 250], thresholds=[2, 6], runs=25)
    assert rows_to_csv(rows) == rows_to_csv(again)
    assert rows_to_jsonl(rows) == rows_to_jsonl(again)


def test_csv_and_jsonl_shapes():
    rows = sweep(BASE, thresholds=[2], runs=5)
    csv_text = rows_to_csv(rows)
    header, line = csv_text.strip().split("\n")
    assert header.startswith("vehicle_count,density_per_km2,ring_size,threshold")
    assert line.split(",")[0] == "150"
    jsonl = rows_to_jsonl(rows)
    import json

    record = json.loads(jsonl.splitlines()[0])
    assert record["runs"] == 5


def test_derive_seed_stability():
    assert derive_seed(1, 2, "x") == derive_seed(1, 2, "x")
    assert derive_seed(1, 2, "x") != derive_seed(1, 2, "y")
    # frozen so sweeps stay replayable across releases
    assert derive_seed(0, 50, 20, 2, 0) == 9054262027086523517


# -- crypto timing model ----------------------------------------------------------

def test_timing_model_shapes():
    m = DEFAULT_CRYPTO_MODEL
    # request and reply shrink as t grows at fixed r; verify tracks r
    assert m.request_time(8, 20) < m.request_time(2, 20)
    assert m.reply_time(8, 20) < m.reply_time(2, 20)
    assert m.verify_time(5, 50) > m.verify_time(5, 20)
    assert m.assemble_time(8, 20) > m.assemble_time(2, 20)


# -- scenario files -----------------------------------------------------------------

SCENARIO_TEXT = """
# availability sweep
vehicle_count = 150
duration_s = 200
threshold = 3
ring_size = 20
seed = 9
detection_radius_m = 300
vehicle_counts = 50, 150, 250
thresholds = 2..4
runs_per_cell = 10
"""


def test_parse_scenario_roundtrip():
    scenario, spec = parse_scenario(SCENARIO_TEXT)
    assert scenario.vehicle_count == 150
    assert scenario.duration_s == 200.0
    assert scenario.seed == 9
    assert spec.vehicle_counts == [50, 150, 250]
    assert spec.thresholds == [2, 3, 4]
    assert spec.ring_sizes is None
    assert spec.runs == 10


def test_parse_scenario_errors():
    with pytest.raises(ValueError):
        parse_scenario("unknown_key = 3")
    with pytest.raises(ValueError):
        parse_scenario("vehicle_count")
    with pytest.raises(ValueError):
        parse_scenario("vehicle_count = soon")
    with pytest.raises(ValueError):
        parse_scenario("threshold = 19\nring_size = 20")


def test_load_scenario(tmp_path):
    path = tmp_path / "cell.scenario"
    path.write_text(SCENARIO_TEXT)
    scenario, spec = load_scenario(path)
    assert scenario.vehicle_count == 150
    assert spec.runs == 10
