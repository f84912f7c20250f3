import numpy as np
import pytest

from specklecut import energy
from specklecut.energy import (
    ControllerState,
    CutTrace,
    MaterialCategory,
    TraceSample,
    classify_category,
    duty_cycle_trace,
    pump_fractions,
    read_trace_csv,
    savings_percent,
    simulate,
    step_controller,
    write_trace_csv,
)
from specklecut.errors import EmptyTrace, MalformedFile, ZeroBaseline


# ------------------------------------------------------------- categories

@pytest.mark.parametrize("material,cat", [
    ("MDF", "A"), ("wood", "A"), ("Leather", "A"), ("metals", "A"),
    ("Acrylic", "B"), ("TPU", "B"), ("PVC", "B"), ("foamboard", "B"),
    ("Felt", "C"), ("cardstock", "C"), ("PAPER", "C"),
])
def test_material_categories(material, cat):
    assert classify_category(material) == MaterialCategory(cat)


def test_unknown_material_fails_safe_to_a():
    assert classify_category("unobtainium") == MaterialCategory.A
    assert classify_category(None) == MaterialCategory.A


def test_tier_values_fixed():
    assert MaterialCategory.A.tier == 1.00
    assert MaterialCategory.B.tier == 0.75
    assert MaterialCategory.C.tier == 0.50


# ------------------------------------------------------------- controller

def idle_sample(t=0.0, smoke=False):
    return TraceSample(t=t, laser_on=False, material=None, smoke=smoke)


def cut_sample(material, t=0.0, smoke=False):
    return TraceSample(t=t, laser_on=True, material=material, smoke=smoke)


def test_idle_no_smoke_purge_zero_shuts_off():
    state = step_controller(ControllerState.initial(), idle_sample(), purge_s=0)
    assert state.pump_fraction == 0.0
    assert state.mode == "idle"


def test_cutting_acrylic_runs_at_75_percent():
    state = step_controller(ControllerState.initial(), cut_sample("Acrylic"),
                            purge_s=0)
    assert state.pump_fraction == 0.75
    assert state.mode == "cutting"
    assert state.category == MaterialCategory.B


def test_smoke_escalates_any_tier_to_full():
    state = step_controller(ControllerState.initial(),
                            cut_sample("Felt", smoke=True), purge_s=0)
    assert state.pump_fraction == 1.0


def test_smoke_while_idle_runs_full_power():
    state = step_controller(ControllerState.initial(),
                            idle_sample(smoke=True), purge_s=0)
    assert state.pump_fraction == 1.0


def test_purge_holds_previous_fraction_then_expires():
    state = step_controller(ControllerState.initial(), cut_sample("wood"),
                            purge_s=2.0, dt=1.0)
    assert state.pump_fraction == 1.0
    for expected_remaining in (1.0, 0.0):
        state = step_controller(state, idle_sample(), purge_s=2.0, dt=1.0)
        assert state.pump_fraction == 1.0
        assert state.purge_remaining_s == expected_remaining
    state = step_controller(state, idle_sample(), purge_s=2.0, dt=1.0)
    assert state.pump_fraction == 0.0


def test_step_controller_is_pure():
    s0 = ControllerState.initial()
    a = step_controller(s0, cut_sample("wood"), 0)
    b = step_controller(s0, cut_sample("wood"), 0)
    assert a == b
    assert s0 == ControllerState.initial()


# ------------------------------------------------------------- simulation

def test_all_idle_trace_saves_everything():
    trace = duty_cycle_trace(pump_watts=750.0, dt=1.0, n_samples=3000,
                             n_on=0, material="wood")
    report = simulate(trace, purge_s=0.0)
    assert report.e_baseline_ws == 750.0 * 3000.0 == 2_250_000.0
    assert report.e_baseline_kwh == 0.625
    assert report.e_adaptive_ws == 0.0
    assert report.savings_percent == 100.0


def test_always_on_trace_saves_nothing():
    trace = duty_cycle_trace(pump_watts=750.0, dt=1.0, n_samples=100,
                             n_on=100, material="wood")
    report = simulate(trace)
    assert report.e_adaptive_ws == report.e_baseline_ws
    assert report.savings_percent == 0.0
    assert report.avg_power_saved_w == 0.0


@pytest.mark.parametrize("material,n_samples,n_on,expected", [
    ("wood", 5000, 2167, 56.66),       # tier 1.00, duty 0.4334
    ("acrylic", 50000, 19259, 71.11),  # tier 0.75, duty 0.38518
    ("felt", 5000, 2023, 79.77),       # tier 0.50, duty 0.40460
])
def test_reported_savings_fixtures(material, n_samples, n_on, expected):
    trace = duty_cycle_trace(pump_watts=750.0, dt=1.0, n_samples=n_samples,
                             n_on=n_on, material=material)
    report = simulate(trace, purge_s=0.0)
    assert abs(report.savings_percent - expected) <= 0.01
    assert report.e_adaptive_ws <= report.e_baseline_ws


def test_rectangle_rule_identity_exact():
    rng = np.random.default_rng(0)
    for material, tier in (("wood", 1.0), ("abs", 0.75), ("paper", 0.5)):
        n = int(rng.integers(50, 400))
        n_on = int(rng.integers(1, n))
        trace = duty_cycle_trace(600.0, 0.5, n, n_on, material)
        report = simulate(trace)
        duty = n_on / n
        assert report.savings_percent == pytest.approx(
            100.0 * (1.0 - tier * duty), abs=1e-12)


def test_smoke_never_increases_savings():
    base = duty_cycle_trace(750.0, 1.0, 200, 80, "felt")
    with_smoke = duty_cycle_trace(750.0, 1.0, 200, 80, "felt",
                                  smoke_samples=range(10, 30))
    assert simulate(with_smoke).savings_percent <= \
        simulate(base).savings_percent


def test_higher_tier_never_increases_savings():
    low = simulate(duty_cycle_trace(750.0, 1.0, 200, 80, "felt"))
    mid = simulate(duty_cycle_trace(750.0, 1.0, 200, 80, "acrylic"))
    high = simulate(duty_cycle_trace(750.0, 1.0, 200, 80, "wood"))
    assert high.savings_percent <= mid.savings_percent <= low.savings_percent


def test_replaying_a_trace_is_identical():
    trace = duty_cycle_trace(750.0, 1.0, 500, 123, "mdf",
                             smoke_samples=(5, 6, 7, 400))
    a = simulate(trace, purge_s=3.0)
    b = simulate(trace, purge_s=3.0)
    assert a == b


def test_vectorized_fractions_match_step_controller_replay():
    rng = np.random.default_rng(42)
    materials = ["wood", "acrylic", "felt", "weird-alloy", None]
    for _ in range(20):
        n = int(rng.integers(5, 200))
        samples = []
        for i in range(n):
            laser = bool(rng.integers(0, 2))
            samples.append(TraceSample(
                t=float(i), laser_on=laser,
                material=rng.choice(materials[:4]) if laser
                else rng.choice(materials),
                smoke=bool(rng.random() < 0.2)))
        trace = CutTrace(pump_rated_watts=750.0, sample_interval_s=1.0,
                         samples=samples)
        state = ControllerState.initial()
        replay = []
        for s in samples:
            state = step_controller(state, s, purge_s=0.0, dt=1.0)
            replay.append(state.pump_fraction)
        assert pump_fractions(trace, purge_s=0.0).tolist() == replay


def test_empty_trace_rejected():
    trace = CutTrace(pump_rated_watts=500.0, sample_interval_s=1.0, samples=[])
    with pytest.raises(EmptyTrace):
        simulate(trace)


def test_savings_percent_edges():
    assert savings_percent(100.0, 100.0) == 0.0
    assert savings_percent(100.0, 0.0) == 100.0
    with pytest.raises(ZeroBaseline):
        savings_percent(0.0, 0.0)


def test_trace_validation():
    with pytest.raises(ValueError):
        CutTrace(pump_rated_watts=750.0, sample_interval_s=1.0,
                 samples=[TraceSample(0.0, False, None, False),
                          TraceSample(2.0, False, None, False)])
    with pytest.raises(ValueError):
        CutTrace(pump_rated_watts=750.0, sample_interval_s=1.0,
                 samples=[TraceSample(0.0, True, None, False)])


# ------------------------------------------------------------- trace I/O

def test_trace_csv_round_trip():
    trace = duty_cycle_trace(750.0, 0.5, 20, 7, "acrylic",
                             smoke_samples=(3, 9))
    trace.laser_power_mw = 5.0
    text = write_trace_csv(trace)
    again = read_trace_csv(text)
    assert again.pump_rated_watts == trace.pump_rated_watts
    assert again.sample_interval_s == trace.sample_interval_s
    assert again.laser_power_mw == 5.0
    assert again.samples == trace.samples
    assert write_trace_csv(again) == text


def test_trace_csv_header_required():
    with pytest.raises(MalformedFile):
        read_trace_csv("t,laser_on,material,smoke\n0.0,0,,0\n")
    with pytest.raises(MalformedFile):
        read_trace_csv("# pump_watts=750\n# dt=1\nbad header\n")


def test_power_profile_csv():
    trace = duty_cycle_trace(750.0, 1.0, 4, 2, "felt")
    text = energy.power_profile_csv(trace)
    lines = text.strip().split("\n")
    assert lines[0] == "t,baseline_w,adaptive_w"
    assert len(lines) == 5
    assert lines[1].endswith("375.0")   # felt tier 0.5
    assert lines[4].endswith("0.0")
