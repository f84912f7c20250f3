"""Closed-loop exhaust-pump controller and energy accounting.

The controller maps the material being cut to a pump power tier
(A 100%, B 75%, C 50%), escalates to full power whenever smoke is
detected, and shuts off (after an optional purge hold) when the laser is
idle. Baseline energy assumes the pump runs at rated power for the whole
trace; savings compare the two integrals.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import EmptyTrace, MalformedFile, ZeroBaseline

WS_PER_KWH = 3_600_000.0


class MaterialCategory(str, Enum):
    A = "A"
    B = "B"
    C = "C"

    @property
    def tier(self) -> float:
        return {"A": 1.0, "B": 0.75, "C": 0.5}[self.value]


# heavy smoke producers run the pump flat out; plastics at 75%; fibrous
# light materials at 50%
_CATEGORY_TABLE = {
    MaterialCategory.A: ("wood", "plywood", "mdf", "hardwood", "hardwoods",
                         "bamboo", "cork", "leather", "suede", "metal",
                         "metals"),
    MaterialCategory.B: ("acrylic", "tpu", "petg", "delrin", "styrene",
                         "abs", "lexan", "pvc", "silicone", "foamboard"),
    MaterialCategory.C: ("felt", "textile", "textiles", "fabric", "fabrics",
                         "cardstock", "cardboard", "matboard", "paper"),
}
_LOOKUP = {name: cat for cat, names in _CATEGORY_TABLE.items()
           for name in names}


def classify_category(material: str | None) -> MaterialCategory:
    """Material label -> pump tier; unknown labels fail safe to A."""
    if material is None:
        return MaterialCategory.A
    return _LOOKUP.get(material.strip().lower(), MaterialCategory.A)


@dataclass(frozen=True)
class TraceSample:
    t: float
    laser_on: bool
    material: str | None
    smoke: bool


@dataclass
class CutTrace:
    pump_rated_watts: float
    sample_interval_s: float
    samples: list[TraceSample]
    laser_power_mw: float | None = None

    def __post_init__(self):
        if self.pump_rated_watts <= 0:
            raise ValueError("pump rating must be positive")
        if self.sample_interval_s <= 0:
            raise ValueError("sample interval must be positive")
        dt = self.sample_interval_s
        for prev, cur in zip(self.samples, self.samples[1:]):
            if not np.isclose(cur.t - prev.t, dt, rtol=1e-9, atol=1e-9):
                raise ValueError(
                    f"timestamps must increase by {dt}; got "
                    f"{prev.t} -> {cur.t}")
        for s in self.samples:
            if s.laser_on and s.material is None:
                raise ValueError(f"sample at t={s.t} cuts with no material")

    @property
    def total_seconds(self) -> float:
        return len(self.samples) * self.sample_interval_s


@dataclass(frozen=True)
class ControllerState:
    mode: str = "idle"                       # "idle" or "cutting"
    category: MaterialCategory | None = None
    pump_fraction: float = 0.0
    purge_remaining_s: float = 0.0

    @classmethod
    def initial(cls) -> "ControllerState":
        return cls()


def step_controller(state: ControllerState, sample: TraceSample,
                    purge_s: float, dt: float = 1.0) -> ControllerState:
    """Advance the pump controller by one trace sample.

    Laser on: run at the material tier, escalated to 1.0 under smoke.
    Laser off with smoke: full power (extraction overrides idling).
    Otherwise: hold the previous fraction while the purge timer runs,
    then drop to zero. Pure in (state, sample, purge_s, dt).
    """
    if sample.laser_on:
        category = classify_category(sample.material)
        fraction = 1.0 if sample.smoke else category.tier
        return ControllerState(mode="cutting", category=category,
                               pump_fraction=fraction,
                               purge_remaining_s=purge_s)
    if sample.smoke:
        return ControllerState(mode="idle", category=None, pump_fraction=1.0,
                               purge_remaining_s=purge_s)
    if state.purge_remaining_s > 0:
        return ControllerState(mode="idle", category=None,
                               pump_fraction=state.pump_fraction,
                               purge_remaining_s=max(
                                   state.purge_remaining_s - dt, 0.0))
    return ControllerState.initial()


def pump_fractions(trace: CutTrace, purge_s: float = 0.0) -> np.ndarray:
    """Commanded pump fraction for every sample in the trace.

    With no purge hold the controller is memoryless, so that case is
    vectorized; step_controller replay produces identical fractions
    (asserted in the tests).
    """
    if not trace.samples:
        raise EmptyTrace("trace holds no samples")
    if purge_s == 0.0:
        tiers = np.array([classify_category(s.material).tier
                          if s.laser_on else 0.0 for s in trace.samples])
        smoke = np.array([s.smoke for s in trace.samples])
        return np.where(smoke, 1.0, tiers)
    state = ControllerState.initial()
    out = np.empty(len(trace.samples), dtype=np.float64)
    for i, sample in enumerate(trace.samples):
        state = step_controller(state, sample, purge_s,
                                dt=trace.sample_interval_s)
        out[i] = state.pump_fraction
    return out


def savings_percent(e_baseline: float, e_adaptive: float) -> float:
    """100 * (E_b - E_a) / E_b."""
    if e_baseline <= 0:
        raise ZeroBaseline("baseline energy must be positive")
    if e_adaptive < 0:
        raise ValueError("adaptive energy must be >= 0")
    return 100.0 * (e_baseline - e_adaptive) / e_baseline


@dataclass
class EnergyReport:
    e_baseline_ws: float
    e_adaptive_ws: float
    savings_percent: float
    avg_power_saved_w: float

    @property
    def e_baseline_kwh(self) -> float:
        return self.e_baseline_ws / WS_PER_KWH

    @property
    def e_adaptive_kwh(self) -> float:
        return self.e_adaptive_ws / WS_PER_KWH

    def to_json_obj(self) -> dict:
        return {"e_baseline_ws": self.e_baseline_ws,
                "e_adaptive_ws": self.e_adaptive_ws,
                "e_baseline_kwh": self.e_baseline_kwh,
                "e_adaptive_kwh": self.e_adaptive_kwh,
                "savings_percent": self.savings_percent,
                "avg_power_saved_w": self.avg_power_saved_w}


def simulate(trace: CutTrace, purge_s: float = 0.0) -> EnergyReport:
    """Rectangle-rule energy for the constant-on baseline vs the controller."""
    fractions = pump_fractions(trace, purge_s)
    t_total = trace.total_seconds
    e_baseline = trace.pump_rated_watts * t_total
    e_adaptive = float(
        (trace.pump_rated_watts * fractions).sum() * trace.sample_interval_s)
    return EnergyReport(
        e_baseline_ws=e_baseline,
        e_adaptive_ws=e_adaptive,
        savings_percent=savings_percent(e_baseline, e_adaptive),
        avg_power_saved_w=(e_baseline - e_adaptive) / t_total)


# ---------------------------------------------------------------- trace I/O

def duty_cycle_trace(pump_watts: float, dt: float, n_samples: int,
                     n_on: int, material: str,
                     smoke_samples=()) -> CutTrace:
    """Square-wave fixture: the first n_on samples cut, the rest idle."""
    smoke_set = set(smoke_samples)
    samples = [TraceSample(t=i * dt, laser_on=i < n_on,
                           material=material if i < n_on else None,
                           smoke=i in smoke_set)
               for i in range(n_samples)]
    return CutTrace(pump_rated_watts=pump_watts, sample_interval_s=dt,
                    samples=samples)


def write_trace_csv(trace: CutTrace) -> str:
    buf = io.StringIO()
    buf.write(f"# pump_watts={float(trace.pump_rated_watts)!r}\n")
    buf.write(f"# dt={float(trace.sample_interval_s)!r}\n")
    if trace.laser_power_mw is not None:
        buf.write(f"# laser_mw={float(trace.laser_power_mw)!r}\n")
    buf.write("t,laser_on,material,smoke\n")
    for s in trace.samples:
        material = s.material or ""
        buf.write(f"{float(s.t)!r},{int(s.laser_on)},{material},{int(s.smoke)}\n")
    return buf.getvalue()


def read_trace_csv(text: str) -> CutTrace:
    pump_watts = None
    dt = None
    laser_mw = None
    samples = []
    saw_header = False
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            body = line[1:].strip()
            if "=" in body:
                key, _, value = body.partition("=")
                key = key.strip()
                try:
                    if key == "pump_watts":
                        pump_watts = float(value)
                    elif key == "dt":
                        dt = float(value)
                    elif key == "laser_mw":
                        laser_mw = float(value)
                except ValueError as exc:
                    raise MalformedFile(
                        f"line {lineno}: bad header value {value!r}") from exc
            continue
        if not saw_header:
            if line != "t,laser_on,material,smoke":
                raise MalformedFile(
                    f"line {lineno}: expected column header, got {line!r}")
            saw_header = True
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise MalformedFile(f"line {lineno}: expected 4 columns")
        try:
            samples.append(TraceSample(
                t=float(parts[0]), laser_on=bool(int(parts[1])),
                material=parts[2] or None, smoke=bool(int(parts[3]))))
        except ValueError as exc:
            raise MalformedFile(f"line {lineno}: {exc}") from exc
    if pump_watts is None or dt is None:
        raise MalformedFile("missing '# pump_watts=' or '# dt=' header")
    try:
        return CutTrace(pump_rated_watts=pump_watts, sample_interval_s=dt,
                        samples=samples, laser_power_mw=laser_mw)
    except ValueError as exc:
        raise MalformedFile(str(exc)) from exc


def power_profile_csv(trace: CutTrace, purge_s: float = 0.0) -> str:
    """Per-sample baseline vs adaptive pump power, for plotting."""
    fractions = pump_fractions(trace, purge_s)
    buf = io.StringIO()
    buf.write("t,baseline_w,adaptive_w\n")
    for s, f in zip(trace.samples, fractions):
        buf.write(f"{float(s.t)!r},{float(trace.pump_rated_watts)!r},"
                  f"{float(trace.pump_rated_watts * f)!r}\n")
    return buf.getvalue()
