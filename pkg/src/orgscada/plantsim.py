"""Simulated control processes (PLCs).

Each PLC exposes an abstract read/write/subscribe tag interface and produces
process data as a seeded bounded random walk, so identical seeds and
operation sequences give identical traces.
"""

from __future__ import annotations

import random
import zlib
from dataclasses import dataclass, field
from typing import Callable, Optional

from .errors import NotWritable, OutOfRange, UnknownVariable

QUALITY_GOOD = "Good"
QUALITY_STALE = "Stale"

STALE_AFTER_PERIODS = 3


@dataclass
class VariableSpec:
    name: str
    unit: str = ""
    min: float = 0.0
    max: float = 100.0
    value: float = 0.0
    deadband: float = 0.0
    writable: bool = False
    step_fraction: float = 0.01

    def validate(self) -> None:
        if not self.name:
            raise ValueError("variable needs a name")
        if not self.min < self.max:
            raise ValueError(f"{self.name}: min must be < max")
        if self.deadband < 0:
            raise ValueError(f"{self.name}: deadband must be >= 0")
        if not (self.min <= self.value <= self.max):
            raise ValueError(f"{self.name}: initial value outside range")

    def to_doc(self) -> dict:
        return {
            "name": self.name,
            "unit": self.unit,
            "min": self.min,
            "max": self.max,
            "value": self.value,
            "deadband": self.deadband,
            "writable": self.writable,
            "step_fraction": self.step_fraction,
        }

    @classmethod
    def from_doc(cls, doc: dict) -> "VariableSpec":
        spec = cls(
            name=doc["name"],
            unit=doc.get("unit", ""),
            min=float(doc.get("min", 0.0)),
            max=float(doc.get("max", 100.0)),
            value=float(doc.get("value", doc.get("min", 0.0))),
            deadband=float(doc.get("deadband", 0.0)),
            writable=bool(doc.get("writable", False)),
            step_fraction=float(doc.get("step_fraction", 0.01)),
        )
        spec.validate()
        return spec


@dataclass
class PlcConfig:
    plc_name: str
    variables: list[VariableSpec] = field(default_factory=list)

    def validate(self) -> None:
        names = [v.name for v in self.variables]
        if len(names) != len(set(names)):
            raise ValueError(f"{self.plc_name}: duplicate variable names")
        for v in self.variables:
            v.validate()

    def to_doc(self) -> dict:
        return {"plc_name": self.plc_name, "variables": [v.to_doc() for v in self.variables]}

    @classmethod
    def from_doc(cls, doc: dict) -> "PlcConfig":
        cfg = cls(
            plc_name=doc["plc_name"],
            variables=[VariableSpec.from_doc(v) for v in doc.get("variables", [])],
        )
        cfg.validate()
        return cfg


class _Var:
    __slots__ = ("spec", "value", "last_notified", "rng")

    def __init__(self, spec: VariableSpec, seed: int, plc_name: str):
        self.spec = spec
        self.value = spec.value
        self.last_notified = spec.value
        self.rng = random.Random(zlib.crc32(f"{seed}:{plc_name}:{spec.name}".encode()))


class Plc:
    """One simulated device; operations are serialized by the owning agent."""

    def __init__(self, config: PlcConfig, seed: int = 0, clock: Optional[Callable[[], int]] = None):
        config.validate()
        self.config = config
        self.name = config.plc_name
        self.clock = clock or (lambda: 0)
        self._vars = {v.name: _Var(v, seed, config.plc_name) for v in config.variables}
        self.last_tick_ms: Optional[int] = None
        self._sinks: dict[int, tuple[str, Callable]] = {}
        self._next_sid = 0

    def var_names(self) -> list[str]:
        return list(self._vars)

    def _get(self, var_name: str) -> _Var:
        var = self._vars.get(var_name)
        if var is None:
            raise UnknownVariable(f"{self.name}.{var_name}")
        return var

    def tick(self, dt_ms: int) -> list[str]:
        """Advance every variable one random step; returns deadband-exceeding
        variable names and notifies their subscribers."""
        if dt_ms <= 0:
            raise ValueError("dt must be > 0")
        self.last_tick_ms = self.clock()
        changed: list[str] = []
        for name, var in self._vars.items():
            spec = var.spec
            span = spec.max - spec.min
            step = var.rng.uniform(-1.0, 1.0) * spec.step_fraction * span
            var.value = min(spec.max, max(spec.min, var.value + step))
            if abs(var.value - var.last_notified) > spec.deadband:
                var.last_notified = var.value
                changed.append(name)
        for name in changed:
            self._fanout(name)
        return changed

    def read(self, var_name: str, poll_period_ms: int = 1000) -> dict:
        var = self._get(var_name)
        now = self.clock()
        stale = (
            self.last_tick_ms is None
            or now - self.last_tick_ms > STALE_AFTER_PERIODS * poll_period_ms
        )
        return {
            "var": var_name,
            "value": var.value,
            "t": now,
            "quality": QUALITY_STALE if stale else QUALITY_GOOD,
        }

    def write(self, var_name: str, value: float) -> None:
        var = self._get(var_name)
        if not var.spec.writable:
            raise NotWritable(f"{self.name}.{var_name}")
        if not (var.spec.min <= value <= var.spec.max):
            raise OutOfRange(
                f"{self.name}.{var_name}: {value} outside [{var.spec.min}, {var.spec.max}]"
            )
        var.value = float(value)

    def subscribe(self, var_name: str, sink: Callable[[str, float, int], None]) -> int:
        self._get(var_name)
        self._next_sid += 1
        self._sinks[self._next_sid] = (var_name, sink)
        return self._next_sid

    def unsubscribe(self, sid: int) -> None:
        self._sinks.pop(sid, None)

    def _fanout(self, var_name: str) -> None:
        value = self._vars[var_name].value
        now = self.clock()
        for watched, sink in list(self._sinks.values()):
            if watched == var_name:
                sink(var_name, value, now)


def synthetic_variables(writable_setpoint: bool = True) -> list[VariableSpec]:
    """Default tag set for the shipped synthetic PLC catalog."""
    return [
        VariableSpec(
            name="temperature",
            unit="degC",
            min=0.0,
            max=100.0,
            value=50.0,
            deadband=0.2,
            writable=writable_setpoint,
        ),
        VariableSpec(
            name="pressure",
            unit="bar",
            min=0.0,
            max=10.0,
            value=5.0,
            deadband=0.05,
            writable=False,
        ),
        VariableSpec(
            name="flow",
            unit="m3h",
            min=0.0,
            max=500.0,
            value=250.0,
            deadband=1.0,
            writable=False,
        ),
    ]
