"""
实验闸门：每个闸门给出观测值、阈值与是否通过
"""

import math
from dataclasses import asdict, dataclass
from typing import Optional


@dataclass(frozen=True)
class GateResult:
    name: str
    passed: bool
    value: Optional[float]
    threshold: str
    skipped: bool = False
    detail: str = ""

    def to_dict(self) -> dict:
        return asdict(self)


def _finite(value) -> bool:
    return value is not None and math.isfinite(value)


def at_most(name: str, value, limit: float, detail: str = "") -> GateResult:
    return GateResult(name, _finite(value) and value <= limit, value, f"<= {limit:g}", detail=detail)


def at_least(name: str, value, limit: float, detail: str = "") -> GateResult:
    return GateResult(name, _finite(value) and value >= limit, value, f">= {limit:g}", detail=detail)


def within(name: str, value, low: float, high: float, open_interval: bool = False,
           detail: str = "") -> GateResult:
    if not _finite(value):
        ok = False
    elif open_interval:
        ok = low < value < high
    else:
        ok = low <= value <= high
    bracket = f"({low:g}, {high:g})" if open_interval else f"[{low:g}, {high:g}]"
    return GateResult(name, ok, value, bracket, detail=detail)


def holds(name: str, condition: bool, value=None, detail: str = "") -> GateResult:
    return GateResult(name, bool(condition), value, "true", detail=detail)


def skipped(name: str, detail: str) -> GateResult:
    """无法评估（样本不足、ρ=0 等）的闸门，不计为失败"""
    return GateResult(name, True, None, "-", skipped=True, detail=detail)
