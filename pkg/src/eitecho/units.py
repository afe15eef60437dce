"""Parsing of unit-suffixed quantities from config files.

Every dimensioned config value is written with an explicit unit ("2us",
"170kHz", "50uT", "90deg") and normalized to SI here; bare numbers are only
accepted for dimensionless keys.  Ratios like the magnetic g-factor may be
written as "<frequency>/<field>", e.g. "12kHz/100uT".
"""

from __future__ import annotations

import math
import re

from .errors import ConfigurationError

_PREFIXES = {
    "p": 1e-12, "n": 1e-9, "u": 1e-6, "µ": 1e-6, "m": 1e-3,
    "": 1.0, "k": 1e3, "M": 1e6, "G": 1e9,
}

_DIMENSIONS = {
    "time": "s",
    "frequency": "Hz",
    "field": "T",
    "temperature": "K",
    "angle": "rad",
}

_NUMBER = r"[+-]?(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?"
_TOKEN = re.compile(rf"^({_NUMBER})\s*([a-zA-Zµ]+)$")


def _parse_with_unit(text: str, base_unit: str) -> float:
    m = _TOKEN.match(text.strip())
    if not m:
        raise ValueError(f"expected '<number><unit>' with unit {base_unit}, got {text!r}")
    value, unit = float(m.group(1)), m.group(2)
    if base_unit == "rad" and unit in ("rad", "deg"):
        return value if unit == "rad" else math.radians(value)
    if base_unit == "K":
        if unit != "K":
            raise ValueError(f"temperature must use K, got {unit!r}")
        return value
    if not unit.endswith(base_unit):
        raise ValueError(f"expected unit {base_unit}, got {unit!r}")
    prefix = unit[: len(unit) - len(base_unit)]
    if prefix not in _PREFIXES:
        raise ValueError(f"unknown unit prefix {prefix!r} in {text!r}")
    return value * _PREFIXES[prefix]


def parse_quantity(value, dimension: str) -> float:
    """Normalize one config value of the given dimension to SI units."""
    if dimension == "dimensionless":
        if isinstance(value, bool) or not isinstance(value, (int, float, str)):
            raise ValueError(f"expected a number, got {value!r}")
        return float(value)
    base = _DIMENSIONS.get(dimension)
    if base is None:
        raise ValueError(f"unknown dimension {dimension!r}")
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        raise ValueError(
            f"{dimension} values need an explicit unit suffix ({base}), got bare {value!r}")
    if not isinstance(value, str):
        raise ValueError(f"expected '<number><{base}>', got {value!r}")
    return _parse_with_unit(value, base)


def parse_ratio(value: str, num_dimension: str, den_dimension: str) -> float:
    """Parse a '<quantity>/<quantity>' ratio, e.g. '12kHz/100uT' in Hz per Tesla."""
    if not isinstance(value, str) or "/" not in value:
        raise ValueError(f"expected '<{num_dimension}>/<{den_dimension}>', got {value!r}")
    num, den = value.split("/", 1)
    return parse_quantity(num.strip(), num_dimension) / parse_quantity(den.strip(), den_dimension)


def float_repr(value) -> str:
    """Shortest-round-trip decimal form of a (possibly numpy) float."""
    return repr(float(value))


def format_si(value: float, dimension: str) -> str:
    base = _DIMENSIONS.get(dimension, "")
    return f"{float_repr(value)}{base}"
