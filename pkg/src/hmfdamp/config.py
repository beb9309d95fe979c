"""Flat ``key = value`` run configuration with validation and canonical form."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Callable, Iterable

from .dynamics import normalize_variant


class ConfigError(ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | str | None = None):
        where = []
        if key is not None:
            where.append(f"key {key!r}")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    return tuple(float(p) for p in text.replace(";", ",").split(",") if p.strip())


def _positive(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _even4(x):
    return x >= 4 and x % 2 == 0


@dataclass(frozen=True)
class _Key:
    parse: Callable[[str], Any]
    default: Any = None
    check: Callable[[Any], bool] | None = None
    rule: str = ""
    required: bool = False


SCHEMA: dict[str, _Key] = {
    "grid.n_x": _Key(int, required=True, check=_even4, rule="even integer >= 4"),
    "grid.n_v": _Key(int, required=True, check=_even4, rule="even integer >= 4"),
    "grid.L": _Key(float, 8.0, _positive, "positive"),
    "scheme.variant": _Key(normalize_variant, required=True),
    "scheme.h": _Key(float, required=True, check=_positive, rule="positive"),
    "sim.epsilon": _Key(float, 0.01, _nonneg, "nonnegative"),
    "sim.T": _Key(float, 25.0, _positive, "positive"),
    "sim.snapshot_times": _Key(_floats, (), lambda v: all(t >= 0 for t in v), "nonnegative times"),
    "sim.interaction": _Key(_bool, True),
    "sim.perturbation": _Key(str, "single", lambda v: v in ("single", "multi"), "single or multi"),
    "sim.recurrence_safety": _Key(float, 0.5, _positive, "positive"),
    "sim.blowup_factor": _Key(float, 1e6, _positive, "positive"),
    "eta.kind": _Key(str, "maxwellian", lambda v: v in ("maxwellian", "two_bump", "file"), "maxwellian|two_bump|file"),
    "eta.temperature": _Key(float, 1.0, _positive, "positive"),
    "eta.separation": _Key(float, 2.0, _nonneg, "nonnegative"),
    "eta.file": _Key(str, ""),
    "seed": _Key(int, 0),
    "output.dir": _Key(str, "out"),
    "analysis.norm_s": _Key(int, 5, lambda v: 0 <= v <= 8, "integer in [0, 8]"),
    "analysis.norm_nu": _Key(float, 1.0, _nonneg, "nonnegative"),
    "analysis.fit_window": _Key(_floats, (2.0, 22.0), lambda v: len(v) == 2 and v[0] < v[1], "two increasing times"),
    "analysis.fit_model": _Key(str, "exponential", lambda v: v in ("exponential", "algebraic"), "exponential|algebraic"),
    "analysis.checkpoints": _Key(_floats, (5.0, 10.0, 20.0, 40.0), lambda v: all(t > 0 for t in v), "positive times"),
    "analysis.ladder": _Key(_floats, (0.2, 0.1, 0.05, 0.025), lambda v: all(h > 0 for h in v), "positive steps"),
    "analysis.ladder_T": _Key(float, 10.0, _positive, "positive"),
    "analysis.limit_T": _Key(float, 40.0, _positive, "positive"),
    "analysis.ref_refinement": _Key(int, 16, lambda v: v >= 1, "integer >= 1"),
    "analysis.error_r": _Key(int, 1, lambda v: 0 <= v <= 8, "integer in [0, 8]"),
    "analysis.error_nu": _Key(float, 1.0, _nonneg, "nonnegative"),
    "analysis.growth_sigma": _Key(int, 0, lambda v: 0 <= v <= 8, "integer in [0, 8]"),
    "analysis.growth_times": _Key(_floats, (5.0, 10.0, 20.0, 40.0), lambda v: all(t > 0 for t in v), "positive times"),
    "analysis.kappa0": _Key(float, 0.1, _positive, "positive"),
    "analysis.volterra_T": _Key(float, 10.0, _positive, "positive"),
    "analysis.volterra_dt": _Key(float, 0.002, _positive, "positive"),
    "analysis.series": _Key(str, ""),
}


def _format(value: Any) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    if isinstance(value, tuple):
        return ", ".join(_format(v) for v in value)
    return str(value)


@dataclass(frozen=True)
class RunConfig:
    values: dict

    def __getitem__(self, key: str):
        return self.values[key]

    def to_text(self) -> str:
        """Canonical serialization: sorted keys, one ``key = value`` per line."""
        return "".join(f"{k} = {_format(self.values[k])}\n" for k in sorted(self.values))

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()

    def with_overrides(self, overrides: Iterable[str]) -> "RunConfig":
        return parse_config(text=self.to_text(), overrides=overrides)


def _parse_value(key: str, raw: str, line) -> Any:
    spec = SCHEMA.get(key)
    if spec is None:
        raise ConfigError("unknown key", key, line)
    try:
        value = spec.parse(raw.strip())
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"cannot parse {raw.strip()!r}: {exc}", key, line) from None
    if spec.check is not None and not spec.check(value):
        raise ConfigError(f"value {raw.strip()!r} must be {spec.rule}", key, line)
    return value


def _split(text: str, line) -> tuple[str, str]:
    if "=" not in text:
        raise ConfigError(f"expected key = value, got {text.strip()!r}", None, line)
    key, raw = text.split("=", 1)
    return key.strip(), raw


def parse_config(path=None, overrides: Iterable[str] = (), text: str | None = None) -> RunConfig:
    """Read a config file (or text), apply ``key=value`` overrides, fill defaults."""
    if path is not None:
        text = Path(path).read_text()
    values: dict[str, Any] = {}
    for lineno, line in enumerate((text or "").splitlines(), start=1):
        content = line.split("#", 1)[0].strip()
        if not content:
            continue
        key, raw = _split(content, lineno)
        values[key] = _parse_value(key, raw, lineno)
    for i, item in enumerate(overrides, start=1):
        key, raw = _split(item, f"override {i}")
        values[key] = _parse_value(key, raw, f"override {i}")
    for key, spec in SCHEMA.items():
        if key not in values:
            if spec.required:
                raise ConfigError("missing required key", key)
            values[key] = spec.default
    return RunConfig(values)
