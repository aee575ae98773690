"""Scenario files: one experiment described as flat `key = value` text.

A scenario is the archival record behind a figure or a run: the model,
the road condition, the asymptotic states (given directly or as a flux
level plus case label), and every numerical knob.  Files are line
oriented; anything after `#` is a comment and blank lines are skipped.
parse/serialize round-trip exactly because floats are written with repr.
"""
from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from .errors import ConfigError

_MODELS = ("M1", "M2")
_SCHEMES = ("upwind", "lax-friedrichs")
_KERNELS = ("linear", "quadratic")
_VELOCITIES = ("lwr",)

# letter -> model the label implies
_CASE_MODEL = {"A": "M1", "B": "M1", "C": "M2", "D": "M2"}


@dataclass(frozen=True)
class Scenario:
    """Validated description of one experiment.

    Either (rho_minus, rho_plus) or (fbar, case) fixes the asymptotic
    states; exactly one of the two routes must be given.  x_max defaults
    to 5 + h so the right ghost window always fits.
    """

    model: str
    kappa_minus: float
    kappa_plus: float
    h: float
    dx: float
    rho_minus: float | None = None
    rho_plus: float | None = None
    fbar: float | None = None
    case: str | None = None
    x_min: float = -5.0
    x_max: float | None = None
    traces: tuple[float, ...] = ()
    t_final: float = 20.0
    snapshot_times: tuple[float, ...] = ()
    scheme: str = "upwind"
    cfl: float = 0.4
    kernel: str = "linear"
    velocity: str = "lwr"
    out_dir: str = "out"

    def __post_init__(self):
        if self.model not in _MODELS:
            raise ConfigError(f"key 'model': must be one of {_MODELS}, got {self.model!r}", key="model")
        for key in ("kappa_minus", "kappa_plus"):
            if not getattr(self, key) > 0.0:
                raise ConfigError(f"key {key!r}: speed factor must be positive", key=key)
        if not self.h > 0.0:
            raise ConfigError("key 'h': horizon must be positive", key="h")
        if not self.dx > 0.0:
            raise ConfigError("key 'dx': spacing must be positive", key="dx")
        ratio = self.h / self.dx
        if abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError(
                f"key 'dx': h/dx must be an integer (h={self.h!r}, dx={self.dx!r})", key="dx"
            )
        if self.x_max is None:
            object.__setattr__(self, "x_max", 5.0 + self.h)

        by_states = self.rho_minus is not None or self.rho_plus is not None
        by_level = self.fbar is not None or self.case is not None
        if by_states and by_level:
            raise ConfigError(
                "key 'rho_minus': give either rho_minus/rho_plus or fbar/case, not both",
                key="rho_minus",
            )
        if by_states:
            if self.rho_minus is None or self.rho_plus is None:
                key = "rho_minus" if self.rho_minus is None else "rho_plus"
                raise ConfigError(f"key {key!r}: rho_minus and rho_plus come as a pair", key=key)
        elif by_level:
            if self.fbar is None or self.case is None:
                key = "fbar" if self.fbar is None else "case"
                raise ConfigError(f"key {key!r}: fbar and case come as a pair", key=key)
        else:
            raise ConfigError(
                "key 'rho_minus': asymptotic states missing (rho_minus/rho_plus or fbar/case)",
                key="rho_minus",
            )
        for key in ("rho_minus", "rho_plus"):
            val = getattr(self, key)
            if val is not None and not (0.0 <= val <= 1.0):
                raise ConfigError(f"key {key!r}: density out of range [0,1]: {val!r}", key=key)
        if self.fbar is not None and self.fbar < 0.0:
            raise ConfigError(f"key 'fbar': flux level must be nonnegative, got {self.fbar!r}", key="fbar")
        if self.case is not None:
            lab = self.case
            if len(lab) != 2 or lab[0] not in "ABCD" or lab[1] not in "1234":
                raise ConfigError(f"key 'case': unknown case label {lab!r}", key="case")
            if _CASE_MODEL[lab[0]] != self.model:
                raise ConfigError(
                    f"key 'case': case {lab} belongs to model {_CASE_MODEL[lab[0]]}, not {self.model}",
                    key="case",
                )
        if not self.x_min <= -self.h:
            raise ConfigError(
                f"key 'x_min': domain must contain [-h, h]; need x_min <= {-self.h!r}", key="x_min"
            )
        if not self.x_max >= self.h:
            raise ConfigError(
                f"key 'x_max': domain must contain [-h, h]; need x_max >= {self.h!r}", key="x_max"
            )
        for t in self.traces:
            if not (0.0 <= t <= 1.0):
                raise ConfigError(f"key 'traces': density out of range [0,1]: {t!r}", key="traces")
        if not self.t_final > 0.0:
            raise ConfigError("key 't_final': must be positive", key="t_final")
        for t in self.snapshot_times:
            if not (0.0 <= t <= self.t_final):
                raise ConfigError(
                    f"key 'snapshot_times': time {t!r} outside [0, t_final]", key="snapshot_times"
                )
        if self.scheme not in _SCHEMES:
            raise ConfigError(f"key 'scheme': must be one of {_SCHEMES}, got {self.scheme!r}", key="scheme")
        if not 0.0 < self.cfl <= 0.5:
            raise ConfigError(f"key 'cfl': must lie in (0, 0.5], got {self.cfl!r}", key="cfl")
        if self.kernel not in _KERNELS:
            raise ConfigError(f"key 'kernel': must be one of {_KERNELS}, got {self.kernel!r}", key="kernel")
        if self.velocity not in _VELOCITIES:
            raise ConfigError(
                f"key 'velocity': must be one of {_VELOCITIES}, got {self.velocity!r}", key="velocity"
            )


_FLOAT_KEYS = frozenset(
    {
        "kappa_minus",
        "kappa_plus",
        "h",
        "dx",
        "rho_minus",
        "rho_plus",
        "fbar",
        "x_min",
        "x_max",
        "t_final",
        "cfl",
    }
)
_LIST_KEYS = frozenset({"traces", "snapshot_times"})
_STR_KEYS = frozenset({"model", "case", "scheme", "kernel", "velocity", "out_dir"})
_ALL_KEYS = _FLOAT_KEYS | _LIST_KEYS | _STR_KEYS
_REQUIRED_KEYS = ("model", "kappa_minus", "kappa_plus", "h", "dx")

# serialization order: identity first, then states, then knobs
_FIELD_ORDER = (
    "model",
    "kappa_minus",
    "kappa_plus",
    "rho_minus",
    "rho_plus",
    "fbar",
    "case",
    "h",
    "dx",
    "x_min",
    "x_max",
    "traces",
    "t_final",
    "snapshot_times",
    "scheme",
    "cfl",
    "kernel",
    "velocity",
    "out_dir",
)


def _parse_float(key: str, token: str) -> float:
    try:
        return float(token)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected a number, got {token!r}", key=key) from None


def parse_scenario(text: str) -> Scenario:
    """Parse a key = value document into a validated Scenario.

    Unknown keys, duplicates, type mismatches, and invariant violations
    all raise ConfigError naming the offending key.
    """
    raw: dict[str, str] = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"line {lineno}: expected key = value, got {body!r}")
        key, _, val = body.partition("=")
        key, val = key.strip(), val.strip()
        if key not in _ALL_KEYS:
            raise ConfigError(f"unknown key {key!r} (line {lineno})", key=key)
        if key in raw:
            raise ConfigError(f"key {key!r} given twice (line {lineno})", key=key)
        if not val:
            raise ConfigError(f"key {key!r}: empty value (line {lineno})", key=key)
        raw[key] = val

    for key in _REQUIRED_KEYS:
        if key not in raw:
            raise ConfigError(f"missing required key {key!r}", key=key)

    kwargs: dict = {}
    for key, val in raw.items():
        if key in _FLOAT_KEYS:
            kwargs[key] = _parse_float(key, val)
        elif key in _LIST_KEYS:
            kwargs[key] = tuple(_parse_float(key, tok.strip()) for tok in val.split(",") if tok.strip())
        else:
            kwargs[key] = val
    return Scenario(**kwargs)


def serialize_scenario(scenario: Scenario) -> str:
    """Render a Scenario back to key = value text.

    Floats are written with repr so parse(serialize(s)) == s exactly.
    Unset optional fields and empty lists are omitted.
    """
    lines = ["# scenario written by roughwaves"]
    for key in _FIELD_ORDER:
        val = getattr(scenario, key)
        if val is None:
            continue
        if isinstance(val, tuple):
            if not val:
                continue
            rendered = ", ".join(repr(float(t)) for t in val)
        elif isinstance(val, float):
            rendered = repr(val)
        else:
            rendered = str(val)
        lines.append(f"{key} = {rendered}")
    return "\n".join(lines) + "\n"
