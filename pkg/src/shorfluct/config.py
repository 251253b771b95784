"""Run configuration stored as an INI file.

Floats are written with ``repr`` so a load/save round trip is bit-stable.
Command-line flags override file values through :func:`RunConfig.replace`.
"""

from __future__ import annotations

import configparser
import dataclasses
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

from .state import DEFAULT_MAX_AMPLITUDES, RegisterLayout

BACKENDS = ("dense", "structured")
CAPTURES = ("all", "boundaries")


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class Instance:
    """One problem size for the scaling report; zero widths mean the default layout."""

    N: int
    x: int
    L1: int = 0
    L2: int = 0

    def layout(self) -> RegisterLayout:
        if self.L1 and self.L2:
            return RegisterLayout(self.N, self.x, self.L1, self.L2)
        return RegisterLayout.for_problem(self.N, self.x)

    def __str__(self) -> str:
        return f"{self.N}:{self.x}:{self.L1}:{self.L2}"

    @classmethod
    def parse(cls, text: str) -> "Instance":
        parts = text.strip().split(":")
        if len(parts) not in (2, 4):
            raise ConfigError(f"instance {text!r} must be N:x or N:x:L1:L2")
        try:
            return cls(*(int(p) for p in parts))
        except ValueError as exc:
            raise ConfigError(f"bad instance {text!r}") from exc


@dataclass(frozen=True)
class RunConfig:
    # [problem]
    N: int = 21
    x: int = 2
    L1: Optional[int] = 10
    L2: Optional[int] = 5
    backend: str = "dense"
    max_amplitudes: int = DEFAULT_MAX_AMPLITUDES
    # [noise]
    lam: float = 0.0015
    components: str = "x"
    samples: int = 40
    seed: int = 0
    omega_high_factor: float = 4.1
    substeps: int = 1024
    # [run]
    capture: str = "all"
    steps: Optional[tuple] = None
    state_step: Optional[int] = None
    lambda_grid: tuple = (0.00075, 0.0015, 0.003, 0.006)
    # [output]
    out: str = "out"
    svg: bool = False
    # [scaling]
    instances: tuple = (Instance(21, 2, 10, 5), Instance(513, 26, 20, 10))

    def __post_init__(self):
        if self.backend not in BACKENDS:
            raise ConfigError(f"backend must be one of {BACKENDS}, got {self.backend!r}")
        if self.capture not in CAPTURES:
            raise ConfigError(f"capture must be one of {CAPTURES}, got {self.capture!r}")
        if (self.L1 is None) != (self.L2 is None):
            raise ConfigError("give both L1 and L2 or neither")
        if self.samples < 1:
            raise ConfigError("samples must be positive")
        if self.seed < 0 or self.seed >= 1 << 64:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        if self.lam < 0:
            raise ConfigError("lambda must be non-negative")
        if not self.components or any(c not in "xyz" for c in self.components):
            raise ConfigError(f"components must be a subset of 'xyz', got {self.components!r}")

    def layout(self) -> RegisterLayout:
        try:
            if self.L1 is None:
                return RegisterLayout.for_problem(self.N, self.x)
            return RegisterLayout(self.N, self.x, self.L1, self.L2)
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def replace(self, **changes) -> "RunConfig":
        """Copy with the non-``None`` entries of ``changes`` applied."""
        return dataclasses.replace(self, **{k: v for k, v in changes.items() if v is not None})

    # ------------------------------------------------------------------
    # serialization

    def to_ini(self) -> str:
        cp = configparser.ConfigParser()
        cp.optionxform = str
        cp["problem"] = {
            "N": str(self.N),
            "x": str(self.x),
            "L1": "" if self.L1 is None else str(self.L1),
            "L2": "" if self.L2 is None else str(self.L2),
            "backend": self.backend,
            "max_amplitudes": str(self.max_amplitudes),
        }
        cp["noise"] = {
            "lambda": repr(self.lam),
            "components": self.components,
            "samples": str(self.samples),
            "seed": str(self.seed),
            "omega_high_factor": repr(self.omega_high_factor),
            "substeps": str(self.substeps),
        }
        cp["run"] = {
            "capture": self.capture,
            "steps": "" if self.steps is None else ", ".join(map(str, self.steps)),
            "state_step": "" if self.state_step is None else str(self.state_step),
            "lambda_grid": ", ".join(repr(v) for v in self.lambda_grid),
        }
        cp["output"] = {"out": self.out, "svg": "true" if self.svg else "false"}
        cp["scaling"] = {"instances": ", ".join(str(i) for i in self.instances)}
        buf = io.StringIO()
        cp.write(buf)
        return buf.getvalue()

    @classmethod
    def from_ini(cls, text: str) -> "RunConfig":
        cp = configparser.ConfigParser()
        try:
            cp.read_string(text)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        known = {"problem", "noise", "run", "output", "scaling"}
        extra = set(cp.sections()) - known
        if extra:
            raise ConfigError(f"unknown sections: {sorted(extra)}")
        kw: dict = {}
        try:
            _read(cp, "problem", kw, {"N": int, "x": int, "L1": _opt_int, "L2": _opt_int,
                                      "backend": str, "max_amplitudes": int})
            _read(cp, "noise", kw, {"lambda": float, "components": str, "samples": int,
                                    "seed": int, "omega_high_factor": float, "substeps": int})
            _read(cp, "run", kw, {"capture": str, "steps": _opt_int_tuple,
                                  "state_step": _opt_int, "lambda_grid": _float_tuple})
            _read(cp, "output", kw, {"out": str, "svg": _bool})
            _read(cp, "scaling", kw, {"instances": _instances})
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        if "lambda" in kw:
            kw["lam"] = kw.pop("lambda")
        if ("N" in kw or "x" in kw) and "L1" not in kw and "L2" not in kw:
            # register widths fixed by the defaults belong to the default problem only
            kw["L1"] = kw["L2"] = None
        return cls(**kw)

    @classmethod
    def load(cls, path) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        return cls.from_ini(text)

    def save(self, path) -> None:
        Path(path).write_text(self.to_ini())


def _read(cp, section, kw, fields):
    if not cp.has_section(section):
        return
    lookup = {name.lower(): (name, conv) for name, conv in fields.items()}
    for key, raw in cp[section].items():
        key = key.lower()
        if key not in lookup:
            raise ConfigError(f"unknown key {key!r} in [{section}]")
        name, conv = lookup[key]
        kw[name] = conv(raw.strip())


def _opt_int(s: str) -> Optional[int]:
    return int(s) if s else None


def _opt_int_tuple(s: str) -> Optional[tuple]:
    return tuple(int(v) for v in s.split(",")) if s else None


def _float_tuple(s: str) -> tuple:
    return tuple(float(v) for v in s.split(",") if v.strip())


def _bool(s: str) -> bool:
    low = s.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off", ""):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _instances(s: str) -> tuple:
    return tuple(Instance.parse(v) for v in s.split(",") if v.strip())
