"""Scenario configuration: strict TOML ingestion and byte-stable emission.

A scenario file has top-level ``scenario`` and ``seed`` keys plus one
section per module (``link``, ``protocol``, ``memory``, ``sim``, ``diqkd``)
whose keys mirror the module dataclass fields one-to-one.  Unknown keys are
hard errors; every module invariant is revalidated on load.  Omitted keys
fall back to module defaults, with one derived exception:
``protocol.false_herald_weight`` is computed from the link section when
absent.

``emit_config`` writes every resolved field back out, so
``load_config(emit_config(cfg))`` reproduces ``cfg`` field-for-field.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, fields, replace
from pathlib import Path

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .diqkd import BasisDistribution, KeyParams
from .herald import ProtocolParams, false_herald_weight_from_link
from .linkmodel import LinkBudget
from .memory import MemoryModel
from .qstate import BellKind

__all__ = [
    "ConfigError",
    "SimParams",
    "DiqkdSection",
    "ScenarioConfig",
    "load_config",
    "emit_config",
    "packaged_config_path",
]

_PACKAGED_DIR = Path(__file__).parent / "configs"


class ConfigError(Exception):
    """A configuration problem, naming file, section and key."""

    def __init__(self, path, section: str, message: str):
        self.path = str(path)
        self.section = section
        self.message = message
        where = f"{section}." if section else ""
        super().__init__(f"{self.path}: {where}{message}")


@dataclass(frozen=True)
class SimParams:
    """Event-level simulation knobs.

    ``two_pair_alpha`` is the excitation fraction of the storage (two-pair)
    experiment, which runs at a higher rate than the key-generation rounds.
    """

    duration_s: float = 10000.0
    n_trials: int = 100000
    two_pair_alpha: float = 0.17
    dead_time_s: float = 0.0
    mode: str = "continuous"
    sweep_alphas: tuple = (0.025, 0.05, 0.075, 0.1, 0.125, 0.15, 0.17)

    def __post_init__(self):
        if self.duration_s <= 0.0:
            raise ValueError(f"duration_s must be > 0, got {self.duration_s}")
        if self.n_trials < 1:
            raise ValueError(f"n_trials must be >= 1, got {self.n_trials}")
        if not 0.0 <= self.two_pair_alpha <= 0.5:
            raise ValueError(f"two_pair_alpha must be in [0, 0.5], got {self.two_pair_alpha}")
        if self.dead_time_s < 0.0:
            raise ValueError(f"dead_time_s must be >= 0, got {self.dead_time_s}")
        if self.mode not in ("continuous", "discrete"):
            raise ValueError(f"mode must be 'continuous' or 'discrete', got {self.mode!r}")
        if any(not 0.0 <= a <= 0.5 for a in self.sweep_alphas):
            raise ValueError("sweep_alphas entries must lie in [0, 0.5]")
        object.__setattr__(self, "sweep_alphas", tuple(float(a) for a in self.sweep_alphas))


@dataclass(frozen=True)
class DiqkdSection:
    """Key-rate accounting inputs plus the scenario's measured anchors."""

    recon_efficiency: float = 1.122
    epsilon: float = 1e-5
    nu: float = 10.3132409908
    n_rounds: int = 405145
    alice_x_probs: tuple = (0.7138185094, 0.2861814906)
    bob_y_probs: tuple = (1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0)
    s_ref: float = 2.5758
    s_ref_err: float = 0.0059
    q_ref: float = 0.036
    q_ref_err: float = 0.0006

    def __post_init__(self):
        object.__setattr__(self, "alice_x_probs", tuple(float(p) for p in self.alice_x_probs))
        object.__setattr__(self, "bob_y_probs", tuple(float(p) for p in self.bob_y_probs))
        if self.n_rounds < 1:
            raise ValueError(f"n_rounds must be >= 1, got {self.n_rounds}")
        if self.s_ref_err < 0.0 or self.q_ref_err < 0.0:
            raise ValueError("s_ref_err and q_ref_err must be >= 0")
        # delegate the rest to the module types
        self.key_params()

    def key_params(self) -> KeyParams:
        return KeyParams(
            recon_efficiency=self.recon_efficiency,
            epsilon=self.epsilon,
            nu=self.nu,
            basis=BasisDistribution.from_marginals(self.alice_x_probs, self.bob_y_probs),
        )


@dataclass(frozen=True)
class ScenarioConfig:
    scenario: str
    seed: int
    link: LinkBudget
    protocol: ProtocolParams
    memory: MemoryModel
    sim: SimParams
    diqkd: DiqkdSection

    def __post_init__(self):
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if not self.scenario:
            raise ValueError("scenario name must be non-empty")


_SECTION_TYPES = {
    "link": LinkBudget,
    "protocol": ProtocolParams,
    "memory": MemoryModel,
    "sim": SimParams,
    "diqkd": DiqkdSection,
}


def packaged_config_path(name: str) -> Path:
    """Path of a shipped scenario config, e.g. 'default_10km'."""
    path = _PACKAGED_DIR / f"{name}.toml"
    if not path.exists():
        shipped = ", ".join(sorted(p.stem for p in _PACKAGED_DIR.glob("*.toml")))
        raise FileNotFoundError(f"no packaged config {name!r} (shipped: {shipped})")
    return path


def _build_section(path, name, cls, raw: dict):
    allowed = {f.name for f in fields(cls)}
    for key in raw:
        if key not in allowed:
            raise ConfigError(path, name, f"{key}: unknown key")
    kwargs = dict(raw)
    if name == "protocol" and "sign" in kwargs:
        try:
            kwargs["sign"] = BellKind.from_string(kwargs["sign"])
        except ValueError as exc:
            raise ConfigError(path, name, f"sign: {exc}") from None
    for key in ("sweep_alphas", "alice_x_probs", "bob_y_probs"):
        if key in kwargs:
            kwargs[key] = tuple(kwargs[key])
    try:
        return cls(**kwargs)
    except TypeError as exc:
        raise ConfigError(path, name, f"missing or invalid keys ({exc})") from None
    except ValueError as exc:
        # validator messages lead with the offending field name
        raise ConfigError(path, name, str(exc)) from None


def load_config(path) -> ScenarioConfig:
    """Parse and validate a scenario file (strict keys, module invariants)."""
    path = Path(path)
    try:
        with open(path, "rb") as handle:
            raw = tomllib.load(handle)
    except FileNotFoundError:
        raise ConfigError(path, "", "file not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(path, "", f"parse error: {exc}") from None

    allowed_top = {"scenario", "seed", *(_SECTION_TYPES)}
    for key in raw:
        if key not in allowed_top:
            raise ConfigError(path, "", f"{key}: unknown key")
    for required in ("scenario", "seed"):
        if required not in raw:
            raise ConfigError(path, "", f"{required}: missing required key")

    sections = {}
    for name, cls in _SECTION_TYPES.items():
        section_raw = raw.get(name, {})
        if not isinstance(section_raw, dict):
            raise ConfigError(path, name, "section must be a table")
        if name == "protocol":
            continue  # needs the link section first
        sections[name] = _build_section(path, name, cls, section_raw)

    protocol_raw = dict(raw.get("protocol", {}))
    derive_weight = "false_herald_weight" not in protocol_raw
    protocol = _build_section(path, "protocol", ProtocolParams, protocol_raw)
    if derive_weight:
        protocol = replace(
            protocol,
            false_herald_weight=false_herald_weight_from_link(sections["link"], protocol.alpha),
        )

    try:
        return ScenarioConfig(
            scenario=str(raw["scenario"]),
            seed=int(raw["seed"]),
            link=sections["link"],
            protocol=protocol,
            memory=sections["memory"],
            sim=sections["sim"],
            diqkd=sections["diqkd"],
        )
    except ValueError as exc:
        raise ConfigError(path, "", str(exc)) from None


def _toml_scalar(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"cannot emit non-finite float {value}")
        text = repr(value)
        return text if any(c in text for c in ".e") else text + ".0"
    if isinstance(value, str):
        return json.dumps(value)
    if isinstance(value, BellKind):
        return json.dumps(value.value)
    if isinstance(value, (tuple, list)):
        return "[" + ", ".join(_toml_scalar(v) for v in value) + "]"
    raise TypeError(f"cannot emit {type(value).__name__} to TOML")


def emit_config(config: ScenarioConfig, path) -> Path:
    """Write every resolved field; the output reloads to an equal config."""
    lines = [
        f"scenario = {_toml_scalar(config.scenario)}",
        f"seed = {_toml_scalar(config.seed)}",
    ]
    for name, cls in _SECTION_TYPES.items():
        lines.append("")
        lines.append(f"[{name}]")
        section = getattr(config, name)
        for f in fields(cls):
            lines.append(f"{f.name} = {_toml_scalar(getattr(section, f.name))}")
    path = Path(path)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8", newline="\n")
    return path
