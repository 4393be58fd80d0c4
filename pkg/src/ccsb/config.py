"""Run configuration: sectioned ``key = value`` files, validated up front.

A configuration names one application (engine run of either model, or an
exact oracle run) plus the model, sampling, propagator, observable and grid
settings it needs.  Every key is checked against a schema before anything
is computed, so a bad file never leaves partial outputs behind.
"""

import configparser
import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

from .errors import ConfigurationError
from .propagator import PropagatorSettings

APPLICATIONS = ("app1", "app2", "oracle-app1", "oracle-app2")
APP1 = ("app1", "oracle-app1")
APP2 = ("app2", "oracle-app2")
ENGINE = ("app1", "app2")

# key: (type, applications that require it, default, applications that accept it)
_SCHEMA = {
    "run": {
        "application": (str, APPLICATIONS, None, APPLICATIONS),
        "name": (str, (), None, APPLICATIONS),
        "t_end": (float, APPLICATIONS, None, APPLICATIONS),
        "checkpoint_every": (float, (), None, ENGINE),
    },
    "model": {
        "eta": (float, APP1, None, APP1),
        "lambda": (float, APP1, None, APP1),
        "M": (int, APP1, None, APP1),
        "xi": (float, APP2, None, APP2),
        "lambda0": (float, APP2, None, APP2),
        "N": (int, APP2, None, APP2),
        "Omega": (int, APPLICATIONS, None, APPLICATIONS),
    },
    "sampling": {
        "K": (int, ENGINE, None, ENGINE),
        "sigma_occupied": (float, (), 1.0, ENGINE),
        "sigma_empty": (float, (), 1.0, ENGINE),
        "sigma_tunnelling": (float, (), 1.0, ("app1",)),
        "q0": (float, (), -2.5, APP1),
        "p0": (float, (), 0.0, APP1),
        "seed": (int, (), 0, ENGINE),
        "renormalize": (bool, (), False, ENGINE),
    },
    "propagator": {
        "dt": (float, (), 0.01, ENGINE),
        "integrator": (str, (), "rk45", ENGINE),
        "rel_tol": (float, (), 1e-8, ENGINE),
        "abs_tol": (float, (), 1e-10, ENGINE),
        "svd_cutoff": (float, (), 1e-10, ENGINE),
        "record_every": (float, (), 0.1, APPLICATIONS),
        "norm_guard": (float, (), 0.5, ENGINE),
    },
    "observables": {
        "columns": (list, (), None, APPLICATIONS),
        "q_mirror": (float, (), 2.5, APP1),
        "spectrum": (bool, (), True, APP1),
    },
    "grid": {
        "lo": (float, (), -8.0, APP2),
        "hi": (float, (), 10.0, APP2),
        "step": (float, (), 0.02, APP2),
    },
    "oracle": {
        "L": (int, (), 40, ("oracle-app1",)),
    },
}

COLUMNS = {
    "app1": ("norm", "particle_number", "energy", "ccf", "ccf_normalized"),
    "app2": ("norm", "particle_number", "energy", "mean", "variance"),
    "oracle-app1": ("norm", "energy", "ccf", "ccf_normalized"),
    "oracle-app2": ("norm", "particle_number", "energy", "mean", "variance"),
}
# available on request, never written by default
OPTIONAL_COLUMNS = {
    "app1": ("energy_normalized", "particle_number_normalized"),
    "app2": ("energy_normalized", "particle_number_normalized"),
    "oracle-app1": ("energy_normalized",),
    "oracle-app2": ("energy_normalized", "particle_number_normalized"),
}

PRESET_DIR = resources.files("ccsb").joinpath("presets")


def _convert(kind, raw, where):
    text = raw.strip()
    try:
        if kind is int:
            value = float(text)
            if value != int(value):
                raise ValueError
            return int(value)
        if kind is float:
            return float(text)
        if kind is bool:
            lowered = text.lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError
        if kind is list:
            return [item.strip() for item in text.split(",") if item.strip()]
        return text
    except ValueError:
        raise ConfigurationError(f"{where}: cannot read {raw!r} as {kind.__name__}") from None


def _coerce(kind, value, where):
    """Typed values (from JSON metadata or code) go through the same checks as text."""
    if kind is list:
        if not isinstance(value, (list, tuple)):
            raise ConfigurationError(f"{where}: expected a list, got {value!r}")
        return [str(v) for v in value]
    if kind is bool and not isinstance(value, bool):
        raise ConfigurationError(f"{where}: expected true or false, got {value!r}")
    if kind in (int, float) and (isinstance(value, bool) or not isinstance(value, (int, float))):
        raise ConfigurationError(f"{where}: expected a number, got {value!r}")
    if kind is int and value != int(value):
        raise ConfigurationError(f"{where}: expected an integer, got {value!r}")
    return kind(value)


@dataclass
class RunConfig:
    """Resolved configuration; ``values[section][key]`` holds typed values."""

    values: dict = field(default_factory=dict)
    source: str = "<memory>"

    @classmethod
    def from_mapping(cls, raw, source="<memory>"):
        """Validate a ``{section: {key: str-or-value}}`` mapping and fill defaults."""
        raw = {str(s): dict(v) for s, v in raw.items()}
        for section in raw:
            if section not in _SCHEMA:
                raise ConfigurationError(f"{source}: unknown section [{section}]")
        run = raw.get("run", {})
        if "application" not in run:
            raise ConfigurationError(f"{source}: missing [run] application")
        app = str(run["application"]).strip()
        if app not in APPLICATIONS:
            raise ConfigurationError(
                f"{source}: application must be one of {', '.join(APPLICATIONS)}, got {app!r}")
        values = {}
        for section, keys in _SCHEMA.items():
            given = {k: v for k, v in raw.get(section, {}).items() if v is not None}
            for key in given:
                if key not in keys:
                    raise ConfigurationError(f"{source}: unknown key [{section}] {key}")
                if app not in keys[key][3]:
                    raise ConfigurationError(f"{source}: [{section}] {key} does not apply to {app}")
            out = {}
            for key, (kind, required, default, accepted) in keys.items():
                if app not in accepted:
                    continue
                if key in given:
                    value = given[key]
                    where = f"{source} [{section}] {key}"
                    out[key] = (_convert(kind, value, where) if isinstance(value, str)
                                else _coerce(kind, value, where))
                elif app in required:
                    raise ConfigurationError(f"{source}: missing [{section}] {key} for {app}")
                else:
                    out[key] = default
            values[section] = out
        config = cls(values, source)
        config.validate()
        return config

    @classmethod
    def from_text(cls, text, source="<text>"):
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";", "#"))
        parser.optionxform = str
        try:
            parser.read_string(text, source=source)
        except configparser.Error as exc:
            raise ConfigurationError(f"{source}: {exc}") from None
        return cls.from_mapping({s: dict(parser.items(s)) for s in parser.sections()}, source)

    @classmethod
    def from_file(cls, path):
        """Read a ``.ini`` file, or the ``config`` block of a run's metadata JSON."""
        path = Path(path)
        if not path.is_file():
            raise ConfigurationError(f"config file {path} does not exist")
        if path.suffix == ".json":
            try:
                meta = json.loads(path.read_text())
                block = meta["config"]
            except (ValueError, KeyError):
                raise ConfigurationError(f"{path}: no config block in metadata") from None
            return cls.from_mapping(block, str(path))
        return cls.from_text(path.read_text(), str(path))

    @classmethod
    def preset(cls, name):
        try:
            text = PRESET_DIR.joinpath(f"{name}.ini").read_text()
        except FileNotFoundError:
            raise ConfigurationError(
                f"unknown preset {name!r}; available: {', '.join(preset_names())}") from None
        return cls.from_text(text, f"preset:{name}")

    def with_overrides(self, overrides):
        """New config with ``{(section, key): value}`` replaced, revalidated."""
        raw = {s: {k: v for k, v in keys.items() if v is not None} for s, keys in self.values.items()}
        for (section, key), value in overrides.items():
            raw.setdefault(section, {})[key] = value
        return RunConfig.from_mapping(raw, self.source)

    # convenience accessors

    @property
    def application(self):
        return self.values["run"]["application"]

    @property
    def is_oracle(self):
        return self.application.startswith("oracle")

    @property
    def model_name(self):
        return "app1" if self.application in APP1 else "app2"

    def __getitem__(self, section):
        return self.values[section]

    def propagator_settings(self):
        p = self.values["propagator"]
        return PropagatorSettings(dt=p["dt"], integrator=p["integrator"], rel_tol=p["rel_tol"],
                                  abs_tol=p["abs_tol"], svd_cutoff=p["svd_cutoff"],
                                  record_every=p["record_every"], norm_guard=p["norm_guard"])

    @property
    def columns(self):
        chosen = self.values["observables"]["columns"]
        return tuple(chosen) if chosen else COLUMNS[self.application]

    def validate(self):
        v = self.values
        app = self.application
        if not v["run"]["t_end"] > 0:
            raise ConfigurationError("[run] t_end must be positive")
        m = v["model"]
        if m["Omega"] < 0:
            raise ConfigurationError("[model] Omega must be non-negative")
        if app in APP1:
            if m["M"] < 2:
                raise ConfigurationError("[model] M must be at least 2")
            if not m["eta"] > 0:
                raise ConfigurationError("[model] eta must be positive")
        else:
            if m["N"] < 1:
                raise ConfigurationError("[model] N must be at least 1")
        if app in ENGINE:
            if v["sampling"]["K"] < 1:
                raise ConfigurationError("[sampling] K must be at least 1")
            self.propagator_settings()
        record = v["propagator"]["record_every"]
        if not record > 0:
            raise ConfigurationError("[propagator] record_every must be positive")
        n = round(v["run"]["t_end"] / record)
        if abs(n * record - v["run"]["t_end"]) > 1e-9 * v["run"]["t_end"]:
            raise ConfigurationError("[run] t_end must be a multiple of record_every")
        every = v["run"].get("checkpoint_every")
        if every is not None:
            k = round(every / record)
            if k < 1 or abs(k * record - every) > 1e-9 * every:
                raise ConfigurationError("[run] checkpoint_every must be a multiple of record_every")
        unknown = set(self.columns) - set(COLUMNS[app]) - set(OPTIONAL_COLUMNS[app])
        if unknown:
            raise ConfigurationError(
                f"[observables] columns {sorted(unknown)} not available for {app}")
        if app in APP2:
            g = v["grid"]
            if not (g["hi"] > g["lo"] and g["step"] > 0):
                raise ConfigurationError("[grid] needs lo < hi and step > 0")

    def to_dict(self):
        return json.loads(json.dumps(self.values))

    def digest(self):
        blob = json.dumps(self.values, sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()

    def to_ini(self):
        parser = configparser.ConfigParser(interpolation=None)
        parser.optionxform = str
        for section, keys in self.values.items():
            items = {}
            for key, value in keys.items():
                if value is None:
                    continue
                if isinstance(value, list):
                    items[key] = ", ".join(value)
                elif isinstance(value, float):
                    items[key] = repr(value)
                else:
                    items[key] = str(value)
            if items:
                parser[section] = items
        lines = []
        for section in parser.sections():
            lines.append(f"[{section}]")
            lines += [f"{k} = {val}" for k, val in parser[section].items()]
            lines.append("")
        return "\n".join(lines)

    @property
    def name(self):
        return self.values["run"]["name"] or self.application


def preset_names():
    return sorted(p.name[:-4] for p in PRESET_DIR.iterdir()
                  if p.name.endswith(".ini"))


def parse_override(text):
    """``section.key=value`` to ``((section, key), value)``."""
    if "=" not in text or "." not in text.split("=", 1)[0]:
        raise ConfigurationError(f"override {text!r} must look like section.key=value")
    lhs, value = text.split("=", 1)
    section, key = lhs.strip().split(".", 1)
    return (section, key), value.strip()
