"""Run configuration: environment, training and run metadata in one JSON file.

Schema (version 1)::

    {"schema_version": 1,
     "env": {EnvConfig fields},
     "train": {TrainConfig fields},
     "run": {run_id, output_dir, episodes, eval_every, checkpoint_every,
             eval_episodes, eval_batches}}

Missing keys take their defaults; unknown keys are rejected.  Lengths are in
meters, angles in radians, times in seconds.
"""
import json
from dataclasses import asdict, dataclass, field, fields

from .env import EnvConfig
from .errors import ConfigError
from .ppo import TrainConfig
from .trainer import config_hash

CONFIG_SCHEMA = 1


@dataclass
class RunSettings:
    run_id: str = "run"
    output_dir: str = "runs"
    episodes: int = 3000
    eval_every: int = 10
    checkpoint_every: int = 250
    eval_episodes: int = 100
    eval_batches: int = 1

    def __post_init__(self):
        if self.episodes < 0:
            raise ConfigError("episodes must be >= 0")
        if min(self.eval_every, self.checkpoint_every, self.eval_episodes, self.eval_batches) < 1:
            raise ConfigError("eval/checkpoint cadences and eval sizes must be >= 1")


@dataclass
class RunConfig:
    env: EnvConfig = field(default_factory=EnvConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    run: RunSettings = field(default_factory=RunSettings)

    def to_dict(self):
        return {"schema_version": CONFIG_SCHEMA, "env": asdict(self.env),
                "train": asdict(self.train), "run": asdict(self.run)}

    @property
    def hash(self):
        """Digest of everything that affects numeric results (not paths or ids)."""
        run = asdict(self.run)
        run.pop("run_id")
        run.pop("output_dir")
        return config_hash(asdict(self.env), asdict(self.train), run)

    @classmethod
    def from_dict(cls, data):
        if not isinstance(data, dict):
            raise ConfigError("configuration must be a JSON object")
        version = data.get("schema_version", CONFIG_SCHEMA)
        if version != CONFIG_SCHEMA:
            raise ConfigError(f"unsupported config schema {version!r}")
        unknown = set(data) - {"schema_version", "env", "train", "run"}
        if unknown:
            raise ConfigError(f"unknown config sections: {sorted(unknown)}")
        parts = {}
        for key, klass in (("env", EnvConfig), ("train", TrainConfig), ("run", RunSettings)):
            parts[key] = _build(klass, data.get(key, {}), key)
        return cls(**parts)


def _build(klass, values, section):
    if not isinstance(values, dict):
        raise ConfigError(f"section {section!r} must be an object")
    known = {f.name: f for f in fields(klass)}
    unknown = set(values) - set(known)
    if unknown:
        raise ConfigError(f"unknown keys in {section!r}: {sorted(unknown)}")
    coerced = {k: _coerce(v, known[k].default, f"{section}.{k}") for k, v in values.items()}
    try:
        return klass(**coerced)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{section}: {exc}") from None


def _coerce(value, default, name):
    """Convert ``value`` to the type of the field default (used for flag strings too)."""
    kind = type(default)
    try:
        if default is None:
            # optional numeric fields (init_std)
            if value is None or (isinstance(value, str) and value.lower() in ("none", "null", "")):
                return None
            return float(value)
        if kind is bool:
            if isinstance(value, str):
                low = value.lower()
                if low not in ("true", "false", "1", "0", "yes", "no"):
                    raise ValueError(value)
                return low in ("true", "1", "yes")
            return bool(value)
        if kind is int:
            if isinstance(value, float) and not value.is_integer():
                raise ValueError(value)
            return int(value)
        if kind is float:
            return float(value)
        return str(value)
    except (TypeError, ValueError):
        raise ConfigError(f"{name}: cannot interpret {value!r} as {kind.__name__}") from None


def load_config(path):
    try:
        with open(path) as fh:
            data = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None
    return RunConfig.from_dict(data)


def save_config(config, path):
    with open(path, "w") as fh:
        json.dump(config.to_dict(), fh, indent=2, sort_keys=True)
        fh.write("\n")


def override_keys():
    """Map of kebab-case flag names to ``(section, field)``."""
    keys = {}
    for section, klass in (("env", EnvConfig), ("train", TrainConfig), ("run", RunSettings)):
        for f in fields(klass):
            flag = f.name.replace("_", "-")
            if flag in keys:
                # fields that exist in two sections (seed) are addressed with a prefix
                prev = keys.pop(flag)
                keys[f"{prev[0]}-{flag}"] = prev
                keys[f"{section}-{flag}"] = (section, f.name)
            else:
                keys[flag] = (section, f.name)
    return keys


def apply_overrides(config, overrides):
    """Return a new config with ``{flag: value}`` overrides applied."""
    data = config.to_dict()
    table = override_keys()
    for flag, value in overrides.items():
        if flag == "seed":
            data["env"]["seed"] = value
            data["train"]["seed"] = value
            continue
        if flag not in table:
            raise ConfigError(f"unknown option --{flag}")
        section, name = table[flag]
        data[section][name] = value
    return RunConfig.from_dict(data)
