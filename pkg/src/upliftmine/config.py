"""Pipeline configuration: one dataclass, loaded from YAML, dumped verbatim
into the run manifest so a run can be reproduced from its artifacts."""

from __future__ import annotations

import os
from dataclasses import asdict, dataclass, field

import yaml

from .casetable import DEFAULT_POSITIVE_LABELS, AttributeSchema
from .errors import ConfigError, SchemaError
from .logparse import CsvColumns
from .ranking import CostModel
from .uplift import TreeParams

INPUT_FORMATS = ("csv", "xes")


@dataclass
class RuleParams:
    min_support: float = 0.03
    min_confidence: float = 0.55
    max_antecedent_len: int = 4

    def __post_init__(self):
        if not 0.0 < self.min_support <= 1.0:
            raise ConfigError("min_support must be in (0, 1]")
        if not 0.0 < self.min_confidence <= 1.0:
            raise ConfigError("min_confidence must be in (0, 1]")
        if self.max_antecedent_len < 1:
            raise ConfigError("max_antecedent_len must be >= 1")


@dataclass
class PipelineConfig:
    input: str
    outcome: str
    attributes: list[AttributeSchema]
    input_format: str = "csv"
    out_dir: str = "out"
    positive_labels: tuple[str, ...] = tuple(sorted(DEFAULT_POSITIVE_LABELS))
    csv: CsvColumns = field(default_factory=CsvColumns)
    bins: dict[str, int | list[float]] = field(default_factory=dict)
    rules: RuleParams = field(default_factory=RuleParams)
    tree: TreeParams = field(default_factory=TreeParams)
    min_uplift: float = 0.0
    cost: CostModel = field(default_factory=lambda: CostModel(1.0, 0.0))
    cost_overrides: dict[str, CostModel] = field(default_factory=dict)

    def __post_init__(self):
        if self.input_format not in INPUT_FORMATS:
            raise ConfigError(
                f"format must be one of {INPUT_FORMATS}, got {self.input_format!r}"
            )
        if not self.input:
            raise ConfigError("input path is required")
        if not self.outcome:
            raise ConfigError("outcome attribute name is required")
        names = [a.name for a in self.attributes]
        if len(set(names)) != len(names):
            raise ConfigError("duplicate attribute names in config")
        if self.outcome not in names:
            raise ConfigError(
                f"outcome {self.outcome!r} is not among the declared attributes"
            )
        for attr in self.bins:
            if attr not in names:
                raise ConfigError(f"bins configured for undeclared attribute {attr!r}")


def _section(raw, name: str) -> dict:
    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise ConfigError(f"config section {name!r} must give a mapping")
    return raw


def _build(cls, raw, name: str):
    try:
        return cls(**_section(raw, name))
    except TypeError as exc:
        raise ConfigError(f"config section {name!r}: {exc}") from None


_TOP_KEYS = frozenset(
    {
        "input",
        "format",
        "out_dir",
        "outcome",
        "positive_labels",
        "csv",
        "attributes",
        "bins",
        "rules",
        "tree",
        "min_uplift",
        "cost",
    }
)


def config_from_dict(raw: dict) -> PipelineConfig:
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    unknown = sorted(set(raw) - _TOP_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {', '.join(unknown)}")
    for key in ("input", "outcome", "attributes"):
        if key not in raw:
            raise ConfigError(f"config key {key!r} is required")

    attr_entries = raw["attributes"]
    if not isinstance(attr_entries, list) or not attr_entries:
        raise ConfigError("attributes must be a non-empty list")
    attributes = []
    for entry in attr_entries:
        try:
            attributes.append(AttributeSchema(**_section(entry, "attributes[]")))
        except (TypeError, SchemaError) as exc:
            raise ConfigError(f"bad attribute declaration {entry!r}: {exc}") from None

    cost_raw = dict(_section(raw.get("cost"), "cost"))
    overrides_raw = _section(cost_raw.pop("overrides", None), "cost.overrides")
    cost_raw.setdefault("outcome_value", 1.0)
    cost_raw.setdefault("impression_cost", 0.0)
    cost = _build(CostModel, cost_raw, "cost")
    cost_overrides = {
        key: _build(CostModel, entry, f"cost.overrides[{key}]")
        for key, entry in overrides_raw.items()
    }

    labels = raw.get("positive_labels")
    if labels is not None and (
        not isinstance(labels, list) or not all(isinstance(s, str) for s in labels)
    ):
        raise ConfigError("positive_labels must be a list of strings")

    try:
        min_uplift = float(raw.get("min_uplift", 0.0))
    except (TypeError, ValueError):
        raise ConfigError("min_uplift must be a number") from None

    return PipelineConfig(
        input=str(raw["input"]),
        outcome=str(raw["outcome"]),
        attributes=attributes,
        input_format=raw.get("format", "csv"),
        out_dir=str(raw.get("out_dir", "out")),
        positive_labels=tuple(labels) if labels else tuple(sorted(DEFAULT_POSITIVE_LABELS)),
        csv=_build(CsvColumns, raw.get("csv"), "csv"),
        bins=_section(raw.get("bins"), "bins"),
        rules=_build(RuleParams, raw.get("rules"), "rules"),
        tree=_build(TreeParams, raw.get("tree"), "tree"),
        min_uplift=min_uplift,
        cost=cost,
        cost_overrides=cost_overrides,
    )


def config_to_dict(config: PipelineConfig) -> dict:
    """Plain-data mirror of config_from_dict's input, manifest- and YAML-ready."""
    cost = asdict(config.cost)
    cost["overrides"] = {k: asdict(v) for k, v in config.cost_overrides.items()}
    return {
        "input": config.input,
        "format": config.input_format,
        "out_dir": config.out_dir,
        "outcome": config.outcome,
        "positive_labels": list(config.positive_labels),
        "csv": asdict(config.csv),
        "attributes": [asdict(a) for a in config.attributes],
        "bins": dict(config.bins),
        "rules": asdict(config.rules),
        "tree": asdict(config.tree),
        "min_uplift": config.min_uplift,
        "cost": cost,
    }


def _resolve(path: str, base: str) -> str:
    return path if os.path.isabs(path) else os.path.normpath(os.path.join(base, path))


def load_config(path) -> PipelineConfig:
    """Read a YAML config; relative input/out_dir resolve against the file."""
    with open(path, encoding="utf-8") as fh:
        try:
            raw = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"cannot parse config {path}: {exc}") from None
    config = config_from_dict(raw)
    base = os.path.dirname(os.path.abspath(path))
    config.input = _resolve(config.input, base)
    config.out_dir = _resolve(config.out_dir, base)
    return config


def save_config(config: PipelineConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config_to_dict(config), fh, sort_keys=True)
