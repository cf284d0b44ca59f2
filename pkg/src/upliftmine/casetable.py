"""Case-level encoding: one fixed-width feature record per trace.

Each trace collapses to a CaseRecord: raw attributes take their last
observed value, derived features count activity occurrences or pull the
final value of a named event attribute, and the outcome becomes {0,1}.
Numeric features can then be discretized into interval labels, which is
what the rule miner works on; the original numeric values are kept
alongside so the tree can still split at raw thresholds.
"""

from __future__ import annotations

import logging
import warnings
from bisect import bisect_left
from dataclasses import dataclass, field
from math import floor

from .errors import ConfigError, SchemaError
from .logparse import EventLog, format_attr_value

log = logging.getLogger(__name__)

MISSING_LABEL = "missing"

DEFAULT_POSITIVE_LABELS = frozenset({"1", "true"})

CATEGORICAL = "categorical"
NUMERIC = "numeric"

SOURCE_RAW = "raw"
SOURCE_COUNT = "count"
SOURCE_LAST = "last"


@dataclass(frozen=True)
class AttributeSchema:
    """Declares one case-level feature and where it comes from.

    source "raw" takes the last observed value of the event attribute with
    the same name; "count" counts events whose activity equals source_arg;
    "last" takes the final value of the event attribute named source_arg.
    """

    name: str
    kind: str
    controllable: bool = False
    source: str = SOURCE_RAW
    source_arg: str | None = None

    def __post_init__(self):
        if not self.name:
            raise SchemaError("attribute name must be non-empty")
        if self.kind not in (CATEGORICAL, NUMERIC):
            raise SchemaError(f"attribute {self.name!r}: unknown kind {self.kind!r}")
        if self.source not in (SOURCE_RAW, SOURCE_COUNT, SOURCE_LAST):
            raise SchemaError(f"attribute {self.name!r}: unknown source {self.source!r}")
        if self.source != SOURCE_RAW and not self.source_arg:
            raise SchemaError(
                f"attribute {self.name!r}: source {self.source!r} needs source_arg"
            )


@dataclass
class CaseRecord:
    case_id: str
    features: dict[str, object]
    outcome: int

    def __post_init__(self):
        if self.outcome not in (0, 1):
            raise ValueError(f"case {self.case_id!r}: outcome must be 0 or 1")


@dataclass
class CaseTable:
    """Immutable-by-convention table of encoded cases.

    bins maps a discretized attribute to its interior interval boundaries
    (strictly increasing; together with the open ends they partition the
    real line). raw_numeric keeps the pre-discretization values, aligned
    with rows, for attributes that have been discretized.
    """

    schema: list[AttributeSchema]
    rows: list[CaseRecord]
    outcome_name: str
    bins: dict[str, list[float]] = field(default_factory=dict)
    raw_numeric: dict[str, list[float | None]] = field(default_factory=dict)

    def __post_init__(self):
        names = [a.name for a in self.schema]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate attribute names in schema")
        expected = set(names)
        for rec in self.rows:
            if set(rec.features) != expected:
                raise SchemaError(
                    f"case {rec.case_id!r}: feature keys do not match schema"
                )
        for attr, bounds in self.bins.items():
            if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
                raise ConfigError(f"bins for {attr!r} are not strictly increasing")

    def __len__(self) -> int:
        return len(self.rows)

    def attribute(self, name: str) -> AttributeSchema:
        for a in self.schema:
            if a.name == name:
                return a
        raise SchemaError(f"unknown attribute: {name!r}")

    @property
    def attribute_names(self) -> list[str]:
        return [a.name for a in self.schema]

    def column(self, name: str) -> list:
        self.attribute(name)
        return [rec.features[name] for rec in self.rows]

    def outcomes(self) -> list[int]:
        return [rec.outcome for rec in self.rows]

    def labels(self, name: str) -> list[str]:
        """Distinct observed labels of a discretized/categorical column."""
        seen = []
        for value in self.column(name):
            if value is not None and value not in seen:
                seen.append(value)
        return sorted(seen)

    def is_discretized(self, name: str) -> bool:
        return self.attribute(name).kind == CATEGORICAL or name in self.bins


def _coerce_outcome(value, positive_labels: frozenset[str], attr: str, case_id: str) -> int:
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, (int, float)):
        if value in (0, 1):
            return int(value)
        raise SchemaError(
            f"attribute {attr!r}: non-binary outcome {value!r} in case {case_id!r}"
        )
    text = str(value).strip().lower()
    return 1 if text in positive_labels else 0


def _coerce_numeric(value, attr: str, case_id: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        raise SchemaError(
            f"attribute {attr!r}: non-numeric value {value!r} in case {case_id!r}"
        ) from None


def encode_cases(
    event_log: EventLog,
    schema: list[AttributeSchema],
    outcome_name: str,
    positive_labels: frozenset[str] | None = None,
) -> CaseTable:
    """Collapse each trace to one CaseRecord; cases without the outcome drop."""
    positive_labels = positive_labels or DEFAULT_POSITIVE_LABELS
    positive_labels = frozenset(s.lower() for s in positive_labels)
    by_name = {a.name: a for a in schema}
    if len(by_name) != len(schema):
        raise SchemaError("duplicate attribute names in schema")
    if outcome_name not in by_name:
        raise SchemaError(f"outcome attribute {outcome_name!r} not in schema")
    outcome_attr = by_name[outcome_name]
    if outcome_attr.controllable:
        raise SchemaError(f"outcome attribute {outcome_name!r} must not be controllable")
    feature_schema = [a for a in schema if a.name != outcome_name]

    rows: list[CaseRecord] = []
    outcome_seen = False
    n_dropped = 0
    for trace in event_log.traces:
        last_values: dict[str, object] = {}
        counts: dict[str, int] = {}
        for ev in trace.events:
            counts[ev.activity] = counts.get(ev.activity, 0) + 1
            last_values.update(ev.attributes)

        def observe(attr: AttributeSchema):
            if attr.source == SOURCE_COUNT:
                return counts.get(attr.source_arg, 0)
            key = attr.source_arg if attr.source == SOURCE_LAST else attr.name
            return last_values.get(key)

        raw_outcome = observe(outcome_attr)
        if raw_outcome is not None:
            outcome_seen = True
        else:
            n_dropped += 1
            continue
        outcome = _coerce_outcome(
            raw_outcome, positive_labels, outcome_name, trace.case_id
        )

        features: dict[str, object] = {}
        for attr in feature_schema:
            value = observe(attr)
            if value is None:
                features[attr.name] = None
            elif attr.kind == NUMERIC:
                features[attr.name] = _coerce_numeric(value, attr.name, trace.case_id)
            else:
                features[attr.name] = format_attr_value(value)
        rows.append(CaseRecord(trace.case_id, features, outcome))

    if not outcome_seen:
        raise SchemaError(
            f"outcome attribute {outcome_name!r} never observed in any case"
        )
    if n_dropped:
        log.info("dropped %d cases with missing outcome %r", n_dropped, outcome_name)
    return CaseTable(schema=feature_schema, rows=rows, outcome_name=outcome_name)


def _is_integral(values: list[float]) -> bool:
    return all(float(v).is_integer() for v in values)


def _fmt(x: float) -> str:
    if float(x).is_integer():
        return str(int(x))
    return repr(float(x))


def _bin_labels(bounds: list[float], values: list[float]) -> list[str]:
    """Human-readable interval labels, one per bin (len(bounds) + 1).

    Integer-valued data gets closed integer intervals like "[6-48]" with an
    open-ended ">120" tail; anything else gets half-open interval notation.
    """
    if not bounds:
        lo, hi = min(values), max(values)
        if _is_integral(values):
            return [f"[{int(lo)}-{int(hi)}]"]
        return [f"[{_fmt(lo)}-{_fmt(hi)}]"]
    if _is_integral(values):
        observed_min = int(min(values))
        labels = []
        for i, b in enumerate(bounds):
            lo = observed_min if i == 0 else floor(bounds[i - 1]) + 1
            labels.append(f"[{lo}-{floor(b)}]")
        labels.append(f">{floor(bounds[-1])}")
        return labels
    labels = [f"<={_fmt(bounds[0])}"]
    for left, right in zip(bounds, bounds[1:]):
        labels.append(f"({_fmt(left)},{_fmt(right)}]")
    labels.append(f">{_fmt(bounds[-1])}")
    return labels


def equal_frequency_bounds(values: list[float], k: int) -> list[float]:
    """Interior boundaries splitting the distinct values into k runs of
    near-equal size (each run holds floor(n/k) or ceil(n/k) distinct values).
    Boundaries sit at midpoints between adjacent runs, so they never collide
    with observed values.
    """
    if k < 2:
        raise ConfigError(f"equal-frequency binning needs k >= 2, got {k}")
    distinct = sorted(set(values))
    n = len(distinct)
    if n <= 1:
        return []
    k_eff = min(k, n)
    base, rem = divmod(n, k_eff)
    bounds = []
    idx = 0
    for run in range(k_eff - 1):
        idx += base + (1 if run < rem else 0)
        bounds.append((distinct[idx - 1] + distinct[idx]) / 2.0)
    return bounds


def bin_index(bounds: list[float], value: float) -> int:
    """Bin of a value under right-closed intervals: bin i is (b[i-1], b[i]]."""
    return bisect_left(bounds, value)


def discretize(table: CaseTable, spec: dict[str, int | list[float]]) -> CaseTable:
    """Replace numeric feature values by interval labels; returns a new table.

    spec maps attribute name to either an equal-frequency bin count or an
    explicit strictly increasing list of interior boundaries. Missing values
    map to the dedicated "missing" label.
    """
    new_bins = dict(table.bins)
    new_raw = {k: list(v) for k, v in table.raw_numeric.items()}
    replacements: dict[str, list[str]] = {}

    for attr_name, how in spec.items():
        attr = table.attribute(attr_name)
        if attr.kind != NUMERIC:
            raise ConfigError(f"attribute {attr_name!r} is not numeric")
        if attr_name in table.bins:
            raise ConfigError(f"attribute {attr_name!r} is already discretized")
        column = table.column(attr_name)
        present = [float(v) for v in column if v is not None]
        if isinstance(how, int):
            if not present:
                warnings.warn(
                    f"attribute {attr_name!r}: no observed values, single bin"
                )
                bounds = []
            else:
                bounds = equal_frequency_bounds(present, how)
                got = len(bounds) + 1
                if got < how:
                    warnings.warn(
                        f"attribute {attr_name!r}: only {got} bin(s) possible "
                        f"for {how} requested (too few distinct values)"
                    )
        else:
            bounds = [float(b) for b in how]
            if any(b2 <= b1 for b1, b2 in zip(bounds, bounds[1:])):
                raise ConfigError(
                    f"boundaries for {attr_name!r} are not strictly increasing"
                )
        labels = _bin_labels(bounds, present) if present else []
        replacements[attr_name] = [
            MISSING_LABEL if v is None else labels[bin_index(bounds, float(v))]
            for v in column
        ]
        new_bins[attr_name] = bounds
        new_raw[attr_name] = [None if v is None else float(v) for v in column]

    new_rows = []
    for i, rec in enumerate(table.rows):
        features = dict(rec.features)
        for attr_name, labels in replacements.items():
            features[attr_name] = labels[i]
        new_rows.append(CaseRecord(rec.case_id, features, rec.outcome))
    return CaseTable(
        schema=list(table.schema),
        rows=new_rows,
        outcome_name=table.outcome_name,
        bins=new_bins,
        raw_numeric=new_raw,
    )
