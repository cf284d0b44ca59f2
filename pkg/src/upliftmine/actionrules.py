"""Action-rule mining over a discretized case table.

A classification rule is a conjunction of attribute=label conditions
predicting one outcome class. An action rule pairs a class-0 rule with a
class-1 rule that agree on every uncontrollable condition and differ on at
least one controllable one: the shared/unchanged conditions become stable
terms, the differing controllable conditions become flexible terms
(attr: from -> to), and the pair's measures combine as
support = min(sup0, sup1), confidence = conf0 * conf1.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .casetable import NUMERIC, CaseTable
from .errors import ConfigError, SchemaError


@dataclass(frozen=True, order=True)
class AtomicActionTerm:
    """One attribute condition: stable when from_value == to_value."""

    attribute: str
    from_value: str
    to_value: str

    @property
    def is_stable(self) -> bool:
        return self.from_value == self.to_value


@dataclass(frozen=True)
class ClassificationRule:
    """condition is a tuple of (attribute, label) pairs sorted by attribute."""

    condition: tuple[tuple[str, str], ...]
    target_class: int
    support: float
    confidence: float


@dataclass(frozen=True)
class ActionRule:
    stable: tuple[AtomicActionTerm, ...]
    flexible: tuple[AtomicActionTerm, ...]
    outcome: str
    support: float
    confidence: float

    def __post_init__(self):
        if not self.flexible:
            raise ValueError("action rule needs at least one flexible term")
        for term in self.stable:
            if not term.is_stable:
                raise ValueError(f"stable term changes value: {term}")
        for term in self.flexible:
            if term.is_stable:
                raise ValueError(f"flexible term does not change value: {term}")

    @property
    def terms(self) -> tuple[AtomicActionTerm, ...]:
        return tuple(sorted(self.stable + self.flexible))


@dataclass(frozen=True)
class Treatment:
    """The flexible part of one or more action rules: the value changes."""

    changes: tuple[AtomicActionTerm, ...]

    def __post_init__(self):
        if not self.changes:
            raise ValueError("treatment must contain at least one change")
        attrs = [t.attribute for t in self.changes]
        if len(set(attrs)) != len(attrs):
            raise ValueError("treatment attributes must be pairwise distinct")
        for term in self.changes:
            if term.is_stable:
                raise ValueError(f"treatment change must alter the value: {term}")
        object.__setattr__(self, "changes", tuple(sorted(self.changes)))

    @property
    def key(self) -> str:
        return "&".join(
            f"{t.attribute}:{t.from_value}->{t.to_value}" for t in self.changes
        )


def _check_discretized(table: CaseTable) -> None:
    if not table.rows:
        raise SchemaError("empty case table")
    for attr in table.schema:
        if attr.kind == NUMERIC and attr.name not in table.bins:
            raise SchemaError(f"numeric attribute {attr.name!r} is not discretized")


def _item_masks(table: CaseTable) -> dict[str, dict[str, np.ndarray]]:
    masks: dict[str, dict[str, np.ndarray]] = {}
    for attr in table.schema:
        column = np.array(table.column(attr.name), dtype=object)
        masks[attr.name] = {
            label: column == label for label in table.labels(attr.name)
        }
    return masks


def mine_classification_rules(
    table: CaseTable,
    target_class: int,
    min_support: float,
    min_confidence: float,
    max_antecedent_len: int = 4,
) -> list[ClassificationRule]:
    """Every condition set (up to the length cap) meeting both minima.

    support = P(condition and class), confidence = P(class | condition).
    Enumeration is exhaustive; support-based apriori pruning only skips
    supersets that cannot reach min_support.
    """
    _check_discretized(table)
    if not (0.0 < min_support <= 1.0) or not (0.0 < min_confidence <= 1.0):
        raise ConfigError("min_support and min_confidence must be in (0, 1]")
    if target_class not in (0, 1):
        raise ConfigError(f"target_class must be 0 or 1, got {target_class}")

    n = len(table)
    class_mask = np.array(table.outcomes()) == target_class
    masks = _item_masks(table)

    rules: list[ClassificationRule] = []

    def emit(condition: tuple[tuple[str, str], ...], cond_mask: np.ndarray):
        joint = int((cond_mask & class_mask).sum())
        support = joint / n
        if support < min_support:
            return False
        cond_total = int(cond_mask.sum())
        confidence = joint / cond_total if cond_total else 0.0
        if confidence >= min_confidence:
            rules.append(
                ClassificationRule(condition, target_class, support, confidence)
            )
        return True

    emit((), np.ones(n, dtype=bool))

    # Levelwise growth; an itemset survives if P(cond and class) >= min_support.
    items = [
        ((attr, label), masks[attr][label])
        for attr in sorted(masks)
        for label in sorted(masks[attr])
    ]
    frontier: list[tuple[tuple[tuple[str, str], ...], np.ndarray]] = []
    for item, mask in items:
        if emit((item,), mask):
            frontier.append(((item,), mask))

    length = 1
    while frontier and length < max_antecedent_len:
        survivors = {cond for cond, _ in frontier}
        next_frontier = []
        for i, (cond_a, mask_a) in enumerate(frontier):
            for cond_b, mask_b in frontier[i + 1:]:
                if cond_a[:-1] != cond_b[:-1]:
                    continue
                last_a, last_b = cond_a[-1], cond_b[-1]
                if last_a[0] == last_b[0]:
                    continue
                merged = cond_a + (last_b,) if last_a < last_b else cond_b + (last_a,)
                if any(
                    merged[:k] + merged[k + 1:] not in survivors
                    for k in range(len(merged) - 1)
                ):
                    continue
                mask = mask_a & mask_b
                if emit(merged, mask):
                    next_frontier.append((merged, mask))
        frontier = next_frontier
        length += 1

    rules.sort(key=lambda r: (len(r.condition), r.condition))
    return rules


def mine_action_rules(
    table: CaseTable,
    min_support: float,
    min_confidence: float,
    max_antecedent_len: int = 4,
) -> list[ActionRule]:
    """Pair class-0 and class-1 rules into action rules.

    Pairing requires identical condition attribute sets, equal values on all
    uncontrollable attributes, and a differing value on at least one
    controllable attribute. The combined rule must itself meet the minima.
    """
    _check_discretized(table)
    controllable = {a.name for a in table.schema if a.controllable}
    if not controllable:
        return []

    rules0 = mine_classification_rules(
        table, 0, min_support, min_confidence, max_antecedent_len
    )
    rules1 = mine_classification_rules(
        table, 1, min_support, min_confidence, max_antecedent_len
    )

    def pairing_key(rule: ClassificationRule):
        attrs = tuple(attr for attr, _ in rule.condition)
        stable_part = tuple(
            (attr, value) for attr, value in rule.condition if attr not in controllable
        )
        return attrs, stable_part

    by_key: dict[tuple, list[ClassificationRule]] = {}
    for rule in rules1:
        by_key.setdefault(pairing_key(rule), []).append(rule)

    seen: set[tuple] = set()
    out: list[ActionRule] = []
    for r0 in rules0:
        for r1 in by_key.get(pairing_key(r0), ()):
            values1 = dict(r1.condition)
            changed = [
                attr
                for attr, value in r0.condition
                if attr in controllable and values1[attr] != value
            ]
            if not changed:
                continue
            confidence = r0.confidence * r1.confidence
            support = min(r0.support, r1.support)
            if confidence < min_confidence or support < min_support:
                continue
            stable = tuple(
                AtomicActionTerm(attr, value, value)
                for attr, value in r0.condition
                if attr not in set(changed)
            )
            flexible = tuple(
                AtomicActionTerm(attr, dict(r0.condition)[attr], values1[attr])
                for attr in changed
            )
            rule = ActionRule(
                stable=tuple(sorted(stable)),
                flexible=tuple(sorted(flexible)),
                outcome=table.outcome_name,
                support=support,
                confidence=confidence,
            )
            fingerprint = rule.terms
            if fingerprint in seen:
                continue
            seen.add(fingerprint)
            out.append(rule)

    out.sort(key=lambda r: (-r.support, -r.confidence, r.terms))
    return out


def extract_treatments(rules: Iterable[ActionRule]) -> list[Treatment]:
    """Deduplicated flexible-term sets, ordered by descending best support."""
    best: dict[tuple[AtomicActionTerm, ...], float] = {}
    for rule in rules:
        changes = tuple(sorted(rule.flexible))
        prev = best.get(changes)
        if prev is None or rule.support > prev:
            best[changes] = rule.support
    ordered = sorted(
        best.items(),
        key=lambda kv: (
            -kv[1],
            tuple((t.attribute, t.from_value, t.to_value) for t in kv[0]),
        ),
    )
    return [Treatment(changes) for changes, _ in ordered]


def measure(rule: ActionRule, table: CaseTable) -> tuple[float, float]:
    """Recompute (support, confidence) of an action rule from scratch."""
    if not table.rows:
        raise SchemaError("empty case table")
    for term in rule.terms:
        table.attribute(term.attribute)

    n = len(table)
    outcomes = np.array(table.outcomes())
    cond0 = np.ones(n, dtype=bool)
    cond1 = np.ones(n, dtype=bool)
    for term in rule.terms:
        column = np.array(table.column(term.attribute), dtype=object)
        cond0 &= column == term.from_value
        cond1 &= column == term.to_value

    joint0 = int((cond0 & (outcomes == 0)).sum())
    joint1 = int((cond1 & (outcomes == 1)).sum())
    n0, n1 = int(cond0.sum()), int(cond1.sum())
    sup0, sup1 = joint0 / n, joint1 / n
    conf0 = joint0 / n0 if n0 else 0.0
    conf1 = joint1 / n1 if n1 else 0.0
    return min(sup0, sup1), conf0 * conf1


# ---------------------------------------------------------------------------
# Rule file format
# ---------------------------------------------------------------------------
# One rule per line:
#   [(A: v) ∧ (B: x → y)] ⟹ [Outcome: 0 → 1], with support 0.057 and confidence 0.764
# Stable terms print as (attr: value), flexible ones as (attr: from → to);
# stable terms come first, each group sorted by attribute.

_LABEL_RESERVED = (" ∧ ", " ⟹ ", " → ")
_ATTR_RESERVED = _LABEL_RESERVED + (": ",)

_LINE_RE = re.compile(
    r"^\[(?P<antecedent>.*)\] ⟹ \[(?P<outcome>[^:]+): 0 → 1\], "
    r"with support (?P<support>\S+) and confidence (?P<confidence>\S+)$"
)


def _check_printable(text: str, what: str, reserved: tuple[str, ...]) -> str:
    for token in reserved:
        if token in text:
            raise ValueError(
                f"{what} {text!r} contains the reserved sequence {token!r}"
            )
    return text


def format_term(term: AtomicActionTerm) -> str:
    attr = _check_printable(term.attribute, "attribute", _ATTR_RESERVED)
    if term.is_stable:
        return f"({attr}: {_check_printable(term.from_value, 'label', _LABEL_RESERVED)})"
    return (
        f"({attr}: {_check_printable(term.from_value, 'label', _LABEL_RESERVED)}"
        f" → {_check_printable(term.to_value, 'label', _LABEL_RESERVED)})"
    )


def format_rule(rule: ActionRule) -> str:
    parts = [format_term(t) for t in sorted(rule.stable)]
    parts += [format_term(t) for t in sorted(rule.flexible)]
    antecedent = " ∧ ".join(parts)
    outcome = _check_printable(rule.outcome, "outcome", _ATTR_RESERVED + (":",))
    return (
        f"[{antecedent}] ⟹ [{outcome}: 0 → 1], "
        f"with support {rule.support!r} and confidence {rule.confidence!r}"
    )


def parse_rule(line: str) -> ActionRule:
    m = _LINE_RE.match(line.strip())
    if m is None:
        raise ValueError(f"unparseable rule line: {line!r}")
    stable, flexible = [], []
    antecedent = m.group("antecedent")
    for chunk in antecedent.split(" ∧ ") if antecedent else []:
        if not (chunk.startswith("(") and chunk.endswith(")")):
            raise ValueError(f"unparseable rule term: {chunk!r}")
        body = chunk[1:-1]
        attr, _, rest = body.partition(": ")
        if not rest:
            raise ValueError(f"unparseable rule term: {chunk!r}")
        if " → " in rest:
            from_value, _, to_value = rest.partition(" → ")
            flexible.append(AtomicActionTerm(attr, from_value, to_value))
        else:
            stable.append(AtomicActionTerm(attr, rest, rest))
    return ActionRule(
        stable=tuple(sorted(stable)),
        flexible=tuple(sorted(flexible)),
        outcome=m.group("outcome"),
        support=float(m.group("support")),
        confidence=float(m.group("confidence")),
    )


def save_rules(rules: Iterable[ActionRule], path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rule in rules:
            fh.write(format_rule(rule) + "\n")


def load_rules(path) -> list[ActionRule]:
    with open(path, encoding="utf-8") as fh:
        return [parse_rule(line) for line in fh if line.strip()]
