"""Uplift trees: estimate a treatment's heterogeneous effect by recursive
partitioning that maximizes the divergence between treated and control
outcome distributions, normalized to penalize splits that separate the two
groups unevenly (the confounding adjustment).

Group assignment is observational: rows whose controllable values already
match the treatment's target values act as treated, rows matching the
source values act as control, everything else is excluded.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from math import log2
from typing import Iterable, Optional

import numpy as np

from .actionrules import Treatment
from .casetable import NUMERIC, CaseTable
from .errors import ConfigError, PositivityError, SchemaError

DIVERGENCE_KINDS = ("KL", "Euclid", "ChiSq")

# Smallest normalized gain that counts as an improvement; guards against
# float-noise splits on effectively gain-free nodes.
GAIN_EPS = 1e-12

# Relative tolerance under which two candidate scores count as tied (the
# earlier candidate in scan order wins).
TIE_REL_TOL = 1e-12

# Root priors are clamped into (PRIOR_EPS, 1 - PRIOR_EPS) so smoothing always
# yields probabilities strictly inside (0, 1).
PRIOR_EPS = 1e-9

MAX_NUMERIC_CANDIDATES = 100


@dataclass(frozen=True)
class TreeParams:
    max_depth: int = 5
    min_samples_split: int = 200
    min_samples_treatment: int = 50
    n_reg: float = 100.0
    divergence: str = "KL"

    def __post_init__(self):
        if self.max_depth < 0:
            raise ConfigError("max_depth must be >= 0")
        if self.min_samples_split < 2:
            raise ConfigError("min_samples_split must be >= 2")
        if self.min_samples_treatment < 0:
            raise ConfigError("min_samples_treatment must be >= 0")
        if not self.n_reg > 0:
            raise ConfigError("n_reg must be > 0")
        if self.divergence not in DIVERGENCE_KINDS:
            raise ConfigError(
                f"divergence must be one of {DIVERGENCE_KINDS}, got {self.divergence!r}"
            )


@dataclass
class TreatmentAssignment:
    treatment: Optional[Treatment]
    treated: np.ndarray
    control: np.ndarray
    excluded: np.ndarray

    def __post_init__(self):
        if len(self.treated) == 0 or len(self.control) == 0:
            name = self.treatment.key if self.treatment else "<unnamed>"
            empty = "treated" if len(self.treated) == 0 else "control"
            raise PositivityError(
                f"treatment {name}: {empty} group is empty (positivity violated)"
            )


def assign_groups(table: CaseTable, treatment: Treatment) -> TreatmentAssignment:
    """Partition rows into treated (match all to_values), control (match all
    from_values), and excluded (the rest)."""
    n = len(table)
    if n == 0:
        raise SchemaError("empty case table")
    to_mask = np.ones(n, dtype=bool)
    from_mask = np.ones(n, dtype=bool)
    for term in treatment.changes:
        attr = table.attribute(term.attribute)
        if attr.kind == NUMERIC and term.attribute not in table.bins:
            raise SchemaError(
                f"treatment attribute {term.attribute!r} is not discretized"
            )
        column = np.array(table.column(term.attribute), dtype=object)
        to_mask &= column == term.to_value
        from_mask &= column == term.from_value
    # from_mask and to_mask are disjoint: every change has from != to.
    treated = np.flatnonzero(to_mask)
    control = np.flatnonzero(from_mask)
    excluded = np.flatnonzero(~to_mask & ~from_mask)
    return TreatmentAssignment(treatment, treated, control, excluded)


# ---------------------------------------------------------------------------
# Divergences and normalization
# ---------------------------------------------------------------------------

def _check_distribution(dist, name: str) -> tuple[float, float]:
    try:
        a, b = float(dist[0]), float(dist[1])
    except (TypeError, ValueError, IndexError):
        raise ConfigError(f"{name} must be a probability pair") from None
    if not (0.0 < a < 1.0 and 0.0 < b < 1.0):
        raise ConfigError(f"{name} components must lie strictly inside (0, 1)")
    if abs(a + b - 1.0) > 1e-9:
        raise ConfigError(f"{name} must sum to 1")
    return a, b


def divergence(p, q, kind: str) -> float:
    """Divergence between two binary distributions given as (y, 1-y) pairs.

    KL uses base-2 logarithms. Inputs must be strictly inside (0, 1); the
    smoothing upstream guarantees that for node statistics.
    """
    if kind not in DIVERGENCE_KINDS:
        raise ConfigError(f"unknown divergence kind {kind!r}")
    p = _check_distribution(p, "p")
    q = _check_distribution(q, "q")
    return _divergence_unchecked(p[0], q[0], kind)


def _divergence_unchecked(p: float, q: float, kind: str) -> float:
    """Binary divergence on first components, tolerating boundary values
    with the conventions 0*log(0/x) = 0 and (p-q)^2/0 -> inf for p != q.
    """
    if kind == "Euclid":
        d = p - q
        return 2.0 * d * d
    if kind == "KL":
        total = 0.0
        for pi, qi in ((p, q), (1.0 - p, 1.0 - q)):
            if pi == 0.0:
                continue
            if qi == 0.0:
                return float("inf")
            total += pi * log2(pi / qi)
        return total
    total = 0.0
    for pi, qi in ((p, q), (1.0 - p, 1.0 - q)):
        d = pi - qi
        if d == 0.0:
            continue
        if qi == 0.0:
            return float("inf")
        total += d * d / qi
    return total


def _entropy(p: float) -> float:
    if p <= 0.0 or p >= 1.0:
        return 0.0
    return -p * log2(p) - (1.0 - p) * log2(1.0 - p)


def _gini(p: float) -> float:
    return 2.0 * p * (1.0 - p)


@dataclass(frozen=True)
class NodeStats:
    n_treat: int
    n_ctrl: int
    pos_treat: int
    pos_ctrl: int
    p_treat: float
    p_ctrl: float

    def __post_init__(self):
        if self.pos_treat > self.n_treat or self.pos_ctrl > self.n_ctrl:
            raise ValueError("positive count exceeds group size")
        if not (0.0 < self.p_treat < 1.0 and 0.0 < self.p_ctrl < 1.0):
            raise ValueError("smoothed probabilities must lie strictly in (0, 1)")

    @property
    def uplift(self) -> float:
        return self.p_treat - self.p_ctrl

    @property
    def n(self) -> int:
        return self.n_treat + self.n_ctrl


def node_stats(
    n_treat: int,
    pos_treat: int,
    n_ctrl: int,
    pos_ctrl: int,
    parent: Optional[NodeStats],
    n_reg: float,
) -> NodeStats:
    """Smoothed per-group outcome rates: p = (pos + n_reg*prior) / (n + n_reg).

    The root's prior (both groups) is the pooled positive rate over treated
    plus control, clamped into (0, 1) so degenerate outcomes stay usable.
    """
    if parent is None:
        pooled = (pos_treat + pos_ctrl) / (n_treat + n_ctrl)
        pooled = min(max(pooled, PRIOR_EPS), 1.0 - PRIOR_EPS)
        prior_t = prior_c = pooled
    else:
        prior_t, prior_c = parent.p_treat, parent.p_ctrl
    p_treat = (pos_treat + n_reg * prior_t) / (n_treat + n_reg)
    p_ctrl = (pos_ctrl + n_reg * prior_c) / (n_ctrl + n_reg)
    return NodeStats(n_treat, n_ctrl, pos_treat, pos_ctrl, p_treat, p_ctrl)


@dataclass(frozen=True)
class Split:
    """A binary test: numeric rows go left iff value <= threshold (missing
    goes right); categorical rows go left iff label == category."""

    attribute: str
    threshold: Optional[float]
    category: Optional[str]
    left_treat: np.ndarray
    right_treat: np.ndarray
    left_ctrl: np.ndarray
    right_ctrl: np.ndarray

    def describe(self) -> str:
        if self.threshold is not None:
            return f"{self.attribute} <= {self.threshold:g}"
        return f"{self.attribute} == {self.category}"


def gain(parent: NodeStats, left: NodeStats, right: NodeStats, kind: str) -> float:
    """Divergence gained by the split: the size-weighted sum of the child
    divergences minus the parent's divergence."""
    d_before = _divergence_unchecked(parent.p_treat, parent.p_ctrl, kind)
    d_after = 0.0
    for child in (left, right):
        d_after += (child.n / parent.n) * _divergence_unchecked(
            child.p_treat, child.p_ctrl, kind
        )
    return d_after - d_before


def normalization_from_counts(
    left_treat: int, left_ctrl: int, n_treat: int, n_ctrl: int, kind: str
) -> float:
    """Split-quality penalty from the direction distributions.

    With w = treated share of the node, pt/pc = fraction of treated resp.
    control rows sent left: KL kind uses binary entropy H and the KL
    divergence; Euclid and ChiSq kinds replace H by the Gini index and use
    their own divergence. The +1/2 floor makes the value >= 1/2.
    """
    if kind not in DIVERGENCE_KINDS:
        raise ConfigError(f"unknown divergence kind {kind!r}")
    w = n_treat / (n_treat + n_ctrl)
    pt = left_treat / n_treat
    pc = left_ctrl / n_ctrl
    spread = _entropy if kind == "KL" else _gini
    return (
        spread(w) * _divergence_unchecked(pt, pc, kind)
        + w * spread(pt)
        + (1.0 - w) * spread(pc)
        + 0.5
    )


def normalization(split: Split, parent: NodeStats, kind: str) -> float:
    return normalization_from_counts(
        len(split.left_treat),
        len(split.left_ctrl),
        parent.n_treat,
        parent.n_ctrl,
        kind,
    )


# ---------------------------------------------------------------------------
# Split search
# ---------------------------------------------------------------------------

def _numeric_thresholds(values: np.ndarray) -> np.ndarray:
    """Candidate thresholds: midpoints of consecutive distinct values. Above
    MAX_NUMERIC_CANDIDATES the list is thinned to evenly spaced quantiles of
    the observed values, each snapped up to the next midpoint."""
    distinct = np.unique(values)
    if distinct.size < 2:
        return np.empty(0)
    mids = (distinct[:-1] + distinct[1:]) / 2.0
    if mids.size <= MAX_NUMERIC_CANDIDATES:
        return mids
    qs = np.quantile(
        values, np.arange(1, MAX_NUMERIC_CANDIDATES + 1) / (MAX_NUMERIC_CANDIDATES + 1)
    )
    picked = mids[np.minimum(np.searchsorted(mids, qs), mids.size - 1)]
    return np.unique(picked)


@dataclass
class _NodeColumns:
    """Per-feature value arrays for the node's treated and control rows."""

    numeric: dict[str, tuple[np.ndarray, np.ndarray]]
    categorical: dict[str, tuple[np.ndarray, np.ndarray]]


def _feature_columns(
    table: CaseTable, feature_names: list[str]
) -> tuple[dict[str, np.ndarray], dict[str, np.ndarray]]:
    """Full-table value arrays: numeric features as float arrays with NaN for
    missing (preferring pre-discretization values), others as object arrays."""
    numeric: dict[str, np.ndarray] = {}
    categorical: dict[str, np.ndarray] = {}
    for name in feature_names:
        attr = table.attribute(name)
        if attr.kind == NUMERIC:
            source = (
                table.raw_numeric[name]
                if name in table.raw_numeric
                else table.column(name)
            )
            numeric[name] = np.array(
                [np.nan if v is None else float(v) for v in source], dtype=float
            )
        else:
            categorical[name] = np.array(table.column(name), dtype=object)
    return numeric, categorical


def best_split(
    table: CaseTable,
    treat_idx: np.ndarray,
    ctrl_idx: np.ndarray,
    parent: NodeStats,
    params: TreeParams,
    feature_names: list[str],
    columns: Optional[tuple[dict, dict]] = None,
) -> Optional[tuple[Split, float]]:
    """Deterministic scan over candidates, maximizing normalized gain.

    Candidates are visited per feature in ascending attribute-name order,
    numeric thresholds ascending, category labels ascending; a challenger
    must beat the incumbent by more than TIE_REL_TOL relative to replace it.
    Returns None when no candidate clears the positivity and size
    constraints with a normalized gain above GAIN_EPS.
    """
    numeric_cols, categorical_cols = (
        columns if columns is not None else _feature_columns(table, feature_names)
    )
    outcomes = np.array(table.outcomes())
    y_treat = outcomes[treat_idx]
    y_ctrl = outcomes[ctrl_idx]
    kind = params.divergence
    best: Optional[tuple[Split, float]] = None

    def consider(attribute, threshold, category, left_t_mask, left_c_mask):
        nonlocal best
        lt = int(left_t_mask.sum())
        lc = int(left_c_mask.sum())
        rt = len(treat_idx) - lt
        rc = len(ctrl_idx) - lc
        if min(lt, rt) < params.min_samples_treatment or min(lc, rc) < 1:
            return
        pos_lt = int(y_treat[left_t_mask].sum())
        pos_lc = int(y_ctrl[left_c_mask].sum())
        left = node_stats(lt, pos_lt, lc, pos_lc, parent, params.n_reg)
        right = node_stats(
            rt,
            parent.pos_treat - pos_lt,
            rc,
            parent.pos_ctrl - pos_lc,
            parent,
            params.n_reg,
        )
        g = gain(parent, left, right, kind)
        norm = normalization_from_counts(
            lt, lc, parent.n_treat, parent.n_ctrl, kind
        )
        score = g / norm
        if score <= GAIN_EPS:
            return
        if best is not None and score <= best[1] * (1.0 + TIE_REL_TOL):
            return
        split = Split(
            attribute=attribute,
            threshold=threshold,
            category=category,
            left_treat=treat_idx[left_t_mask],
            right_treat=treat_idx[~left_t_mask],
            left_ctrl=ctrl_idx[left_c_mask],
            right_ctrl=ctrl_idx[~left_c_mask],
        )
        best = (split, score)

    for attribute in sorted(feature_names):
        if attribute in numeric_cols:
            col = numeric_cols[attribute]
            vt, vc = col[treat_idx], col[ctrl_idx]
            observed = np.concatenate([vt, vc])
            observed = observed[~np.isnan(observed)]
            if observed.size == 0:
                continue
            for threshold in _numeric_thresholds(observed):
                # NaN comparisons are False, so missing values go right.
                with np.errstate(invalid="ignore"):
                    consider(
                        attribute, float(threshold), None,
                        vt <= threshold, vc <= threshold,
                    )
        else:
            col = categorical_cols[attribute]
            vt, vc = col[treat_idx], col[ctrl_idx]
            labels = sorted(
                {v for v in vt if v is not None} | {v for v in vc if v is not None}
            )
            if len(labels) < 2:
                continue
            for label in labels:
                consider(attribute, None, label, vt == label, vc == label)
    return best


# ---------------------------------------------------------------------------
# Tree
# ---------------------------------------------------------------------------

@dataclass
class Node:
    stats: NodeStats
    depth: int
    split: Optional[Split] = None
    left: Optional["Node"] = None
    right: Optional["Node"] = None
    score: Optional[float] = None

    @property
    def is_leaf(self) -> bool:
        return self.split is None


@dataclass
class UpliftTree:
    root: Node
    params: TreeParams
    treatment: Optional[Treatment]
    feature_names: list[str]

    def leaves(self) -> list[tuple[Node, list[tuple[str, str, object]]]]:
        """Leaf nodes with their root-to-leaf condition paths; conditions are
        (attribute, op, value) with op one of <=, >, ==, !=."""
        out = []

        def walk(node: Node, path):
            if node.is_leaf:
                out.append((node, path))
                return
            s = node.split
            if s.threshold is not None:
                left_cond = (s.attribute, "<=", s.threshold)
                right_cond = (s.attribute, ">", s.threshold)
            else:
                left_cond = (s.attribute, "==", s.category)
                right_cond = (s.attribute, "!=", s.category)
            walk(node.left, path + [left_cond])
            walk(node.right, path + [right_cond])

        walk(self.root, [])
        return out


def build_tree(
    table: CaseTable, assignment: TreatmentAssignment, params: TreeParams
) -> UpliftTree:
    """Greedy recursive growth; deterministic for identical inputs."""
    excluded_attrs = (
        {t.attribute for t in assignment.treatment.changes}
        if assignment.treatment
        else set()
    )
    feature_names = [a.name for a in table.schema if a.name not in excluded_attrs]
    columns = _feature_columns(table, feature_names)
    outcomes = np.array(table.outcomes())

    def grow(treat_idx, ctrl_idx, parent: Optional[NodeStats], depth: int) -> Node:
        stats = node_stats(
            len(treat_idx),
            int(outcomes[treat_idx].sum()),
            len(ctrl_idx),
            int(outcomes[ctrl_idx].sum()),
            parent,
            params.n_reg,
        )
        node = Node(stats=stats, depth=depth)
        if depth >= params.max_depth or stats.n < params.min_samples_split:
            return node
        found = best_split(
            table, treat_idx, ctrl_idx, stats, params, feature_names, columns
        )
        if found is None:
            return node
        split, score = found
        node.split = split
        node.score = score
        node.left = grow(split.left_treat, split.left_ctrl, stats, depth + 1)
        node.right = grow(split.right_treat, split.right_ctrl, stats, depth + 1)
        return node

    root = grow(assignment.treated, assignment.control, None, 0)
    return UpliftTree(
        root=root,
        params=params,
        treatment=assignment.treatment,
        feature_names=feature_names,
    )


# ---------------------------------------------------------------------------
# Segments
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Segment:
    """A leaf's path predicate plus its uplift estimate."""

    conditions: tuple[tuple[str, str, object], ...]
    uplift: float
    n_treat: int
    n_ctrl: int
    n_reachable: int

    @property
    def predicate_text(self) -> str:
        if not self.conditions:
            return "all cases"
        parts = []
        for attr, op, value in self.conditions:
            if op in ("<=", ">"):
                parts.append(f"{attr} {op} {value:g}")
            elif op == "==":
                parts.append(f"{attr} == {value}")
            else:
                parts.append(f"{attr} != {value}")
        return " and ".join(parts)


def _condition_mask(
    table: CaseTable, conditions, columns: tuple[dict, dict]
) -> np.ndarray:
    numeric_cols, categorical_cols = columns
    mask = np.ones(len(table), dtype=bool)
    for attr, op, value in conditions:
        if op in ("<=", ">"):
            col = numeric_cols[attr]
            with np.errstate(invalid="ignore"):
                left = col <= value
            mask &= left if op == "<=" else ~left
        else:
            col = categorical_cols[attr]
            eq = col == value
            mask &= eq if op == "==" else ~eq
    return mask


def extract_segments(
    tree: UpliftTree, table: CaseTable, min_uplift: float
) -> list[Segment]:
    """Leaves with uplift >= min_uplift, as path predicates; n_reachable
    counts every table row (treated, control, or excluded) the predicate
    matches, mirroring the tree's routing semantics (missing numeric values
    fall on the > side, missing labels on the != side)."""
    columns = _feature_columns(table, tree.feature_names)
    segments = []
    for node, path in tree.leaves():
        uplift = node.stats.uplift
        if uplift < min_uplift:
            continue
        conditions = tuple(path)
        reachable = int(_condition_mask(table, conditions, columns).sum())
        segments.append(
            Segment(
                conditions=conditions,
                uplift=uplift,
                n_treat=node.stats.n_treat,
                n_ctrl=node.stats.n_ctrl,
                n_reachable=reachable,
            )
        )
    segments.sort(key=lambda s: (-s.uplift, s.predicate_text))
    return segments


# ---------------------------------------------------------------------------
# DOT export
# ---------------------------------------------------------------------------

def to_dot(tree: UpliftTree, title: str = "uplift_tree") -> str:
    """Graphviz rendering with per-node group sizes, smoothed rates, and
    uplift; edge labels carry the split conditions."""
    lines = [f'digraph "{_dot_escape(title)}" {{', "  node [shape=box];"]
    counter = 0

    def emit(node: Node) -> int:
        nonlocal counter
        node_id = counter
        counter += 1
        s = node.stats
        label = (
            f"n_treat={s.n_treat}, n_ctrl={s.n_ctrl}\\n"
            f"p_treat={s.p_treat:.6f}, p_ctrl={s.p_ctrl:.6f}\\n"
            f"uplift={s.uplift:+.6f}"
        )
        if not node.is_leaf:
            label = f"{_dot_escape(node.split.describe())}\\n" + label
        lines.append(f'  n{node_id} [label="{label}"];')
        if not node.is_leaf:
            left_id = emit(node.left)
            right_id = emit(node.right)
            lines.append(f'  n{node_id} -> n{left_id} [label="yes"];')
            lines.append(f'  n{node_id} -> n{right_id} [label="no"];')
        return node_id

    emit(tree.root)
    lines.append("}")
    return "\n".join(lines) + "\n"


def _dot_escape(text: str) -> str:
    return text.replace("\\", "\\\\").replace('"', '\\"')
