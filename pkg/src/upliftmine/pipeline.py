"""Pipeline stages behind the CLI.

Every stage reads its input artifact from the configured output directory
and writes its own artifacts plus a manifest entry, so a full run is
literally the composition of the stages and produces byte-identical files
either way. Artifacts are plain text or JSON to stay diff-able.
"""

from __future__ import annotations

import json
import logging
import os
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict

from . import __version__
from .actionrules import (
    AtomicActionTerm,
    Treatment,
    extract_treatments,
    mine_action_rules,
    save_rules,
)
from .casetable import MISSING_LABEL, NUMERIC, AttributeSchema, CaseRecord, CaseTable
from .casetable import discretize, encode_cases
from .config import PipelineConfig, config_to_dict, save_config
from .errors import ConfigError, LogParseError, PositivityError
from .logparse import parse_csv, parse_xes, write_csv
from .ranking import rank, write_recommendations
from .synthetic import OUTCOME, SyntheticScenario, generate, naive_pooled_uplift
from .uplift import Segment, assign_groups, build_tree, extract_segments, to_dot

log = logging.getLogger(__name__)

CASE_TABLE_FILE = "case_table.json"
CASE_SUMMARY_FILE = "case_table_summary.txt"
RULES_FILE = "rules.txt"
TREATMENTS_FILE = "treatments.txt"
TREES_DIR = "trees"
SEGMENTS_FILE = "segments.json"
RECOMMENDATIONS_FILE = "recommendations.csv"
MANIFEST_FILE = "manifest.json"

SCENARIO_LOG_FILE = "scenario_log.csv"
GROUND_TRUTH_FILE = "ground_truth.json"
PIPELINE_CONFIG_FILE = "pipeline.yaml"


def _write_json(path, payload) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def _read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def _require_artifact(out_dir: str, filename: str, producer: str) -> str:
    path = os.path.join(out_dir, filename)
    if not os.path.exists(path):
        raise ConfigError(f"missing artifact {path}: run the {producer} stage first")
    return path


def _update_manifest(config: PipelineConfig, stage: str, info: dict) -> None:
    path = os.path.join(config.out_dir, MANIFEST_FILE)
    manifest = _read_json(path) if os.path.exists(path) else {"stages": {}}
    manifest["tool"] = {"name": "upliftmine", "version": __version__}
    manifest["config"] = config_to_dict(config)
    manifest.setdefault("stages", {})[stage] = info
    _write_json(path, manifest)


# ---------------------------------------------------------------------------
# Case table artifact
# ---------------------------------------------------------------------------

def table_to_dict(table: CaseTable) -> dict:
    return {
        "schema": [asdict(a) for a in table.schema],
        "outcome": table.outcome_name,
        "rows": [
            {"case_id": r.case_id, "features": r.features, "outcome": r.outcome}
            for r in table.rows
        ],
        "bins": table.bins,
        "raw_numeric": table.raw_numeric,
    }


def table_from_dict(payload: dict) -> CaseTable:
    schema = [AttributeSchema(**entry) for entry in payload["schema"]]
    rows = [
        CaseRecord(r["case_id"], r["features"], r["outcome"]) for r in payload["rows"]
    ]
    return CaseTable(
        schema=schema,
        rows=rows,
        outcome_name=payload["outcome"],
        bins={name: list(bounds) for name, bounds in payload["bins"].items()},
        raw_numeric=payload["raw_numeric"],
    )


def _summarize_table(table: CaseTable) -> str:
    positives = sum(table.outcomes())
    lines = [
        f"cases: {len(table)}",
        f"outcome {table.outcome_name}: {positives} positive, "
        f"{len(table) - positives} negative",
    ]
    for attr in table.schema:
        column = table.column(attr.name)
        missing = sum(1 for v in column if v is None or v == MISSING_LABEL)
        if attr.kind == NUMERIC and attr.name not in table.bins:
            shape = "numeric (not binned)"
        elif attr.name in table.bins:
            shape = f"numeric, {len(table.bins[attr.name]) + 1} bins"
        else:
            shape = f"categorical, {len(table.labels(attr.name))} labels"
        role = "controllable" if attr.controllable else "stable"
        lines.append(f"  {attr.name}: {shape}, {role}, {missing} missing")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Stages
# ---------------------------------------------------------------------------

def stage_ingest(config: PipelineConfig) -> dict:
    os.makedirs(config.out_dir, exist_ok=True)
    try:
        if config.input_format == "xes":
            event_log = parse_xes(config.input)
        else:
            event_log = parse_csv(config.input, config.csv)
    except OSError as exc:
        raise LogParseError(f"cannot read input {config.input}: {exc}") from None
    table = encode_cases(
        event_log,
        list(config.attributes),
        config.outcome,
        frozenset(config.positive_labels),
    )
    if config.bins:
        table = discretize(table, config.bins)
    _write_json(os.path.join(config.out_dir, CASE_TABLE_FILE), table_to_dict(table))
    with open(
        os.path.join(config.out_dir, CASE_SUMMARY_FILE), "w", encoding="utf-8"
    ) as fh:
        fh.write(_summarize_table(table))
    info = {
        "n_events": event_log.n_events,
        "n_traces": len(event_log),
        "n_cases": len(table),
    }
    _update_manifest(config, "ingest", info)
    log.info("ingest: %d traces -> %d cases", len(event_log), len(table))
    return info


def save_treatments(treatments, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for treatment in treatments:
            fh.write(treatment.key + "\n")


def parse_treatment_key(key: str) -> Treatment:
    """Inverse of Treatment.key; ':', '->' and '&' act as delimiters, so
    they cannot occur inside attribute names or labels here."""
    changes = []
    for part in key.split("&"):
        attr, colon, change = part.partition(":")
        from_value, arrow, to_value = change.partition("->")
        if not (attr and colon and arrow and from_value and to_value):
            raise ConfigError(
                f"malformed treatment term {part!r}; expected attribute:from->to"
            )
        changes.append(AtomicActionTerm(attr, from_value, to_value))
    try:
        return Treatment(tuple(changes))
    except ValueError as exc:
        raise ConfigError(f"bad treatment {key!r}: {exc}") from None


def load_treatments(path) -> list[Treatment]:
    treatments = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                treatments.append(parse_treatment_key(line))
    return treatments


def stage_mine(config: PipelineConfig) -> dict:
    table_path = _require_artifact(config.out_dir, CASE_TABLE_FILE, "ingest")
    table = table_from_dict(_read_json(table_path))
    rules = mine_action_rules(
        table,
        config.rules.min_support,
        config.rules.min_confidence,
        config.rules.max_antecedent_len,
    )
    save_rules(rules, os.path.join(config.out_dir, RULES_FILE))
    treatments = extract_treatments(rules)
    save_treatments(treatments, os.path.join(config.out_dir, TREATMENTS_FILE))
    info = {"n_rules": len(rules), "n_treatments": len(treatments)}
    _update_manifest(config, "mine", info)
    log.info("mine: %d rules, %d treatments", len(rules), len(treatments))
    return info


def _slug(text: str) -> str:
    return re.sub(r"[^A-Za-z0-9._-]+", "_", text.replace("->", "-"))[:60]


def stage_uplift(config: PipelineConfig, treatments_path: str | None = None) -> dict:
    table_path = _require_artifact(config.out_dir, CASE_TABLE_FILE, "ingest")
    if treatments_path is None:
        treatments_path = _require_artifact(config.out_dir, TREATMENTS_FILE, "mine")
    elif not os.path.exists(treatments_path):
        raise ConfigError(f"missing treatments file {treatments_path}")
    table = table_from_dict(_read_json(table_path))
    treatments = load_treatments(treatments_path)

    trees_dir = os.path.join(config.out_dir, TREES_DIR)
    os.makedirs(trees_dir, exist_ok=True)
    for name in os.listdir(trees_dir):
        if name.endswith(".dot"):
            os.remove(os.path.join(trees_dir, name))

    def grow(treatment: Treatment):
        assignment = assign_groups(table, treatment)
        tree = build_tree(table, assignment, config.tree)
        return tree, extract_segments(tree, table, config.min_uplift)

    grown = []
    skipped = []
    with ThreadPoolExecutor(max_workers=min(8, max(1, len(treatments)))) as pool:
        futures = [(t, pool.submit(grow, t)) for t in treatments]
        for treatment, future in futures:
            try:
                tree, segments = future.result()
            except PositivityError as exc:
                log.warning("skipping treatment %s: %s", treatment.key, exc)
                skipped.append(treatment.key)
                continue
            grown.append((treatment, tree, segments))

    entries = []
    for index, (treatment, tree, segments) in enumerate(grown):
        dot_name = f"tree_{index:03d}_{_slug(treatment.key)}.dot"
        with open(os.path.join(trees_dir, dot_name), "w", encoding="utf-8") as fh:
            fh.write(to_dot(tree, title=treatment.key))
        entries.append(
            {
                "key": treatment.key,
                "changes": [
                    {
                        "attribute": term.attribute,
                        "from": term.from_value,
                        "to": term.to_value,
                    }
                    for term in treatment.changes
                ],
                "tree_file": f"{TREES_DIR}/{dot_name}",
                "segments": [
                    {
                        "conditions": [list(c) for c in seg.conditions],
                        "uplift": seg.uplift,
                        "n_treat": seg.n_treat,
                        "n_ctrl": seg.n_ctrl,
                        "n_reachable": seg.n_reachable,
                    }
                    for seg in segments
                ],
            }
        )
    _write_json(
        os.path.join(config.out_dir, SEGMENTS_FILE),
        {"treatments": entries, "skipped": skipped},
    )
    info = {
        "n_treatments": len(grown),
        "n_skipped": len(skipped),
        "n_segments": sum(len(e["segments"]) for e in entries),
    }
    _update_manifest(config, "uplift", info)
    log.info(
        "uplift: %d trees, %d skipped, %d segments",
        info["n_treatments"],
        info["n_skipped"],
        info["n_segments"],
    )
    return info


def stage_rank(config: PipelineConfig) -> dict:
    segments_path = _require_artifact(config.out_dir, SEGMENTS_FILE, "uplift")
    payload = _read_json(segments_path)
    pairs = []
    for entry in payload["treatments"]:
        treatment = Treatment(
            tuple(
                AtomicActionTerm(c["attribute"], c["from"], c["to"])
                for c in entry["changes"]
            )
        )
        segments = [
            Segment(
                conditions=tuple(
                    (attr, op, value) for attr, op, value in s["conditions"]
                ),
                uplift=s["uplift"],
                n_treat=s["n_treat"],
                n_ctrl=s["n_ctrl"],
                n_reachable=s["n_reachable"],
            )
            for s in entry["segments"]
        ]
        pairs.append((treatment, segments))
    recommendations = rank(
        pairs, cost_models=config.cost_overrides, default_model=config.cost
    )
    write_recommendations(
        recommendations, os.path.join(config.out_dir, RECOMMENDATIONS_FILE)
    )
    info = {
        "n_recommendations": len(recommendations),
        "n_unprofitable": sum(1 for r in recommendations if r.unprofitable),
    }
    _update_manifest(config, "rank", info)
    log.info(
        "rank: %d recommendations (%d unprofitable)",
        info["n_recommendations"],
        info["n_unprofitable"],
    )
    return info


def run(config: PipelineConfig) -> dict:
    """The whole pipeline, stage by stage, sharing artifacts on disk."""
    return {
        "ingest": stage_ingest(config),
        "mine": stage_mine(config),
        "uplift": stage_uplift(config),
        "rank": stage_rank(config),
    }


def stage_simulate(scenario: SyntheticScenario, out_dir: str) -> dict:
    """Sample a scenario into out_dir along with ground truth and a ready
    pipeline config, so `run` on that config consumes the simulated log."""
    os.makedirs(out_dir, exist_ok=True)
    event_log, effects = generate(scenario)
    write_csv(event_log, os.path.join(out_dir, SCENARIO_LOG_FILE))
    _write_json(
        os.path.join(out_dir, GROUND_TRUTH_FILE),
        {
            "scenario": asdict(scenario),
            "cate_by_subgroup": {str(cell): value for cell, value in effects.items()},
            "naive_pooled_uplift": naive_pooled_uplift(scenario),
        },
    )
    config = PipelineConfig(
        input=SCENARIO_LOG_FILE,
        outcome=OUTCOME,
        attributes=scenario.schema(),
        out_dir=".",
    )
    save_config(config, os.path.join(out_dir, PIPELINE_CONFIG_FILE))
    info = {"n_cases": scenario.n_cases, "out_dir": out_dir}
    log.info("simulate: %d cases -> %s", scenario.n_cases, out_dir)
    return info
