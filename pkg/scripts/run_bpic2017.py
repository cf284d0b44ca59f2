"""Mine the BPIC 2017 loan-application log for profitable offer changes.

Expects the published event log (BPI Challenge 2017.xes.gz, 31509 cases).
Case attributes describe the application and the bank's offer; the offer
fields are the controllable ones, and Selected is the outcome.
"""

from __future__ import annotations

import argparse
import logging

from upliftmine.casetable import CATEGORICAL, NUMERIC, AttributeSchema
from upliftmine.config import PipelineConfig, RuleParams
from upliftmine.errors import UpliftMineError
from upliftmine.pipeline import run
from upliftmine.ranking import CostModel
from upliftmine.uplift import TreeParams

CONTROLLABLE_NUMERICS = [
    "FirstWithdrawalAmount",
    "MonthlyCost",
    "NumberOfTerms",
    "OfferedAmount",
]

SCHEMA = [
    AttributeSchema("LoanGoal", CATEGORICAL),
    AttributeSchema("ApplicationType", CATEGORICAL),
    AttributeSchema("RequestedAmount", NUMERIC),
    AttributeSchema("CreditScore", NUMERIC),
    *[AttributeSchema(name, NUMERIC, controllable=True) for name in CONTROLLABLE_NUMERICS],
    AttributeSchema("Selected", CATEGORICAL),
]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("log", help="path to the BPIC 2017 XES file (.xes or .xes.gz)")
    parser.add_argument("--out", default="out/bpic2017", help="output directory")
    parser.add_argument("--min-support", type=float, default=0.03)
    parser.add_argument("--min-confidence", type=float, default=0.55)
    parser.add_argument("--bins", type=int, default=4, help="bins per numeric attribute")
    parser.add_argument("--outcome-value", type=float, default=1.0)
    parser.add_argument("--impression-cost", type=float, default=0.0)
    args = parser.parse_args()

    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")

    config = PipelineConfig(
        input=args.log,
        outcome="Selected",
        attributes=SCHEMA,
        input_format="xes",
        out_dir=args.out,
        bins={a.name: args.bins for a in SCHEMA if a.kind == NUMERIC},
        rules=RuleParams(
            min_support=args.min_support,
            min_confidence=args.min_confidence,
        ),
        tree=TreeParams(),
        cost=CostModel(
            outcome_value=args.outcome_value,
            impression_cost=args.impression_cost,
        ),
    )
    try:
        info = run(config)
    except UpliftMineError as exc:
        raise SystemExit(f"error: {exc}") from exc
    for stage, details in info.items():
        summary = ", ".join(f"{key}={value}" for key, value in sorted(details.items()))
        print(f"{stage}: {summary}")
    print(f"artifacts in {args.out}/")


if __name__ == "__main__":
    main()
