"""Treatment-recommendation mining for business-process event logs."""

__version__ = "0.1.0"

from upliftmine.actionrules import extract_treatments, mine_action_rules
from upliftmine.casetable import discretize, encode_cases
from upliftmine.config import PipelineConfig, load_config
from upliftmine.errors import UpliftMineError
from upliftmine.logparse import parse_csv, parse_xes
from upliftmine.pipeline import run
from upliftmine.ranking import rank
from upliftmine.uplift import assign_groups, build_tree, extract_segments

__all__ = [
    "PipelineConfig",
    "UpliftMineError",
    "assign_groups",
    "build_tree",
    "discretize",
    "encode_cases",
    "extract_segments",
    "extract_treatments",
    "load_config",
    "mine_action_rules",
    "parse_csv",
    "parse_xes",
    "rank",
    "run",
    "__version__",
]
