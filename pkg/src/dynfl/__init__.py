"""Simulation lab for fully dynamic online facility location."""

from .generators import gen_claim2cap, gen_claim3, gen_random
from .harness import CostReport, EventStream, Instance, Trace, run
from .hst import Hst, bucket, build_hst, distlog_floor, tree_dist
from .metric import MetricError, MetricSpace, NormalizedMetric, normalize, star_metric, validate
from .oracle import OfflineInstance, opt_bounds, opt_cap, opt_uncap
from .policies import ALGORITHMS, Event, PolicyConfig

__all__ = [
    "ALGORITHMS",
    "CostReport",
    "Event",
    "EventStream",
    "Hst",
    "Instance",
    "MetricError",
    "MetricSpace",
    "NormalizedMetric",
    "OfflineInstance",
    "PolicyConfig",
    "Trace",
    "bucket",
    "build_hst",
    "distlog_floor",
    "gen_claim2cap",
    "gen_claim3",
    "gen_random",
    "normalize",
    "opt_bounds",
    "opt_cap",
    "opt_uncap",
    "run",
    "star_metric",
    "tree_dist",
    "validate",
]
