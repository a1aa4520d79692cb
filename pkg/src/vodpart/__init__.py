"""Class-based admission control on a completely partitioned VoD server.

Analytic Erlang-B teletraffic helpers plus a deterministic discrete-event
simulator of the port-forwarding admission rule.
"""

from vodpart.analytic import (
    OccupancyVector,
    OfferedLoad,
    PartitionPlan,
    cascade_block_probability,
    end_to_end_denial,
    erlang_b,
    offered_load_erlangs,
    offered_load_paper_literal,
    routed_availability,
)
from vodpart.engine import (
    EventRecord,
    HoldLaw,
    Scenario,
    ServerState,
    TrafficClass,
    admit,
    draw_hold_time,
    generate_arrivals,
    release,
    run,
)
from vodpart.metrics import (
    BlockingEstimate,
    MetricsReport,
    blocking_estimate,
    free_port_trajectory,
    traffic_intensity,
)
from vodpart.popularity import (
    ZipfPopularity,
    cumulative_popularity_approx,
    cumulative_popularity_exact,
    sample_title,
    unpopular_request_probability,
)

__version__ = "0.1.0"

__all__ = [
    "BlockingEstimate",
    "EventRecord",
    "HoldLaw",
    "MetricsReport",
    "OccupancyVector",
    "OfferedLoad",
    "PartitionPlan",
    "Scenario",
    "ServerState",
    "TrafficClass",
    "ZipfPopularity",
    "admit",
    "blocking_estimate",
    "cascade_block_probability",
    "cumulative_popularity_approx",
    "cumulative_popularity_exact",
    "draw_hold_time",
    "end_to_end_denial",
    "erlang_b",
    "free_port_trajectory",
    "generate_arrivals",
    "offered_load_erlangs",
    "offered_load_paper_literal",
    "release",
    "routed_availability",
    "run",
    "sample_title",
    "traffic_intensity",
    "unpopular_request_probability",
]
