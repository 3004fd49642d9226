"""Problem families: party-grouped synthetic MOPs and biparty UAV path planning."""

from .grouped import GroupedMop, grouped_mop, shared_sphere
from .uav import (
    CASES,
    UavConstants,
    UavPath,
    UavProblem,
    UavScenario,
    MapParams,
    build_case,
    constraint_eval,
    decode,
    default_map,
    encode,
    f_distance,
    f_eco,
    f_fatal,
    f_fuel,
    f_height,
    f_length,
    f_noise,
    generate_map,
    init_uav_population,
    straight_path,
    total_violation,
)

__all__ = [name for name in dir() if not name.startswith("_")]
