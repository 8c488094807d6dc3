"""Time-optimal motion-primitive planning toolkit.

Offline: generate arc-path rosettes, time-parameterize them under velocity
and acceleration bounds into a primitive library, and rasterize the swept
volume into a voxel collision index.  Online: a fixed-budget receding-
horizon planner selects among the precomputed primitives at each tick, and
a cylinder-forest simulator benchmarks the whole pipeline.
"""

from .errors import ConfigError, FormatError
from .paths import ArcSpec, GeometricPath, build_path_library, generate_arc
from .topp import (
    Bounds,
    ControlSet,
    InfeasibleStartError,
    LPResult,
    StageConstraints,
    Trajectory,
    backward_pass,
    formulate_stages,
    forward_pass,
    parameterize,
    solve_lp_2d,
)
from .library import (
    PrimitiveLibrary,
    build_library,
    deserialize_library,
    load_library,
    save_library,
    serialize_library,
)
from .collision import (
    CollisionIndex,
    LibraryMismatchError,
    build_index,
    check,
    deserialize_index,
    load_index,
    save_index,
    serialize_index,
)
from .cloud import CloudStack
from .planner import (
    NoHeadingError,
    PlanResult,
    PlannerState,
    VelocityFrame,
    emergency_stop,
    replan,
    select_trajectory,
    velocity_frame,
)
from .simulator import (
    EpisodeConfig,
    EpisodeResult,
    GridReport,
    WorldMap,
    generate_map,
    run_episode,
    run_grid,
    sense,
)
from .config import (
    IndexConfig,
    LibraryConfig,
    PRESET_NAMES,
    RunConfig,
    load_config,
    parse_config,
    preset_text,
    resolve_config,
)

__version__ = "0.1.0"

__all__ = [
    "ArcSpec",
    "Bounds",
    "CloudStack",
    "CollisionIndex",
    "ConfigError",
    "ControlSet",
    "EpisodeConfig",
    "EpisodeResult",
    "FormatError",
    "GeometricPath",
    "GridReport",
    "IndexConfig",
    "InfeasibleStartError",
    "LPResult",
    "LibraryConfig",
    "LibraryMismatchError",
    "PRESET_NAMES",
    "NoHeadingError",
    "PlanResult",
    "PlannerState",
    "PrimitiveLibrary",
    "VelocityFrame",
    "RunConfig",
    "StageConstraints",
    "Trajectory",
    "WorldMap",
    "backward_pass",
    "build_index",
    "build_library",
    "build_path_library",
    "check",
    "deserialize_index",
    "deserialize_library",
    "emergency_stop",
    "formulate_stages",
    "forward_pass",
    "generate_arc",
    "generate_map",
    "load_config",
    "load_index",
    "load_library",
    "parameterize",
    "parse_config",
    "preset_text",
    "replan",
    "resolve_config",
    "run_episode",
    "run_grid",
    "save_index",
    "save_library",
    "select_trajectory",
    "sense",
    "velocity_frame",
    "serialize_index",
    "serialize_library",
    "solve_lp_2d",
]
