"""Python bindings for the vistrack camera-tracking controller."""

import json

from ._vistrack import (
    GridError,
    GridSpec,
    IkParams,
    IoError,
    KinematicChain,
    OccupancyGrid,
    Pose6,
    ReachabilityMap,
    SchemaError,
    SimConfig,
    build_map,
    camera_pose,
    camera_transform,
    cone_grid_distance,
    euler_xyz_to_matrix,
    ik_solve,
    jacobian,
    matrix_to_euler_xyz,
    plan_step,
    point_grid_distance,
    rescale,
    run,
    self_collision,
)


def config_dict(config):
    """The configuration as a plain dict."""
    return json.loads(config.to_json())


__all__ = [name for name in dir() if not name.startswith("_") and name != "json"]
