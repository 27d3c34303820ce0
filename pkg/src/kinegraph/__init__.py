"""Learning kinematic graphs of articulated objects from motion and language.

The package takes per-part 6-DOF pose trajectories (and, optionally, a
natural-language caption describing the motion), fits rigid, prismatic, and
rotational joint models to every part pair, scores them with a BIC that fuses
both observation channels, and extracts the minimum-cost spanning tree as the
object's kinematic graph.
"""

__version__ = "0.1.0"

from .config import Config, load_config
from .geometry import Pose, PoseTrajectory
from .kinematics import (
    DegenerateMotion,
    EdgeModel,
    ModelType,
    NoiseModel,
    ObservationSequence,
    TooFewObservations,
    fit_prismatic,
    fit_rigid,
    fit_rotational,
    log_likelihood,
    predict,
)
from .selection import (
    GraphEdge,
    InsufficientParts,
    KinematicGraph,
    bic,
    infer_graph,
    select_edge_model,
)

__all__ = [
    "Config",
    "DegenerateMotion",
    "EdgeModel",
    "GraphEdge",
    "InsufficientParts",
    "KinematicGraph",
    "ModelType",
    "NoiseModel",
    "ObservationSequence",
    "Pose",
    "PoseTrajectory",
    "TooFewObservations",
    "__version__",
    "bic",
    "fit_prismatic",
    "fit_rigid",
    "fit_rotational",
    "infer_graph",
    "load_config",
    "log_likelihood",
    "predict",
    "select_edge_model",
]
