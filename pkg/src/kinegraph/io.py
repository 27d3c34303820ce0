"""JSON persistence for trajectory bundles, kinematic graphs, and assignments.

File shapes:

* trajectory file — ``{"clusters": [{"id", "background"?, "poses": [{"t",
  "p", "q"}, ...]}, ...]}`` with scalar-first unit quaternions.  The
  ``background`` flag is optional; when no cluster carries it the
  least-motion rule picks the reference at inference time.
* graph file — ``{"vertices", "background", "edges": [{"i", "j", "type",
  "axis_dir", "axis_point", "base", "k", "log_lik", "configs",
  "config_range", "bic_all", "cost", "n", "lingual"?}]}``.
* assignment file — ``{"pairs", "unmatched_nouns", "unmatched_clusters"}``.

Writers emit keys in a fixed order and floats via ``repr`` (shortest
round-trip form), so rerunning a command reproduces its outputs byte for
byte, and ``parse(serialize(x)) == x``.  The noun assignment is kept out of
the graph file on purpose: the graph states what was inferred about the
object, while the assignment states how a caption was grounded — a caption
whose verbs carry no usable evidence still yields the vision-only graph.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from .geometry import Pose, PoseTrajectory
from .kinematics import (
    MODEL_DOF,
    EdgeModel,
    ModelType,
    PrismaticParams,
    RigidParams,
    RotationalParams,
)
from .language import FormatError
from .selection import GraphEdge, KinematicGraph

# Stable key order for per-type dictionaries (BIC table, verb likelihoods).
_TYPE_ORDER = (ModelType.RIGID, ModelType.PRISMATIC, ModelType.ROTATIONAL)


def dumps_canonical(payload: dict) -> str:
    """Render a payload the one way we ever render it."""
    return json.dumps(payload, indent=2, allow_nan=False) + "\n"


def _require(mapping, key: str, context: str):
    if not isinstance(mapping, dict) or key not in mapping:
        raise FormatError(f"{context}: missing field {key!r}")
    return mapping[key]


def _load_json(path: Path, context: str) -> dict:
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"{context}: cannot read {path}: {exc}") from exc
    if not isinstance(payload, dict):
        raise FormatError(f"{context}: top level must be a JSON object")
    return payload


def _floats(value, length: int, context: str) -> np.ndarray:
    if not isinstance(value, list):
        raise FormatError(f"{context}: expected a number list")
    try:
        arr = np.array(value, dtype=float).reshape(-1)
    except (TypeError, ValueError) as exc:
        raise FormatError(f"{context}: expected a number list") from exc
    if len(arr) != length:
        raise FormatError(f"{context}: expected {length} numbers, got {len(arr)}")
    if not np.all(np.isfinite(arr)):
        raise FormatError(f"{context}: values must be finite")
    return arr


def _number(value, context: str) -> float:
    if not isinstance(value, (int, float)) or isinstance(value, bool):
        raise FormatError(f"{context}: expected a number")
    return float(value)


# -- trajectory files ---------------------------------------------------------

def _pose_to_dict(pose: Pose) -> dict:
    return {
        "p": [float(v) for v in pose.position],
        "q": [float(v) for v in pose.orientation],
    }


def _pose_from_dict(entry, context: str) -> Pose:
    position = _floats(_require(entry, "p", context), 3, f"{context} p")
    orientation = _floats(_require(entry, "q", context), 4, f"{context} q")
    if abs(np.linalg.norm(orientation) - 1.0) > 1e-6:
        raise FormatError(f"{context} q: quaternion must have unit norm")
    return Pose(position, orientation)


def cluster_to_dict(traj: PoseTrajectory) -> dict:
    entry: dict = {"id": traj.cluster_id}
    if traj.background:
        entry["background"] = True
    entry["poses"] = [
        {"t": float(t), **_pose_to_dict(pose)} for t, pose in zip(traj.times, traj.poses)
    ]
    return entry


def cluster_from_dict(entry) -> PoseTrajectory:
    cluster_id = _require(entry, "id", "cluster")
    if not isinstance(cluster_id, str) or not cluster_id:
        raise FormatError("cluster: id must be a non-empty string")
    context = f"cluster {cluster_id!r}"
    rows = _require(entry, "poses", context)
    if not isinstance(rows, list) or not rows:
        raise FormatError(f"{context}: poses must be a non-empty list")
    times = []
    poses = []
    for index, row in enumerate(rows):
        row_context = f"{context} pose {index}"
        times.append(_number(_require(row, "t", row_context), f"{row_context} t"))
        poses.append(_pose_from_dict(row, row_context))
    background = entry.get("background", False)
    if not isinstance(background, bool):
        raise FormatError(f"{context}: background must be a boolean")
    try:
        return PoseTrajectory(cluster_id, np.array(times), tuple(poses), background=background)
    except ValueError as exc:
        raise FormatError(f"{context}: {exc}") from exc


def trajectories_to_dict(trajectories: list[PoseTrajectory]) -> dict:
    return {"clusters": [cluster_to_dict(t) for t in trajectories]}


def trajectories_from_dict(payload: dict) -> list[PoseTrajectory]:
    entries = _require(payload, "clusters", "trajectory file")
    if not isinstance(entries, list) or not entries:
        raise FormatError("trajectory file: clusters must be a non-empty list")
    clusters = [cluster_from_dict(e) for e in entries]
    ids = [c.cluster_id for c in clusters]
    if len(set(ids)) != len(ids):
        raise FormatError("trajectory file: duplicate cluster ids")
    return clusters


def save_trajectories(path: Path, trajectories: list[PoseTrajectory]) -> None:
    Path(path).write_text(dumps_canonical(trajectories_to_dict(trajectories)))


def load_trajectories(path: Path) -> list[PoseTrajectory]:
    return trajectories_from_dict(_load_json(path, "trajectory file"))


# -- graph files --------------------------------------------------------------

def _model_fields(model: EdgeModel) -> tuple[list | None, list | None, Pose]:
    """(axis_dir, axis_point, base) triple; null-padded for lower-DOF types."""
    if model.model_type is ModelType.RIGID:
        return None, None, model.params.fixed_transform
    if model.model_type is ModelType.PRISMATIC:
        return [float(v) for v in model.params.axis], None, model.params.base
    return (
        [float(v) for v in model.params.axis_dir],
        [float(v) for v in model.params.axis_point],
        model.params.zero_pose,
    )


def _type_map_to_dict(values: dict[ModelType, float]) -> dict:
    return {t.value: float(values[t]) for t in _TYPE_ORDER if t in values}


def _type_map_from_dict(entry, context: str) -> dict[ModelType, float]:
    if not isinstance(entry, dict):
        raise FormatError(f"{context}: expected an object")
    values = {}
    for key, value in entry.items():
        try:
            model_type = ModelType(key)
        except ValueError as exc:
            raise FormatError(f"{context}: unknown joint type {key!r}") from exc
        values[model_type] = _number(value, f"{context} {key}")
    return values


def edge_to_dict(edge: GraphEdge) -> dict:
    axis_dir, axis_point, base = _model_fields(edge.model)
    entry = {
        "i": edge.i,
        "j": edge.j,
        "type": edge.model.model_type.value,
        "axis_dir": axis_dir,
        "axis_point": axis_point,
        "base": _pose_to_dict(base),
        "k": edge.model.k,
        "log_lik": float(edge.model.log_lik),
        "configs": None if edge.model.configs is None else [float(q) for q in edge.model.configs],
        "config_range": None
        if edge.model.config_range() is None
        else list(edge.model.config_range()),
        "bic_all": _type_map_to_dict(edge.bic_all),
        "cost": float(edge.cost),
        "n": edge.n,
    }
    if edge.lingual is not None:
        entry["lingual"] = _type_map_to_dict(edge.lingual)
    return entry


def _model_from_edge_dict(entry: dict, context: str) -> EdgeModel:
    type_name = _require(entry, "type", context)
    try:
        model_type = ModelType(type_name)
    except ValueError as exc:
        raise FormatError(f"{context}: unknown joint type {type_name!r}") from exc
    base = _pose_from_dict(_require(entry, "base", context), f"{context} base")
    try:
        if model_type is ModelType.RIGID:
            params = RigidParams(base)
        elif model_type is ModelType.PRISMATIC:
            params = PrismaticParams(
                base=base,
                axis=_floats(_require(entry, "axis_dir", context), 3, f"{context} axis_dir"),
            )
        else:
            params = RotationalParams(
                zero_pose=base,
                axis_dir=_floats(_require(entry, "axis_dir", context), 3, f"{context} axis_dir"),
                axis_point=_floats(
                    _require(entry, "axis_point", context), 3, f"{context} axis_point"
                ),
            )
    except ValueError as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"{context}: {exc}") from exc
    configs = entry.get("configs")
    if configs is not None:
        if not isinstance(configs, list):
            raise FormatError(f"{context}: configs must be a list or null")
        configs = _floats(configs, len(configs), f"{context} configs")
    log_lik = _number(_require(entry, "log_lik", context), f"{context} log_lik")
    return EdgeModel(model_type, params, MODEL_DOF[model_type], log_lik, configs)


def edge_from_dict(entry) -> GraphEdge:
    i = _require(entry, "i", "edge")
    j = _require(entry, "j", "edge")
    context = f"edge ({i}, {j})"
    model = _model_from_edge_dict(entry, context)
    n = _require(entry, "n", context)
    if not isinstance(n, int) or isinstance(n, bool):
        raise FormatError(f"{context}: n must be an integer")
    bic_all = _type_map_from_dict(_require(entry, "bic_all", context), f"{context} bic_all")
    lingual = entry.get("lingual")
    if lingual is not None:
        lingual = _type_map_from_dict(lingual, f"{context} lingual")
    cost = _number(_require(entry, "cost", context), f"{context} cost")
    return GraphEdge(i, j, model, cost, bic_all, n, lingual)


def graph_to_dict(graph: KinematicGraph) -> dict:
    """Serialize a graph.  The noun assignment is not part of this payload."""
    return {
        "vertices": list(graph.vertices),
        "background": graph.background,
        "edges": [edge_to_dict(e) for e in graph.edges],
    }


def graph_from_dict(payload: dict) -> KinematicGraph:
    vertices = _require(payload, "vertices", "graph")
    background = _require(payload, "background", "graph")
    entries = _require(payload, "edges", "graph")
    if not isinstance(vertices, list) or not all(isinstance(v, str) for v in vertices):
        raise FormatError("graph: vertices must be a list of strings")
    if not isinstance(background, str):
        raise FormatError("graph: background must be a string")
    if not isinstance(entries, list):
        raise FormatError("graph: edges must be a list")
    edges = tuple(edge_from_dict(e) for e in entries)
    try:
        return KinematicGraph(tuple(vertices), background, edges)
    except ValueError as exc:
        raise FormatError(f"graph: {exc}") from exc


def save_graph(path: Path, graph: KinematicGraph) -> None:
    Path(path).write_text(dumps_canonical(graph_to_dict(graph)))


def load_graph(path: Path) -> KinematicGraph:
    return graph_from_dict(_load_json(path, "graph"))


# -- assignment files ---------------------------------------------------------

def assignment_to_dict(assignment) -> dict:
    return {
        "pairs": {noun: assignment.pairs[noun] for noun in sorted(assignment.pairs)},
        "unmatched_nouns": sorted(assignment.unmatched_nouns),
        "unmatched_clusters": sorted(assignment.unmatched_clusters),
    }


def save_assignment(path: Path, assignment) -> None:
    Path(path).write_text(dumps_canonical(assignment_to_dict(assignment)))


def load_assignment(path: Path):
    from .alignment import Assignment

    payload = _load_json(path, "assignment")
    pairs = _require(payload, "pairs", "assignment")
    if not isinstance(pairs, dict):
        raise FormatError("assignment: pairs must be an object")
    for noun, cluster in pairs.items():
        if not isinstance(noun, str) or not isinstance(cluster, str):
            raise FormatError("assignment: pairs must map strings to strings")
    return Assignment(
        pairs=dict(pairs),
        unmatched_nouns=tuple(payload.get("unmatched_nouns", ())),
        unmatched_clusters=tuple(payload.get("unmatched_clusters", ())),
    )
