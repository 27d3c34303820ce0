"""Synthetic articulated objects: ground-truth sampling, rendering, captions.

Everything is driven by explicit 64-bit seeds through numpy Generators; the
same seed always produces the same spec, trajectories, and caption bytes.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .geometry import (
    Pose,
    PoseTrajectory,
    compose,
    from_axis_angle,
    quat_canonical,
    quat_multiply,
)
from .kinematics import (
    EdgeModel,
    ModelType,
    PrismaticParams,
    RigidParams,
    RotationalParams,
    invert_edge_model,
)
from .language import PRISMATIC_VERBS, ROTATIONAL_VERBS
from .selection import GraphEdge, KinematicGraph

BACKGROUND_ID = "background"

#: Part names the caption templates can speak about; also the tracker ids.
PART_NAMES = ("door", "drawer", "wheel", "frame", "seat", "monitor arm")

#: Verbs exclusive to one motion type.  "wheel" is dropped from the rotational
#: pool because it doubles as a part noun and would confuse the tagger.
UNAMBIGUOUS_PRISMATIC = tuple(w for w in PRISMATIC_VERBS if w not in ROTATIONAL_VERBS)
UNAMBIGUOUS_ROTATIONAL = tuple(
    w for w in ROTATIONAL_VERBS if w not in PRISMATIC_VERBS and w != "wheel"
)
SHARED_VERBS = tuple(w for w in PRISMATIC_VERBS if w in ROTATIONAL_VERBS)

MIN_PRISMATIC_RANGE = 0.05  # meters
MIN_ROTATIONAL_SWEEP = 0.1  # radians

_DEFAULT_TYPE_MIX = {
    ModelType.RIGID: 0.2,
    ModelType.PRISMATIC: 0.4,
    ModelType.ROTATIONAL: 0.4,
}


@dataclass(frozen=True, eq=False)
class JointSpec:
    """One true joint: how ``child`` hangs off ``parent``."""

    parent: str
    child: str
    model_type: ModelType
    zero_pose: Pose
    axis: np.ndarray | None = None  # unit direction in the parent frame
    axis_point: np.ndarray | None = None  # point on the rotation axis, parent frame
    config_range: tuple[float, float] = (0.0, 0.0)

    def __post_init__(self) -> None:
        lo, hi = self.config_range
        span = hi - lo
        if self.model_type is ModelType.RIGID:
            if span != 0.0:
                raise ValueError("rigid joints have no configuration range")
        elif self.model_type is ModelType.PRISMATIC:
            if span < MIN_PRISMATIC_RANGE:
                raise ValueError(
                    f"prismatic range {span:.3f} m is below {MIN_PRISMATIC_RANGE} m"
                )
        else:
            if span < MIN_ROTATIONAL_SWEEP:
                raise ValueError(
                    f"rotational sweep {span:.3f} rad is below {MIN_ROTATIONAL_SWEEP} rad"
                )
        if self.model_type is not ModelType.RIGID:
            axis = np.array(self.axis, dtype=float).reshape(3)
            axis /= np.linalg.norm(axis)
            axis.flags.writeable = False
            object.__setattr__(self, "axis", axis)
        if self.model_type is ModelType.ROTATIONAL:
            point = np.array(self.axis_point, dtype=float).reshape(3)
            point.flags.writeable = False
            object.__setattr__(self, "axis_point", point)

    def pose_at(self, q: float) -> Pose:
        """Child pose in the parent frame at configuration ``q``."""
        if self.model_type is ModelType.RIGID:
            return self.zero_pose
        if self.model_type is ModelType.PRISMATIC:
            return Pose(self.zero_pose.position + q * self.axis, self.zero_pose.orientation)
        return compose(from_axis_angle(self.axis, q, point=self.axis_point), self.zero_pose)


@dataclass(frozen=True, eq=False)
class GroundTruthSpec:
    """A sampled articulated object: a joint tree rooted at the background."""

    joints: tuple[JointSpec, ...]
    topology: str = "chain"
    background: str = BACKGROUND_ID

    def __post_init__(self) -> None:
        object.__setattr__(self, "joints", tuple(self.joints))
        if self.topology not in ("chain", "star"):
            raise ValueError("topology must be 'chain' or 'star'")
        if not 1 <= len(self.joints) <= 6:
            raise ValueError("supported objects have 1 to 6 moving parts")
        known = {self.background}
        for joint in self.joints:
            if joint.parent not in known:
                raise ValueError(f"joint parent {joint.parent!r} appears before being placed")
            if joint.child in known:
                raise ValueError(f"duplicate part name {joint.child!r}")
            known.add(joint.child)

    @property
    def part_ids(self) -> tuple[str, ...]:
        return tuple(j.child for j in self.joints)

    def n_parts(self) -> int:
        return len(self.joints)


@dataclass(frozen=True)
class NoiseSpec:
    sigma_pos: float = 0.0
    sigma_rot: float = 0.0
    seed: int = 0

    def __post_init__(self) -> None:
        if self.sigma_pos < 0.0 or self.sigma_rot < 0.0:
            raise ValueError("noise standard deviations cannot be negative")


def sample_spec(
    rng_seed: int,
    n_parts: int = 2,
    type_mix: dict[ModelType, float] | None = None,
    topology: str | None = None,
    max_prismatic: int | None = None,
) -> GroundTruthSpec:
    """Draw a random articulated object.

    ``type_mix`` weights the joint types; ``max_prismatic`` optionally caps how
    many sliding joints one object may have (several sliding parts produce
    mutually indistinguishable straight-line motions, which is useful to avoid
    in benchmark scenes).  Axis points stay inside the unit cube around the
    origin and joint ranges are sampled comfortably above the degeneracy
    thresholds.
    """
    rng = np.random.default_rng(rng_seed)
    if not 1 <= n_parts <= 6:
        raise ValueError("n_parts must be between 1 and 6")
    mix = dict(_DEFAULT_TYPE_MIX if type_mix is None else type_mix)
    types, weights = zip(*sorted(mix.items(), key=lambda kv: kv[0].value))
    weights = np.asarray(weights, dtype=float)
    if np.any(weights < 0.0) or weights.sum() <= 0.0:
        raise ValueError("type_mix weights must be nonnegative and not all zero")
    weights = weights / weights.sum()
    if topology is None:
        topology = str(rng.choice(["chain", "star"]))
    names = list(PART_NAMES)
    rng.shuffle(names)
    parts = names[:n_parts]

    joints = []
    prismatic_used = 0
    parent = BACKGROUND_ID
    for index, child in enumerate(parts):
        model_type = ModelType(str(rng.choice([t.value for t in types], p=weights)))
        if (
            model_type is ModelType.PRISMATIC
            and max_prismatic is not None
            and prismatic_used >= max_prismatic
        ):
            model_type = ModelType.ROTATIONAL
        if model_type is ModelType.PRISMATIC:
            prismatic_used += 1
        joints.append(_sample_joint(rng, parent, child, model_type))
        if topology == "chain":
            parent = child
    return GroundTruthSpec(tuple(joints), topology)


def _sample_joint(
    rng: np.random.Generator, parent: str, child: str, model_type: ModelType
) -> JointSpec:
    zero = Pose(rng.uniform(-0.15, 0.15, 3), quat_canonical(rng.normal(0.0, 1.0, 4)))
    if model_type is ModelType.RIGID:
        return JointSpec(parent, child, model_type, zero)
    axis = _unit(rng.normal(0.0, 1.0, 3))
    if model_type is ModelType.PRISMATIC:
        reach = float(rng.uniform(0.35, 0.7))
        return JointSpec(parent, child, model_type, zero, axis, None, (0.0, reach))
    # Rotational: place the axis a controlled lever away from the part so the
    # swept arc is neither microscopic nor outside the scene.
    radial = _unit(axis_perpendicular(rng, axis))
    radius = float(rng.uniform(0.15, 0.35))
    point = zero.position + radius * radial
    sweep = float(rng.uniform(0.6, 1.57))
    return JointSpec(parent, child, model_type, zero, axis, point, (0.0, sweep))


def axis_perpendicular(rng: np.random.Generator, axis: np.ndarray) -> np.ndarray:
    """A random direction orthogonal to ``axis``."""
    vec = rng.normal(0.0, 1.0, 3)
    vec -= axis * float(np.dot(vec, axis))
    norm = np.linalg.norm(vec)
    if norm < 1e-9:  # pragma: no cover - essentially impossible
        return axis_perpendicular(rng, axis)
    return vec / norm


def render(
    spec: GroundTruthSpec, steps: int = 30, noise: NoiseSpec = NoiseSpec()
) -> list[PoseTrajectory]:
    """Forward-kinematics world trajectories, all joints sweeping simultaneously.

    Every joint's configuration ramps linearly over its range across ``steps``
    samples taken at 10 Hz.  Noise perturbs each world sample independently:
    Gaussian position offsets and a random-axis rotation with half-normal angle.
    """
    if steps < 2:
        raise ValueError("a rendering needs at least 2 time steps")
    times = 0.1 * np.arange(steps)
    configs = {
        joint.child: np.linspace(joint.config_range[0], joint.config_range[1], steps)
        for joint in spec.joints
    }
    order = [spec.background] + list(spec.part_ids)
    worlds: dict[str, list[Pose]] = {spec.background: [Pose(np.zeros(3))] * steps}
    for joint in spec.joints:
        parents = worlds[joint.parent]
        worlds[joint.child] = [
            compose(parents[t], joint.pose_at(configs[joint.child][t]))
            for t in range(steps)
        ]
    rng = np.random.default_rng(noise.seed)
    trajectories = []
    for cluster in order:
        poses = []
        for pose in worlds[cluster]:
            offset = rng.normal(0.0, noise.sigma_pos, 3)
            wobble_axis = _unit(rng.normal(0.0, 1.0, 3))
            wobble_angle = abs(rng.normal(0.0, noise.sigma_rot))
            wobble = _axis_angle_quat(wobble_axis, wobble_angle)
            # Perturb the channels independently (tracker-style errors): the
            # offset moves the position, the wobble tips the orientation.
            poses.append(
                Pose(pose.position + offset, quat_multiply(wobble, pose.orientation))
            )
        trajectories.append(
            PoseTrajectory(cluster, times, tuple(poses), background=cluster == spec.background)
        )
    return trajectories


def truth_graph(spec: GroundTruthSpec) -> KinematicGraph:
    """The ground-truth spec as a kinematic graph with canonical edge keys."""
    edges = []
    for joint in spec.joints:
        model = _joint_model(joint)
        i, j = joint.parent, joint.child
        if i > j:
            i, j = j, i
            model = invert_edge_model(model)
        edges.append(GraphEdge(i, j, model, 0.0, {model.model_type: 0.0}, 0))
    vertices = tuple(sorted((spec.background, *spec.part_ids)))
    return KinematicGraph(vertices, spec.background, tuple(edges))


def _joint_model(joint: JointSpec) -> EdgeModel:
    if joint.model_type is ModelType.RIGID:
        params = RigidParams(joint.zero_pose)
    elif joint.model_type is ModelType.PRISMATIC:
        params = PrismaticParams(joint.zero_pose, joint.axis)
    else:
        point = joint.axis_point - joint.axis * float(np.dot(joint.axis_point, joint.axis))
        params = RotationalParams(joint.zero_pose, joint.axis, point)
    from .kinematics import MODEL_DOF

    return EdgeModel(joint.model_type, params, MODEL_DOF[joint.model_type], 0.0)


def synth_caption(spec: GroundTruthSpec, verb_mode: str = "unambiguous", seed: int = 0) -> str:
    """One sentence per moving part: "The <part> <verb>s."

    ``verb_mode`` picks the verb pool: "unambiguous" draws words exclusive to
    the part's true motion type, "ambiguous" draws only words shared by both
    types, and "mixed" flips a fair coin per sentence.
    """
    if verb_mode not in ("unambiguous", "ambiguous", "mixed"):
        raise ValueError("verb_mode must be 'unambiguous', 'ambiguous', or 'mixed'")
    rng = np.random.default_rng(seed)
    sentences = []
    for joint in spec.joints:
        if joint.model_type is ModelType.RIGID:
            continue
        ambiguous = verb_mode == "ambiguous" or (
            verb_mode == "mixed" and rng.random() < 0.5
        )
        if ambiguous:
            pool = SHARED_VERBS
        elif joint.model_type is ModelType.PRISMATIC:
            pool = UNAMBIGUOUS_PRISMATIC
        else:
            pool = UNAMBIGUOUS_ROTATIONAL
        verb = str(rng.choice(pool))
        sentences.append(f"The {joint.child} {_third_person(verb)}.")
    return " ".join(sentences)


def drop_one_part(
    trajectories: list[PoseTrajectory], seed: int = 0
) -> list[PoseTrajectory]:
    """Remove one non-background cluster, imitating an under-segmented scene."""
    moving = [t.cluster_id for t in trajectories if not t.background]
    if not moving:
        return list(trajectories)
    victim = str(np.random.default_rng(seed).choice(sorted(moving)))
    return [t for t in trajectories if t.cluster_id != victim]


def _third_person(verb: str) -> str:
    if verb.endswith(("s", "sh", "ch", "x", "z", "o")):
        return verb + "es"
    if verb.endswith("y") and len(verb) > 1 and verb[-2] not in "aeiou":
        return verb[:-1] + "ies"
    return verb + "s"


def _unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def _axis_angle_quat(axis: np.ndarray, angle: float) -> np.ndarray:
    half = 0.5 * angle
    quat = np.empty(4)
    quat[0] = np.cos(half)
    quat[1:] = np.sin(half) * axis
    return quat_canonical(quat)
