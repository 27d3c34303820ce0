"""Single-edge joint models: fitting, prediction, and observation likelihood.

An edge relates two part clusters through a time series of relative poses.
Three model families are supported:

* rigid      -- a fixed relative transform (6 parameters)
* prismatic  -- translation along a fixed axis from a base pose (7 parameters)
* rotational -- rotation about a fixed spatial axis line (9 parameters)

Each fit produces closed-form parameter estimates plus a per-observation
configuration (joint value) estimated by projection; the Gaussian observation
likelihood is evaluated against the fitted model's predictions.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .geometry import (
    Pose,
    compose,
    from_axis_angle,
    inverse,
    pose_error,
    quat_canonical,
    quat_conjugate,
    quat_from_axis_angle,
    quat_mean,
    quat_multiply,
    quat_rotate,
    quat_to_matrix,
    quat_to_rotvec,
)


class TooFewObservations(ValueError):
    """Not enough relative-pose samples to fit the requested model."""


class DegenerateMotion(ValueError):
    """The observed motion does not exercise the requested degree of freedom."""


class ModelType(str, Enum):
    RIGID = "rigid"
    PRISMATIC = "prismatic"
    ROTATIONAL = "rotational"

    def __str__(self) -> str:  # pragma: no cover - cosmetic
        return self.value


#: BIC parameter counts. Rigid pins a fixed transform (6); prismatic adds a
#: unit axis direction (+2) minus the sliding gauge freedom absorbed into the
#: base, net 7; rotational adds an axis direction (2), the closest point on
#: the axis line (2), and a full zero-configuration pose (6) minus the
#: zero-angle gauge, net 9.
MODEL_DOF = {ModelType.RIGID: 6, ModelType.PRISMATIC: 7, ModelType.ROTATIONAL: 9}

#: Default degeneracy thresholds: sample variance of translation along the
#: dominant direction (m^2) below which there is no detectable sliding, and
#: total accumulated rotation (rad) below which there is no detectable turning.
MIN_LINEAR_VARIANCE = 1e-12
MIN_ROTATION_SWEEP = 0.05


@dataclass(frozen=True)
class NoiseModel:
    """Isotropic Gaussian observation noise on relative poses."""

    sigma_pos: float = 0.01
    sigma_rot: float = 0.0349  # radians, about 2 degrees

    def __post_init__(self) -> None:
        if self.sigma_pos <= 0.0 or self.sigma_rot <= 0.0:
            raise ValueError("noise standard deviations must be strictly positive")


@dataclass(frozen=True, eq=False)
class ObservationSequence:
    """Relative poses of part ``j`` expressed in part ``i``'s frame, one per time step."""

    part_i: str
    part_j: str
    transforms: tuple[Pose, ...]

    def __post_init__(self) -> None:
        if self.part_i == self.part_j:
            raise ValueError("an edge needs two distinct parts")
        object.__setattr__(self, "transforms", tuple(self.transforms))
        if len(self.transforms) < 2:
            raise TooFewObservations(
                f"edge ({self.part_i}, {self.part_j}): need at least 2 observations"
            )

    def __len__(self) -> int:
        return len(self.transforms)

    def positions(self) -> np.ndarray:
        return np.stack([p.position for p in self.transforms])

    def quaternions(self) -> np.ndarray:
        return np.stack([p.orientation for p in self.transforms])


@dataclass(frozen=True, eq=False)
class RigidParams:
    fixed_transform: Pose


@dataclass(frozen=True, eq=False)
class PrismaticParams:
    base: Pose
    axis: np.ndarray  # unit direction in part-i frame

    def __post_init__(self) -> None:
        axis = np.array(self.axis, dtype=float).reshape(3)
        if abs(np.linalg.norm(axis) - 1.0) > 1e-9:
            raise ValueError("prismatic axis must be a unit vector")
        axis.flags.writeable = False
        object.__setattr__(self, "axis", axis)


@dataclass(frozen=True, eq=False)
class RotationalParams:
    zero_pose: Pose
    axis_dir: np.ndarray  # unit direction in part-i frame
    axis_point: np.ndarray  # closest point of the axis line to the origin

    def __post_init__(self) -> None:
        axis_dir = np.array(self.axis_dir, dtype=float).reshape(3)
        axis_point = np.array(self.axis_point, dtype=float).reshape(3)
        if abs(np.linalg.norm(axis_dir) - 1.0) > 1e-9:
            raise ValueError("rotation axis must be a unit vector")
        if abs(float(np.dot(axis_point, axis_dir))) > 1e-6:
            raise ValueError("axis_point must be the closest point to the origin")
        axis_dir.flags.writeable = False
        axis_point.flags.writeable = False
        object.__setattr__(self, "axis_dir", axis_dir)
        object.__setattr__(self, "axis_point", axis_point)


@dataclass(frozen=True, eq=False)
class EdgeModel:
    """A fitted joint model plus its per-observation configurations."""

    model_type: ModelType
    params: RigidParams | PrismaticParams | RotationalParams
    k: int
    log_lik: float
    configs: np.ndarray | None = None

    def __post_init__(self) -> None:
        if self.k != MODEL_DOF[self.model_type]:
            raise ValueError(f"{self.model_type} models have k={MODEL_DOF[self.model_type]}")
        if self.configs is not None:
            configs = np.array(self.configs, dtype=float).reshape(-1)
            configs.flags.writeable = False
            object.__setattr__(self, "configs", configs)

    def config_range(self) -> tuple[float, float] | None:
        if self.configs is None or len(self.configs) == 0:
            return None
        return float(self.configs.min()), float(self.configs.max())


def dof_count(model_type: ModelType) -> int:
    return MODEL_DOF[model_type]


def predict(model: EdgeModel, q: float = 0.0) -> Pose:
    """Relative pose the model expects at configuration ``q``."""
    if model.model_type is ModelType.RIGID:
        return model.params.fixed_transform
    if model.model_type is ModelType.PRISMATIC:
        base = model.params.base
        return Pose(base.position + q * model.params.axis, base.orientation)
    turn = from_axis_angle(model.params.axis_dir, q, point=model.params.axis_point)
    return compose(turn, model.params.zero_pose)


def log_likelihood(model: EdgeModel, obs: ObservationSequence, noise: NoiseModel) -> float:
    """Gaussian log-likelihood of the observations under the fitted model.

    Residuals are taken between each observation and the model's prediction at
    that observation's fitted configuration.  The normalization constant is
    shared by all model families, so it cancels in comparisons but keeps the
    value an honest log-density.
    """
    n = len(obs)
    if model.model_type is not ModelType.RIGID:
        if model.configs is None or len(model.configs) != n:
            raise ValueError("model configs do not match the observation sequence")
        configs = model.configs
    else:
        configs = np.zeros(n)
    var_pos = noise.sigma_pos**2
    var_rot = noise.sigma_rot**2
    total = -n * (np.log(2.0 * np.pi * var_pos) + 0.5 * np.log(2.0 * np.pi * var_rot))
    for q, observed in zip(configs, obs.transforms):
        trans_err, rot_err = pose_error(predict(model, q), observed)
        total -= trans_err**2 / (2.0 * var_pos) + rot_err**2 / (2.0 * var_rot)
    return float(total)


def fit_rigid(obs: ObservationSequence, noise: NoiseModel = NoiseModel()) -> EdgeModel:
    """Fit a fixed relative transform: mean position, chordal-mean orientation."""
    mean_pos = obs.positions().mean(axis=0)
    mean_quat = quat_mean(obs.quaternions())
    params = RigidParams(Pose(mean_pos, mean_quat))
    model = EdgeModel(ModelType.RIGID, params, MODEL_DOF[ModelType.RIGID], 0.0)
    return _with_likelihood(model, obs, noise)


def fit_prismatic(
    obs: ObservationSequence,
    noise: NoiseModel = NoiseModel(),
    min_variance: float = MIN_LINEAR_VARIANCE,
) -> EdgeModel:
    """Fit a sliding joint.

    The axis is the principal eigenvector of the sample covariance of the
    translations; configurations are the signed projections of each translation
    onto that axis from the centroid; the base pose carries the centroid and
    the chordal-mean orientation.
    """
    positions = obs.positions()
    centroid = positions.mean(axis=0)
    centered = positions - centroid
    cov = centered.T @ centered / (len(obs) - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals[-1] < min_variance:
        raise DegenerateMotion(
            f"edge ({obs.part_i}, {obs.part_j}): no detectable sliding "
            f"(top translation variance {eigvals[-1]:.3e} < {min_variance:.3e})"
        )
    axis = _canonical_direction(eigvecs[:, -1])
    configs = centered @ axis
    params = PrismaticParams(Pose(centroid, quat_mean(obs.quaternions())), axis)
    model = EdgeModel(
        ModelType.PRISMATIC, params, MODEL_DOF[ModelType.PRISMATIC], 0.0, configs
    )
    return _with_likelihood(model, obs, noise)


def fit_rotational(
    obs: ObservationSequence,
    noise: NoiseModel = NoiseModel(),
    min_sweep: float = MIN_ROTATION_SWEEP,
) -> EdgeModel:
    """Fit a hinge joint.

    The axis direction must carry the rotation-vector signal of the
    first-sample-relative orientations while staying normal to the plane the
    positions sweep (every direction the part translates in lies on its
    circle, perpendicular to the axis).  Both constraints enter one weighted
    eigenproblem whose terms scale with their channels' information content
    (1/sigma^2), so whichever channel actually resolves the axis dominates
    automatically.  Configurations start as the generator components along
    that axis and are then refined by fusing the two measurements of the turn
    angle -- the orientation of the part and its position around the circle
    -- weighted the same way, alternating with the linear solve for the axis
    line and zero position, p_t = R(axis, q_t) z + (I - R(axis, q_t)) a.
    A part far from the axis pins the angle much more sharply through its
    position than through its orientation, and the fused estimate inherits
    that precision.  The zero orientation is the chordal average of all
    observations rotated back to configuration zero.
    """
    if len(obs) < 3:
        raise TooFewObservations(
            f"edge ({obs.part_i}, {obs.part_j}): a rotational fit needs >= 3 observations"
        )
    quats = obs.quaternions()
    positions = obs.positions()

    # Rotations relative to the first sample, expressed in the part-i frame
    # (left difference), as rotation vectors.
    first_conj = quat_conjugate(quats[0])
    rotvecs = np.stack([quat_to_rotvec(quat_multiply(q, first_conj)) for q in quats])
    largest = float(np.max(np.linalg.norm(rotvecs, axis=1)))
    if largest < min_sweep:
        raise DegenerateMotion(
            f"edge ({obs.part_i}, {obs.part_j}): total rotation sweep "
            f"{largest:.4f} rad < {min_sweep:.4f} rad"
        )
    deviations = positions - positions.mean(axis=0)
    scatter = (
        rotvecs.T @ rotvecs / max(noise.sigma_rot**2, 1e-300)
        - deviations.T @ deviations / max(noise.sigma_pos**2, 1e-300)
    )
    eigvecs = np.linalg.eigh(scatter)[1]
    axis_dir = _canonical_direction(eigvecs[:, -1])

    configs = rotvecs @ axis_dir
    sweep = float(configs.max() - configs.min())
    if sweep < min_sweep:
        raise DegenerateMotion(
            f"edge ({obs.part_i}, {obs.part_j}): total rotation sweep "
            f"{sweep:.4f} rad < {min_sweep:.4f} rad"
        )

    for _ in range(3):
        zero_position, axis_point = _axis_line_solve(positions, axis_dir, configs)
        zero_quat = _zero_orientation(quats, axis_dir, configs)
        configs = _fused_configs(
            positions, quats, axis_dir, zero_position, axis_point, zero_quat, noise
        )
    sweep = float(configs.max() - configs.min())
    if sweep < min_sweep:
        raise DegenerateMotion(
            f"edge ({obs.part_i}, {obs.part_j}): refined rotation sweep "
            f"{sweep:.4f} rad < {min_sweep:.4f} rad"
        )
    zero_position, axis_point = _axis_line_solve(positions, axis_dir, configs)
    zero_quat = _zero_orientation(quats, axis_dir, configs)

    # Anchor the first configuration at zero by folding its turn into the
    # zero pose; the model family is unchanged, only the gauge.
    shift = float(configs[0])
    configs = configs - shift
    zero_pose = compose(
        from_axis_angle(axis_dir, shift, point=axis_point), Pose(zero_position, zero_quat)
    )

    params = RotationalParams(zero_pose, axis_dir, axis_point)
    model = EdgeModel(
        ModelType.ROTATIONAL, params, MODEL_DOF[ModelType.ROTATIONAL], 0.0, configs
    )
    return _with_likelihood(model, obs, noise)


def invert_edge_model(model: EdgeModel) -> EdgeModel:
    """The same joint seen from the other part: predict(inv(m), q) == inverse(predict(m, q))."""
    if model.model_type is ModelType.RIGID:
        params = RigidParams(inverse(model.params.fixed_transform))
        return EdgeModel(model.model_type, params, model.k, model.log_lik, model.configs)
    if model.model_type is ModelType.PRISMATIC:
        base = model.params.base
        flipped = -quat_rotate(quat_conjugate(base.orientation), model.params.axis)
        params = PrismaticParams(inverse(base), _unit(flipped))
        return EdgeModel(model.model_type, params, model.k, model.log_lik, model.configs)
    zero = model.params.zero_pose
    zero_inv = inverse(zero)
    axis_dir = -quat_rotate(zero_inv.orientation, model.params.axis_dir)
    axis_dir = _unit(axis_dir)
    point = zero_inv.transform_point(model.params.axis_point)
    point = point - float(np.dot(point, axis_dir)) * axis_dir
    params = RotationalParams(zero_inv, axis_dir, point)
    return EdgeModel(model.model_type, params, model.k, model.log_lik, model.configs)


def _with_likelihood(model: EdgeModel, obs: ObservationSequence, noise: NoiseModel) -> EdgeModel:
    value = log_likelihood(model, obs, noise)
    return EdgeModel(model.model_type, model.params, model.k, value, model.configs)


def _unit(vec: np.ndarray) -> np.ndarray:
    return vec / np.linalg.norm(vec)


def _canonical_direction(axis: np.ndarray) -> np.ndarray:
    """Unit vector with a deterministic sign (first component beyond noise is positive)."""
    axis = _unit(np.asarray(axis, dtype=float))
    for c in axis:
        if abs(c) > 1e-9:
            return -axis if c < 0.0 else axis
    return axis


def _axis_line_solve(
    positions: np.ndarray, axis_dir: np.ndarray, configs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Zero position and axis point from p_t = R(axis, q_t) z + (I - R) a.

    The axis point has a gauge freedom along the axis; the minimum-norm
    least-squares solution lands on the closest-point-to-origin form, and the
    explicit projection keeps the invariant exact.
    """
    rows = np.zeros((3 * len(positions), 6))
    for idx, q in enumerate(configs):
        rotation = quat_to_matrix(quat_from_axis_angle(axis_dir, q))
        rows[3 * idx : 3 * idx + 3, :3] = rotation
        rows[3 * idx : 3 * idx + 3, 3:] = np.eye(3) - rotation
    solution = np.linalg.lstsq(rows, positions.reshape(-1), rcond=None)[0]
    zero_position, axis_point = solution[:3], solution[3:]
    axis_point = axis_point - float(np.dot(axis_point, axis_dir)) * axis_dir
    return zero_position, axis_point


def _zero_orientation(
    quats: np.ndarray, axis_dir: np.ndarray, configs: np.ndarray
) -> np.ndarray:
    """Chordal average of the observations rotated back to configuration zero."""
    back = np.empty_like(quats)
    for idx, q in enumerate(configs):
        back[idx] = quat_multiply(quat_from_axis_angle(axis_dir, -q), quats[idx])
    return quat_mean(back)


def _fused_configs(
    positions: np.ndarray,
    quats: np.ndarray,
    axis_dir: np.ndarray,
    zero_position: np.ndarray,
    axis_point: np.ndarray,
    zero_quat: np.ndarray,
    noise: NoiseModel,
) -> np.ndarray:
    """Per-observation turn angles fusing position and orientation evidence.

    Around the fitted circle the position measures the angle with precision
    radius/sigma_pos while the orientation measures it with precision
    1/sigma_rot.  Position angles alone leave the overall scale soft -- a
    circle twice as wide swept half as far reproduces the same arc -- so the
    orientation angles first pin the scale through an affine regression over
    the whole sequence, and only then is each observation's angle the
    inverse-variance weighted mean of its two (rescaled) readings.
    Observations on the axis fall back to the orientation reading alone.
    """
    arm = zero_position - axis_point
    arm_perp = arm - float(np.dot(arm, axis_dir)) * axis_dir
    radius = float(np.linalg.norm(arm_perp))
    zero_conj = quat_conjugate(zero_quat)
    count = len(positions)
    q_rot = np.empty(count)
    q_pos = np.full(count, np.nan)
    swings = np.zeros(count)
    for idx in range(count):
        q_rot[idx] = float(
            np.dot(quat_to_rotvec(quat_multiply(quats[idx], zero_conj)), axis_dir)
        )
        offset = positions[idx] - axis_point
        offset_perp = offset - float(np.dot(offset, axis_dir)) * axis_dir
        swing = float(np.linalg.norm(offset_perp))
        if radius < 1e-12 or swing < 1e-12:
            continue
        swings[idx] = swing
        angle = float(
            np.arctan2(
                np.dot(offset_perp, np.cross(axis_dir, arm_perp)),
                np.dot(offset_perp, arm_perp),
            )
        )
        # Both readings live on the circle; move the position reading onto
        # the branch nearest the orientation reading before regression.
        q_pos[idx] = angle + 2.0 * np.pi * np.round((q_rot[idx] - angle) / (2.0 * np.pi))
    valid = ~np.isnan(q_pos)
    if int(valid.sum()) < 3 or float(np.var(q_pos[valid])) < 1e-30:
        return q_rot
    design = np.stack([q_pos[valid], np.ones(int(valid.sum()))], axis=1)
    scale, offset_term = np.linalg.lstsq(design, q_rot[valid], rcond=None)[0]
    fused = q_rot.copy()
    info_rot = 1.0 / max(noise.sigma_rot**2, 1e-300)
    rescale_sq = max(float(scale) ** 2, 1e-12)
    for idx in np.nonzero(valid)[0]:
        reading = float(scale) * q_pos[idx] + float(offset_term)
        info_pos = radius * swings[idx] / (rescale_sq * max(noise.sigma_pos**2, 1e-300))
        fused[idx] = (info_pos * reading + info_rot * q_rot[idx]) / (info_pos + info_rot)
    return fused
