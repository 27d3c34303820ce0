"""Per-edge model selection and kinematic-graph inference.

Every cluster pair gets all three joint models fitted to its relative-pose
sequence; candidates are scored with a BIC that fuses the visual likelihood
with an optional verb-derived likelihood; the output structure is the
minimum spanning tree of the complete graph under half-BIC edge costs.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .config import (
    DETECTABILITY_FACTOR,
    ROTATION_GAIN_BASE,
    ROTATION_GAIN_SLOPE,
    Config,
)
from .geometry import PoseTrajectory, relative
from .kinematics import (
    MIN_LINEAR_VARIANCE,
    MIN_ROTATION_SWEEP,
    DegenerateMotion,
    EdgeModel,
    ModelType,
    NoiseModel,
    ObservationSequence,
    TooFewObservations,
    fit_prismatic,
    fit_rigid,
    fit_rotational,
)

LOGGER = logging.getLogger(__name__)

#: Deterministic preference for equal-BIC candidates: simplest model first.
_TIE_ORDER = (ModelType.RIGID, ModelType.PRISMATIC, ModelType.ROTATIONAL)


class InsufficientParts(ValueError):
    """Fewer than two clusters, or the candidate graph fell apart."""


@dataclass(frozen=True, eq=False)
class EdgeCandidateSet:
    """All fitted joint models for one cluster pair, plus optional verb evidence."""

    part_i: str
    part_j: str
    candidates: dict[ModelType, EdgeModel]
    n_v: int
    lingual: dict[ModelType, float] | None = None
    failures: dict[ModelType, str] | None = None

    @property
    def n(self) -> int:
        """Observation count entering the BIC: visual samples plus one per verb."""
        return self.n_v + (1 if self.lingual is not None else 0)


@dataclass(frozen=True, eq=False)
class GraphEdge:
    i: str
    j: str
    model: EdgeModel
    cost: float
    bic_all: dict[ModelType, float]
    n: int
    lingual: dict[ModelType, float] | None = None


@dataclass(frozen=True, eq=False)
class KinematicGraph:
    """A spanning tree of part clusters with one joint model per edge."""

    vertices: tuple[str, ...]
    background: str
    edges: tuple[GraphEdge, ...]
    assignment: object | None = None  # alignment.Assignment when captions were used

    def __post_init__(self) -> None:
        vertices = tuple(self.vertices)
        edges = tuple(sorted(self.edges, key=lambda e: (e.i, e.j)))
        object.__setattr__(self, "vertices", vertices)
        object.__setattr__(self, "edges", edges)
        if len(edges) != len(vertices) - 1:
            raise InsufficientParts(
                f"{len(edges)} edges cannot span {len(vertices)} vertices"
            )
        if not _spans(vertices, [(e.i, e.j) for e in edges]):
            raise InsufficientParts("selected edges do not connect all clusters")
        for edge in edges:
            if not np.isfinite(edge.cost):
                raise InsufficientParts(f"edge ({edge.i}, {edge.j}) has non-finite cost")

    def edge(self, a: str, b: str) -> GraphEdge | None:
        key = (a, b) if a <= b else (b, a)
        for edge in self.edges:
            if (edge.i, edge.j) == key:
                return edge
        return None

    def total_cost(self) -> float:
        return float(sum(edge.cost for edge in self.edges))


def bic(model: EdgeModel, n: int, lingual_log_lik: float | None = None) -> float:
    """Bayesian information criterion: -2 log p(data | model) + k log n."""
    if n < 1:
        raise ValueError("BIC needs at least one observation")
    total_log_lik = model.log_lik + (lingual_log_lik if lingual_log_lik is not None else 0.0)
    return -2.0 * total_log_lik + model.k * float(np.log(n))


def edge_cost(model: EdgeModel, n: int, lingual_log_lik: float | None = None) -> float:
    """Half-BIC: the additive spanning-tree cost of selecting this model."""
    return 0.5 * bic(model, n, lingual_log_lik)


def bic_table(candidates: EdgeCandidateSet) -> dict[ModelType, float]:
    """BIC of every fitted candidate, with verb evidence folded in when present."""
    table = {}
    for model_type, model in candidates.candidates.items():
        lingual_log = None
        if candidates.lingual is not None:
            lingual_log = float(np.log(candidates.lingual[model_type]))
        table[model_type] = bic(model, candidates.n, lingual_log)
    return table


def select_edge_model(candidates: EdgeCandidateSet) -> EdgeModel:
    """Lowest-BIC candidate; exact ties go to the simpler model family."""
    if not candidates.candidates:
        raise DegenerateMotion(
            f"edge ({candidates.part_i}, {candidates.part_j}): no viable model"
        )
    table = bic_table(candidates)
    best = min(table.items(), key=lambda item: (item[1], _TIE_ORDER.index(item[0])))
    return candidates.candidates[best[0]]


def relative_sequence(traj_i: PoseTrajectory, traj_j: PoseTrajectory) -> ObservationSequence:
    """Pose of cluster j in cluster i's frame at every shared time step."""
    if len(traj_i) != len(traj_j) or not np.allclose(
        traj_i.times, traj_j.times, rtol=0.0, atol=1e-9
    ):
        raise ValueError(
            f"clusters {traj_i.cluster_id!r} and {traj_j.cluster_id!r} "
            "are sampled on different time grids"
        )
    transforms = tuple(relative(a, b) for a, b in zip(traj_i.poses, traj_j.poses))
    return ObservationSequence(traj_i.cluster_id, traj_j.cluster_id, transforms)


def sliding_floor(obs: ObservationSequence, noise: NoiseModel) -> float:
    """Translation variance below which sliding is indistinguishable from noise.

    Relative translations inherit position noise from both clusters plus the
    rotation noise of the reference cluster scaled by the lever arm, so the
    floor adapts to how far apart the two clusters ride.
    """
    lever_sq = float(np.mean(np.sum(obs.positions() ** 2, axis=1)))
    effective_var = 2.0 * noise.sigma_pos**2 + noise.sigma_rot**2 * lever_sq
    return max(MIN_LINEAR_VARIANCE, DETECTABILITY_FACTOR**2 * effective_var)


def rotation_gain_floor(obs: ObservationSequence, noise: NoiseModel) -> float:
    """Log-likelihood gain a rotational fit must show over rigid to be real.

    A hinge model can always chase orientation noise: its per-observation
    configuration soaks up the noise component along the fitted axis, and the
    freely placed axis point converts that into a position gain that grows
    with the squared lever ratio ``(sigma_rot * L / sigma_pos)**2``.  The
    envelope below bounds the gain noise alone produces on a rigid edge;
    anything under it is indistinguishable from a fixed attachment.
    """
    lever_sq = float(np.mean(np.sum(obs.positions() ** 2, axis=1)))
    ratio_sq = noise.sigma_rot**2 * lever_sq / max(noise.sigma_pos**2, 1e-300)
    envelope = ROTATION_GAIN_SLOPE * len(obs) + ROTATION_GAIN_BASE
    return envelope * (1.0 + ratio_sq / 3.0)


def fit_edge_candidates(
    obs: ObservationSequence,
    noise: NoiseModel,
    lingual: dict[ModelType, float] | None = None,
    noise_aware: bool = True,
) -> EdgeCandidateSet:
    """Fit all three joint models, dropping the ones the data cannot support."""
    min_variance = sliding_floor(obs, noise) if noise_aware else MIN_LINEAR_VARIANCE
    candidates: dict[ModelType, EdgeModel] = {}
    failures: dict[ModelType, str] = {}
    fitters = {
        ModelType.RIGID: lambda: fit_rigid(obs, noise),
        ModelType.PRISMATIC: lambda: fit_prismatic(obs, noise, min_variance=min_variance),
        ModelType.ROTATIONAL: lambda: fit_rotational(obs, noise, min_sweep=MIN_ROTATION_SWEEP),
    }
    for model_type, fitter in fitters.items():
        try:
            candidates[model_type] = fitter()
        except (DegenerateMotion, TooFewObservations) as exc:
            failures[model_type] = str(exc)
    if noise_aware and ModelType.RIGID in candidates and ModelType.ROTATIONAL in candidates:
        gain = candidates[ModelType.ROTATIONAL].log_lik - candidates[ModelType.RIGID].log_lik
        floor = rotation_gain_floor(obs, noise)
        if gain <= floor:
            del candidates[ModelType.ROTATIONAL]
            failures[ModelType.ROTATIONAL] = (
                f"rotation indistinguishable from orientation noise "
                f"(log-likelihood gain {gain:.1f} <= noise envelope {floor:.1f})"
            )
    return EdgeCandidateSet(obs.part_i, obs.part_j, candidates, len(obs), lingual, failures)


def minimum_spanning_tree(
    vertices: list[str], costs: dict[tuple[str, str], float]
) -> list[tuple[str, str]]:
    """Kruskal's algorithm with deterministic (cost, i, j) ordering.

    Edges with non-finite cost are unusable; if they disconnect the graph the
    clusters cannot be joined into one articulated object.
    """
    usable = sorted(
        (cost, key) for key, cost in costs.items() if np.isfinite(cost)
    )
    parent = {v: v for v in vertices}

    def find(v: str) -> str:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    chosen: list[tuple[str, str]] = []
    for _, (i, j) in usable:
        root_i, root_j = find(i), find(j)
        if root_i != root_j:
            parent[root_i] = root_j
            chosen.append((i, j))
    if len(chosen) != len(vertices) - 1:
        raise InsufficientParts(
            "relative motion between some clusters supports no joint model; "
            "the object cannot be assembled into one kinematic tree"
        )
    return chosen


def identify_background(trajectories: list[PoseTrajectory]) -> str:
    """The flagged background cluster, else the one that moves least."""
    flagged = [t.cluster_id for t in trajectories if t.background]
    if len(flagged) > 1:
        raise ValueError(f"multiple clusters flagged as background: {sorted(flagged)}")
    if flagged:
        return flagged[0]
    return min(trajectories, key=lambda t: (t.total_motion(), t.cluster_id)).cluster_id


def fit_all_edges(
    trajectories: list[PoseTrajectory], config: Config
) -> dict[tuple[str, str], EdgeCandidateSet]:
    """Fit candidates for every cluster pair, keyed by sorted id pair."""
    noise = config.noise_model()
    ordered = sorted(trajectories, key=lambda t: t.cluster_id)
    sets: dict[tuple[str, str], EdgeCandidateSet] = {}
    for a in range(len(ordered)):
        for b in range(a + 1, len(ordered)):
            obs = relative_sequence(ordered[a], ordered[b])
            sets[(obs.part_i, obs.part_j)] = fit_edge_candidates(obs, noise)
    return sets


def build_graph(
    vertices: list[str],
    background: str,
    candidate_sets: dict[tuple[str, str], EdgeCandidateSet],
    edge_lingual: dict[tuple[str, str], dict[ModelType, float]] | None = None,
    assignment: object | None = None,
) -> KinematicGraph:
    """Select per-edge models, then keep the minimum spanning tree."""
    edge_lingual = edge_lingual or {}
    selected: dict[tuple[str, str], GraphEdge] = {}
    costs: dict[tuple[str, str], float] = {}
    for key, base_set in candidate_sets.items():
        cands = (
            replace(base_set, lingual=edge_lingual[key]) if key in edge_lingual else base_set
        )
        if not cands.candidates:
            LOGGER.warning("edge %s: every model fit failed, excluding", key)
            costs[key] = float("inf")
            continue
        model = select_edge_model(cands)
        table = bic_table(cands)
        cost = 0.5 * table[model.model_type]
        costs[key] = cost
        selected[key] = GraphEdge(
            key[0], key[1], model, cost, table, cands.n, cands.lingual
        )
    tree = minimum_spanning_tree(list(vertices), costs)
    return KinematicGraph(
        tuple(sorted(vertices)),
        background,
        tuple(selected[key] for key in tree),
        assignment,
    )


def infer_graph(
    trajectories: list[PoseTrajectory],
    parsed_caption=None,
    config: Config | None = None,
) -> KinematicGraph:
    """Infer the kinematic graph, grounding caption verbs when available.

    With no caption (or an unusable one, or language_mode "off") the graph is
    inferred from motion alone.  Otherwise every noun-to-cluster assignment is
    scored and the cheapest full graph wins.
    """
    from . import alignment  # local import: alignment scores assignments with this module
    from .language import validate_caption

    config = config or Config()
    ids = [t.cluster_id for t in trajectories]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate cluster ids in the input trajectories")
    if len(trajectories) < 2:
        raise InsufficientParts("need at least two clusters (object part plus reference)")
    if parsed_caption is not None and config.language_mode != "off":
        if validate_caption(parsed_caption):
            _, graph = alignment.align(parsed_caption, trajectories, config)
            return graph
        LOGGER.warning("caption has no usable statements; falling back to motion only")
    vertices = sorted(ids)
    background = identify_background(trajectories)
    candidate_sets = fit_all_edges(trajectories, config)
    return build_graph(vertices, background, candidate_sets)


def _spans(vertices: tuple[str, ...], edges: list[tuple[str, str]]) -> bool:
    parent = {v: v for v in vertices}

    def find(v: str) -> str:
        while parent[v] != v:
            parent[v] = parent[parent[v]]
            v = parent[v]
        return v

    for i, j in edges:
        if i not in parent or j not in parent:
            return False
        parent[find(i)] = find(j)
    return len({find(v) for v in vertices}) == 1
