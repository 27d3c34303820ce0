"""Scoring estimated kinematic graphs against ground truth.

Four figures of merit over a demo set: the part-count success rate, the hard
structural success (same tree, same joint types under a vertex
correspondence), the soft success (estimated graph is a correct subgraph),
and the mean joint-axis angular error over comparable edges.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kinematics import EdgeModel, ModelType, invert_edge_model
from .selection import KinematicGraph


class MissingCorrespondence(ValueError):
    """An estimated vertex has no ground-truth counterpart."""


class NoComparableEdges(ValueError):
    """No matched non-rigid edge exists to measure an axis error on."""


@dataclass(frozen=True)
class DemoResult:
    demo_id: str
    n_estimated: int
    n_true: int
    hard: bool
    soft: bool
    param_error_deg: float | None


@dataclass(frozen=True)
class EvalReport:
    results: tuple[DemoResult, ...]
    part_count_success: float
    hard_success_rate: float
    soft_success_rate: float
    param_error_deg: float | None
    n_param_excluded: int

    def __post_init__(self) -> None:
        for rate in (self.part_count_success, self.hard_success_rate, self.soft_success_rate):
            if not 0.0 <= rate <= 1.0:
                raise ValueError("success rates must lie in [0, 1]")
        if self.param_error_deg is not None and not 0.0 <= self.param_error_deg <= 90.0:
            raise ValueError("axis errors are folded into [0, 90] degrees")


def part_count_success(counts: list[tuple[int, int]]) -> float:
    """Fraction of demos whose observed part count equals the true count."""
    if not counts:
        raise ValueError("no demos to score")
    return sum(1 for observed, true in counts if observed == true) / len(counts)


def _checked_mapping(
    estimated: KinematicGraph, correspondence: dict[str, str]
) -> dict[str, str]:
    mapping = {}
    for vertex in estimated.vertices:
        if vertex not in correspondence:
            raise MissingCorrespondence(f"no ground-truth counterpart for {vertex!r}")
        mapping[vertex] = correspondence[vertex]
    if len(set(mapping.values())) != len(mapping):
        raise MissingCorrespondence("correspondence maps two clusters to the same part")
    return mapping


def _truth_edge_types(truth: KinematicGraph) -> dict[tuple[str, str], ModelType]:
    return {(e.i, e.j): e.model.model_type for e in truth.edges}


def _mapped_key(edge_i: str, edge_j: str, mapping: dict[str, str]) -> tuple[str, str]:
    a, b = mapping[edge_i], mapping[edge_j]
    return (a, b) if a <= b else (b, a)


def hard_success(
    estimated: KinematicGraph, truth: KinematicGraph, correspondence: dict[str, str]
) -> bool:
    """Same structure and same joint type on every edge, under a vertex bijection."""
    mapping = _checked_mapping(estimated, correspondence)
    if set(mapping.values()) != set(truth.vertices):
        return False
    truth_types = _truth_edge_types(truth)
    for edge in estimated.edges:
        key = _mapped_key(edge.i, edge.j, mapping)
        if truth_types.get(key) != edge.model.model_type:
            return False
    return True


def soft_success(
    estimated: KinematicGraph, truth: KinematicGraph, correspondence: dict[str, str]
) -> bool:
    """Every estimated edge exists in the truth with the same joint type."""
    mapping = _checked_mapping(estimated, correspondence)
    truth_types = _truth_edge_types(truth)
    for edge in estimated.edges:
        key = _mapped_key(edge.i, edge.j, mapping)
        if truth_types.get(key) != edge.model.model_type:
            return False
    return True


def axis_angle_deg(a: np.ndarray, b: np.ndarray) -> float:
    """Angle between two axis directions, folded to [0, 90] degrees."""
    cos = abs(float(np.dot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))
    return float(np.degrees(np.arccos(min(cos, 1.0))))


def _model_axis(model: EdgeModel) -> np.ndarray | None:
    if model.model_type is ModelType.PRISMATIC:
        return model.params.axis
    if model.model_type is ModelType.ROTATIONAL:
        return model.params.axis_dir
    return None


def param_error(
    estimated: KinematicGraph, truth: KinematicGraph, correspondence: dict[str, str]
) -> float:
    """Mean axis angular error (degrees) over matched non-rigid edges.

    Assumes the estimated graph is a correct subgraph (soft success); edges
    whose endpoint order flips under the correspondence are inverted so both
    axes live in the same endpoint's frame.
    """
    mapping = _checked_mapping(estimated, correspondence)
    truth_models = {(e.i, e.j): e.model for e in truth.edges}
    errors = []
    for edge in estimated.edges:
        key = _mapped_key(edge.i, edge.j, mapping)
        truth_model = truth_models.get(key)
        if truth_model is None or truth_model.model_type is not edge.model.model_type:
            continue
        model = edge.model
        if mapping[edge.i] > mapping[edge.j]:
            model = invert_edge_model(model)
        est_axis = _model_axis(model)
        if est_axis is None:
            continue
        errors.append(axis_angle_deg(est_axis, _model_axis(truth_model)))
    if not errors:
        raise NoComparableEdges("all matched edges are rigid")
    return float(np.mean(errors))


def evaluate_demo(
    demo_id: str,
    estimated: KinematicGraph,
    truth: KinematicGraph,
    correspondence: dict[str, str] | None = None,
) -> DemoResult:
    """Score one demo; identity correspondence by default (simulator labels)."""
    if correspondence is None:
        correspondence = {v: v for v in estimated.vertices}
    hard = hard_success(estimated, truth, correspondence)
    soft = soft_success(estimated, truth, correspondence)
    error: float | None = None
    if soft:
        try:
            error = param_error(estimated, truth, correspondence)
        except NoComparableEdges:
            error = None
    return DemoResult(
        demo_id,
        n_estimated=len(estimated.vertices) - 1,
        n_true=len(truth.vertices) - 1,
        hard=hard,
        soft=soft,
        param_error_deg=error,
    )


def aggregate(results: list[DemoResult]) -> EvalReport:
    """Average the per-demo outcomes.

    The axis error averages only demos that were soft-correct and had at least
    one non-rigid matched edge; the report says how many were left out.
    """
    if not results:
        raise ValueError("no demos to aggregate")
    errors = [r.param_error_deg for r in results if r.param_error_deg is not None]
    return EvalReport(
        results=tuple(results),
        part_count_success=part_count_success([(r.n_estimated, r.n_true) for r in results]),
        hard_success_rate=sum(r.hard for r in results) / len(results),
        soft_success_rate=sum(r.soft for r in results) / len(results),
        param_error_deg=float(np.mean(errors)) if errors else None,
        n_param_excluded=len(results) - len(errors),
    )
