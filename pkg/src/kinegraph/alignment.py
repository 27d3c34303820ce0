"""Grounding caption nouns to observed part clusters.

Captions rarely name clusters by their tracker ids, so every injective
assignment of noun phrases to moving clusters is scored by running full graph
inference with the verbs attached through that assignment; the assignment
whose spanning tree is cheapest wins.
"""
from __future__ import annotations

import logging
import re
from dataclasses import dataclass
from itertools import combinations, permutations
from math import comb, perm

from .config import Config
from .geometry import PoseTrajectory
from .kinematics import ModelType
from .language import (
    ManualDictionary,
    ParsedCaption,
    VerbClassification,
    classify_hard,
    classify_manual,
    build_centroids,
    lingual_likelihood_hard,
    lingual_likelihood_soft,
)
from .selection import (
    KinematicGraph,
    build_graph,
    fit_all_edges,
    identify_background,
)

LOGGER = logging.getLogger(__name__)

#: Likelihood pairs closer than this carry no preference between motion types.
_INFORMATIVE_ATOL = 1e-12


class TooManyParts(ValueError):
    """The assignment search space exceeds the configured cap."""


class NoValidAssignment(RuntimeError):
    """Every candidate noun-to-cluster assignment failed to produce a graph."""


@dataclass(frozen=True)
class Assignment:
    """An injective partial mapping from noun phrases to moving clusters."""

    pairs: dict[str, str]
    unmatched_nouns: tuple[str, ...]
    unmatched_clusters: tuple[str, ...]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Assignment):
            return NotImplemented
        return self.pairs == other.pairs


def enumerate_assignments(
    nouns: list[str],
    clusters: list[str],
    background: str | None = None,
    cap: int = 3_628_800,
) -> list[Assignment]:
    """All injective partial mappings of maximal size, in deterministic order.

    The mapping size is min(#nouns, #moving clusters); the background cluster
    never receives a noun.  Order is lexicographic by noun position, then by
    cluster id, so the first assignment is reproducible.
    """
    moving = sorted(c for c in clusters if c != background)
    size = min(len(nouns), len(moving))
    total = comb(len(nouns), size) * perm(len(moving), size)
    if total > cap:
        raise TooManyParts(
            f"{total} candidate assignments for {len(nouns)} nouns and "
            f"{len(moving)} moving clusters exceeds the cap of {cap}"
        )
    assignments = []
    for noun_idx in combinations(range(len(nouns)), size):
        chosen_nouns = [nouns[i] for i in noun_idx]
        left_out = tuple(nouns[i] for i in range(len(nouns)) if i not in noun_idx)
        for chosen_clusters in permutations(moving, size):
            pairs = dict(zip(chosen_nouns, chosen_clusters))
            spare = tuple(c for c in moving if c not in chosen_clusters)
            assignments.append(Assignment(pairs, left_out, spare))
    return assignments


def verb_likelihoods(verb: str, config: Config) -> dict[ModelType, float] | None:
    """Per-model-type likelihood a verb contributes, or None when it has no say.

    Ambiguous, unknown, and exactly balanced verbs are dropped rather than
    attached as flat factors: a factor with no preference would still shift
    every BIC through the observation count, and silence should not.
    """
    classification = classify_verb(verb, config)
    if classification is None:
        return None
    if abs(classification.prismatic - classification.rotational) <= _INFORMATIVE_ATOL:
        return None
    return {
        ModelType.RIGID: 0.5,
        ModelType.PRISMATIC: classification.prismatic,
        ModelType.ROTATIONAL: classification.rotational,
    }


def classify_verb(verb: str, config: Config) -> VerbClassification | None:
    """Label a verb under the configured language mode; None when mode is off.

    Soft mode keeps the hard label (for reporting) but carries the normalized
    similarity likelihoods instead of winner-take-all ones.
    """
    mode = config.language_mode
    if mode == "off":
        return None
    if mode == "manual":
        return classify_manual(ManualDictionary(), verb)
    store = config.embedding_store()
    centroids = build_centroids(store, config.seed_dictionary())
    if mode == "hard":
        return classify_hard(store, centroids, verb, config.margin)
    hard = classify_hard(store, centroids, verb, config.margin)
    return VerbClassification(
        verb,
        hard.label,
        lingual_likelihood_soft(store, centroids, verb, ModelType.PRISMATIC),
        lingual_likelihood_soft(store, centroids, verb, ModelType.ROTATIONAL),
    )


def phrase_names_cluster(phrase: str, cluster_id: str) -> bool:
    """True when every word of the cluster id occurs in the noun phrase."""
    words = set(phrase.split())
    id_words = [w for w in re.split(r"[^a-z0-9]+", cluster_id.lower()) if w]
    return bool(id_words) and all(w in words for w in id_words)


def align(
    parsed: ParsedCaption,
    trajectories: list[PoseTrajectory],
    config: Config | None = None,
) -> tuple[Assignment, KinematicGraph]:
    """Choose the noun-to-cluster assignment whose inferred graph is cheapest.

    The joint-model fits do not depend on the assignment, so they are computed
    once and only the verb attachment, model selection, and spanning tree are
    re-evaluated per candidate.  Ties keep the first candidate in enumeration
    order.
    """
    config = config or Config()
    vertices = sorted(t.cluster_id for t in trajectories)
    background = identify_background(trajectories)
    candidate_sets = fit_all_edges(trajectories, config)
    nouns = parsed.nouns()
    candidates = enumerate_assignments(nouns, vertices, background, config.assignment_cap)

    verb_cache: dict[str, dict[ModelType, float] | None] = {}
    for statement in parsed.statements:
        if statement.verb_lemma not in verb_cache:
            verb_cache[statement.verb_lemma] = verb_likelihoods(statement.verb_lemma, config)

    best: tuple[float, Assignment, KinematicGraph] | None = None
    failures: list[str] = []
    for assignment in candidates:
        edge_lingual = _attach_statements(
            parsed, assignment, verb_cache, vertices, background
        )
        try:
            graph = build_graph(
                vertices, background, candidate_sets, edge_lingual, assignment
            )
        except ValueError as exc:
            failures.append(str(exc))
            continue
        cost = graph.total_cost()
        if best is None or cost < best[0]:
            best = (cost, assignment, graph)
    if best is None:
        detail = failures[0] if failures else "no candidate assignments"
        raise NoValidAssignment(f"could not ground the caption: {detail}")
    return best[1], best[2]


def _attach_statements(
    parsed: ParsedCaption,
    assignment: Assignment,
    verb_cache: dict[str, dict[ModelType, float] | None],
    vertices: list[str],
    background: str,
) -> dict[tuple[str, str], dict[ModelType, float]]:
    """Map statements to the edges they describe and combine their likelihoods.

    A statement speaks about its cluster's connection to the stationary
    background; it also covers a part-to-part edge when the noun phrase names
    both endpoints.
    """
    attached: dict[tuple[str, str], dict[ModelType, float]] = {}
    for statement in parsed.statements:
        likelihoods = verb_cache[statement.verb_lemma]
        if likelihoods is None:
            continue
        cluster = assignment.pairs.get(statement.part_noun_phrase)
        if cluster is None:
            continue
        targets = [_edge_key(cluster, background)]
        for other in vertices:
            if other in (cluster, background):
                continue
            if phrase_names_cluster(statement.part_noun_phrase, other):
                targets.append(_edge_key(cluster, other))
        for key in targets:
            if key in attached:
                attached[key] = {
                    mt: attached[key][mt] * likelihoods[mt] for mt in likelihoods
                }
            else:
                attached[key] = dict(likelihoods)
    return attached


def _edge_key(a: str, b: str) -> tuple[str, str]:
    return (a, b) if a <= b else (b, a)
