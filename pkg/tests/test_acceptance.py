"""Release gate: nine acceptance criteria, one test per criterion, in order.

Each test prints a single PASS/FAIL line with the measured quantities and the
pinned tolerance (visible with ``pytest -s``); the assertion message carries
the same text.  The whole module is budgeted to finish in under two minutes.
"""
import math
import time
from itertools import combinations

import numpy as np

from kinegraph.config import Config
from kinegraph.evaluation import axis_angle_deg, evaluate_demo, part_count_success
from kinegraph.geometry import Pose, identity, quat_canonical
from kinegraph.io import dumps_canonical, graph_to_dict
from kinegraph.kinematics import (
    EdgeModel,
    ModelType,
    NoiseModel,
    RigidParams,
    fit_prismatic,
    fit_rotational,
)
from kinegraph.language import (
    SEED_PRISMATIC,
    SEED_ROTATIONAL,
    ManualDictionary,
    VerbLabel,
    build_centroids,
    classify_hard,
    classify_manual,
    lingual_likelihood_soft,
)
from kinegraph.selection import (
    bic,
    bic_table,
    edge_cost,
    fit_all_edges,
    fit_edge_candidates,
    infer_graph,
    minimum_spanning_tree,
    relative_sequence,
    select_edge_model,
)
from kinegraph.simulator import (
    GroundTruthSpec,
    JointSpec,
    NoiseSpec,
    axis_perpendicular,
    drop_one_part,
    render,
    sample_spec,
    synth_caption,
    truth_graph,
)

_RUN_START = time.perf_counter()

# The verb inventory of the manual grounding mode, pinned verbatim.  Four words
# appear in both columns and must stay two-type ambiguous.
_PINNED_PRISMATIC = (
    "pull", "push", "shift", "move", "close", "remove", "tug", "yank",
    "dislocate", "extract", "jerk", "thrust", "poke", "prod", "shove",
    "displace", "stretch", "squeeze", "fasten", "draw", "join", "insert",
    "embed", "enter", "exit", "implant", "inject", "introduce", "stick",
    "admit", "infuse", "inlay", "instill", "place", "set", "penetrate",
    "withdraw", "intrude", "slide",
)
_PINNED_ROTATIONAL = (
    "bend", "yaw", "turn", "spin", "whirl", "move", "pull", "push", "close",
    "revolve", "rotate", "gyre", "gyrate", "pivot", "swivel", "twist",
    "twirl", "circle", "roll", "reel", "wheel", "round", "wrench", "screw",
    "tighten", "swing", "cycle", "bow", "flex", "wind", "spiral", "twine",
    "loosen",
)
_SHARED = ("close", "move", "pull", "push")


def check(criterion: str, ok: bool, detail: str) -> None:
    line = f"{criterion}: {'PASS' if ok else 'FAIL'} -- {detail}"
    print(line)
    assert ok, line


def single_joint_scene(forced: ModelType, seed: int, noise: NoiseSpec):
    """One forced-type object; returns its spec, the first joint's relative
    observations, and that joint."""
    spec = sample_spec(rng_seed=seed, n_parts=2, type_mix={forced: 1.0})
    clusters = render(spec, steps=30, noise=noise)
    background = next(c for c in clusters if c.background)
    joint = spec.joints[0]
    moving = next(c for c in clusters if c.cluster_id == joint.child)
    return spec, relative_sequence(background, moving), joint


def brute_force_tree_cost(vertices: list[str], costs: dict[tuple[str, str], float]) -> float:
    """Cheapest spanning tree by exhaustive enumeration (sorted-order sums)."""
    keys = [k for k, c in costs.items() if math.isfinite(c)]
    best = float("inf")
    for subset in combinations(keys, len(vertices) - 1):
        roots = {v: v for v in vertices}

        def find(v: str) -> str:
            while roots[v] != v:
                roots[v] = roots[roots[v]]
                v = roots[v]
            return v

        spanning = True
        for a, b in subset:
            ra, rb = find(a), find(b)
            if ra == rb:
                spanning = False
                break
            roots[ra] = rb
        if spanning:
            best = min(best, sum(sorted(costs[k] for k in subset)))
    return best


def test_1_noiseless_fit_recovery():
    """100 noiseless edges per moving type: axis < 0.5 deg, hinge line < 1e-4 m, < 10 s."""
    noise = NoiseModel(0.01, 0.0349)
    start = time.perf_counter()
    worst_axis = 0.0
    worst_point = 0.0
    for forced, fitter in (
        (ModelType.PRISMATIC, fit_prismatic),
        (ModelType.ROTATIONAL, fit_rotational),
    ):
        for seed in range(100):
            _, obs, joint = single_joint_scene(forced, seed, NoiseSpec(0.0, 0.0, seed=seed))
            model = fitter(obs, noise)
            if forced is ModelType.PRISMATIC:
                worst_axis = max(worst_axis, axis_angle_deg(model.params.axis, joint.axis))
            else:
                worst_axis = max(worst_axis, axis_angle_deg(model.params.axis_dir, joint.axis))
                delta = model.params.axis_point - joint.axis_point
                off_axis = delta - np.dot(delta, joint.axis) * joint.axis
                worst_point = max(worst_point, float(np.linalg.norm(off_axis)))
    elapsed = time.perf_counter() - start
    check(
        "criterion 1 (noiseless fit recovery)",
        worst_axis < 0.5 and worst_point < 1e-4 and elapsed < 10.0,
        f"worst axis error {worst_axis:.2e} deg (< 0.5), worst hinge-line offset "
        f"{worst_point:.2e} m (< 1e-4), {elapsed:.1f} s (< 10)",
    )


def test_2_model_selection_soundness():
    """At default noise and 30 observations, >= 95% of 200 edges per type."""
    noise = NoiseModel(0.01, 0.0349)
    rates = {}
    for forced in (ModelType.RIGID, ModelType.PRISMATIC, ModelType.ROTATIONAL):
        wins = 0
        for seed in range(200):
            _, obs, _ = single_joint_scene(forced, seed, NoiseSpec(0.01, 0.0349, seed=seed + 77777))
            wins += select_edge_model(fit_edge_candidates(obs, noise)).model_type is forced
        rates[forced.value] = wins / 200.0
    check(
        "criterion 2 (model selection soundness)",
        all(rate >= 0.95 for rate in rates.values()),
        ", ".join(f"{name} {rate:.3f}" for name, rate in rates.items()) + " (each >= 0.95)",
    )


def test_3_captions_rescue_ambiguous_hinges():
    """Short hinge arcs whose visual rot/pri BIC gap is < 2: hard-mode fusion
    with type-revealing captions stays perfect while vision alone degrades."""
    kept = vision_right = fusion_right = tried = 0
    while kept < 100:
        seed = tried
        tried += 1
        assert tried <= 2000, "ambiguous-suite construction stalled"
        rng = np.random.default_rng(seed)
        sweep = float(rng.uniform(0.11, 0.17))  # 6.3 to 9.7 degrees of travel
        radius = float(rng.uniform(1.3, 1.9))  # long lever arm
        axis = rng.normal(0.0, 1.0, 3)
        axis /= np.linalg.norm(axis)
        axis_point = axis_perpendicular(rng, axis) * radius
        zero = Pose(rng.uniform(-0.05, 0.05, 3), quat_canonical(rng.normal(0.0, 1.0, 4)))
        joint = JointSpec(
            "background", "door", ModelType.ROTATIONAL, zero,
            axis=axis, axis_point=axis_point, config_range=(-sweep / 2.0, sweep / 2.0),
        )
        spec = GroundTruthSpec((joint,), "chain")
        sigma_rot = sweep / 1.7
        clusters = render(spec, steps=30, noise=NoiseSpec(0.01, sigma_rot, seed=seed + 40000))
        background = next(c for c in clusters if c.background)
        door = next(c for c in clusters if not c.background)
        candidates = fit_edge_candidates(
            relative_sequence(background, door), NoiseModel(0.01, sigma_rot)
        )
        if (
            ModelType.ROTATIONAL not in candidates.candidates
            or ModelType.PRISMATIC not in candidates.candidates
        ):
            continue
        table = bic_table(candidates)
        if abs(table[ModelType.ROTATIONAL] - table[ModelType.PRISMATIC]) >= 2.0:
            continue
        kept += 1
        vision = Config(sigma_pos=0.01, sigma_rot=sigma_rot, language_mode="off")
        fusion = Config(sigma_pos=0.01, sigma_rot=sigma_rot, language_mode="hard")
        caption = synth_caption(spec, "unambiguous", seed)
        graph_v = infer_graph(clusters, config=vision)
        graph_f = infer_graph(clusters, fusion.parse_caption_text(caption), fusion)
        vision_right += graph_v.edges[0].model.model_type is ModelType.ROTATIONAL
        fusion_right += graph_f.edges[0].model.model_type is ModelType.ROTATIONAL
    check(
        "criterion 3 (caption rescue on ambiguous hinges)",
        fusion_right == 100 and vision_right < 80,
        f"fusion {fusion_right}/100 (= 100), vision-only {vision_right}/100 (< 80), "
        f"{tried} candidate draws",
    )


def test_4_shared_verbs_change_nothing():
    """Captions built solely from the four two-type verbs leave the serialized
    graph byte-identical to vision-only inference."""
    off = Config(language_mode="off")
    hard = Config(language_mode="hard")
    identical = 0
    for seed in range(50):
        spec = sample_spec(rng_seed=seed, n_parts=2)
        clusters = render(spec, steps=30, noise=NoiseSpec(0.01, 0.0349, seed=seed + 2024))
        caption = synth_caption(spec, verb_mode="ambiguous", seed=seed)
        parsed = hard.parse_caption_text(caption)
        assert all(statement.verb_lemma in _SHARED for statement in parsed.statements)
        baseline = dumps_canonical(graph_to_dict(infer_graph(clusters, config=off)))
        fused = dumps_canonical(graph_to_dict(infer_graph(clusters, parsed, hard)))
        identical += fused == baseline
    check(
        "criterion 4 (two-type verbs stay neutral)",
        identical == 50,
        f"{identical}/50 serialized graphs byte-identical to vision-only",
    )


def test_5_tree_cost_matches_brute_force():
    """Structure search equals exhaustive enumeration exactly, on random cost
    tables and on fully rendered scenes."""
    table_misses = 0
    for index in range(500):
        rng = np.random.default_rng(10_000 + index)
        n = int(rng.integers(2, 6))
        vertices = [chr(ord("a") + v) for v in range(n)]
        costs = {
            pair: round(float(rng.uniform(0.0, 4.0)), 1)  # one decimal forces ties
            for pair in combinations(vertices, 2)
        }
        tree = minimum_spanning_tree(vertices, costs)
        total = sum(sorted(costs[edge] for edge in tree))
        table_misses += total != brute_force_tree_cost(vertices, costs)

    scene_misses = 0
    for seed in range(25):
        spec = sample_spec(rng_seed=seed, n_parts=2 + seed % 3)
        clusters = render(spec, steps=30, noise=NoiseSpec(0.01, 0.0349, seed=seed + 555))
        costs = {}
        for key, candidates in fit_all_edges(clusters, Config()).items():
            if candidates.candidates:
                costs[key] = edge_cost(select_edge_model(candidates), candidates.n)
            else:
                costs[key] = float("inf")
        graph = infer_graph(clusters)
        total = sum(sorted(edge.cost for edge in graph.edges))
        scene_misses += total != brute_force_tree_cost(sorted(graph.vertices), costs)
    check(
        "criterion 5 (spanning-tree oracle)",
        table_misses == 0 and scene_misses == 0,
        f"500 random cost tables ({table_misses} mismatches) and 25 rendered "
        f"scenes ({scene_misses} mismatches), exact cost equality",
    )


def test_6_bic_closed_form():
    """k = 6, n = 10, zero log-likelihood: BIC equals 6 ln 10 within 1e-9."""
    model = EdgeModel(ModelType.RIGID, RigidParams(identity()), 6, 0.0)
    value = bic(model, 10)
    target = 6.0 * math.log(10.0)
    check(
        "criterion 6 (BIC closed form)",
        abs(value - target) < 1e-9,
        f"bic = {value!r}, |bic - 6 ln 10| = {abs(value - target):.2e} (< 1e-9)",
    )


def test_7_metric_identities():
    """Hard success implies soft success; axis-angle identities; the one-of-two
    part-count example scores exactly 1/2."""
    x = np.array([1.0, 0.0, 0.0])
    y = np.array([0.0, 1.0, 0.0])
    param_ok = (
        axis_angle_deg(x, x) < 1e-9
        and abs(axis_angle_deg(x, y) - 90.0) < 1e-9
        and axis_angle_deg(x, -x) < 1e-9
    )
    count_ok = part_count_success([(1, 2), (2, 2)]) == 0.5

    implication_ok = True
    hard_wins = 0
    for seed in range(30):
        spec = sample_spec(rng_seed=seed, n_parts=2)
        clusters = render(spec, steps=30, noise=NoiseSpec(0.01, 0.0349, seed=seed + 91))
        if seed % 3 == 0:  # some demos lose a part, so hard fails but soft holds
            clusters = drop_one_part(clusters, seed=seed)
        result = evaluate_demo(f"demo_{seed:03d}", infer_graph(clusters), truth_graph(spec))
        implication_ok &= (not result.hard) or result.soft
        hard_wins += result.hard
    check(
        "criterion 7 (metric identities)",
        param_ok and count_ok and implication_ok,
        f"axis angles 0/90/0 deg within 1e-9: {param_ok}; one-of-two part count "
        f"= 1/2: {count_ok}; hard => soft on 30 demos ({hard_wins} hard wins): "
        f"{implication_ok}",
    )


def test_8_language_unit_suite():
    """Bundled embeddings: seeds self-classify, the shared four are exactly
    Ambiguous, soft likelihoods sum to 1, and the manual dictionary matches
    the pinned inventory."""
    config = Config()
    store = config.embedding_store()
    centroids = build_centroids(store)

    seeds_ok = all(
        classify_hard(store, centroids, word).label is VerbLabel.PRISMATIC
        for word in SEED_PRISMATIC
    ) and all(
        classify_hard(store, centroids, word).label is VerbLabel.ROTATIONAL
        for word in SEED_ROTATIONAL
    )

    ambiguous_ok = True
    for verb in _SHARED:
        result = classify_hard(store, centroids, verb)
        ambiguous_ok &= (
            result.label is VerbLabel.AMBIGUOUS
            and result.prismatic == 0.5
            and result.rotational == 0.5
        )

    sums_ok = all(
        abs(
            lingual_likelihood_soft(store, centroids, word, ModelType.PRISMATIC)
            + lingual_likelihood_soft(store, centroids, word, ModelType.ROTATIONAL)
            - 1.0
        )
        < 1e-12
        for word in store.words()
    )

    manual = ManualDictionary()
    inventory_ok = (
        manual.prismatic == frozenset(_PINNED_PRISMATIC)
        and manual.rotational == frozenset(_PINNED_ROTATIONAL)
        and manual.shared() == frozenset(_SHARED)
    )
    labels_ok = all(
        classify_manual(manual, word).label
        is (VerbLabel.AMBIGUOUS if word in _SHARED else VerbLabel.PRISMATIC)
        for word in _PINNED_PRISMATIC
    ) and all(
        classify_manual(manual, word).label
        is (VerbLabel.AMBIGUOUS if word in _SHARED else VerbLabel.ROTATIONAL)
        for word in _PINNED_ROTATIONAL
    )
    check(
        "criterion 8 (language unit suite)",
        seeds_ok and ambiguous_ok and sums_ok and inventory_ok and labels_ok,
        f"6 seed words self-classify: {seeds_ok}; shared four exactly "
        f"Ambiguous 0.5/0.5: {ambiguous_ok}; soft sums to 1 over "
        f"{len(store)} words: {sums_ok}; manual inventory pinned "
        f"({len(_PINNED_PRISMATIC)}+{len(_PINNED_ROTATIONAL)} verbs, 4 shared): "
        f"{inventory_ok and labels_ok}",
    )


def test_9_end_to_end_round_trip():
    """Zero-noise chains and stars (2-4 moving parts) with type-revealing
    captions recover the exact ground-truth graph; the whole module stays
    under the two-minute budget."""
    config = Config(language_mode="hard")
    mix = {ModelType.ROTATIONAL: 0.7, ModelType.PRISMATIC: 0.3}
    hard = 0
    for seed in range(20):
        spec = sample_spec(
            rng_seed=seed,
            n_parts=2 + seed % 3,
            type_mix=mix,
            topology="chain" if seed % 2 == 0 else "star",
            max_prismatic=1,
        )
        clusters = render(spec, steps=30)
        parsed = config.parse_caption_text(synth_caption(spec, "unambiguous", seed))
        graph = infer_graph(clusters, parsed, config)
        hard += evaluate_demo(f"demo_{seed:03d}", graph, truth_graph(spec)).hard
    elapsed = time.perf_counter() - _RUN_START
    check(
        "criterion 9 (end-to-end round trip)",
        hard == 20 and elapsed < 120.0,
        f"S_h = {hard / 20.0:.2f} over 20 zero-noise demos (= 1.0); acceptance "
        f"module finished in {elapsed:.0f} s (< 120)",
    )
