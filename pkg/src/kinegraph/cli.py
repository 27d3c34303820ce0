"""Command-line pipeline binding the library end to end.

Four subcommands: ``simulate`` writes synthetic demo bundles, ``infer`` turns
a trajectory file (plus optional caption) into a kinematic graph file,
``evaluate`` scores estimated graphs against ground truth and renders report
figures, and ``classify-verb`` exposes the verb classifier for one word.

Exit codes: 0 on success, 1 on input or format errors, 2 when inference
itself fails.  Diagnostics go to stderr; results go to files and stdout.
"""
from __future__ import annotations

import argparse
import json
import logging
import sys
from dataclasses import fields
from pathlib import Path

from . import io
from .alignment import NoValidAssignment, TooManyParts, classify_verb
from .config import LANGUAGE_MODES, Config, apply_overrides, load_config
from .evaluation import MissingCorrespondence, aggregate, evaluate_demo
from .kinematics import DegenerateMotion, ModelType, TooFewObservations
from .language import FormatError
from .report import write_report
from .selection import InsufficientParts, infer_graph
from .simulator import (
    NoiseSpec,
    drop_one_part,
    render,
    sample_spec,
    synth_caption,
    truth_graph,
)

LOGGER = logging.getLogger(__name__)

_TRAJ_SUFFIX = ".traj.json"
_GRAPH_SUFFIX = ".graph.json"
_TRUTH_SUFFIX = ".truth.json"

# Exceptions that mean the pipeline ran but could not produce a model.
_INFERENCE_ERRORS = (
    InsufficientParts,
    TooManyParts,
    NoValidAssignment,
    DegenerateMotion,
    TooFewObservations,
)


class InferenceError(RuntimeError):
    """Inference-stage failure; maps to exit code 2."""


# -- configuration plumbing ---------------------------------------------------

_OVERRIDE_FIELDS = tuple(f.name for f in fields(Config))


def _add_config_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("configuration", "flags override the --config file")
    group.add_argument("--config", metavar="FILE", help="TOML config file")
    group.add_argument("--language-mode", choices=LANGUAGE_MODES)
    group.add_argument("--sigma-pos", type=float, metavar="M", help="position noise sd (m)")
    group.add_argument("--sigma-rot", type=float, metavar="RAD", help="rotation noise sd (rad)")
    group.add_argument("--margin", type=float, help="hard-classification distance margin")
    group.add_argument("--embeddings", metavar="FILE", help="word embedding text file")
    group.add_argument("--part-lexicon", metavar="FILE", help="part noun list")
    group.add_argument("--verb-lexicon", metavar="FILE", help="motion verb list")
    group.add_argument("--agent-stoplist", metavar="FILE", help="agent words to ignore")
    group.add_argument("--assignment-cap", type=int, metavar="N")


def _assemble_config(args: argparse.Namespace) -> Config:
    config = load_config(args.config) if args.config else Config()
    overrides = {
        name: getattr(args, name) for name in _OVERRIDE_FIELDS if getattr(args, name, None) is not None
    }
    return apply_overrides(config, overrides, "command line")


# -- simulate -----------------------------------------------------------------

def cmd_simulate(args: argparse.Namespace) -> int:
    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    type_mix = {ModelType(args.type): 1.0} if args.type else None
    for index in range(args.demos):
        seed = args.seed + index
        spec = sample_spec(
            seed,
            n_parts=args.parts,
            type_mix=type_mix,
            topology=args.topology,
            max_prismatic=args.max_prismatic,
        )
        noise = NoiseSpec(sigma_pos=args.noise_pos, sigma_rot=args.noise_rot, seed=seed)
        trajectories = render(spec, steps=args.steps, noise=noise)
        for round_ in range(args.dropout):
            trajectories = drop_one_part(trajectories, seed=seed + 1000 * (round_ + 1))
        stem = f"demo_{index:03d}"
        io.save_trajectories(out_dir / (stem + _TRAJ_SUFFIX), trajectories)
        io.save_graph(out_dir / (stem + _TRUTH_SUFFIX), truth_graph(spec))
        if args.caption != "none":
            caption = synth_caption(spec, verb_mode=args.caption, seed=seed)
            (out_dir / f"{stem}.caption.txt").write_text(caption + "\n")
    print(f"wrote {args.demos} demo(s) to {out_dir}")
    return 0


# -- infer --------------------------------------------------------------------

def _default_graph_path(traj_path: Path) -> Path:
    name = traj_path.name
    if name.endswith(_TRAJ_SUFFIX):
        stem = name[: -len(_TRAJ_SUFFIX)]
    elif name.endswith(".json"):
        stem = name[: -len(".json")]
    else:
        stem = name
    return traj_path.with_name(stem + _GRAPH_SUFFIX)


def cmd_infer(args: argparse.Namespace) -> int:
    config = _assemble_config(args)
    traj_path = Path(args.trajectories)
    trajectories = io.load_trajectories(traj_path)

    parsed = None
    if args.caption is not None:
        text = Path(args.caption).read_text()
        try:
            parsed = config.parse_caption_text(text)
        except FormatError as exc:
            LOGGER.warning("caption unusable (%s); falling back to motion only", exc)
            parsed = None

    try:
        graph = infer_graph(trajectories, parsed, config)
    except _INFERENCE_ERRORS as exc:
        raise InferenceError(f"model fitting/structure search: {exc}") from exc
    except (ValueError, RuntimeError) as exc:
        raise InferenceError(f"structure search: {exc}") from exc

    out_path = Path(args.out) if args.out else _default_graph_path(traj_path)
    io.save_graph(out_path, graph)
    if graph.assignment is not None:
        base = out_path.name
        if base.endswith(_GRAPH_SUFFIX):
            base = base[: -len(_GRAPH_SUFFIX)]
        elif base.endswith(".json"):
            base = base[: -len(".json")]
        assignment_path = (
            Path(args.assignment_out)
            if args.assignment_out
            else out_path.with_name(base + ".assignment.json")
        )
        io.save_assignment(assignment_path, graph.assignment)

    print(f"background: {graph.background}")
    for edge in graph.edges:
        span = edge.model.config_range()
        extra = "" if span is None else f", q in [{span[0]:.3f}, {span[1]:.3f}]"
        print(f"{edge.i} -- {edge.j}: {edge.model.model_type.value} (cost {edge.cost:.3f}{extra})")
    if graph.assignment is not None:
        for noun in sorted(graph.assignment.pairs):
            print(f"noun {noun!r} -> {graph.assignment.pairs[noun]}")
    print(f"graph written to {out_path}")
    return 0


# -- evaluate -----------------------------------------------------------------

def _load_correspondence(path: str | None) -> dict[str, str] | None:
    if path is None:
        return None
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise FormatError(f"correspondence: cannot read {path}: {exc}") from exc
    if not isinstance(payload, dict) or not all(
        isinstance(k, str) and isinstance(v, str) for k, v in payload.items()
    ):
        raise FormatError("correspondence: expected an object of cluster-id to part-id strings")
    return payload


def cmd_evaluate(args: argparse.Namespace) -> int:
    est_dir = Path(args.estimated)
    truth_dir = Path(args.truth)
    correspondence = _load_correspondence(args.correspondence)

    est_files = sorted(est_dir.glob("*" + _GRAPH_SUFFIX))
    if not est_files:
        raise FormatError(f"evaluate: no *{_GRAPH_SUFFIX} files in {est_dir}")
    results = []
    for path in est_files:
        demo_id = path.name[: -len(_GRAPH_SUFFIX)]
        truth_path = truth_dir / (demo_id + _TRUTH_SUFFIX)
        if not truth_path.exists():
            raise FormatError(f"evaluate: no truth graph for demo {demo_id!r} in {truth_dir}")
        estimated = io.load_graph(path)
        truth = io.load_graph(truth_path)
        try:
            results.append(evaluate_demo(demo_id, estimated, truth, correspondence))
        except MissingCorrespondence as exc:
            raise FormatError(f"evaluate: demo {demo_id!r}: {exc}") from exc

    report = aggregate(results)
    out_dir = Path(args.out) if args.out else est_dir / "report"
    paths = write_report(out_dir, report, figures=not args.no_figures)

    print(f"demos: {len(report.results)}")
    print(f"part_count_success: {report.part_count_success:.4f}")
    print(f"hard_success_rate: {report.hard_success_rate:.4f}")
    print(f"soft_success_rate: {report.soft_success_rate:.4f}")
    if report.param_error_deg is None:
        print("param_error_deg: n/a")
    else:
        print(f"param_error_deg: {report.param_error_deg:.4f}")
    print(f"param_excluded: {report.n_param_excluded}")
    print(f"report written to {paths['csv'].parent}")
    return 0


# -- classify-verb ------------------------------------------------------------

def cmd_classify_verb(args: argparse.Namespace) -> int:
    config = _assemble_config(args)
    if config.language_mode == "off":
        raise FormatError("classify-verb: language_mode 'off' classifies nothing; use hard, soft, or manual")
    classification = classify_verb(args.verb.lower(), config)
    print(
        f"{classification.verb}\t{classification.label.value}"
        f"\t{classification.prismatic:.6g}\t{classification.rotational:.6g}"
    )
    return 0


# -- entry point ---------------------------------------------------------------

def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="kinegraph",
        description="Learn kinematic graphs of articulated objects from pose "
        "trajectories and captions.",
    )
    parser.add_argument("-v", "--verbose", action="store_true", help="debug logging to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="write synthetic demo bundles")
    p_sim.add_argument("out_dir", help="output directory")
    p_sim.add_argument("--demos", type=int, default=1, help="number of demos (default 1)")
    p_sim.add_argument("--parts", type=int, default=2, help="moving parts per object")
    p_sim.add_argument(
        "--type",
        choices=[t.value for t in ModelType],
        help="force every joint to this type (default: mixed)",
    )
    p_sim.add_argument("--topology", choices=["chain", "star"], help="default: random")
    p_sim.add_argument("--max-prismatic", type=int, metavar="N")
    p_sim.add_argument("--steps", type=int, default=30, help="samples per trajectory")
    p_sim.add_argument("--noise-pos", type=float, default=0.0, metavar="M")
    p_sim.add_argument("--noise-rot", type=float, default=0.0, metavar="RAD")
    p_sim.add_argument(
        "--caption",
        choices=["unambiguous", "ambiguous", "mixed", "none"],
        default="unambiguous",
        help="verb pool for generated captions",
    )
    p_sim.add_argument("--dropout", type=int, default=0, help="clusters to drop from trajectories")
    p_sim.add_argument("--seed", type=int, default=0)
    p_sim.set_defaults(func=cmd_simulate)

    p_inf = sub.add_parser("infer", help="infer a kinematic graph from a trajectory file")
    p_inf.add_argument("trajectories", help="trajectory JSON file")
    p_inf.add_argument("--caption", metavar="FILE", help="caption text (plain or word/TAG lines)")
    p_inf.add_argument("--out", metavar="FILE", help="graph output (default: <stem>.graph.json)")
    p_inf.add_argument("--assignment-out", metavar="FILE", help="noun assignment output")
    _add_config_flags(p_inf)
    p_inf.set_defaults(func=cmd_infer)

    p_eval = sub.add_parser("evaluate", help="score estimated graphs against ground truth")
    p_eval.add_argument("estimated", help="directory of *.graph.json files")
    p_eval.add_argument("truth", help="directory of matching *.truth.json files")
    p_eval.add_argument("--out", metavar="DIR", help="report directory (default: <estimated>/report)")
    p_eval.add_argument("--correspondence", metavar="FILE", help="JSON cluster-to-part id map")
    p_eval.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
    p_eval.set_defaults(func=cmd_evaluate)

    p_cls = sub.add_parser("classify-verb", help="label one verb and print its likelihoods")
    p_cls.add_argument("verb")
    _add_config_flags(p_cls)
    p_cls.set_defaults(func=cmd_classify_verb)

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return 0 if not exc.code else 1
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except FormatError as exc:
        LOGGER.error("%s", exc)
        return 1
    except InferenceError as exc:
        LOGGER.error("%s", exc)
        return 2
    except OSError as exc:
        LOGGER.error("%s", exc)
        return 1
    except ValueError as exc:
        LOGGER.error("%s", exc)
        return 1


if __name__ == "__main__":
    sys.exit(main())
