"""Command-line driver: exit codes, file layout, byte-stable outputs."""
import json

import numpy as np
import pytest

from kinegraph import io
from kinegraph.cli import main
from kinegraph.geometry import Pose
from kinegraph.kinematics import ModelType
from kinegraph.simulator import GroundTruthSpec, JointSpec, NoiseSpec, render


def write_scene(path):
    """Door (rotational) and drawer (prismatic) on a common background."""
    door = JointSpec(
        "background", "door", ModelType.ROTATIONAL, Pose(np.array([0.4, 0.0, 0.0])),
        axis=np.array([0.0, 0.0, 1.0]), axis_point=np.array([0.4, 0.3, 0.0]),
        config_range=(0.0, 1.0),
    )
    drawer = JointSpec(
        "background", "drawer", ModelType.PRISMATIC, Pose(np.array([-0.3, 0.2, 0.0])),
        axis=np.array([1.0, 0.0, 0.0]), config_range=(0.0, 0.4),
    )
    spec = GroundTruthSpec((door, drawer), topology="star")
    io.save_trajectories(path, render(spec, steps=15, noise=NoiseSpec(0.003, 0.008, seed=5)))


def test_simulate_writes_bundle(tmp_path, capsys):
    rc = main(["simulate", str(tmp_path), "--demos", "2", "--steps", "12", "--seed", "4"])
    assert rc == 0
    for stem in ("demo_000", "demo_001"):
        assert (tmp_path / f"{stem}.traj.json").exists()
        assert (tmp_path / f"{stem}.truth.json").exists()
        assert (tmp_path / f"{stem}.caption.txt").exists()
    assert "wrote 2 demo(s)" in capsys.readouterr().out


def test_simulate_is_deterministic(tmp_path):
    args = ["--demos", "1", "--steps", "10", "--noise-pos", "0.01", "--seed", "11"]
    first = tmp_path / "a"
    second = tmp_path / "b"
    assert main(["simulate", str(first)] + args) == 0
    assert main(["simulate", str(second)] + args) == 0
    for name in ("demo_000.traj.json", "demo_000.truth.json", "demo_000.caption.txt"):
        assert (first / name).read_bytes() == (second / name).read_bytes()


def test_simulate_caption_none_and_dropout(tmp_path):
    rc = main([
        "simulate", str(tmp_path), "--parts", "3", "--dropout", "1",
        "--caption", "none", "--steps", "10", "--seed", "2",
    ])
    assert rc == 0
    assert not list(tmp_path.glob("*.caption.txt"))
    trajectories = io.load_trajectories(tmp_path / "demo_000.traj.json")
    assert len(trajectories) == 3  # one of four clusters dropped
    truth = io.load_graph(tmp_path / "demo_000.truth.json")
    assert len(truth.vertices) == 4  # ...but the truth keeps every part


def test_end_to_end_pipeline(tmp_path, capsys):
    demo_dir = tmp_path / "demos"
    assert main(["simulate", str(demo_dir), "--demos", "3", "--steps", "25", "--seed", "7"]) == 0
    for stem in ("demo_000", "demo_001", "demo_002"):
        rc = main([
            "infer", str(demo_dir / f"{stem}.traj.json"),
            "--caption", str(demo_dir / f"{stem}.caption.txt"),
        ])
        assert rc == 0
        assert (demo_dir / f"{stem}.graph.json").exists()
    capsys.readouterr()

    rc = main(["evaluate", str(demo_dir), str(demo_dir)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "demos: 3" in out
    assert "hard_success_rate: 1.0000" in out
    report_dir = demo_dir / "report"
    summary = json.loads((report_dir / "summary.json").read_text())
    assert summary["n_demos"] == 3
    assert summary["hard_success_rate"] == 1.0
    assert (report_dir / "report.csv").exists()
    assert (report_dir / "success_rates.png").exists()


def test_infer_output_naming_and_assignment(tmp_path, capsys):
    traj = tmp_path / "obj.traj.json"
    write_scene(traj)
    caption = tmp_path / "caption.txt"
    caption.write_text("The door swings. The drawer slides.\n")

    assert main(["infer", str(traj), "--caption", str(caption)]) == 0
    graph_path = tmp_path / "obj.graph.json"
    assert graph_path.exists()
    assignment = io.load_assignment(tmp_path / "obj.assignment.json")
    assert assignment.pairs == {"door": "door", "drawer": "drawer"}
    out = capsys.readouterr().out
    assert "background: background" in out
    assert "background -- door: rotational" in out
    assert f"graph written to {graph_path}" in out

    # Vision-only inference writes no assignment file.
    bare = tmp_path / "bare.graph.json"
    assert main(["infer", str(traj), "--out", str(bare)]) == 0
    assert bare.exists()
    assert not (tmp_path / "bare.assignment.json").exists()


def test_infer_reruns_are_byte_identical(tmp_path):
    traj = tmp_path / "obj.traj.json"
    write_scene(traj)
    first = tmp_path / "a.graph.json"
    second = tmp_path / "b.graph.json"
    assert main(["infer", str(traj), "--out", str(first)]) == 0
    assert main(["infer", str(traj), "--out", str(second)]) == 0
    assert first.read_bytes() == second.read_bytes()


def test_infer_mode_off_ignores_caption(tmp_path):
    traj = tmp_path / "obj.traj.json"
    write_scene(traj)
    caption = tmp_path / "caption.txt"
    caption.write_text("The door swings.\n")
    with_off = tmp_path / "off.graph.json"
    without = tmp_path / "plain.graph.json"
    rc = main([
        "infer", str(traj), "--caption", str(caption),
        "--language-mode", "off", "--out", str(with_off),
    ])
    assert rc == 0
    assert main(["infer", str(traj), "--out", str(without)]) == 0
    assert with_off.read_bytes() == without.read_bytes()
    assert not (tmp_path / "off.assignment.json").exists()


def test_infer_unusable_caption_falls_back(tmp_path):
    traj = tmp_path / "obj.traj.json"
    write_scene(traj)
    baseline = tmp_path / "plain.graph.json"
    assert main(["infer", str(traj), "--out", str(baseline)]) == 0

    empty = tmp_path / "empty.txt"
    empty.write_text("nothing to see here\n")  # parses to zero statements
    offtopic = tmp_path / "offtopic.txt"
    offtopic.write_text("The gizmo rotates.\n")  # verb with no known part noun
    for caption in (empty, offtopic):
        out = tmp_path / (caption.stem + ".graph.json")
        rc = main(["infer", str(traj), "--caption", str(caption), "--out", str(out)])
        assert rc == 0
        assert out.read_bytes() == baseline.read_bytes()


def test_infer_pretagged_caption(tmp_path):
    traj = tmp_path / "obj.traj.json"
    write_scene(traj)
    caption = tmp_path / "tagged.txt"
    caption.write_text("the/O door/N swings/V ./O\n")
    assert main(["infer", str(traj), "--caption", str(caption)]) == 0
    assignment = io.load_assignment(tmp_path / "obj.assignment.json")
    assert assignment.pairs == {"door": "door"}
    assert assignment.unmatched_clusters == ("drawer",)


def test_classify_verb_output(capsys):
    assert main(["classify-verb", "ROTATE"]) == 0
    assert capsys.readouterr().out == "rotate\tRotational\t1e-06\t1\n"
    assert main(["classify-verb", "pull", "--language-mode", "manual"]) == 0
    assert capsys.readouterr().out == "pull\tAmbiguous\t0.5\t0.5\n"
    assert main(["classify-verb", "turn", "--language-mode", "soft"]) == 0
    fields = capsys.readouterr().out.strip().split("\t")
    assert fields[0] == "turn" and fields[1] == "Rotational"
    assert float(fields[2]) + float(fields[3]) == pytest.approx(1.0)


def test_config_file_and_flag_precedence(tmp_path):
    config = tmp_path / "lang.toml"
    config.write_text('language_mode = "off"\n')
    assert main(["classify-verb", "turn", "--config", str(config)]) == 1
    rc = main(["classify-verb", "turn", "--config", str(config), "--language-mode", "hard"])
    assert rc == 0

    bad = tmp_path / "bad.toml"
    bad.write_text("unknown_knob = 3\n")
    assert main(["classify-verb", "turn", "--config", str(bad)]) == 1


def test_exit_codes(tmp_path):
    assert main(["--help"]) == 0
    assert main([]) == 1  # missing subcommand
    assert main(["infer", str(tmp_path / "missing.traj.json")]) == 1
    (tmp_path / "est").mkdir()
    (tmp_path / "truth").mkdir()
    assert main(["evaluate", str(tmp_path / "est"), str(tmp_path / "truth")]) == 1
    assert main(["simulate", str(tmp_path / "x"), "--parts", "9"]) == 1

    # A single-cluster scene cannot support structure search: inference error.
    lonely = tmp_path / "solo.traj.json"
    frame = JointSpec("background", "frame", ModelType.RIGID, Pose(np.array([0.1, 0.0, 0.0])))
    spec = GroundTruthSpec((frame,), topology="chain")
    trajectories = [t for t in render(spec, steps=8) if t.cluster_id == "frame"]
    io.save_trajectories(lonely, trajectories)
    assert main(["infer", str(lonely)]) == 2


def test_evaluate_missing_truth_is_a_format_error(tmp_path):
    traj = tmp_path / "obj.traj.json"
    write_scene(traj)
    assert main(["infer", str(traj)]) == 0
    assert main(["evaluate", str(tmp_path), str(tmp_path)]) == 1  # no obj.truth.json
