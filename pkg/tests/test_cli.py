import json

import numpy as np
import pytest

from beecount.cli import main, run_bench
from beecount.errors import ConfigError
from beecount.frames import write_pgm


def _simulate(tmp_path, name, seed=0):
    out = tmp_path / name
    assert main(["simulate", "--suite", name, "--seed", str(seed), "--out", str(out)]) == 0
    return out


def _count(sim_dir, *extra):
    out = sim_dir / "out"
    rc = main(["count", "--frames", str(sim_dir / "frames"),
               "--tunnels", str(sim_dir / "tunnels.json"),
               "--ground-truth", str(sim_dir / "ground_truth.csv"),
               "--out-dir", str(out), *extra])
    return rc, out


def test_count_single_in(tmp_path):
    sim = _simulate(tmp_path, "single-in")
    rc, out = _count(sim)
    assert rc == 0
    total = json.loads((out / "report.json").read_text())["total"]
    assert (total["pred_in"], total["pred_out"]) == (1, 0)
    assert total["acc_in"] == 1.0
    assert (out / "events.csv").read_text().splitlines() == ["frame,tunnel,direction", "12,0,in"]


def test_count_idle(tmp_path):
    sim = _simulate(tmp_path, "high-noise-idle")
    rc, out = _count(sim, "--signal-dump", str(tmp_path / "sig.csv"))
    assert rc == 0
    total = json.loads((out / "report.json").read_text())["total"]
    assert (total["pred_in"], total["pred_out"]) == (0, 0)
    rows = (tmp_path / "sig.csv").read_text().splitlines()
    assert rows[0] == "k,tunnel,section,r,dr,class"
    assert all(row.endswith(",0.0,0.0,0") for row in rows[1:])


def test_count_is_byte_deterministic(tmp_path):
    sim = _simulate(tmp_path, "alternating", seed=4)
    _, out = _count(sim, "--events", str(tmp_path / "e1.csv"))
    _, out = _count(sim, "--events", str(tmp_path / "e2.csv"), "--sequential")
    assert (tmp_path / "e1.csv").read_bytes() == (tmp_path / "e2.csv").read_bytes()


def test_count_one_frame_sequence(tmp_path, capsys):
    sim = _simulate(tmp_path, "single-in")
    one = tmp_path / "one"
    one.mkdir()
    (one / "00000.pgm").write_bytes((sim / "frames" / "00000.pgm").read_bytes())
    rc = main(["count", "--frames", str(one), "--tunnels", str(sim / "tunnels.json"),
               "--out-dir", str(tmp_path / "o")])
    assert rc == 2
    assert "sequence too short" in capsys.readouterr().err


def test_count_manifest_and_snapshots(tmp_path):
    sim = _simulate(tmp_path, "single-out")
    frames = sorted((sim / "frames").iterdir())
    manifest = tmp_path / "list.txt"
    manifest.write_text("\n".join(str(p) for p in frames))
    rc = main(["count", "--manifest", str(manifest), "--tunnels", str(sim / "tunnels.json"),
               "--out-dir", str(tmp_path / "o"), "--model-snapshots", str(tmp_path / "m")])
    assert rc == 0
    assert json.loads((tmp_path / "o" / "report.json").read_text())["total"]["pred_out"] == 1
    assert (tmp_path / "m" / "model_tunnel0.pgm").exists()


def test_count_overrides_are_validated(tmp_path, capsys):
    sim = _simulate(tmp_path, "single-in")
    rc, _ = _count(sim, "--t3", "1.5")
    assert rc == 1
    assert "t3" in capsys.readouterr().err


def test_count_missing_frames_dir(tmp_path):
    sim = _simulate(tmp_path, "single-in")
    rc = main(["count", "--frames", str(tmp_path / "nope"), "--tunnels",
               str(sim / "tunnels.json"), "--out-dir", str(tmp_path / "o")])
    assert rc == 2


def test_count_bad_tunnel_config(tmp_path):
    d = tmp_path / "f"
    d.mkdir()
    for k in range(2):
        write_pgm(d / f"{k}.pgm", np.zeros((8, 8), dtype=np.uint8))
    cfg = tmp_path / "t.json"
    cfg.write_text(json.dumps({"tunnels": [{"id": 0, "x": 4, "y": 0, "width": 8,
                                            "height": 8}]}))
    assert main(["count", "--frames", str(d), "--tunnels", str(cfg),
                 "--out-dir", str(tmp_path / "o")]) == 1


def test_usage_error_exit_code(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["count"])
    assert exc.value.code == 1


def _write_annotations(root, n_in, n_out):
    root.mkdir()
    lines = ["2 0.5 0.5 0.1 0.2"] * n_in + ["3 0.5 0.5 0.1 0.2"] * n_out
    for i in range(0, len(lines), 7):
        (root / f"img{i:04d}.txt").write_text("\n".join(lines[i:i + 7]) + "\n")


def test_eval_counts_against_annotations(tmp_path, capsys):
    ann = tmp_path / "ann"
    _write_annotations(ann, 182, 24)
    assert main(["eval", "--counts", "29", "6", "--annotations", str(ann)]) == 0
    total = json.loads(capsys.readouterr().out)["total"]
    assert (total["gt_in"], total["gt_out"]) == (182, 24)
    assert total["acc_in"] == pytest.approx(0.16, abs=0.02)
    assert total["acc_out"] == pytest.approx(0.25, abs=0.02)


def test_eval_exact_counts(tmp_path, capsys):
    assert main(["eval", "--counts", "182", "24", "--gt", "182", "24",
                 "--table-csv", str(tmp_path / "t.csv")]) == 0
    total = json.loads(capsys.readouterr().out)["total"]
    assert (total["acc_in"], total["acc_out"]) == (1.0, 1.0)
    assert (tmp_path / "t.csv").read_text().splitlines()[3] == "Accuracy in,-,1.00"


def test_eval_resnet_row(capsys):
    assert main(["eval", "--counts", "179", "26", "--gt", "182", "24"]) == 0
    total = json.loads(capsys.readouterr().out)["total"]
    assert total["acc_in"] == pytest.approx(0.98, abs=0.02)
    assert total["acc_out"] == pytest.approx(0.92, abs=0.02)


def test_eval_events_file_and_missing_annotations(tmp_path, capsys):
    events = tmp_path / "e.csv"
    events.write_text("frame,tunnel,direction\n3,0,in\n9,1,out\n12,1,in\n")
    assert main(["eval", "--events", str(events), "--annotations",
                 str(tmp_path / "missing"), "--report", str(tmp_path / "r.json")]) == 0
    total = json.loads((tmp_path / "r.json").read_text())["total"]
    assert (total["pred_in"], total["pred_out"]) == (2, 1)
    assert total["ground_truth_missing"] is True


def test_simulate_outputs(tmp_path):
    a = _simulate(tmp_path, "single-in", seed=7)
    assert (a / "ground_truth.csv").read_text().splitlines()[1:] == ["13,in"]
    main(["simulate", "--suite", "single-in", "--seed", "7", "--out", str(tmp_path / "b")])
    for p in sorted(a.rglob("*")):
        if p.is_file():
            assert p.read_bytes() == (tmp_path / "b" / p.relative_to(a)).read_bytes()


def test_simulate_zero_actor_scenario(tmp_path):
    path = tmp_path / "s.json"
    path.write_text(json.dumps({"width": 16, "height": 30, "n_frames": 5, "actors": []}))
    assert main(["simulate", "--scenario", str(path), "--out", str(tmp_path / "o")]) == 0
    assert (tmp_path / "o" / "ground_truth.csv").read_text() == "step,direction\n"


def test_simulate_unknown_suite(tmp_path):
    assert main(["simulate", "--suite", "nope", "--out", str(tmp_path / "o")]) == 1


def test_bench_one_vs_twelve():
    one = run_bench(1, iterations=150)
    twelve = run_bench(12, iterations=150)
    assert one["p95_ms"] <= twelve["p95_ms"]
    assert twelve["mode"] == "sequential"


def test_bench_zero_iterations(capsys):
    with pytest.raises(ConfigError):
        run_bench(12, iterations=0)
    assert main(["bench", "--iterations", "0"]) == 1


def test_bench_cli_json(tmp_path, capsys):
    assert main(["bench", "--tunnels", "2", "--iterations", "20",
                 "--output", str(tmp_path / "b.json")]) == 0
    stats = json.loads((tmp_path / "b.json").read_text())
    assert stats["tunnels"] == 2 and stats["iterations"] == 20
    assert {"mean_ms", "p95_ms", "max_ms"} <= set(stats)
