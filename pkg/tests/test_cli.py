import json
import math

import numpy as np
import pytest

from boxmag.cli import main


def test_triangle_demo(tmp_path, capsys):
    code = main(["invisible-demo", "triangle", "--out", str(tmp_path), "--points", "5"])
    assert code == 0
    out = capsys.readouterr().out
    assert "INVISIBLE" in out
    text = (tmp_path / "invisible_demo.csv").read_text()
    lines = text.strip().split("\n")
    assert lines[0] == "x,y,z,potential"
    assert len(lines) == 6
    pots = [abs(float(l.split(",")[-1])) for l in lines[1:]]
    assert max(pots) < 1e-10  # closed-form zeros, up to cancellation noise


def test_balls_demo_json(tmp_path):
    code = main(["invisible-demo", "balls", "--out", str(tmp_path),
                 "--points", "4", "--format", "json", "--rtol", "1e-6"])
    assert code == 0
    payload = json.loads((tmp_path / "invisible_demo.json").read_text())
    assert payload["fixture"] == "balls"
    assert payload["config"]["r"] == 0.4
    assert len(payload["samples"]) == 4
    assert payload["max_abs_potential"] < payload["threshold"]


def test_bump_demo(tmp_path):
    code = main(["invisible-demo", "bump", "--out", str(tmp_path),
                 "--points", "3", "--rtol", "1e-5", "--a", "0.3"])
    assert code == 0


def test_unknown_fixture_exits_2():
    with pytest.raises(SystemExit) as exc:
        main(["invisible-demo", "pyramid"])
    assert exc.value.code == 2


def test_forward_invert_round_trip(tmp_path, capsys):
    field = json.dumps({"type": "box_simple", "parts": [
        {"lo": [-0.5, -0.5, -0.5], "hi": [0.0, 0.0, 0.0], "v": [0.0, 0.0, 1.0]}]})
    assert main(["forward", "--field", field, "--n", "2", "--k", "5",
                 "--out", str(tmp_path)]) == 0
    assert "n=2 k=5 -> 150 samples" in capsys.readouterr().out
    samples = tmp_path / "forward_samples.csv"
    assert samples.is_file()

    assert main(["invert", "--samples", str(samples), "--n", "2", "--k", "5",
                 "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "inverted_field.json").read_text())
    assert payload["relative_residual"] < 1e-10
    coeffs = np.array(payload["field"]["coeffs"])
    assert coeffs.shape == (24,)
    assert coeffs[2] == pytest.approx(1.0, abs=1e-8)  # cell (0,0,0), z component
    other = np.delete(coeffs, 2)
    assert np.max(np.abs(other)) < 1e-8


def test_forward_field_from_file(tmp_path):
    fpath = tmp_path / "field.json"
    fpath.write_text(json.dumps({"type": "bump", "a": 0.5}))
    assert main(["forward", "--field", str(fpath), "--n", "2", "--k", "5",
                 "--out", str(tmp_path)]) == 0
    text = (tmp_path / "forward_samples.csv").read_text()
    assert len(text.strip().split("\n")) == 151


def test_forward_empty_field_gives_zero_samples(tmp_path):
    field = json.dumps({"type": "box_simple", "parts": []})
    assert main(["forward", "--field", field, "--n", "2", "--k", "5",
                 "--out", str(tmp_path)]) == 0
    rows = (tmp_path / "forward_samples.csv").read_text().strip().split("\n")[1:]
    assert all(float(r.split(",")[-1]) == 0.0 for r in rows)


def test_forward_bad_field_exits_2(tmp_path, capsys):
    code = main(["forward", "--field", "{not json", "--out", str(tmp_path)])
    assert code == 2
    assert "error:" in capsys.readouterr().err
    # structurally valid JSON, but not a lattice-aligned box at this n
    field = json.dumps({"type": "box_simple", "parts": [
        {"lo": [-0.1, -0.1, -0.1], "hi": [0.2, 0.2, 0.2], "v": [1.0, 0.0, 0.0]}]})
    assert main(["forward", "--field", field, "--n", "2", "--out", str(tmp_path)]) == 2


def test_invert_wrong_sample_count_exits_2(tmp_path, capsys):
    spath = tmp_path / "s.json"
    spath.write_text("[1.0, 2.0, 3.0]")
    code = main(["invert", "--samples", str(spath), "--n", "2", "--k", "5",
                 "--out", str(tmp_path)])
    assert code == 2
    assert "error:" in capsys.readouterr().err


def test_invert_missing_file_exits_2(tmp_path):
    assert main(["invert", "--samples", str(tmp_path / "nope.csv"),
                 "--out", str(tmp_path)]) == 2


def test_invert_regularization_shrinks(tmp_path):
    field = json.dumps({"type": "box_simple", "parts": [
        {"lo": [-0.5, -0.5, -0.5], "hi": [0.0, 0.0, 0.0], "v": [0.0, 0.0, 1.0]}]})
    main(["forward", "--field", field, "--n", "2", "--k", "5", "--out", str(tmp_path)])
    samples = str(tmp_path / "forward_samples.csv")
    norms = {}
    for lam in ("0", "10"):
        main(["invert", "--samples", samples, "--n", "2", "--k", "5",
              "--regularization", lam, "--out", str(tmp_path)])
        payload = json.loads((tmp_path / "inverted_field.json").read_text())
        norms[lam] = payload["coefficient_norm"]
    assert norms["10"] < norms["0"]


def test_config_merge(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"n": 3, "k": 6}))
    field = json.dumps({"type": "bump", "a": 0.5})
    assert main(["forward", "--field", field, "--config", str(cfg),
                 "--out", str(tmp_path)]) == 0
    assert "n=3 k=6" in capsys.readouterr().out
    # explicit flag beats the config file
    assert main(["forward", "--field", field, "--config", str(cfg), "--n", "2",
                 "--out", str(tmp_path)]) == 0
    assert "n=2 k=6" in capsys.readouterr().out


def test_config_unknown_key_exits_2(tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"lattice_size": 3}))
    code = main(["forward", "--field", json.dumps({"type": "bump", "a": 0.5}),
                 "--config", str(cfg), "--out", str(tmp_path)])
    assert code == 2
    assert "unknown keys" in capsys.readouterr().err


def test_sweep_outputs_and_determinism(tmp_path, capsys):
    args = ["stability-sweep", "--n-list", "2,3", "--k", "6"]
    assert main(args + ["--out", str(tmp_path / "run1")]) == 0
    assert main(args + ["--out", str(tmp_path / "run2")]) == 0
    capsys.readouterr()
    first = (tmp_path / "run1" / "sweep.csv").read_bytes()
    second = (tmp_path / "run2" / "sweep.csv").read_bytes()
    assert first == second
    report = json.loads((tmp_path / "run1" / "sweep.json").read_text())
    assert report["config"]["cli"]["command"] == "stability-sweep"
    assert len(report["records"]) == 2
    assert report["records"][0]["wall_ms"] > 0
    assert set(report["fits"]) == {"C_delta", "Cf_a0.5", "Cf_a0.25"}


def test_sweep_plot_files(tmp_path):
    # three levels give the C_delta series enough points for a fit, which
    # unlocks its plot file; a0.25 stays empty below n=4 and gets none
    assert main(["stability-sweep", "--n-list", "2,3,4", "--k", "7",
                 "--bump-a", "0.5", "--out", str(tmp_path)]) == 0
    plot = tmp_path / "sweep_plot_C_delta.csv"
    lines = plot.read_text().strip().split("\n")
    assert lines[0] == "delta,delta_pow_minus_alpha,log_C"
    assert len(lines) == 4
    assert (tmp_path / "sweep_plot_Cf_a0.5.csv").is_file()


def test_sweep_bad_n_list_exits_2(tmp_path, capsys):
    assert main(["stability-sweep", "--n-list", "2,zebra",
                 "--out", str(tmp_path)]) == 2
    assert "--n-list" in capsys.readouterr().err


def test_fit_command(tmp_path, capsys):
    pts = tmp_path / "pts.csv"
    rows = ["delta,C"]
    for d in (0.5, 1.0 / 3.0, 0.25, 0.2):
        rows.append(f"{d},{math.exp(-3.0 + 2.0 * d ** -0.5)}")
    pts.write_text("\n".join(rows) + "\n")
    assert main(["fit", "--points", str(pts), "--out", str(tmp_path)]) == 0
    assert "alpha=0.5" in capsys.readouterr().out
    cells = (tmp_path / "fit.csv").read_text().strip().split("\n")[1].split(",")
    assert float(cells[2]) == pytest.approx(0.5, abs=1e-6)

    assert main(["fit", "--points", str(pts), "--format", "json",
                 "--out", str(tmp_path)]) == 0
    payload = json.loads((tmp_path / "fit.json").read_text())
    assert payload["alpha"] == pytest.approx(0.5, abs=1e-6)
    assert payload["n_points"] == 4


def test_fit_degenerate_exits_2(tmp_path, capsys):
    pts = tmp_path / "two.csv"
    pts.write_text("0.5,2.0\n0.25,3.0\n")
    assert main(["fit", "--points", str(pts), "--out", str(tmp_path)]) == 2
    assert "degenerate" in capsys.readouterr().err


def test_fit_missing_file_exits_2(tmp_path):
    assert main(["fit", "--points", str(tmp_path / "gone.csv"),
                 "--out", str(tmp_path)]) == 2
