"""Command-line surface: formats, exit codes, and reproducibility."""

import json

import numpy as np
import pytest

from riccilab import cli


def run(capsys, *argv):
    code = cli.main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def parse_csv(text):
    lines = text.strip().split("\n")
    header = lines[0].split(",")
    rows = [[float(x) for x in line.split(",")] for line in lines[1:]]
    return header, np.array(rows)


# --- happy paths -------------------------------------------------------------


def test_catalog_lists_every_class(capsys):
    code, out, _ = run(capsys, "catalog")
    assert code == 0
    docs = json.loads(out)
    ids = [d["id"] for d in docs]
    assert len(ids) == 23
    nil3 = next(d for d in docs if d["id"] == "nil3")
    np.testing.assert_allclose(nil3["soliton"]["weights"], [2 / 3, 1 / 3, 1 / 3])
    assert nil3["dim"] == 3


def test_curvature_report(capsys):
    code, out, _ = run(capsys, "curvature", "--class", "nil3", "--coeff", "1,1,1")
    assert code == 0
    doc = json.loads(out)
    assert doc["scalar"] == pytest.approx(-0.5)
    assert doc["max_abs_sectional"] == pytest.approx(0.75)


def test_flow_csv_shape_and_precision(capsys):
    code, out, _ = run(
        capsys, "flow", "--class", "nil3", "--init", "1,1,1", "--t0", "0.001", "--t1", "10"
    )
    assert code == 0
    header, rows = parse_csv(out)
    assert header == ["t", "c1", "c2", "c3", "max_abs_K", "t_max_abs_K"]
    assert rows[0, 0] == 0.001
    assert rows[-1, 0] == 10.0
    # every value is printed with enough digits to round-trip exactly
    for token in out.strip().split("\n")[1].split(","):
        assert "%.17g" % float(token) == token


def test_flow_matches_closed_form_commands(capsys):
    code, flow_out, _ = run(
        capsys, "flow", "--class", "nil3", "--init", "2,3,5", "--t0", "1", "--t1", "100"
    )
    assert code == 0
    code, exact_out, _ = run(
        capsys, "closed-form", "--class", "nil3", "--init", "2,3,5", "--t0", "1", "--t1", "100"
    )
    assert code == 0
    _, flow_rows = parse_csv(flow_out)
    _, exact_rows = parse_csv(exact_out)
    np.testing.assert_allclose(flow_rows[:, 0], exact_rows[:, 0], rtol=0.0)
    np.testing.assert_allclose(flow_rows[:, 1:4], exact_rows[:, 1:4], rtol=1e-6)


def test_soliton_check_reports_zero_residual(capsys):
    code, out, _ = run(capsys, "soliton-check", "--class", "sol3")
    assert code == 0
    doc = json.loads(out)
    assert doc["max_abs_residual"] <= 1e-12


def test_rescale_limit_deviations_decrease(capsys):
    code, out, _ = run(
        capsys,
        "rescale-limit", "--class", "sol3", "--init", "2,1,3", "--s-list", "1e3,1e4",
    )
    assert code == 0
    _, rows = parse_csv(out)
    assert rows[1, 1] < rows[0, 1]


def test_fit_command(tmp_path, capsys):
    ts = np.geomspace(1.0, 1e4, 120)
    path = tmp_path / "series.csv"
    lines = ["t,v"] + [f"{t},{5.0 * t**2}" for t in ts]
    path.write_text("\n".join(lines) + "\n")
    code, out, _ = run(capsys, "fit", "--in", str(path), "--column", "v")
    assert code == 0
    doc = json.loads(out)
    assert doc["exponent"] == pytest.approx(2.0, abs=1e-9)
    assert doc["coefficient"] == pytest.approx(5.0, rel=1e-9)


def test_selftest_single_criterion(capsys):
    code, out, _ = run(capsys, "selftest", "--only", "1")
    assert code == 0
    assert "passed 1 of 1" in out


def test_bundle_flow_csv(capsys):
    code, out, _ = run(
        capsys,
        "bundle-flow", "--grid", "16", "--seed", "geodesic", "--t0", "1", "--t1", "1.2",
    )
    assert code == 0
    header, rows = parse_csv(out)
    assert header[:3] == ["t", "energy", "v_tilde"]
    assert rows[-1, 0] == pytest.approx(1.2)


# --- reproducibility ---------------------------------------------------------


def test_reruns_are_byte_identical(tmp_path, capsys):
    outputs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        code = cli.main(
            ["flow", "--class", "nil3", "--init", "1,1,1", "--t0", "0.001",
             "--t1", "10", "--out", str(path)]
        )
        capsys.readouterr()
        assert code == 0
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]


def test_bundle_reruns_are_byte_identical(tmp_path, capsys):
    outputs = []
    for name in ("a.csv", "b.csv"):
        path = tmp_path / name
        code = cli.main(
            ["bundle-flow", "--grid", "16", "--seed", "fourier", "--t0", "1",
             "--t1", "1.1", "--out", str(path)]
        )
        capsys.readouterr()
        assert code == 0
        outputs.append(path.read_bytes())
    assert outputs[0] == outputs[1]


# --- configuration and exit codes --------------------------------------------


def test_config_file_merges_under_flags(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"class": "nil3", "init": "1,1,1", "t0": 0.1, "t1": 50.0}))
    code, out, _ = run(capsys, "flow", "--config", str(cfg), "--t1", "2")
    assert code == 0
    _, rows = parse_csv(out)
    assert rows[0, 0] == pytest.approx(0.1)  # from the file
    assert rows[-1, 0] == pytest.approx(2.0)  # flag wins over the file


def test_unknown_class_is_a_usage_error(capsys):
    code, _, err = run(capsys, "flow", "--class", "s3")
    assert code == 2
    assert "s3" in err


def test_bad_tolerance_in_config_is_a_usage_error(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"class": "nil3", "rtol": -1.0}))
    code, _, _ = run(capsys, "flow", "--config", str(cfg))
    assert code == 2


def test_unknown_config_key_is_a_usage_error(tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"class": "nil3", "riccitol": 1e-9}))
    code, _, err = run(capsys, "flow", "--config", str(cfg))
    assert code == 2
    assert "riccitol" in err


def test_missing_input_is_an_io_error(capsys):
    code, _, _ = run(capsys, "fit", "--in", "/nonexistent/x.csv", "--column", "v")
    assert code == 3


def test_degenerating_flow_exits_one_with_partial_output(capsys):
    code, out, err = run(capsys, "flow", "--class", "a10")
    assert code == 1
    header, rows = parse_csv(out)
    assert len(rows) > 0
    assert rows[-1, 0] < 100.0  # stopped before the default horizon
    assert "degenerate" in err


def test_no_subcommand_is_a_usage_error(capsys):
    assert run(capsys, )[0] == 2


def test_holonomy_shape_must_match_fiber_dim(capsys):
    code, _, _ = run(
        capsys,
        "bundle-flow", "--grid", "16", "--holonomy", "2,1;1,1", "--fiber-dim", "3",
    )
    assert code == 2
