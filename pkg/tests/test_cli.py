import json

import numpy as np
import pytest

from srnf_lab.cli import EXIT_CHECK, EXIT_INPUT, EXIT_NUMERIC, EXIT_OK, main
from srnf_lab.io import save_surface
from srnf_lab.surfaces import ellipsoid, unit_sphere


def _load(path):
    return json.loads(path.read_text())


def test_gen_cylinder_writes_pair_and_manifest(tmp_path):
    out = tmp_path / "cyl"
    assert main(["gen", "cylinder", "--r", "2", "--n", "65", "--out", str(out)]) == EXIT_OK
    rep = _load(out / "report.json")
    assert rep["relative_distance"] <= 1e-10 and rep["passed"]
    assert rep["alignment"]["congruent"] is False
    man = _load(out / "run_manifest.json")
    assert man["status"] == "pass" and man["command"] == "gen cylinder"
    assert {"cylinder_id.json", "cylinder_f.json", "cylinder_id.obj", "report.json"} <= set(man["outputs"])


def test_gen_is_deterministic(tmp_path):
    args = ["gen", "paraboloid", "--a", "1", "--b", "4", "--n", "65"]
    assert main(args + ["--out", str(tmp_path / "a")]) == EXIT_OK
    assert main(args + ["--out", str(tmp_path / "b")]) == EXIT_OK
    a = _load(tmp_path / "a" / "run_manifest.json")["outputs"]
    b = _load(tmp_path / "b" / "run_manifest.json")["outputs"]
    assert a == b


def test_paraboloid_pair_deviation(tmp_path):
    out = tmp_path / "par"
    assert main(["gen", "paraboloid", "--a", "1", "--b", "4", "--c", "2", "--d", "2",
                 "--n", "65", "--out", str(out)]) == EXIT_OK
    assert _load(out / "report.json")["max_deviation"] <= 1e-10


def test_empty_rearrangement_gives_identical_files(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps({"flat": {"outer": {"center": [0, 0], "radius": 1},
                                         "inner": [{"center": [-0.3, 0.3], "radius": 0.2}]},
                                "translations": [], "nb": 33}))
    out = tmp_path / "cb"
    assert main(["gen", "chessboard", "--spec", str(spec), "--out", str(out)]) == EXIT_OK
    man = _load(out / "run_manifest.json")["outputs"]
    for k in range(len(list(out.glob("chessboard_id.p*.positions.f64")))):
        assert man[f"chessboard_id.p{k}.positions.f64"] == man[f"chessboard_f.p{k}.positions.f64"]
    assert _load(out / "report.json")["distance"] == 0.0


def test_srnf_and_dist_commands(tmp_path, capsys):
    save_surface(unit_sphere(65), tmp_path / "s.json")
    save_surface(ellipsoid(65), tmp_path / "e.json")
    assert main(["srnf", str(tmp_path / "s.json"), "--out", str(tmp_path / "q")]) == EXIT_OK
    info = _load(tmp_path / "q" / "srnf.json")
    assert info["n_patches"] == 6 and info["max_rel_sq_norm_vs_area_factor"] < 1e-12
    q0 = np.fromfile(tmp_path / "q" / "srnf.p0.f64", dtype="<f8")
    assert q0.size == 65 * 65 * 3
    assert main(["dist", str(tmp_path / "s.json"), str(tmp_path / "e.json"),
                 "--out", str(tmp_path / "d")]) == EXIT_OK
    assert _load(tmp_path / "d" / "report.json")["distance"] > 0.05
    assert main(["dist", str(tmp_path / "s.json"), str(tmp_path / "s.json"), "--no-align",
                 "--out", str(tmp_path / "d0")]) == EXIT_OK
    rep = _load(tmp_path / "d0" / "report.json")
    assert rep["distance"] == 0.0 and rep["alignment"] is None
    man = _load(tmp_path / "d" / "run_manifest.json")
    assert set(man["inputs"]) == {str(tmp_path / "s.json"), str(tmp_path / "e.json")}


def test_dist_rejects_mismatched_grids(tmp_path):
    save_surface(unit_sphere(17), tmp_path / "a.json")
    save_surface(unit_sphere(33), tmp_path / "b.json")
    assert main(["dist", str(tmp_path / "a.json"), str(tmp_path / "b.json"),
                 "--out", str(tmp_path / "d")]) == EXIT_INPUT


def _moser_spec(tmp_path, moves, inner=((-0.3, 0.3, 0.2),)):
    spec = tmp_path / "m.json"
    spec.write_text(json.dumps({
        "flat": {"outer": {"center": [0, 0], "radius": 1},
                 "inner": [{"center": [x, y], "radius": r} for x, y, r in inner]},
        "translations": moves}))
    return spec


def test_moser_zero_moves_gives_identity_certificate(tmp_path):
    spec = _moser_spec(tmp_path, [[0, 0]])
    out = tmp_path / "mo"
    assert main(["moser", "--spec", str(spec), "--out", str(out)]) == EXIT_OK
    cert = _load(out / "certificate.json")
    assert cert["max_detJ_dev"] == 0.0 and cert["collar_dev"] == 0.0
    n = cert["n_nodes"]
    assert np.all(np.fromfile(out / "displacement.f64", dtype="<f8") == 0.0)
    assert np.fromfile(out / "nodes.f64", dtype="<f8").size == 2 * n
    assert np.fromfile(out / "triangles.i64", dtype="<i8").size % 3 == 0


def test_moser_blocked_route_is_a_numeric_failure(tmp_path):
    spec = _moser_spec(tmp_path, [[0.7, 0.0]], inner=((0.0, 0.0, 0.2),))
    assert main(["moser", "--spec", str(spec), "--out", str(tmp_path / "mo")]) == EXIT_NUMERIC


def test_moser_single_move_and_detj_report(tmp_path):
    spec = _moser_spec(tmp_path, [[0.3, 0.0]])
    out = tmp_path / "mo"
    assert main(["moser", "--spec", str(spec), "--out", str(out)]) == EXIT_OK
    cert = _load(out / "certificate.json")
    assert cert["passed"] and cert["max_detJ_dev"] <= 1e-4
    rep = tmp_path / "rep"
    assert main(["report", "--kind", "detj", "--moser-dir", str(out), "--bins", "10",
                 "--out", str(rep)]) == EXIT_OK
    rows = (rep / "detj_histogram.csv").read_text().splitlines()
    assert rows[0] == "lo,hi,count" and len(rows) == 11
    assert sum(int(r.split(",")[2]) for r in rows[1:]) == cert["n_nodes"]


def test_resolution_report(tmp_path):
    assert main(["report", "--out", str(tmp_path)]) == EXIT_OK
    rows = (tmp_path / "distance_vs_resolution.csv").read_text().splitlines()
    assert rows[0] == "family,n,distance,relative" and len(rows) == 9


def test_detj_report_needs_moser_dir(tmp_path):
    assert main(["report", "--kind", "detj", "--out", str(tmp_path)]) == EXIT_INPUT


def test_verify_passes_and_flags_flipped_fixture(tmp_path):
    good, bad = tmp_path / "good.json", tmp_path / "bad.json"
    save_surface(unit_sphere(33), good)
    save_surface(unit_sphere(33).flipped(), bad)
    assert main(["verify", "--battery", "sphere", "--fixture", str(good),
                 "--out", str(tmp_path / "v1")]) == EXIT_OK
    assert main(["verify", "--battery", "sphere", "--fixture", str(bad),
                 "--out", str(tmp_path / "v2")]) == EXIT_CHECK
    card = _load(tmp_path / "v2" / "scorecard.json")
    failed = [c["name"] for c in card["checks"] if not c["passed"]]
    assert failed == ["orientation[fixture]"]


def test_verify_records_seed(tmp_path):
    assert main(["verify", "--battery", "invariance", "--seed", "7",
                 "--out", str(tmp_path)]) == EXIT_OK
    assert _load(tmp_path / "run_manifest.json")["seed"] == 7


@pytest.mark.parametrize("argv", [
    ["bogus"],
    ["gen", "cylinder", "--n", "notanumber"],
    ["moser"],
])
def test_usage_errors_exit_with_input_code(argv, capsys):
    with pytest.raises(SystemExit) as exc:
        main(argv)
    assert exc.value.code == EXIT_INPUT


def test_missing_spec_file_is_an_input_error(tmp_path):
    assert main(["gen", "flip", "--spec", str(tmp_path / "nope.json"),
                 "--out", str(tmp_path)]) == EXIT_INPUT


def test_bad_cylinder_scale_is_an_input_error(tmp_path):
    assert main(["gen", "cylinder", "--r", "-1", "--out", str(tmp_path)]) == EXIT_INPUT
