import json

import numpy as np
import pytest

from symmin.cli import ExperimentConfig, main, read_config, run
from symmin.errors import FieldIOError, FieldParseError, InvalidParameter
from symmin.field import make_grid, random_field
from symmin.io import export_field, format_field, import_field, parse_field, pgm_bytes, read_pgm
from symmin.field import GridFunction


def test_text_round_trip_bit_exact(tmp_path, disk33):
    u = random_field(disk33, 12, 3)
    path = export_field(u, tmp_path / "u.txt")
    v = import_field(path)
    assert np.array_equal(v.values, u.values)
    assert np.array_equal(v.grid.mask, disk33.mask)
    assert (v.grid.hx, v.grid.hy) == (disk33.hx, disk33.hy)


def test_nan_tokens_exactly_outside_mask(disk33):
    rows = format_field(random_field(disk33, 0)).splitlines()[1:]
    tokens = np.array([r.split() for r in rows])
    assert np.array_equal(tokens == "nan", ~disk33.mask)


def test_header_example():
    u = parse_field("3 1 1.0 1.0\n0 nan 0\n")
    assert u.grid.dim == 1 and u.grid.mask.tolist() == [[True, False, True]]


def test_parse_errors_name_line_and_count():
    with pytest.raises(FieldParseError, match=r"line 3: expected 9 values \(3 x 3\), found 4"):
        parse_field("3 3 1.0 1.0\n0 0 0\n0\n")
    with pytest.raises(FieldParseError, match="line 1"):
        parse_field("3 3 1.0\n")
    with pytest.raises(FieldParseError, match="line 2"):
        parse_field("2 1 1.0 1.0\n0 abc\n")


def test_pgm(tmp_path, square9):
    data = pgm_bytes(GridFunction.zeros(square9))
    assert data.startswith(b"P5\n9 9\n65535\n")
    assert np.all(read_pgm(data) == 32768)
    disk = make_grid("disk", 17)
    img = read_pgm(pgm_bytes(random_field(disk, 1)))
    assert np.all(img[::-1][~disk.mask] == 0)
    export_field(random_field(disk, 1), tmp_path / "u.pgm", format="pgm")


def test_io_failures(tmp_path, square9):
    blocker = tmp_path / "file"
    blocker.write_text("x")
    with pytest.raises(FieldIOError):
        export_field(GridFunction.zeros(square9), blocker / "u.txt")
    with pytest.raises(FieldIOError):
        import_field(tmp_path / "missing.txt")


def run_cli(tmp_path, *args):
    return main(list(args) + ["--out", str(tmp_path / "r")])


def load(tmp_path, suffix):
    return json.loads((tmp_path / f"r_{suffix}.json").read_text())


def test_verify_suite_square_d4(tmp_path):
    assert run_cli(tmp_path, "verify-suite", "--resolution", "17", "--samples", "5") == 0
    report = load(tmp_path, "verify")
    assert report["passed"] and all(c["passed"] for c in report["checks"])


def test_verify_suite_interpolated_group(tmp_path):
    code = run_cli(tmp_path, "verify-suite", "--domain", "disk", "--group", "so2:8", "--resolution", "13",
                   "--functional", "plaplace:p=3", "--samples", "3")
    assert code == 0
    names = {c["name"]: c for c in load(tmp_path, "verify")["checks"]}
    assert names["average.idempotence"]["note"] == "interpolant reading"
    assert "energy.invariance[plaplace:p=3,eps=1e-08 f=linear:1]" not in names


def test_verify_suite_fails_on_violation(tmp_path):
    code = run_cli(tmp_path, "verify-suite", "--resolution", "9", "--group", "cyclic:8")
    assert code == 3


def test_minimize_c8_on_square_exits_3(tmp_path, capsys):
    assert run_cli(tmp_path, "minimize", "--group", "cyclic:8", "--resolution", "9") == 3
    assert "(-1.0, -1.0)" in capsys.readouterr().err


def test_bad_functional_exits_2(tmp_path):
    assert run_cli(tmp_path, "minimize", "--functional", "plaplace:p=0.5") == 2
    with pytest.raises(SystemExit) as info:
        main(["no-such-kind"])
    assert info.value.code == 2


def test_divergence_exits_4(tmp_path):
    assert run_cli(tmp_path, "minimize", "--resolution", "9", "--energy-floor", "10") == 4


def test_minimize_outputs_and_reproducibility(tmp_path):
    args = ["minimize", "--resolution", "9", "--functional", "plaplace:p=3",
            "--nonlinearity", "quadratic:1,0.5", "--seed", "2"]
    for sub in ("a", "b"):
        (tmp_path / sub).mkdir()
        assert main(args + ["--out", str(tmp_path / sub / "m")]) == 0
    for name in ("m_u_raw.txt", "m_u_avg.txt", "m_u_polished.txt",
                 "m_history_raw.csv", "m_history_polished.csv"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    assert (tmp_path / "a" / "m_history_raw.csv").read_text().startswith("iteration,energy,residual\n")
    sa, sb = (json.loads((tmp_path / s / "m_summary.json").read_text()) for s in "ab")
    for s in (sa, sb):
        s.pop("timestamp")
        s["config"].pop("out")
    assert sa == sb
    assert sa["polished"]["energy"] <= sa["energy_avg"] + 1e-14


def test_average_from_file_and_pgm(tmp_path):
    u = random_field(make_grid("square", 9), 1)
    src = export_field(u, tmp_path / "in.txt")
    assert run_cli(tmp_path, "average", "--input", str(src), "--pgm") == 0
    report = load(tmp_path, "report")
    for key in ("jensen_gap", "invariance_residual", "norm_bound_satisfied", "subgradient_min_gap", "timestamp"):
        assert key in report
    assert import_field(tmp_path / "r_avg.txt").grid.nx == 9
    assert (tmp_path / "r_avg.pgm").exists()
    assert run_cli(tmp_path, "average", "--input", str(tmp_path / "nope.txt")) == 5


def test_probe_subcommands(tmp_path):
    assert run_cli(tmp_path, "probe-meanvalue", "--resolution", "9") == 0
    assert load(tmp_path, "probe")["results"]["distance"] > 0
    assert run_cli(tmp_path, "probe-polyconvex", "--resolution", "17") == 0
    assert load(tmp_path, "probe")["results"]["gap"] == pytest.approx(25.68381090528559, rel=1e-12)
    code = run_cli(tmp_path, "probe-continuity", "--domain", "disk", "--group", "so2:8", "--resolution", "17")
    assert code == 0
    results = load(tmp_path, "probe")["results"]
    assert results["refined_nodes"] == 16 and results["c_v"] > 0


def test_config_file_with_overrides(tmp_path):
    cfg = tmp_path / "exp.cfg"
    cfg.write_text("# demo\nkind = probe-polyconvex\nresolution = 9\nmax-iters = 10\n")
    assert read_config(cfg) == {"kind": "probe-polyconvex", "resolution": 9, "max_iters": 10}
    assert main(["run", "--config", str(cfg), "--resolution", "17", "--out", str(tmp_path / "r")]) == 0
    assert load(tmp_path, "probe")["inputs"]["config"]["resolution"] == 17
    cfg.write_text("colour = blue\n")
    assert main(["run", "--config", str(cfg)]) == 2
    with pytest.raises(InvalidParameter):
        run(ExperimentConfig(kind="minimize", group="torus:3"))
