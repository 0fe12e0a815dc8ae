"""Problem-file schema, subcommand dispatch, bundles, and the gallery."""

import json
import os
from pathlib import Path

import pytest

import levichk
from levichk import cli
from levichk import reduction as rd

GALLERY = Path(levichk.__file__).parent / "gallery"

ALL_EXAMPLES = sorted(p.name for p in GALLERY.glob("*.json"))

COMPLIANT = [n for n in ALL_EXAMPLES if "broken" not in n]


def write_problem(tmp_path, doc, name="problem.json"):
    path = tmp_path / name
    path.write_text(json.dumps(doc))
    return str(path)


def minimal_doc(**over):
    doc = {
        "order": 2,
        "dim": 1,
        "horizon": 1.0,
        "roots": [["t"], ["-t"]],
        "lower_order": [{"dt": 0, "dx": [1], "coeff": "-i"}],
        "data": ["exp(i*x1)", "0"],
    }
    doc.update(over)
    return doc


# ---------------------------------------------------------------------------
# schema validation


def test_gallery_is_complete():
    assert ALL_EXAMPLES == [
        "fourth_order_ex44.json",
        "second_order_cos.json",
        "second_order_oleinik.json",
        "second_order_r2.json",
        "second_order_talpha.json",
        "second_order_talpha_shifted.json",
        "second_order_talpha_split.json",
        "third_order_cos.json",
        "third_order_ex33.json",
        "third_order_ex33_broken.json",
    ]


@pytest.mark.parametrize("name", ALL_EXAMPLES)
def test_gallery_loads(name):
    pf = cli.load_problem_file(str(GALLERY / name))
    assert isinstance(pf.spec, rd.ProblemSpec)


@pytest.mark.parametrize("name", ALL_EXAMPLES)
def test_gallery_round_trips(name):
    pf = cli.load_problem_file(str(GALLERY / name))
    doc = cli.serialize_problem(pf)
    pf2 = cli.load_problem_doc(doc)
    assert cli.serialize_problem(pf2) == doc
    assert cli.input_hash(pf2) == cli.input_hash(pf)


def test_load_problem_returns_spec(tmp_path):
    path = write_problem(tmp_path, minimal_doc())
    spec = cli.load_problem(path)
    assert spec.order == 2 and spec.dim == 1


def test_unknown_top_key(tmp_path):
    path = write_problem(tmp_path, minimal_doc(extra=1))
    with pytest.raises(cli.SchemaError, match="unknown key 'extra'"):
        cli.load_problem_file(path)


def test_dx_length_mismatch_names_entry(tmp_path):
    doc = minimal_doc(lower_order=[{"dt": 0, "dx": [1, 0], "coeff": "1"}])
    path = write_problem(tmp_path, doc)
    with pytest.raises(cli.SchemaError, match=r"lower_order\[1\].*dx length 2 != dim 1"):
        cli.load_problem_file(path)


def test_x_dependent_root_rejected(tmp_path):
    doc = minimal_doc(roots=[["t*x1"], ["-t"]])
    path = write_problem(tmp_path, doc)
    with pytest.raises(rd.ProblemSpecError, match="depend on t and parameters only"):
        cli.load_problem_file(path)


def test_duplicate_lower_order(tmp_path):
    doc = minimal_doc(lower_order=[
        {"dt": 0, "dx": [1], "coeff": "1"},
        {"dt": 0, "dx": [1], "coeff": "2"},
    ])
    path = write_problem(tmp_path, doc)
    with pytest.raises(cli.SchemaError, match="duplicate"):
        cli.load_problem_file(path)


def test_expression_error_located(tmp_path):
    doc = minimal_doc(roots=[["t +"], ["-t"]])
    path = write_problem(tmp_path, doc)
    with pytest.raises(cli.SchemaError, match=r"roots\[1\]\[1\]"):
        cli.load_problem_file(path)


def test_wrong_root_count(tmp_path):
    doc = minimal_doc(roots=[["t"]])
    path = write_problem(tmp_path, doc)
    with pytest.raises(cli.SchemaError, match="expected 2 rows"):
        cli.load_problem_file(path)


def test_wrong_data_count(tmp_path):
    doc = minimal_doc(data=["1"])
    path = write_problem(tmp_path, doc)
    with pytest.raises(cli.SchemaError, match="data: expected 2"):
        cli.load_problem_file(path)


def test_unknown_solver_key(tmp_path):
    doc = minimal_doc(solver={"modez": 32})
    path = write_problem(tmp_path, doc)
    with pytest.raises(cli.SchemaError, match="solver: unknown key"):
        cli.load_problem_file(path)


def test_bad_sweep_entries(tmp_path):
    doc = minimal_doc(sweep={"n_list": [16, "x"]})
    path = write_problem(tmp_path, doc)
    with pytest.raises(cli.SchemaError, match="n_list entries"):
        cli.load_problem_file(path)


def test_solver_defaults():
    pf = cli.load_problem_doc(minimal_doc())
    assert pf.solver == cli.SolverOptions()
    assert pf.sweep == cli.SweepOptions()


# ---------------------------------------------------------------------------
# exit codes


def test_check_pass_exit_zero(tmp_path):
    rc = cli.main(["check", str(GALLERY / "third_order_ex33.json"),
                   "--out", str(tmp_path)])
    assert rc == 0


def test_check_fail_exit_one(tmp_path):
    rc = cli.main(["check", str(GALLERY / "third_order_ex33_broken.json"),
                   "--out", str(tmp_path)])
    assert rc == 1


def test_check_inconclusive_exit_two(tmp_path):
    doc = minimal_doc(roots=[["abs(t)"], ["0"]], lower_order=[])
    path = write_problem(tmp_path, doc)
    rc = cli.main(["check", path, "--out", str(tmp_path / "out")])
    assert rc == 2


def test_usage_errors_exit_64(capsys):
    assert cli.main([]) == 64
    assert cli.main(["bogus", "x.json"]) == 64
    assert cli.main(["check"]) == 64
    err = capsys.readouterr().err
    assert "usage" in err


def test_missing_file_exit_three(tmp_path, capsys):
    rc = cli.main(["check", str(tmp_path / "nope.json"), "--out", str(tmp_path)])
    assert rc == 3
    assert "error" in capsys.readouterr().err


def test_invalid_json_exit_three(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{not json")
    rc = cli.main(["check", str(path), "--out", str(tmp_path)])
    assert rc == 3


@pytest.mark.parametrize("name", [n for n in COMPLIANT if n.startswith(("second", "third"))])
def test_compliant_gallery_checks_pass(name, tmp_path):
    rc = cli.main(["check", str(GALLERY / name), "--out", str(tmp_path)])
    assert rc == 0


def test_ex44_checks_pass(tmp_path):
    rc = cli.main(["check", str(GALLERY / "fourth_order_ex44.json"),
                   "--out", str(tmp_path)])
    assert rc == 0


# ---------------------------------------------------------------------------
# artifacts


def test_check_writes_bundle(tmp_path):
    cli.main(["check", str(GALLERY / "third_order_ex33.json"), "--out", str(tmp_path)])
    report = json.loads((tmp_path / "check.json").read_text())
    assert report["main"]["overall"] == "PASS"
    bundle = json.loads((tmp_path / "bundle.json").read_text())
    assert bundle["tool_version"] == levichk.__version__
    assert len(bundle["input_hash"]) == 64
    assert bundle["command"] == "check"
    assert bundle["levi_report"]["main"]["overall"] == "PASS"


def test_solve_outputs(tmp_path):
    rc = cli.main(["solve", str(GALLERY / "second_order_oleinik.json"),
                   "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "solve.csv").read_text().splitlines()
    assert lines[0] == "t,norm_c1,norm_c2,aniso"
    assert len(lines) > 2
    assert (tmp_path / "solve.png").stat().st_size > 0
    bundle = json.loads((tmp_path / "bundle.json").read_text())
    assert bundle["run_csv"] == "solve.csv"


def test_sweep_outputs(tmp_path):
    rc = cli.main(["sweep", str(GALLERY / "second_order_r2.json"),
                   "--out", str(tmp_path)])
    assert rc == 0
    lines = (tmp_path / "sweep.csv").read_text().splitlines()
    assert lines[0] == "N,rho,fitted_q"
    assert len(lines) == 4
    assert (tmp_path / "sweep.png").stat().st_size > 0


def test_schur_prints_matrices(tmp_path, capsys):
    rc = cli.main(["schur", str(GALLERY / "third_order_ex33.json"),
                   "--out", str(tmp_path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "T:" in out and "Tinv:" in out and "J:" in out
    payload = json.loads((tmp_path / "schur.json").read_text())
    assert len(payload["T"]) == 3
    # unitriangular: unit diagonal, zero above it
    for i in range(3):
        assert payload["T"][i][i] == "(1.0)*xi1^0*<xi>^(0)"
        for j in range(i + 1, 3):
            assert payload["T"][i][j] == "0"
    # J carries the roots on the diagonal and the weight on the superdiagonal
    assert payload["J"][1][1] == "(t)*xi1^1*<xi>^(0)"
    assert payload["J"][0][1] == "(1.0)*xi1^0*<xi>^(1)"


def test_verify_outputs(tmp_path, capsys):
    rc = cli.main(["verify", str(GALLERY / "second_order_oleinik.json"),
                   "--out", str(tmp_path), "--seed", "3"])
    assert rc == 0
    reports = json.loads((tmp_path / "verify.json").read_text())
    assert [r["name"] for r in reports] == [
        "closed_form_T",
        "omega_enumeration",
        "schur_residual",
        "E_finite_difference",
        "companion_eigenvalues",
    ]
    assert all(r["seed"] == 3 for r in reports)
    out = capsys.readouterr().out
    assert out.count("PASS") == 5


def test_json_flag_emits_json(tmp_path, capsys):
    rc = cli.main(["check", str(GALLERY / "second_order_oleinik.json"),
                   "--out", str(tmp_path), "--json"])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["main"]["overall"] == "PASS"
    assert payload["oleinik"]["applicable"] is True
    assert payload["oleinik"]["feasible"] is False


def test_reports_deterministic(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    for out in (a, b):
        rc = cli.main(["verify", str(GALLERY / "second_order_cos.json"),
                       "--out", str(out), "--seed", "11"])
        assert rc == 0
    assert (a / "verify.json").read_bytes() == (b / "verify.json").read_bytes()
    assert (a / "bundle.json").read_bytes() == (b / "bundle.json").read_bytes()


def test_out_env_default(tmp_path, monkeypatch, capsys):
    monkeypatch.setenv("LEVICHK_OUT", str(tmp_path / "envout"))
    rc = cli.main(["check", str(GALLERY / "second_order_oleinik.json")])
    assert rc == 0
    assert (tmp_path / "envout" / "check.json").exists()


def test_input_hash_ignores_formatting(tmp_path):
    doc = minimal_doc()
    p1 = write_problem(tmp_path, doc, "a.json")
    path2 = tmp_path / "b.json"
    path2.write_text(json.dumps(doc, indent=4, sort_keys=True))
    h1 = cli.input_hash(cli.load_problem_file(p1))
    h2 = cli.input_hash(cli.load_problem_file(str(path2)))
    assert h1 == h2
