import csv
import io
import json
import xml.etree.ElementTree as ET

import pytest

from conftest import make_specs
from svbias.cli import main
from svbias.report import load_report
from svbias.synth import generate
from svbias.trials import write_metadata, write_trials

SVG = "{http://www.w3.org/2000/svg}"


def run(*argv):
    out = io.StringIO()
    code = main([str(a) for a in argv], out=out)
    return code, out.getvalue()


def audit_args(scores, metadata, out_dir, *extra):
    return ("audit", "--scores", scores, "--metadata", metadata, "--attributes", "nationality,gender",
            "--output-dir", out_dir, *extra)


def test_audit_writes_consistent_artifacts(two_group_files, tmp_path):
    scores, metadata = two_group_files
    out = tmp_path / "run"
    code, text = run(*audit_args(scores, metadata, out))
    assert code == 0
    assert "min C_det" in text and "EER" in text and "worst" in text
    for name in ("report.json", "report.csv", "det.svg", "composition.csv", "det/overall.csv",
                 "det/usa_m.csv", "det/india_f.csv"):
        assert (out / name).is_file(), name
    assert not [p for p in out.iterdir() if p.name.startswith(".svbias-staging")]

    data = json.loads((out / "report.json").read_text())
    rows = list(csv.DictReader((out / "report.csv").open()))
    assert [r["subgroup"] for r in rows] == [s["subgroup"] for s in data["subgroups"]]
    for r, s in zip(rows, data["subgroups"]):
        assert float(r["cdet_at_overall"]) == pytest.approx(s["at_overall_min"]["cost"], rel=1e-8)
        assert float(r["cdet_at_own_min"]) == pytest.approx(s["at_own_min"]["cost"], rel=1e-8)
        assert float(r["subgroup_bias"]) == pytest.approx(s["subgroup_bias"], rel=1e-8)
        assert int(r["n_target"]) == s["n_target"]
    assert list(rows[0]) == ["subgroup", "n_speakers", "n_target", "n_nontarget", "fpr", "fnr",
                             "cdet_at_overall", "cdet_at_own_min", "subgroup_bias", "threshold_bias",
                             "fpr_ratio", "fnr_ratio", "low_support"]
    root = ET.parse(out / "det.svg").getroot()
    series = [g.get("id") for g in root.iter(f"{SVG}g") if (g.get("id") or "").startswith("series-")]
    assert len(series) == 3

    rep = load_report(out / "report.json")
    assert rep.attributes == ("nationality", "gender")
    assert [r.key.label for r in rep.subgroups] == [s["subgroup"] for s in data["subgroups"]]


def test_audit_is_byte_deterministic(two_group_files, tmp_path):
    scores, metadata = two_group_files
    a, b = tmp_path / "a", tmp_path / "b"
    assert run(*audit_args(scores, metadata, a))[0] == 0
    assert run(*audit_args(scores, metadata, b, "--jobs", "8"))[0] == 0
    files_a = sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file())
    files_b = sorted(p.relative_to(b) for p in b.rglob("*") if p.is_file())
    assert files_a == files_b
    for rel in files_a:
        assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


def test_formats_subset(two_group_files, tmp_path):
    scores, metadata = two_group_files
    out = tmp_path / "run"
    assert run(*audit_args(scores, metadata, out, "--formats", "json"))[0] == 0
    assert sorted(p.name for p in out.iterdir()) == ["report.json"]


def test_config_file_and_flag_precedence(two_group_files, tmp_path):
    scores, metadata = two_group_files
    cfg = tmp_path / "audit.cfg"
    cfg.write_text(f"scores = {scores}\nmetadata = {metadata}\nattributes = nationality,gender\n"
                   "p-target = 0.5\n# comment\nformats = json\n")
    out = tmp_path / "run"
    assert run("audit", "--config", cfg, "--output-dir", out, "--p-target", "0.01")[0] == 0
    data = json.loads((out / "report.json").read_text())
    assert data["config"]["p_target"] == 0.01
    out2 = tmp_path / "run2"
    assert run("audit", "--config", cfg, "--output-dir", out2)[0] == 0
    assert json.loads((out2 / "report.json").read_text())["config"]["p_target"] == 0.5


def test_output_dir_from_environment(two_group_files, tmp_path, monkeypatch):
    scores, metadata = two_group_files
    monkeypatch.setenv("SVBIAS_OUTPUT_DIR", str(tmp_path / "envout"))
    code, _ = run("audit", "--scores", scores, "--metadata", metadata, "--attributes", "gender", "--formats", "csv")
    assert code == 0
    assert (tmp_path / "envout" / "report.csv").is_file()


def test_exit_codes(two_group_files, tmp_path):
    scores, metadata = two_group_files
    bad = tmp_path / "bad.txt"
    bad.write_text("1 a/1 b/1 0.5\n0 a/2 b/2 oops\n")
    assert run(*audit_args(bad, metadata, tmp_path / "o1"))[0] == 2
    assert not (tmp_path / "o1").exists()
    assert run(*audit_args(tmp_path / "missing.txt", metadata, tmp_path / "o2"))[0] == 2
    one_label = tmp_path / "one.txt"
    one_label.write_text("1 usa-m-s000/x/1 usa-m-s001/x/2 0.5\n")
    assert run(*audit_args(one_label, metadata, tmp_path / "o3"))[0] == 3
    assert not (tmp_path / "o3").exists()
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert run(*audit_args(scores, metadata, blocker / "sub"))[0] == 4


def test_error_message_names_the_line(two_group_files, tmp_path, capsys):
    _, metadata = two_group_files
    bad = tmp_path / "bad.txt"
    bad.write_text("1 a/1 b/1 0.5\n0 a/2 b/2 oops\n")
    main(list(map(str, audit_args(bad, metadata, tmp_path / "o"))), out=io.StringIO())
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and ":2:" in err[0] and "oops" in err[0]


def _write_run(tmp_path, name, params, attrs=("nationality", "gender")):
    trials, meta = generate(make_specs(params, n_target=500, n_nontarget=500))
    d = tmp_path / name
    d.mkdir()
    write_trials(trials.records, d / "trials.txt")
    write_metadata(meta, d / "meta.csv", list(attrs))
    out = d / "out"
    code, _ = run("audit", "--scores", d / "trials.txt", "--metadata", d / "meta.csv",
                  "--attributes", ",".join(attrs), "--output-dir", out)
    assert code == 0
    return out


def test_compare_self_and_degraded(tmp_path):
    a = _write_run(tmp_path, "a", [("usa", "m", 2.0), ("uk", "f", 1.8), ("india", "f", 1.9)])
    b = _write_run(tmp_path, "b", [("usa", "m", 2.0), ("uk", "f", 1.8), ("india", "f", 0.8)])
    out = tmp_path / "cmp_self"
    code, text = run("compare", a, a / "report.json", "--output-dir", out)
    assert code == 0
    rows = list(csv.DictReader((out / "compare.csv").open()))
    assert all(r["bias_a"] == r["bias_b"] for r in rows)
    assert (out / "compare.svg").is_file()

    out = tmp_path / "cmp"
    code, text = run("compare", a, b, "--output-dir", out)
    assert code == 0
    rows = {r["subgroup"]: r for r in csv.DictReader((out / "compare.csv").open())}
    assert float(rows["india_f"]["bias_b"]) > float(rows["india_f"]["bias_a"])


def test_compare_schema_mismatch(tmp_path, capsys):
    a = _write_run(tmp_path, "a", [("usa", "m", 2.0)])
    b = _write_run(tmp_path, "b", [("usa", "m", 2.0)], attrs=("gender",))
    code, _ = run("compare", a, b, "--output-dir", tmp_path / "cmp")
    assert code == 3
    err = capsys.readouterr().err
    assert "nationality, gender" in err and "[gender]" in err


def test_synth_then_audit(tmp_path):
    spec = tmp_path / "spec.json"
    spec.write_text(json.dumps([
        {"key": {"nationality": "usa", "gender": "m"}, "target_mean": 2, "target_sd": 1, "nontarget_mean": 0,
         "nontarget_sd": 1, "n_target": 300, "n_nontarget": 300, "seed": 1},
        {"key": {"nationality": "uk", "gender": "f"}, "target_mean": 1, "target_sd": 1, "nontarget_mean": 0,
         "nontarget_sd": 1, "n_target": 300, "n_nontarget": 300, "seed": 2},
    ]))
    code, text = run("synth", spec, "--output-dir", tmp_path / "syn")
    assert code == 0 and "1200 trials" in text
    code, _ = run(*audit_args(tmp_path / "syn" / "trials.txt", tmp_path / "syn" / "metadata.csv", tmp_path / "out"))
    assert code == 0


def test_composition_command(two_group_files, tmp_path):
    scores, metadata = two_group_files
    code, text = run("composition", "--scores", scores, "--metadata", metadata, "--attributes", "gender,nationality")
    assert code == 0
    assert "attribute,value,n_speakers" in text
    assert "top gender" in text
    code, _ = run("composition", "--scores", scores, "--metadata", metadata, "--attributes", "gender",
                  "--output-dir", tmp_path / "c")
    assert (tmp_path / "c" / "composition.csv").is_file()
