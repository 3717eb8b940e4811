import csv
import io
import json
import math

import jsonschema
import pytest

from speclab.lab.cli import main
from speclab.lab.config import DEFAULTS, ConfigError, build_domain, load_config
from speclab.lab.manifest import MANIFEST_SCHEMA, RunManifest, Writer
from speclab.reference import disk_spectrum


def write_toml(path, text):
    path.write_text(text)
    return str(path)


def read_csv(path):
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_defaults_and_unknown_section(tmp_path):
    assert load_config() == DEFAULTS
    bad = write_toml(tmp_path / "x.toml", "[bogus]\na = 1\n")
    with pytest.raises(ConfigError, match="bogus"):
        load_config(bad)
    broken = write_toml(tmp_path / "y.toml", "[domain\n")
    with pytest.raises(ConfigError, match="TOML"):
        load_config(broken)


def test_domain_section_replaces_defaults(tmp_path):
    cfg = load_config(write_toml(tmp_path / "r.toml", '[domain]\nfamily = "rectangle"\n'))
    assert cfg["domain"] == {"family": "rectangle"}
    assert build_domain(cfg["domain"]).family == "rectangle"


def test_bad_dumbbell_exits_2(tmp_path, capsys):
    cfg = write_toml(tmp_path / "d.toml", '[domain]\nfamily = "dumbbell"\neps = 0.3\nxi = 0.2\n')
    code, _, err = run(capsys, "spectrum", "--config", cfg, "--out", str(tmp_path / "o"))
    assert code == 2
    assert "eps" in err and "xi" in err
    man = RunManifest.from_json((tmp_path / "o" / "manifest.json").read_text())
    assert man.status == "error"


def test_bad_value_types_exit_2(tmp_path, capsys):
    cfg = write_toml(tmp_path / "d.toml", '[domain]\nfamily = "disk"\nradius = "big"\n')
    assert run(capsys, "spectrum", "--config", cfg, "--out", str(tmp_path / "o"))[0] == 2
    cfg = write_toml(tmp_path / "e.toml", '[domain]\nfamily = "moon"\n')
    assert run(capsys, "spectrum", "--config", cfg, "--out", str(tmp_path / "o"))[0] == 2
    cfg = write_toml(tmp_path / "f.toml", '[nodal]\nindex = 0\n')
    assert run(capsys, "nodal", "--config", cfg, "--out", str(tmp_path / "o"))[0] == 2


def test_spectrum_disk(tmp_path, capsys):
    cfg = write_toml(tmp_path / "d.toml", '[domain]\nfamily = "disk"\nn = 512\n[mesh]\nh = 0.02\n[solve]\nk = 6\n')
    code, out, _ = run(capsys, "spectrum", "--config", cfg, "--out", str(tmp_path / "o"))
    assert code == 0 and "pass" in out
    rows = read_csv(tmp_path / "o" / "results.csv")
    got = sorted(float(r["eigenvalue"]) for r in rows)
    exact = disk_spectrum(1.0, 6).eigenvalues
    assert len(got) == 6
    for g, e in zip(got, exact):
        assert g == pytest.approx(e, rel=0.01)
    assert (tmp_path / "o" / "mesh.svg").read_text().startswith("<svg")


def test_spectrum_rectangle_json_manifest(tmp_path, capsys):
    cfg = write_toml(tmp_path / "r.toml", '[domain]\nfamily = "rectangle"\n[mesh]\nh = 0.03\n[solve]\nk = 4\n')
    code, out, _ = run(capsys, "spectrum", "--config", cfg, "--out", str(tmp_path / "o"), "--json")
    assert code == 0
    man = json.loads(out)
    jsonschema.validate(man, MANIFEST_SCHEMA)
    assert man["outputs"] == ["mesh.svg", "results.csv"]
    for g, e in zip(man["summary"]["eigenvalues"], [2, 5, 5, 8]):
        assert g == pytest.approx(e, rel=0.01)
    on_disk = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert on_disk == man


def test_spectrum_is_reproducible(tmp_path, capsys):
    cfg = write_toml(tmp_path / "r.toml", '[domain]\nfamily = "rectangle"\n[mesh]\nh = 0.1\n[solve]\nk = 4\n')
    for d in ("a", "b"):
        assert run(capsys, "spectrum", "--config", cfg, "--out", str(tmp_path / d))[0] == 0
    for name in ("results.csv", "mesh.svg"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ma = RunManifest.from_json((tmp_path / "a" / "manifest.json").read_text())
    mb = RunManifest.from_json((tmp_path / "b" / "manifest.json").read_text())
    assert ma.stable_dict() == mb.stable_dict()


def test_rerun_from_manifest(tmp_path, capsys):
    cfg = write_toml(tmp_path / "r.toml", '[domain]\nfamily = "rectangle"\na = 2.0\nb = 1.0\n[mesh]\nh = 0.1\n')
    assert run(capsys, "spectrum", "--config", cfg, "--out", str(tmp_path / "a"), "--seed", "7")[0] == 0
    first = tmp_path / "a" / "manifest.json"
    assert run(capsys, "spectrum", "--config", str(first), "--out", str(tmp_path / "b"))[0] == 0
    assert (tmp_path / "a" / "results.csv").read_bytes() == (tmp_path / "b" / "results.csv").read_bytes()
    mb = RunManifest.from_json((tmp_path / "b" / "manifest.json").read_text())
    assert mb.seed == 7 and mb.config["domain"]["a"] == 2.0
    # a manifest only re-runs the command it records
    assert run(capsys, "nodal", "--config", str(first), "--out", str(tmp_path / "c"))[0] == 2


def test_nodal_ellipse(tmp_path, capsys):
    cfg = write_toml(tmp_path / "e.toml", '[domain]\nfamily = "ellipse"\nrho = 0.2\n[mesh]\nh = 0.02\n'
                     '[solve]\nk = 2\n[nodal]\nindex = 2\n')
    code, _, _ = run(capsys, "nodal", "--config", cfg, "--out", str(tmp_path / "o"))
    assert code == 0
    verdict = json.loads((tmp_path / "o" / "payne.json").read_text())
    assert verdict["payne"]["kind"] == "SP"
    assert len(verdict["junctions"]) == 2
    for j in verdict["junctions"]:
        for a in j["angles"]:
            assert a == pytest.approx(math.pi / 2, abs=0.09)
    assert 'stroke="red"' in (tmp_path / "o" / "nodal.svg").read_text()


def test_nodal_hhn_interior_line(tmp_path, capsys):
    cfg = write_toml(tmp_path / "h.toml", '[domain]\nfamily = "hhn"\nN = 16\n[mesh]\nh = 0.03\n[solve]\nk = 2\n')
    assert run(capsys, "nodal", "--config", cfg, "--out", str(tmp_path / "o"))[0] == 0
    verdict = json.loads((tmp_path / "o" / "payne.json").read_text())
    assert verdict["payne"]["kind"] == "NP"
    assert verdict["junctions"] == []
    rows = read_csv(tmp_path / "o" / "results.csv")
    assert rows
    r = max(math.hypot(float(row[a]), float(row[b])) for row in rows for a, b in (("x0", "y0"), ("x1", "y1")))
    assert r < 1.0


def test_nodal_rectangle_domains(tmp_path, capsys):
    cfg = write_toml(tmp_path / "r.toml", '[domain]\nfamily = "rectangle"\n[mesh]\nh = 0.05\n'
                     '[solve]\nk = 4\n[nodal]\nindex = 4\n')
    code, out, _ = run(capsys, "nodal", "--config", cfg, "--out", str(tmp_path / "o"), "--json")
    assert code == 0
    assert json.loads(out)["summary"]["nodal_domains"] == 4


def test_sweep_gap(tmp_path, capsys):
    cfg = write_toml(tmp_path / "g.toml", '[sweep]\nrecipe = "gap"\nrho_list = [0.4, 0.2]\n')
    code, out, _ = run(capsys, "sweep", "--config", cfg, "--out", str(tmp_path / "o"), "--json", "--jobs", "1")
    assert code == 0
    man = json.loads(out)
    jsonschema.validate(man, MANIFEST_SCHEMA)
    assert man["summary"]["above_bound"] and man["summary"]["decreasing_in_rho"]
    assert set(man["outputs"]) == {"gap.svg", "results.csv"}
    rows = read_csv(tmp_path / "o" / "results.csv")
    assert [float(r["rho"]) for r in rows] == [0.4, 0.2]


def test_sweep_rejects_bad_lists(tmp_path, capsys):
    cfg = write_toml(tmp_path / "g.toml", '[sweep]\nrho_list = []\n')
    assert run(capsys, "sweep", "gap", "--config", cfg, "--out", str(tmp_path / "o"))[0] == 2
    cfg = write_toml(tmp_path / "d.toml", '[domain]\nfamily = "dumbbell"\n[sweep]\neps_list = [0.1, 0.5]\n')
    code, _, err = run(capsys, "sweep", "dumbbell", "--config", cfg, "--out", str(tmp_path / "o"))
    assert code == 2 and "eps" in err
    cfg = write_toml(tmp_path / "u.toml", '[sweep]\nrecipe = "nope"\n')
    assert run(capsys, "sweep", "--config", cfg, "--out", str(tmp_path / "o"))[0] == 2


def test_validate_injection_fails_named_check(tmp_path, capsys):
    code, out, _ = run(capsys, "validate", "--only", "1", "--inject-eigen-perturbation", "0.05",
                       "--out", str(tmp_path / "o"))
    assert code == 1
    assert out.splitlines()[0].startswith("FAIL") and "fem-accuracy" in out.splitlines()[0]
    man = RunManifest.from_json((tmp_path / "o" / "manifest.json").read_text())
    jsonschema.validate(man.to_dict(), MANIFEST_SCHEMA)
    assert man.summary["failed"] == [man.checks[0]["name"]]
    assert man.config["validate"] == {"only": [1], "inject": 0.05}
    assert "checks.json" in man.outputs


def test_validate_only_rejects_unknown(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["validate", "--only", "13"])
    assert exc.value.code == 2


def test_writer_records_outputs(tmp_path):
    man = RunManifest("spectrum", {}, "0", 0)
    w = Writer(tmp_path, man)
    w.write("b.txt", "b")
    w.write("a.txt", "a")
    w.write("a.txt", "again")
    w.close()
    assert man.outputs == ["a.txt", "b.txt"]
    assert RunManifest.from_json((tmp_path / "manifest.json").read_text()).outputs == ["a.txt", "b.txt"]
    man.outputs.append("gone.txt")
    with pytest.raises(RuntimeError, match="missing"):
        man.check_invariants(tmp_path)


def test_stable_dict_drops_volatile_fields():
    man = RunManifest("validate", {}, "0", 0, stage_times={"x": 1.0},
                      checks=[{"number": 1, "name": "s", "passed": True, "summary": "", "wall_time": 2.0}])
    d = man.stable_dict()
    assert "created" not in d and "stage_times" not in d
    assert d["checks"] == [{"number": 1, "name": "s", "passed": True, "summary": ""}]
    jsonschema.validate(man.to_dict(), MANIFEST_SCHEMA)
    with pytest.raises(jsonschema.ValidationError):
        jsonschema.validate({**man.to_dict(), "extra": 1}, MANIFEST_SCHEMA)


def test_csv_has_no_wall_times(tmp_path, capsys):
    cfg = write_toml(tmp_path / "g.toml", '[sweep]\nrho_list = [0.4]\n')
    run(capsys, "sweep", "gap", "--config", cfg, "--out", str(tmp_path / "o"))
    header = next(csv.reader(io.StringIO((tmp_path / "o" / "results.csv").read_text())))
    assert not any("time" in h for h in header)
