from __future__ import annotations

import io
import shutil
import subprocess
import sys

import pytest
import yaml

from vslice import cli, simulator
from vslice.documents import dump_template, load_template
from vslice.errors import InvariantViolation


def call(*argv):
    buf = io.StringIO()
    code = cli.main([str(a) for a in argv], buf)
    return code, buf.getvalue()


def test_validate_bundled_templates(data):
    code, text = call("validate", data / "templates")
    assert code == cli.OK
    assert text.count(": ok") == 7


def test_validate_catalogue_document(data):
    code, text = call("validate", data / "catalogue.yaml")
    assert code == cli.OK and "ok (" in text


def test_validate_empty_file(tmp_path):
    p = tmp_path / "empty.yaml"
    p.write_text("")
    assert call("validate", p)[0] == cli.INPUT


def test_validate_missing_mandatory_field(tmp_path, data):
    tpl = load_template(data / "templates" / "us-urllc.yaml").without("Latency")
    p = tmp_path / "t.yaml"
    p.write_text(dump_template(tpl))
    code, text = call("validate", p)
    assert code == cli.DOMAIN
    lines = text.strip().splitlines()
    assert len(lines) == 1 and "Latency" in lines[0] and "missing-mandatory" in lines[0]


def test_run_writes_report_and_logs(tmp_path, data):
    code, text = call("run", data / "scenario.yaml", "--mode", "us", "--out", tmp_path)
    assert code == cli.OK
    rep = yaml.safe_load((tmp_path / "report-us.yaml").read_text())
    assert rep["slices"]["us_nsi"] == 3
    assert (tmp_path / "events-us.log").read_text().startswith('{')
    assert (tmp_path / "northbound-us.log").exists()
    assert "digest" in text


def test_run_bad_path(tmp_path):
    assert call("run", tmp_path / "missing.yaml", "--out", tmp_path)[0] == cli.INPUT


@pytest.mark.parametrize("argv", [["run"], ["frobnicate"], ["run", "x.yaml", "--seed", "-1"],
                                  ["run", "x.yaml", "--mode", "both"]])
def test_bad_arguments(argv, monkeypatch):
    monkeypatch.delenv(cli.ENV_SCENARIO, raising=False)
    assert call(*argv)[0] == cli.INPUT


def test_seed_override_changes_digest(tmp_path, data):
    _, a = call("run", data / "scenario.yaml", "--out", tmp_path / "a", "--format", "machine")
    _, b = call("run", data / "scenario.yaml", "--out", tmp_path / "b", "--format", "machine", "--seed", "99")
    ra, rb = yaml.safe_load(a), yaml.safe_load(b)
    assert rb["seed"] == 99
    assert ra["digest"] != rb["digest"]


def test_run_is_byte_deterministic(tmp_path, data):
    for d in ("a", "b"):
        assert call("run", data / "scenario.yaml", "--mode", "gn", "--out", tmp_path / d)[0] == cli.OK
    for name in ("report-gn.yaml", "report-gn.txt", "events-gn.log", "northbound-gn.log"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_compare_sla_counts(tmp_path, data):
    code, text = call("compare", data / "scenario.yaml", "--out", tmp_path)
    assert code == cli.OK
    rows = {r["metric"]: r for r in yaml.safe_load((tmp_path / "compare.yaml").read_text())["rows"]}
    assert (rows["sla_count"]["us"], rows["sla_count"]["gn"]) == (3, 1)
    assert (tmp_path / "compare.txt").read_text() == text


def test_compare_tight_divergence(tmp_path, data):
    code, text = call("compare", data / "scenario-tight.yaml", "--out", tmp_path)
    assert code == cli.OK
    (line,) = [ln for ln in text.splitlines() if ln.startswith("partial_admissions")]
    assert "DIVERGENT partial-vs-atomic admission" in line


def test_scenario_from_environment(tmp_path, data, monkeypatch):
    monkeypatch.setenv(cli.ENV_SCENARIO, str(data / "scenario-single.yaml"))
    monkeypatch.setenv(cli.ENV_OUT, str(tmp_path))
    assert call("run", "--mode", "gn")[0] == cli.OK
    assert (tmp_path / "report-gn.yaml").exists()


def test_invariant_violation_exit_code(tmp_path, data, monkeypatch):
    def broken(self):
        raise InvariantViolation("forced")

    monkeypatch.setattr(simulator.World, "check_invariants", broken)
    assert call("run", data / "scenario.yaml", "--out", tmp_path)[0] == cli.INVARIANT


def test_catalogue_subcommands(tmp_path, data):
    cat = tmp_path / "cat.yaml"
    assert call("catalogue", "--catalogue", cat, "init")[0] == cli.OK
    code, text = call("catalogue", "--catalogue", cat, "add", data / "templates")
    assert code == cli.OK and text.count("added") == 7
    code, text = call("catalogue", "--catalogue", cat, "list")
    assert len(text.splitlines()) == 7
    assert any(ln.startswith("v2x-gn\t") for ln in text.splitlines())
    assert call("catalogue", "--catalogue", cat, "check")[0] == cli.OK
    assert call("catalogue", "--catalogue", cat, "remove", "v2x-gn.infotainment")[0] == cli.DOMAIN
    assert call("catalogue", "--catalogue", cat, "remove", "v2x-gn.infotainment", "--force")[0] == cli.OK
    code, text = call("catalogue", "--catalogue", cat, "check")
    assert code == cli.DOMAIN and "v2x-gn.infotainment" in text
    assert call("catalogue", "--catalogue", cat, "add", data / "templates" / "us-urllc.yaml")[0] == cli.DOMAIN


def test_catalogue_missing_file(tmp_path):
    assert call("catalogue", "--catalogue", tmp_path / "nope.yaml", "list")[0] == cli.INPUT


@pytest.mark.skipif(shutil.which("vslice") is None, reason="console script not installed")
def test_console_script(data):
    proc = subprocess.run(["vslice", "validate", str(data / "templates")], capture_output=True, text=True)
    assert proc.returncode == 0


def test_module_entry_point(data):
    proc = subprocess.run([sys.executable, "-m", "vslice.cli", "validate", str(data / "templates" / "gn.yaml")],
                          capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
