"""Script runner: transcripts, expectations, and CLI exit codes."""

import pytest

from caac.cli import main
from caac.context import load_context
from caac.enforcement import EnforcementPoint
from caac.errors import PolicyFileError
from caac.policy import load_store
from caac.scenario import run_scenario


@pytest.fixture
def ep(healthcare_policies, healthcare_context):
    return EnforcementPoint(load_store(healthcare_policies),
                            load_context(healthcare_context))


def test_scene1_matches_pinned_transcript(ep, fixtures_dir):
    script = (fixtures_dir / "scene1.script").read_text(encoding="utf-8")
    expected = (fixtures_dir / "scene1.expected").read_text(encoding="utf-8")
    result = run_scenario(ep, script)
    assert result.ok
    assert result.text == expected


def test_scene2_matches_pinned_transcript(ep, fixtures_dir):
    script = (fixtures_dir / "scene2.script").read_text(encoding="utf-8")
    expected = (fixtures_dir / "scene2.expected").read_text(encoding="utf-8")
    result = run_scenario(ep, script)
    assert result.ok
    assert result.text == expected


def test_empty_script_empty_transcript(ep):
    result = run_scenario(ep, "# nothing here\n\n")
    assert result.transcript == ()
    assert result.ok
    assert result.text == ""


def test_failed_expectation_flags_run(ep):
    result = run_scenario(ep, "REQ Jane01 EMR write\nEXPECT Denied\n")
    assert not result.ok
    assert result.transcript[-1] == "EXPECT Denied -> FAIL (got Granted)"


def test_numeric_and_list_values(ep):
    result = run_scenario(
        ep,
        'CTX Bob01 heartRate 72\nCTX Mary00X assignedPatients ["Amy02"]\n')
    assert result.ok
    snap = ep.repository.snapshot()
    assert snap.get_fact("Bob01", "heartRate") == 72
    assert snap.get_fact("Mary00X", "assignedPatients") == ("Amy02",)


def test_malformed_lines_report_line_numbers(ep):
    with pytest.raises(PolicyFileError) as err:
        run_scenario(ep, "REQ Jane01 EMR\n")
    assert err.value.line == 1
    with pytest.raises(PolicyFileError):
        run_scenario(ep, "EXPECT Granted\n")
    with pytest.raises(PolicyFileError):
        run_scenario(ep, "FROB x y z\n")


class TestCli:
    def test_scenario_exit_codes(self, fixtures_dir, capsys):
        base = [
            "scenario",
            "--policies", str(fixtures_dir / "healthcare_policies.json"),
            "--context", str(fixtures_dir / "healthcare_context.json"),
            str(fixtures_dir / "scene1.script"),
        ]
        assert main(base + ["--expected",
                            str(fixtures_dir / "scene1.expected")]) == 0
        out = capsys.readouterr().out
        assert out == (fixtures_dir / "scene1.expected").read_text()
        # A wrong expected file flips the exit code.
        assert main(base + ["--expected",
                            str(fixtures_dir / "scene2.expected")]) == 1

    def test_validate(self, fixtures_dir, capsys):
        assert main([
            "validate",
            "--policies", str(fixtures_dir / "healthcare_policies.json"),
            "--context", str(fixtures_dir / "healthcare_context.json"),
        ]) == 0
        assert "OK" in capsys.readouterr().out

    def test_validate_failure(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text('{"users": []', encoding="utf-8")
        assert main(["validate", "--policies", str(bad)]) == 1
        assert "error" in capsys.readouterr().err

    def test_query_csv(self, fixtures_dir, tmp_path, capsys):
        assert main([
            "query",
            "--policies", str(fixtures_dir / "healthcare_policies.json"),
            "--context", str(fixtures_dir / "healthcare_context.json"),
            "--user", "Jane01",
        ]) == 0
        out = capsys.readouterr().out
        assert out.splitlines()[0] == "user,role,action,decision"
        assert "Jane01,ED00X,write,Granted" in out
