"""End-to-end command-line behavior, exit codes, and determinism."""

import json
import subprocess
import sys

import pytest

from conftest import FIXTURES


def run_cli(*args, cwd=None):
    return subprocess.run(
        [sys.executable, "-m", "frobenius.cli", *args],
        capture_output=True,
        text=True,
        cwd=cwd,
    )


class TestAnalyze:
    def test_json_report_dimension(self):
        result = run_cli("analyze", str(FIXTURES / "ex_3_2.dsys"), "--json")
        assert result.returncode == 0
        payload = json.loads(result.stdout)
        assert payload["verdict"] == {"solvable": True}
        assert payload["dimension"] == 3

    def test_human_readable_default(self):
        result = run_cli("analyze", str(FIXTURES / "ex_1_7.dsys"))
        assert result.returncode == 0
        assert "solvable: no" in result.stdout
        assert "defect: 1" in result.stdout

    def test_missing_file_is_usage_error(self):
        result = run_cli("analyze", "no_such_file.dsys")
        assert result.returncode == 2
        assert "error" in result.stderr

    def test_malformed_input_is_usage_error(self, tmp_path):
        bad = tmp_path / "bad.dsys"
        bad.write_text("kind: td\nindep: t1\ndep: x1\neq x1: ((\n")
        result = run_cli("analyze", str(bad))
        assert result.returncode == 2


class TestVerify:
    def test_valid_integral_exits_zero(self):
        result = run_cli(
            "verify",
            str(FIXTURES / "ex_4_6.dsys"),
            "--integral",
            "x*y^2*z^3",
            "--expect-valid",
        )
        assert result.returncode == 0
        assert "valid" in result.stdout

    def test_invalid_integral_fails_expectation(self):
        result = run_cli(
            "verify",
            str(FIXTURES / "ex_4_6.dsys"),
            "--integral",
            "x",
            "--expect-valid",
        )
        assert result.returncode == 1

    def test_invalid_without_expectation_reports_only(self):
        result = run_cli(
            "verify", str(FIXTURES / "ex_4_6.dsys"), "--integral", "x"
        )
        assert result.returncode == 0
        assert "invalid" in result.stdout

    def test_multipliers_in_json(self):
        result = run_cli(
            "verify",
            str(FIXTURES / "ex_4_6.dsys"),
            "--integral",
            "x*y^2*z^3",
            "--json",
        )
        payload = json.loads(result.stdout)
        assert payload["integrals"][0]["multipliers"] == ["y*z^2"]


class TestConvert:
    def test_pfaff_to_td_with_pivots(self):
        result = run_cli(
            "convert",
            str(FIXTURES / "ex_4_8.dsys"),
            "--to",
            "td",
            "--pivots",
            "x1,x2",
        )
        assert result.returncode == 0
        assert "eq x1: -3/2*x3/x1 | -3/2*x4/x1" in result.stdout
        assert "eq x2: -1/2*x3/x2 | -1/2*x4/x2" in result.stdout

    def test_td_defect_reduction(self):
        result = run_cli(
            "convert", str(FIXTURES / "ex_1_7.dsys"), "--to", "td"
        )
        assert result.returncode == 0
        assert "indep: t1 t2 x2" in result.stdout
        assert "eq x1: x1 | 3*x1 | 0" in result.stdout

    def test_pde_normalization_pivot_branch(self):
        result = run_cli(
            "convert",
            str(FIXTURES / "ex_2_23.dsys"),
            "--to",
            "normal",
            "--pivots",
            "x1",
        )
        assert result.returncode == 0
        assert "pivots: x1" in result.stdout

    def test_output_reparses(self, tmp_path):
        result = run_cli(
            "convert", str(FIXTURES / "ex_1_15.dsys"), "--to", "pfaff"
        )
        assert result.returncode == 0
        out = tmp_path / "converted.dsys"
        out.write_text(result.stdout)
        again = run_cli("analyze", str(out), "--json")
        assert again.returncode == 0
        assert json.loads(again.stdout)["kind"] == "pfaff"

    def test_json_mode_carries_metadata(self):
        result = run_cli(
            "convert",
            str(FIXTURES / "ex_4_8.dsys"),
            "--to",
            "td",
            "--pivots",
            "x1,x2",
            "--json",
        )
        payload = json.loads(result.stdout)
        assert payload["kind"] == "td"
        assert "2*x1 + x2 + 3" in payload["metadata"]["excluded_locus"]


class TestCompleteAndBracket:
    def test_complete_emits_added_generators(self):
        result = run_cli("complete", str(FIXTURES / "ex_2_10.dsys"), "--json")
        payload = json.loads(result.stdout)
        assert payload["defect"] == 2
        assert payload["added_generators"][0]["from"] == "[l2,l1]"

    def test_bracket_table(self):
        result = run_cli("bracket", str(FIXTURES / "ex_2_32.dsys"))
        assert result.returncode == 0
        assert "[l1,l2]" in result.stdout
        assert "complete: yes" in result.stdout

    def test_max_generators_cap(self):
        result = run_cli(
            "complete",
            str(FIXTURES / "ex_2_10.dsys"),
            "--max-generators",
            "3",
            "--json",
        )
        payload = json.loads(result.stdout)
        assert payload["defect"] == 1
        assert payload["capped"] is True


class TestCheckFixtures:
    def test_full_corpus_passes(self):
        result = run_cli("check-fixtures", str(FIXTURES))
        assert result.returncode == 0
        assert "0 failed" in result.stdout

    def test_corrupted_expectation_fails(self, tmp_path):
        (tmp_path / "probe.dsys").write_text(
            (FIXTURES / "ex_2_32.dsys").read_text()
        )
        sidecar = json.loads(
            (FIXTURES / "ex_2_32.expected.json").read_text()
        )
        sidecar["dimension"] = 2  # wrong on purpose
        (tmp_path / "probe.expected.json").write_text(json.dumps(sidecar))
        result = run_cli("check-fixtures", str(tmp_path))
        assert result.returncode == 1
        assert "mismatch" in result.stdout

    def test_empty_directory_is_usage_error(self, tmp_path):
        result = run_cli("check-fixtures", str(tmp_path))
        assert result.returncode == 2

    def test_missing_sidecar_is_usage_error(self, tmp_path):
        (tmp_path / "probe.dsys").write_text(
            (FIXTURES / "ex_2_32.dsys").read_text()
        )
        result = run_cli("check-fixtures", str(tmp_path))
        assert result.returncode == 2
        assert "sidecar" in result.stderr
