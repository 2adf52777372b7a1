from __future__ import annotations

import json
from fractions import Fraction

import pytest

from permfree.cli import main
from permfree.errors import ParseError, ValidationError
from permfree.report import CSV_FIELDS, ReportRow, emit_report, read_csv, to_csv
from permfree.studies import (
    ExperimentConfig,
    run_boundedness_probe,
    run_convergence_study,
    run_demo,
    run_variance_study,
    y_word_monomial,
)


def rows_for(rows, monomial, estimator):
    return [r for r in rows if r.monomial == monomial and r.estimator == estimator]


class TestConfig:
    def test_sizes_increasing(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(monomials=["W1"], sizes=[4, 2])

    def test_c_positive(self):
        with pytest.raises(ValidationError):
            ExperimentConfig(monomials=["W1"], c=0)

    def test_monomials_parse(self):
        with pytest.raises(ParseError):
            ExperimentConfig(monomials=["G1 Q"])

    def test_m_schedule(self):
        assert ExperimentConfig(sizes=[2, 5], c=Fraction(3, 2)).m_for(5) == 8
        assert ExperimentConfig(sizes=[2, 5], ms=[7, 9]).m_for(5) == 9
        with pytest.raises(ValidationError):
            ExperimentConfig(sizes=[2, 5], ms=[7])


class TestConvergence:
    def test_gaussian_constant(self):
        rows = run_convergence_study(ExperimentConfig(monomials=["G1 U[e] G1* U[e]"], sizes=[2, 4, 6]))
        exact = rows_for(rows, "G1 U[e] G1* U[e]", "exact")
        assert [r.exact for r in exact] == [1, 1, 1]
        assert all(r.abs_error_vs_limit == 0 for r in exact)
        assert rows[0].estimator == "limit" and rows[0].N is None

    def test_wishart_at_c_one(self):
        text = "W1 U[g1] W1 U[g1^-1]"
        rows = run_convergence_study(ExperimentConfig(monomials=[text], sizes=[2, 4, 6]))
        exact = rows_for(rows, text, "exact")
        # M = N turns M^2/N^2 + 2M/N^3 into 1 + 2/N^2
        assert [r.exact for r in exact] == [1 + Fraction(2, N * N) for N in (2, 4, 6)]
        assert [r.M for r in exact] == [2, 4, 6]
        assert rows_for(rows, text, "limit")[0].exact == 1

    def test_pure_word(self):
        rows = run_convergence_study(ExperimentConfig(monomials=["U[g1]"], sizes=[2, 4, 6]))
        assert [r.exact for r in rows_for(rows, "U[g1]", "exact")] == [Fraction(1, N) for N in (2, 4, 6)]
        assert rows_for(rows, "U[g1]", "limit")[0].exact == 0

    def test_failures_degrade_per_row(self):
        config = ExperimentConfig(monomials=["G1 U[g1.g2] G1* U[e]"], sizes=[3, 12], mode="exact")
        rows = run_convergence_study(config)
        assert [r.estimator for r in rows] == ["limit", "exact", "error"]
        assert "BudgetError" in rows[-1].error

    def test_mc_rows(self):
        config = ExperimentConfig(monomials=["W1"], sizes=[8], samples=50, include_mc=True)
        rows = run_convergence_study(config)
        mc = rows_for(rows, "W1", "mc")
        assert len(mc) == 1 and mc[0].stderr > 0


class TestVariance:
    def test_gaussian(self):
        rows = run_variance_study(ExperimentConfig(monomials=["G1 U[e] G1* U[e]"], sizes=[2, 3, 4, 5, 6]))
        scaled = rows_for(rows, "N^2*Var[G1 U[e] G1* U[e]]", "exact")
        assert [r.exact for r in scaled] == [1] * 5

    def test_pure_words(self):
        rows = run_variance_study(ExperimentConfig(monomials=["U[g1]", "U[e]"], sizes=[2, 3, 4, 5, 6]))
        assert [r.exact for r in rows_for(rows, "N^2*Var[U[g1]]", "exact")] == [1] * 5
        assert [r.exact for r in rows_for(rows, "Var[U[e]]", "exact")] == [0] * 5

    def test_falls_back_to_monte_carlo(self):
        rows = run_variance_study(ExperimentConfig(monomials=["U[g1]"], sizes=[16], samples=200))
        assert {r.estimator for r in rows} == {"mc"}


class TestDemos:
    def test_diagonal_obstruction(self):
        (row,) = run_demo("diagonal-obstruction", N=32, samples=100)
        assert row.value_re <= 1e-12

    def test_permuted_gue_small(self):
        rows = run_demo("permuted-gue", N=64, samples=40)
        assert [r.monomial for r in rows] == ["tr((XX*)^1)", "tr((XX*)^2)", "tr((XX*)^3)"]
        assert abs(rows[0].value_re - 1) < 0.1

    def test_y_words(self):
        assert y_word_monomial("Y Y*") == "U[g1] W1 W1 U[g1^-1]"
        with pytest.raises(ValidationError):
            y_word_monomial("Y Z")

    def test_permuted_wishart_targets(self):
        rows = {r.monomial: r for r in run_demo("permuted-wishart", N=16, samples=10)}
        assert rows["tr(Y Y*)"].exact == 2
        assert rows["tr(Y Y* Y Y*)"].exact == 14
        assert rows["tr(Y Y)"].exact == 0

    def test_unknown(self):
        with pytest.raises(ValidationError):
            run_demo("nope")


class TestProbe:
    def test_exact_values(self):
        rows = run_boundedness_probe(["g1", "g1^2"], [4, 5])
        by = {(r.monomial, r.N): r for r in rows}
        assert by[("Fix[g1]", 4)].exact == 1
        assert by[("Fix[g1^2]", 5)].exact == 2
        assert by[("Fix^2[g1]", 5)].exact == 2

    def test_commutator_stays_bounded(self):
        rows = run_boundedness_probe(["g1.g2.g1^-1.g2^-1"], [8, 16, 32, 64], samples=20_000, seed=1)
        values = [r.value_re for r in rows if r.monomial == "Fix[g1.g2.g1^-1.g2^-1]"]
        assert len(values) == 4
        assert max(values) < 3 * min(values)


class TestReport:
    def test_empty_csv(self):
        assert to_csv([]) == ",".join(CSV_FIELDS) + "\n"

    def test_json_round_trip(self, tmp_path):
        row = ReportRow("W1", 3, 2, "exact", 2 / 3, 0.0, None, 1 / 3, 1.5, exact=Fraction(2, 3))
        path = tmp_path / "r.json"
        emit_report([row], "json", path)
        (parsed,) = json.loads(path.read_text())
        assert parsed["value_re"] == 2 / 3
        assert parsed["exact"] == "2/3"
        assert parsed["stderr"] is None

    def test_csv_round_trip_is_exact(self):
        values = [1 / 3, 2**-40, 123456.789, 1e-300]
        rows = [ReportRow("m", 2, None, "mc", v, -v, v / 7, None, 0.0) for v in values]
        parsed = read_csv(to_csv(rows))
        assert [p["value_re"] for p in parsed] == values
        assert [p["stderr"] for p in parsed] == [v / 7 for v in values]


class TestCli:
    def test_converge_csv(self, tmp_path, capsys):
        out = tmp_path / "c.csv"
        assert main(["converge", "--monomial", "U[g1]", "--n", "2,3", "--out", str(out)]) == 0
        lines = out.read_text().splitlines()
        assert lines[0] == ",".join(CSV_FIELDS)
        assert len(lines) == 4

    def test_parse_error_exit(self, capsys):
        assert main(["limit", "--monomial", "G1 W1"]) == 2
        assert main(["limit", "--monomial", "G1 U[g3]"]) == 2
        assert "byte" in capsys.readouterr().err

    def test_budget_exit(self, capsys):
        assert main(["exact", "--monomial", "G1 U[g1.g2] G1* U[e]", "--n", "12", "--mode", "exact"]) == 3
        assert main(["enumerate", "perms", "12"]) == 3

    def test_io_exit(self, capsys):
        assert main(["limit", "--monomial", "W1", "--out", "/nonexistent-dir/x.csv"]) == 4

    def test_enumerate(self, capsys):
        assert main(["enumerate", "nc-pairings", "6", "--count"]) == 0
        assert capsys.readouterr().out.strip() == "5"

    def test_terms_export(self, tmp_path, capsys):
        path = tmp_path / "terms.csv"
        assert main(["exact", "--monomial", "W1 U[g1] W1 U[g1^-1]", "--n", "3", "--terms", str(path)]) == 0
        assert path.read_text().splitlines()[0] == "tau_cycles,power_of_N,power_of_M,perm_average_num,perm_average_den,contribution"

    def test_json_output(self, capsys):
        assert main(["limit", "--monomial", "W1 W1 W1", "--c", "2", "--format", "json"]) == 0
        (row,) = json.loads(capsys.readouterr().out)
        assert row["exact"] == "22/1"

    def test_seed_range(self):
        with pytest.raises(SystemExit):
            main(["limit", "--monomial", "W1", "--seed", "-1"])
