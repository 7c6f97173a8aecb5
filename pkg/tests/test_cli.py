"""Workspace DSL parsing, command execution, and report determinism."""

import json

import pytest

from metra.cli import (
    LIMIT_DEFAULTS,
    load_workspace,
    main,
    parse_workspace,
    render_json,
    render_text,
    run_workspace,
)
from metra.errors import ParseError
from metra.logic import MetricEquation, MetricImplication

GOLDEN = """
# two-op playground
signature S { sigma/2; }

algebra A over S {
    carrier 0,1,2;
    metric [[0,1,2],[1,0,1],[2,1,0]];
    op sigma = table{
        0,0 -> 0; 0,1 -> 1; 0,2 -> 2;
        1,0 -> 1; 1,1 -> 1; 1,2 -> 2;
        2,0 -> 2; 2,1 -> 2; 2,2 -> 2;
    };
}

congruence T on A { matrix [[0,1,2],[1,0,1],[2,1,0]]; }

axioms E over S {
    x =[1] y |- sigma(x,x) =[1] sigma(y,y);
    sigma(x,y) =[inf] sigma(y,x);
}

presentation P over S {
    vars x,y;
    mode Q;
    depth 1;
    rel x =[1] y;
}

filter F on {1,2} core {1}

validate;
quotient A by T;
sat A E;
free P;
hausdorff A {0} {0,1,2};
gh A A;
redprod [A,A] by F;
limitmetric {a,b} { a,b -> "1/n"; };
meet T T;
permutable T T;
"""

GRID = """
signature E0 { }
algebra G over E0 {
    carrier p,q,r,s;
    metric [[0,1,1,1],[1,0,1,1],[1,1,0,1],[1,1,1,0]];
}
congruence T1 on G { matrix [[0,0,1,1],[0,0,1,1],[1,1,0,0],[1,1,0,0]]; }
congruence T2 on G { matrix [[0,1,0,1],[1,0,1,0],[0,1,0,1],[1,0,1,0]]; }
decompose G by T1 T2;
"""


def run_text(text, overrides=None):
    return run_workspace(parse_workspace(text), overrides)


def one(results, kind):
    picked = [r for r in results if r.kind == kind]
    assert len(picked) == 1
    return picked[0]


class TestParsing:
    """Statements build named objects; errors carry file positions."""

    def test_empty_text_gives_an_empty_workspace(self):
        ws = parse_workspace("")
        assert ws.signatures == {} and ws.algebras == {} and ws.commands == []

    def test_comments_and_whitespace_are_ignored(self):
        ws = parse_workspace("# nothing here\n\n   # more\n")
        assert ws.commands == []

    def test_golden_workspace_declares_every_kind(self):
        ws = parse_workspace(GOLDEN)
        assert set(ws.signatures) == {"S"}
        assert set(ws.algebras) == {"A"}
        assert set(ws.congruences) == {"T"}
        assert set(ws.filters) == {"F"}
        assert set(ws.axioms) == {"E"}
        assert set(ws.presentations) == {"P"}
        assert [kind for kind, _, _ in ws.commands] == [
            "validate", "quotient", "sat", "free", "hausdorff", "gh",
            "redprod", "limitmetric", "meet", "permutable",
        ]

    def test_axioms_parse_into_formula_objects(self):
        ws = parse_workspace(GOLDEN)
        first, second = ws.axioms["E"]
        assert isinstance(first, MetricImplication)
        assert isinstance(second, MetricEquation)
        assert second.bound.is_infinite

    def test_command_echo_is_normalized_source_text(self):
        ws = parse_workspace(GOLDEN)
        echoes = [echo for _, _, echo in ws.commands]
        assert "quotient A by T;" in echoes
        assert "hausdorff A {0} {0,1,2};" in echoes

    def test_duplicate_names_are_rejected_per_kind(self):
        text = "signature S { }\nsignature S { }\n"
        with pytest.raises(ParseError, match="duplicate signature"):
            parse_workspace(text)

    def test_declarations_resolve_references_up_front(self):
        with pytest.raises(ParseError, match="unknown signature 'MISSING'"):
            parse_workspace("algebra A over MISSING { carrier a; metric [[0]]; }")

    def test_unknown_statements_are_parse_errors(self):
        with pytest.raises(ParseError, match="unknown statement 'frobnicate'"):
            parse_workspace("frobnicate A;")

    def test_arity_errors_in_formulas_point_at_the_file(self):
        text = "signature S { sigma/2; }\naxioms E over S {\n    sigma(x) =[1] y;\n}\n"
        with pytest.raises(ParseError) as err:
            parse_workspace(text)
        assert err.value.line == 3
        assert err.value.column == 5
        assert "sigma" in str(err.value)

    def test_formula_parse_errors_shift_into_the_file(self):
        text = "axioms E {\n  x =[1 y;\n}\n"
        with pytest.raises(ParseError) as err:
            parse_workspace(text)
        assert err.value.line == 2
        assert err.value.column > 3

    def test_carrier_ids_mix_names_and_integers(self):
        ws = parse_workspace(
            "signature Z { }\nalgebra A over Z { carrier a,0; metric [[0,1],[1,0]]; }"
        )
        assert ws.algebras["A"].carrier == ("a", 0)

    def test_fractional_carrier_ids_are_rejected(self):
        with pytest.raises(ParseError, match="names or integers"):
            parse_workspace(
                "signature Z { }\nalgebra A over Z { carrier 1/2; metric [[0]]; }"
            )

    def test_unterminated_strings_are_rejected(self):
        with pytest.raises(ParseError, match="unterminated"):
            parse_workspace('include "never.mt\n')

    def test_bad_congruence_matrices_fail_at_declaration(self):
        text = (
            "signature Z { }\n"
            "algebra A over Z { carrier a,b; metric [[0,1],[1,0]]; }\n"
            "congruence T on A { matrix [[0,2],[2,0]]; }\n"
        )
        with pytest.raises(Exception, match="not congruential"):
            parse_workspace(text)

    def test_limits_block_records_overrides(self):
        ws = parse_workspace("limits { max_terms = 77; }\n")
        assert ws.limits == {"max_terms": 77}

    def test_unknown_limits_are_rejected(self):
        with pytest.raises(ParseError, match="unknown limit"):
            parse_workspace("limits { max_wiggle = 3; }\n")


class TestCommands:
    """Commands run in order; verdicts are data and errors are captured."""

    def test_golden_workspace_runs_clean(self):
        results, code = run_text(GOLDEN)
        assert code == 0
        assert all(r.ok for r in results)
        assert all(r.error == "" for r in results)

    def test_every_result_echoes_the_limits_in_force(self):
        results, _ = run_text(GOLDEN)
        for r in results:
            assert r.limits == LIMIT_DEFAULTS

    def test_gh_of_a_space_with_itself_is_zero(self):
        results, _ = run_text(GOLDEN)
        assert one(results, "gh").data["distance"] == "0"

    def test_free_reports_the_generator_distance(self):
        results, _ = run_text(GOLDEN)
        free = one(results, "free").data["free"]
        assert free["size"] == 6
        assert free["generator_distances"]["x,y"] == "1"

    def test_limit_metric_reports_the_exact_limit(self):
        results, _ = run_text(GOLDEN)
        matrix = one(results, "limitmetric").data["matrix"]
        assert matrix["entries"] == [["0", "0"], ["0", "0"]]

    def test_reduced_product_by_principal_ultrafilter_matches_the_factor(self):
        text = (
            "signature E0 { }\n"
            "algebra X over E0 { carrier a,b; metric [[0,3],[3,0]]; }\n"
            "algebra Y over E0 { carrier u,v; metric [[0,1],[1,0]]; }\n"
            "filter F on {1,2} core {2}\n"
            "redprod [X,Y] by F;\n"
        )
        results, code = run_text(text)
        assert code == 0
        data = one(results, "redprod").data
        assert data["exists"] is True
        assert data["algebra"]["metric"] == [["0", "1"], ["1", "0"]]
        assert len(data["algebra"]["carrier"]) == 2

    def test_grid_decomposition_succeeds_with_two_binary_factors(self):
        results, code = run_text(GRID)
        assert code == 0
        data = one(results, "decompose").data
        assert data["ok"] is True
        assert [len(f["carrier"]) for f in data["factors"]] == [2, 2]
        assert len(data["iso"]["map"]) == 4

    def test_failed_verdicts_are_data_not_errors(self):
        text = (
            "signature E0 { }\n"
            "algebra B over E0 { carrier 0,1; metric [[0,1],[1,0]]; }\n"
            "axioms D over E0 { x =[1/2] y; }\n"
            "sat B D;\n"
        )
        results, code = run_text(text)
        assert code == 0
        sat = one(results, "sat")
        assert sat.ok is False and sat.error == ""
        row = sat.data["formulas"][0]
        assert row["witness"] == {"x": 0, "y": 1}

    def test_unknown_names_in_commands_are_captured_per_command(self):
        text = GOLDEN + "\nquotient A by MISSING;\nvalidate;\n"
        results, code = run_text(text)
        assert code == 0
        bad = [r for r in results if r.kind == "quotient"][-1]
        assert bad.ok is False
        assert bad.error == "unknown congruence 'MISSING'"
        assert results[-1].kind == "validate" and results[-1].ok

    def test_resource_caps_flip_the_exit_code_to_two(self):
        text = (
            "signature S { sigma/2; }\n"
            "presentation P over S { vars x,y; mode Q; depth 3; rel x =[1] y; }\n"
            "free P;\nvalidate;\n"
        )
        results, code = run_text(text, {"max_terms": 10})
        assert code == 2
        free = one(results, "free")
        assert free.ok is False
        assert "exceeds 10 terms" in free.error
        assert one(results, "validate").ok

    def test_override_limits_beat_the_file_block(self):
        text = (
            "limits { max_terms = 50000; }\n"
            "signature S { sigma/2; }\n"
            "presentation P over S { vars x,y; mode Q; depth 2; rel x =[1] y; }\n"
            "free P;\n"
        )
        results, code = run_text(text, {"max_terms": 10})
        assert code == 2
        assert one(results, "free").limits["max_terms"] == 10

    def test_entails_commands_report_their_verdict(self):
        text = (
            "signature E0 { }\n"
            "algebra B over E0 { carrier 0,1,2; metric [[0,1,2],[1,0,1],[2,1,0]]; }\n"
            "axioms D over E0 { x =[1] y; y =[1] z; }\n"
            "entails [B] D |- x =[2] z;\n"
            "entails [B] D |- x =[1] z;\n"
        )
        results, code = run_text(text)
        assert code == 0
        wide, tight = [r for r in results if r.kind == "entails"]
        assert wide.ok is True
        assert tight.ok is False
        assert tight.data["verdict"]["value"]["valuation"] == {
            "x": 0, "y": 1, "z": 2
        }

    def test_equicont_commands_return_the_largest_working_delta(self):
        text = (
            "signature S { sigma/2; }\n"
            "algebra B over S {\n"
            "    carrier 0,1;\n"
            "    metric [[0,1],[1,0]];\n"
            "    op sigma = table{ 0,0 -> 0; 0,1 -> 1; 1,0 -> 1; 1,1 -> 1; };\n"
            "}\n"
            "equicont [B] 3/2 grid 1,1/2 : x =[1] y |- sigma(x,x) =[1] sigma(y,y);\n"
        )
        results, _ = run_text(text)
        assert one(results, "equicont").data == {"delta": "1", "ok": True}

    def test_weakcompact_commands_name_the_finite_subset(self):
        text = (
            "signature E0 { }\n"
            "algebra B over E0 {\n"
            "    carrier 0,1,2,3;\n"
            "    metric [[0,1,2,3],[1,0,1,2],[2,1,0,1],[3,2,1,0]];\n"
            "}\n"
            "axioms D over E0 { x =[1] y; y =[1] z; }\n"
            "weakcompact [B] D slack 2 |- x =[2] z;\n"
        )
        results, _ = run_text(text)
        data = one(results, "weakcompact").data
        assert data["ok"] is True
        assert data["subset"] == [0, 1]

    def test_closure_commands_accept_a_quotient_value_grid(self):
        text = (
            "signature E0 { }\n"
            "algebra B over E0 { carrier 0,1; metric [[0,1],[1,0]]; }\n"
            "axioms E over E0 { x =[inf] y; }\n"
            "closure E [B] values 0,1/2,1,inf;\n"
        )
        results, code = run_text(text)
        assert code == 0
        report = one(results, "closure")
        assert report.ok is True
        constructions = {r["construction"] for r in report.data["records"]}
        assert "reflexive-quotient" not in constructions
        assert "quotient" in constructions


class TestReports:
    """Serialization is deterministic and timing never leaks into it."""

    def test_json_reports_are_byte_identical_across_runs(self):
        first = render_json(run_text(GOLDEN)[0])
        second = render_json(run_text(GOLDEN)[0])
        assert first == second

    def test_json_reports_carry_the_schema_version(self):
        payload = json.loads(render_json(run_text(GOLDEN)[0]))
        assert payload["schema"] == 1
        assert len(payload["results"]) == 10

    def test_timing_is_not_serialized(self):
        results, _ = run_text(GOLDEN)
        assert all(r.timing_ms >= 0.0 for r in results)
        assert "timing" not in render_json(results)

    def test_text_reports_echo_commands_and_outcomes(self):
        text = render_text(run_text(GOLDEN)[0])
        assert "### quotient A by T;" in text
        assert "ok: yes" in text

    def test_text_reports_show_captured_errors(self):
        results, _ = run_text(GOLDEN + "\nquotient A by MISSING;\n")
        text = render_text(results)
        assert "error: unknown congruence 'MISSING'" in text
        assert "ok: no" in text


class TestMain:
    """The console entry point wires files, flags, and exit codes."""

    def test_runs_a_file_and_prints_json(self, tmp_path, capsys):
        path = tmp_path / "ws.mt"
        path.write_text(GOLDEN)
        code = main(["run", str(path)])
        out = capsys.readouterr().out
        assert code == 0
        assert json.loads(out)["schema"] == 1

    def test_text_flag_switches_the_report(self, tmp_path, capsys):
        path = tmp_path / "ws.mt"
        path.write_text(GOLDEN)
        code = main(["run", str(path), "--text"])
        out = capsys.readouterr().out
        assert code == 0
        assert out.startswith("### validate;")

    def test_parse_errors_exit_one_with_a_position(self, tmp_path, capsys):
        path = tmp_path / "bad.mt"
        path.write_text("signature S { sigma/2 }\n")
        code = main(["run", str(path)])
        err = capsys.readouterr().err
        assert code == 1
        assert "line 1, column 23" in err

    def test_missing_files_exit_one(self, tmp_path, capsys):
        code = main(["run", str(tmp_path / "nope.mt")])
        assert code == 1
        assert "cannot read" in capsys.readouterr().err

    def test_limit_flags_override_and_flip_exit_codes(self, tmp_path, capsys):
        path = tmp_path / "ws.mt"
        path.write_text(
            "signature S { sigma/2; }\n"
            "presentation P over S { vars x,y; mode Q; depth 3; rel x =[1] y; }\n"
            "free P;\n"
        )
        code = main(["run", str(path), "--limits", "max_terms=10"])
        out = capsys.readouterr().out
        assert code == 2
        result = json.loads(out)["results"][0]
        assert result["limits"]["max_terms"] == 10
        assert "exceeds 10 terms" in result["error"]

    def test_bad_limit_flags_exit_one(self, tmp_path, capsys):
        path = tmp_path / "ws.mt"
        path.write_text("validate;\n")
        code = main(["run", str(path), "--limits", "max_wiggle=9"])
        assert code == 1
        assert "unknown limit" in capsys.readouterr().err

    def test_includes_merge_into_one_namespace(self, tmp_path, capsys):
        (tmp_path / "sig.mt").write_text("signature S { sigma/2; }\n")
        path = tmp_path / "main.mt"
        path.write_text('include "sig.mt";\nvalidate;\n')
        code = main(["run", str(path)])
        out = capsys.readouterr().out
        assert code == 0
        objects = json.loads(out)["results"][0]["data"]["objects"]
        assert {"kind": "signature", "name": "S", "ok": True} in objects

    def test_include_cycles_are_rejected(self, tmp_path, capsys):
        (tmp_path / "a.mt").write_text('include "b.mt";\n')
        (tmp_path / "b.mt").write_text('include "a.mt";\n')
        code = main(["run", str(tmp_path / "a.mt")])
        assert code == 1
        assert "include cycle" in capsys.readouterr().err

    def test_workspaces_load_relative_to_their_own_file(self, tmp_path):
        nested = tmp_path / "sub"
        nested.mkdir()
        (nested / "sig.mt").write_text("signature S { sigma/2; }\n")
        (nested / "main.mt").write_text('include "sig.mt";\n')
        ws = load_workspace(str(nested / "main.mt"))
        assert "S" in ws.signatures
