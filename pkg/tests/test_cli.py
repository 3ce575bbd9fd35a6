"""End-to-end tests of the command line interface.

Every test drives cli.main with an argv list and inspects the JSON/CSV it
writes plus the exit code contract: 0 ok, 2 malformed input, 3 capacity
exceeded, 4 guarantee violated.
"""

from __future__ import annotations

import json

import pytest

from fairdiv import cli, example1, save_instance, xos


@pytest.fixture()
def example_path(tmp_path):
    path = tmp_path / "example.json"
    save_instance(example1(), path)
    return str(path)


@pytest.fixture()
def xos_path(tmp_path):
    path = tmp_path / "xos.json"
    save_instance(xos(2, 5, clauses=3, seed=9), path)
    return str(path)


def write_allocation(tmp_path, bundles, name="alloc.json"):
    path = tmp_path / name
    path.write_text(json.dumps({"bundles": bundles}))
    return str(path)


def run_json(capsys, argv):
    code = cli.main(argv)
    out = capsys.readouterr().out
    return code, json.loads(out)


# ---------------------------------------------------------------------------
# gen

def test_gen_writes_instance_with_generator_stamp(tmp_path, capsys):
    out = tmp_path / "gen.json"
    code = cli.main([
        "gen", "--family", "random_additive", "--n", "2", "--m", "4",
        "--max-value", "10", "--seed", "3", "--out", str(out),
    ])
    assert code == 0
    data = json.loads(out.read_text())
    assert data["n"] == 2 and data["m"] == 4
    assert data["generator"]["family"] == "random_additive"
    # the generated file loads back through the normal loader
    code, doc = run_json(capsys, ["check-instance", str(out)])
    assert code == 0 and doc["verdict"] == "pass"


def test_gen_is_deterministic(tmp_path):
    paths = []
    for name in ("a.json", "b.json"):
        out = tmp_path / name
        cli.main([
            "gen", "--family", "xos", "--n", "2", "--m", "5",
            "--clauses", "3", "--seed", "7", "--out", str(out),
        ])
        paths.append(out.read_bytes())
    assert paths[0] == paths[1]


def test_gen_hard_instance_families(tmp_path):
    out = tmp_path / "hard.json"
    assert cli.main([
        "gen", "--family", "theorem4", "--alpha", "1/2", "--eps", "1/100",
        "--n", "2", "--out", str(out),
    ]) == 0
    assert json.loads(out.read_text())["n"] == 2
    assert cli.main([
        "gen", "--family", "theorem5", "--N", "9", "--out", str(out),
    ]) == 0
    data = json.loads(out.read_text())
    assert (data["n"], data["m"], data["class"]) == (2, 5, "monotone")


def test_gen_rejects_bad_parameters(capsys):
    assert cli.main(["gen", "--family", "random_additive", "--n", "2"]) == 2
    assert "error" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# check-instance

def test_check_instance_flags_wrong_declaration(tmp_path, capsys):
    # a valuation table with v(union) above the sum of parts is not
    # subadditive, so checking its declared class must fail
    table = {"0": 0, "1": 1, "2": 1, "3": 5}
    doc = {
        "n": 2,
        "m": 2,
        "class": "subadditive",
        "valuations": [
            {"kind": "explicit", "table": table},
            {"kind": "explicit", "table": table},
        ],
    }
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, report = run_json(capsys, ["check-instance", str(path)])
    assert code == 2
    assert report["verdict"] == "subadditivity"
    assert report["agent"] == 0
    assert report["s"] == [0] and report["t"] == [1]


def test_check_instance_rejects_missing_file(capsys):
    assert cli.main(["check-instance", "/nonexistent/inst.json"]) == 2
    assert "error" in capsys.readouterr().err


# ---------------------------------------------------------------------------
# mnw

def test_mnw_methods_agree(example_path, capsys):
    code, plain = run_json(capsys, ["mnw", example_path, "--method", "plain"])
    assert code == 0
    code, bnb = run_json(
        capsys, ["mnw", example_path, "--method", "branch-and-bound"]
    )
    assert code == 0
    assert plain == bnb
    assert plain["product"] == "4"


def test_mnw_capacity_exit_code(example_path, capsys):
    assert cli.main(["mnw", example_path, "--cap", "5"]) == 3
    assert "error" in capsys.readouterr().err


def test_nonpositive_cap_is_malformed(example_path):
    assert cli.main(["mnw", example_path, "--cap", "0"]) == 2


# ---------------------------------------------------------------------------
# solve

def test_solve_additive_partial(example_path, capsys):
    code, data = run_json(capsys, [
        "solve", example_path, "--alg", "additive", "--alpha", "1/2",
        "--verify-all",
    ])
    assert code == 0
    assert data["ok"] is True
    assert data["algorithm"] == "additive"
    assert data["complete"] is False
    assert data["optimal_product"] == "4"
    assert [r["property"] for r in data["reports"]] == [
        "alpha_efx", "beta_mnw", "gamma_separated",
    ]


def test_solve_additive_complete(example_path, capsys):
    code, data = run_json(capsys, [
        "solve", example_path, "--alg", "additive", "--alpha", "1/2",
        "--complete", "--verify-all",
    ])
    assert code == 0
    assert data["ok"] is True
    assert data["unallocated"] == []
    assert sorted(g for b in data["allocation"] for g in b) == [0, 1, 2]
    assert [r["property"] for r in data["reports"]] == [
        "alpha_efx", "ef1", "beta_mnw", "alpha_gmms", "alpha_pmms",
    ]


def test_solve_subadditive_complete(xos_path, capsys):
    code, data = run_json(capsys, [
        "solve", xos_path, "--alg", "subadditive", "--alpha", "1/2",
        "--complete", "--verify-all",
    ])
    assert code == 0
    assert data["ok"] is True
    assert data["unallocated"] == []
    assert [r["property"] for r in data["reports"]] == ["alpha_efx", "beta_mnw"]
    assert "swaps" in data and "partial" in data


def test_solve_polynomial_restarts_with_start_file(example_path, tmp_path, capsys):
    x0 = write_allocation(tmp_path, [[0], [1, 2]])
    code, data = run_json(capsys, [
        "solve", example_path, "--alg", "additive-poly", "--alpha", "1/2",
        "--x0", x0, "--beta", "3/4", "--verify-all",
    ])
    assert code == 0
    assert data["ok"] is True
    assert data["rounds"] >= 0
    assert isinstance(data["branches"], list)
    assert data["start_product"] == "3"


def test_solve_polynomial_complete_lowers_efx_level(example_path, tmp_path, capsys):
    code, data = run_json(capsys, [
        "solve", example_path, "--alg", "additive-poly", "--alpha", "1",
        "--complete", "--verify-all",
    ])
    assert code == 0
    assert data["ok"] is True
    assert data["efx_level"] == "1/2"
    assert data["unallocated"] == []


def test_solve_trace_output(example_path, tmp_path, capsys):
    trace = tmp_path / "trace.json"
    code = cli.main([
        "solve", example_path, "--alg", "subadditive", "--alpha", "1/2",
        "--trace", str(trace), "--out", str(tmp_path / "result.json"),
    ])
    assert code == 0
    doc = json.loads(trace.read_text())
    assert set(doc) == {"steps", "events"}
    assert doc["steps"], "the matching trace must record its iterations"
    first = doc["steps"][0]
    assert first["case"] == "1"
    assert first["potential"] == [0, 0, 0]


def test_solve_rejects_incomplete_start(example_path, tmp_path):
    x0 = write_allocation(tmp_path, [[0], [1]])
    assert cli.main([
        "solve", example_path, "--alg", "additive-poly", "--alpha", "1/2",
        "--x0", x0,
    ]) == 2


def test_solve_rejects_alpha_past_pipeline_threshold(example_path):
    assert cli.main([
        "solve", example_path, "--alg", "additive", "--alpha", "7/8",
        "--complete",
    ]) == 2


# ---------------------------------------------------------------------------
# verify

def test_verify_passes_fair_allocation(example_path, tmp_path, capsys):
    alloc = write_allocation(tmp_path, [[2], [0, 1]])
    code, data = run_json(capsys, [
        "verify", example_path, "--allocation", alloc,
        "--checks", "efx,ef1,mms,pmms,gmms", "--alpha", "1",
    ])
    assert code == 0
    assert data["ok"] is True
    assert [c["property"] for c in data["checks"]] == [
        "alpha_efx", "ef1", "alpha_mms", "alpha_pmms", "alpha_gmms",
    ]


def test_verify_flags_unfair_allocation(example_path, tmp_path, capsys):
    alloc = write_allocation(tmp_path, [[0, 1, 2], []])
    code, data = run_json(capsys, [
        "verify", example_path, "--allocation", alloc, "--checks", "mms",
        "--alpha", "1",
    ])
    assert code == 4
    assert data["ok"] is False
    witness = data["checks"][0]["witness"]
    assert witness["i"] == 1


def test_verify_mnw_check_with_reference(example_path, tmp_path, capsys):
    alloc = write_allocation(tmp_path, [[2], [0, 1]])
    code, data = run_json(capsys, [
        "verify", example_path, "--allocation", alloc, "--checks", "mnw",
        "--beta", "1", "--reference-product", "4",
    ])
    assert code == 0 and data["ok"] is True
    code, data = run_json(capsys, [
        "verify", example_path, "--allocation", alloc, "--checks", "mnw",
        "--beta", "1",
    ])
    assert code == 0 and data["ok"] is True


def test_verify_separated_needs_gamma(example_path, tmp_path):
    alloc = write_allocation(tmp_path, [[2], [0, 1]])
    assert cli.main([
        "verify", example_path, "--allocation", alloc, "--checks", "separated",
    ]) == 2


def test_verify_rejects_unknown_check(example_path, tmp_path):
    alloc = write_allocation(tmp_path, [[2], [0, 1]])
    assert cli.main([
        "verify", example_path, "--allocation", alloc, "--checks", "efy",
    ]) == 2


def test_verify_rejects_malformed_allocation(example_path, tmp_path):
    dup = write_allocation(tmp_path, [[0, 0], [1]], "dup.json")
    assert cli.main([
        "verify", example_path, "--allocation", dup, "--checks", "ef1",
    ]) == 2
    overlap = write_allocation(tmp_path, [[0, 1], [1, 2]], "overlap.json")
    assert cli.main([
        "verify", example_path, "--allocation", overlap, "--checks", "ef1",
    ]) == 2
    short = write_allocation(tmp_path, [[0, 1, 2]], "short.json")
    assert cli.main([
        "verify", example_path, "--allocation", short, "--checks", "ef1",
    ]) == 2


# ---------------------------------------------------------------------------
# sweep

def sweep_spec(tmp_path, example_path, timing=False):
    spec = {
        "instances": [
            example_path,
            {"family": "random_additive", "n": 2, "m": 4,
             "max_value": 10, "seed": 3},
        ],
        "alphas": ["0", "1/2"],
        "algorithms": ["additive", "additive-complete"],
    }
    path = tmp_path / "spec.json"
    path.write_text(json.dumps(spec))
    return str(path)


def test_sweep_writes_deterministic_csv(example_path, tmp_path):
    spec = sweep_spec(tmp_path, example_path)
    outs = []
    for name in ("s1.csv", "s2.csv"):
        out = tmp_path / name
        assert cli.main(["sweep", "--spec", spec, "--out", str(out)]) == 0
        outs.append(out.read_bytes())
    assert outs[0] == outs[1]
    header, *rows = outs[0].decode().strip().splitlines()
    assert header.split(",") == list(cli.SWEEP_COLUMNS)
    assert len(rows) == 2 * 2 * 2  # instances x alphas x algorithms
    assert all(",pass," in row for row in rows)


def test_sweep_timing_column_is_opt_in(example_path, tmp_path):
    spec = sweep_spec(tmp_path, example_path)
    out = tmp_path / "timed.csv"
    assert cli.main(["sweep", "--spec", spec, "--out", str(out), "--timing"]) == 0
    header = out.read_text().splitlines()[0]
    assert header.split(",")[-1] == "wall_ms"


def test_sweep_rejects_bad_specs(example_path, tmp_path):
    empty = tmp_path / "empty.json"
    empty.write_text(json.dumps({"instances": []}))
    assert cli.main(["sweep", "--spec", str(empty), "--out",
                     str(tmp_path / "x.csv")]) == 2
    bad_alg = tmp_path / "badalg.json"
    bad_alg.write_text(json.dumps({
        "instances": [example_path], "algorithms": ["magic"],
    }))
    assert cli.main(["sweep", "--spec", str(bad_alg), "--out",
                     str(tmp_path / "y.csv")]) == 2


# ---------------------------------------------------------------------------
# certify-impossibility

def test_certify_tradeoff_family(capsys):
    code, data = run_json(capsys, [
        "certify-impossibility", "--family", "theorem4",
        "--alpha", "1/2", "--eps", "1/100", "--n", "2",
    ])
    assert code == 0
    assert data["verified"] is True


def test_certify_square_family(capsys):
    code, data = run_json(capsys, [
        "certify-impossibility", "--family", "theorem5", "--N", "9",
    ])
    assert code == 0
    assert data["verified"] is True


def test_certify_requires_family_parameters():
    assert cli.main([
        "certify-impossibility", "--family", "theorem4", "--alpha", "1/2",
    ]) == 2
    assert cli.main(["certify-impossibility", "--family", "theorem5"]) == 2


def test_unknown_subcommand_is_an_argparse_error():
    with pytest.raises(SystemExit):
        cli.main(["frobnicate"])
