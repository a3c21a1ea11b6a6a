import json

import pytest

from cases import IDENTITIES, SUMS
from resproof.cli import check_document, main, parse_point, parse_shifts


@pytest.fixture(autouse=True)
def small_grid(monkeypatch):
    monkeypatch.setenv("RT_GRID_MAX", "4")


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_prove_emits_certificate_that_check_accepts(capsys, tmp_path):
    path = tmp_path / "cert.json"
    code, _, _ = run(capsys, "prove", IDENTITIES["binom_stirling2"], "--out", str(path))
    assert code == 0
    doc = json.loads(path.read_text())
    assert doc["verdict"] == "proved" and doc["coefficients"] == ["1", "-m - 2", "-1"]
    assert doc["rhs_check"]["mode"] == "symbolic"
    code, out, _ = run(capsys, "check", str(path))
    assert code == 0 and out.splitlines()[-1] == "accepted"

    doc["coefficients"][1] = "-m - 3"
    path.write_text(json.dumps(doc))
    code, out, _ = run(capsys, "check", str(path))
    assert code == 1 and "telescoping identity fails" in out


def test_check_rejects_malformed_documents(tmp_path):
    ok, log = check_document({"schema": 999})
    assert not ok and "schema" in log[0]
    code = main(["recurrence", SUMS["binom_stirling2"], "--out", str(tmp_path / "r.json")])
    doc = json.loads((tmp_path / "r.json").read_text())
    assert code == 0
    doc["field"] = "Q(q)"
    assert check_document(doc) == (False, ["field does not match the sum"])
    del doc["field"]
    doc["field"] = "Q"
    doc["variables"] = ["n", "k"]
    ok, log = check_document(doc)
    assert not ok and "malformed" in log[0]


def test_exit_codes(capsys):
    code, out, _ = run(capsys, "prove", IDENTITIES["false"])
    assert code == 2 and json.loads(out)["counterexample"]["point"] == {"n": 2, "m": 1}
    code, out, _ = run(capsys, "prove", "sum(k, S1(k,m)*S2(n+1,k+1)) == binom(n,m)")
    assert code == 3 and json.loads(out)["verdict"] == "inconclusive"
    code, _, err = run(capsys, "prove", "sum(k, foo(k)) == 1")
    assert code == 64 and "unknown function 'foo'" in err
    code, _, err = run(capsys, "eval", SUMS["binom_stirling2"], "--at", "n=3")
    assert code == 64 and "missing values for m" in err
    with pytest.raises(SystemExit) as e:
        main(["frobnicate"])
    assert e.value.code == 64


@pytest.mark.parametrize(
    "name, extra",
    [
        ("stirling2_convolution", []),
        ("q_stirling1", []),
        ("q_stirling2", []),
        ("signed_factorial", ["--op-vars", "m", "--shifts", "(2,),(1,),(0,)", "--aux-degree", "1"]),
        ("bernoulli_binomial", []),
    ],
)
def test_recurrence_certificates_are_accepted(capsys, tmp_path, name, extra):
    path = tmp_path / f"{name}.json"
    code, _, _ = run(capsys, "recurrence", SUMS[name], "--out", str(path), *extra)
    assert code == 0
    doc = json.loads(path.read_text())
    assert doc["verdict"] == "derived"
    ok, log = check_document(doc)
    assert ok, log


def test_recurrence_without_relation(capsys):
    code, out, _ = run(capsys, "recurrence", SUMS["stirling_inverse"])
    doc = json.loads(out)
    assert code == 3 and doc["verdict"] == "no-relation" and doc["searched_shift_sets"]


def test_eval(capsys):
    assert run(capsys, "eval", SUMS["binom_stirling2"], "--at", "n=3,m=2")[1] == "6\n"
    assert run(capsys, "eval", SUMS["double_factorial"], "--at", "n=2,m=0")[1] == "3\n"
    # qS2(3,2) + qS2(3,3)*qbinom(3,2) = (q + 2) + (1 + q + q^2)
    assert run(capsys, "eval", "sum(k, qS2(3,k)*qbinom(k,2))")[1] == "q^2 + 2*q + 3\n"
    assert run(capsys, "eval", "sum(k, qS2(3,k)*qbinom(k,2))", "--q", "2")[1] == "11\n"


def test_analyze_bernoulli(capsys):
    code, out, _ = run(capsys, "analyze", SUMS["bernoulli_binomial"])
    doc = json.loads(out)
    assert code == 0
    assert doc["verdict"] == "certificate-forced-zero" and doc["route"] == "sister-celine"
    assert doc["gp"]["A"] == "-k + m + n + 2"
    assert doc["sister_celine"]["members"] == ["L(n+1, m+1)", "L(n+1, m)", "L(n, m+1)", "L(n, m)"]
    assert doc["sister_celine"]["basis"] == [["0", "1", "-1", "-1"]]
    assert doc["operator"] == "(1)*L(n+1, m) + (-1)*L(n, m+1) + (-1)*L(n, m) = 0"


def test_catalog(capsys):
    code, out, _ = run(capsys, "catalog")
    assert code == 0 and len(out.splitlines()) == 7
    assert out.splitlines()[1].startswith("S2")


def test_argument_helpers():
    assert parse_shifts("1,1", 2) == ((1, 1), (1, 0), (0, 1), (0, 0))
    assert parse_shifts("1", 2) == ((1, 1), (1, 0), (0, 1), (0, 0))
    assert parse_shifts("(1,0),(0,0)", 2) == ((1, 0), (0, 0))
    assert parse_shifts("(2,)", 1) == ((2,),)
    with pytest.raises(ValueError):
        parse_shifts("(1,0)", 1)
    assert parse_point("n=3, m=2") == {"n": 3, "m": 2}
