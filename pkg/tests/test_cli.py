import hashlib
import json
from unittest.mock import patch

import pytest

from fellcheck import __version__
from fellcheck.envelope import dump_envelope, load_envelope
from fellcheck.main import main


@pytest.fixture
def make_fixture(tmp_path):
    def _make(*args):
        path = tmp_path / f"fixture-{len(list(tmp_path.iterdir()))}.json"
        assert main(["fixture", *args, "--out", str(path)]) == 0
        return path
    return _make


def read_json(path):
    return json.loads(path.read_text(encoding="utf-8"))


def test_fixture_tree(make_fixture):
    env = read_json(make_fixture("tree", "--gens", "2", "--depth", "2"))
    assert env["dim"] == 7
    assert env["generators"] == ["x", "y"]
    assert env["depth"] == 2
    assert env["fixture"]["kind"] == "tree"
    assert len(env["matrices"]["x"]) == 7


def test_fixture_ck(make_fixture):
    env = read_json(make_fixture("ck", "--matrix", "I2", "--depth", "2"))
    assert env["dim"] == 5
    assert env["fixture"]["A"] == [[1, 0], [0, 1]]


def test_fixture_to_stdout(capsys):
    assert main(["fixture", "parity"]) == 0
    env = json.loads(capsys.readouterr().out)
    assert env["mode"] == "full-table"
    assert env["dim"] == 1


def test_fixture_errors(capsys):
    assert main(["fixture", "ck", "--depth", "2"]) == 2
    assert "requires --matrix" in capsys.readouterr().err
    assert main(["fixture", "tree", "--depth", "12", "--dim-cap", "100"]) == 3
    assert "exceeds the cap" in capsys.readouterr().err
    assert main(["fixture", "random", "--dim", "3"]) == 2


def test_verify_tree_passes(make_fixture, tmp_path):
    rep = make_fixture("tree", "--gens", "2", "--depth", "2")
    out = tmp_path / "report.json"
    assert main(["verify", "--rep", str(rep), "--out", str(out)]) == 0
    report = read_json(out)
    assert report["summary"]["failed"] == 0
    assert report["provenance"]["input_sha256"] == hashlib.sha256(rep.read_bytes()).hexdigest()
    assert report["provenance"]["tool_version"] == __version__
    names = {c["name"] for c in report["checks"]}
    assert {"products-partial-isometry", "semi-saturated", "partition-of-unity", "bundle-product"} <= names


def test_verify_parity_fails_with_witness(make_fixture, capsys):
    rep = make_fixture("parity")
    capsys.readouterr()
    assert main(["verify", "--rep", str(rep)]) == 1
    report = json.loads(capsys.readouterr().out)
    semisat = next(c for c in report["checks"] if c["name"] == "semi-saturated")
    assert not semisat["passed"]
    assert "(x,y)" in semisat["witness"]
    assert any("validation skipped" in note for note in report["notes"])


def test_verify_is_deterministic(make_fixture, tmp_path):
    rep = make_fixture("ck", "--matrix", "0,1;1,0", "--depth", "3")
    first, second = tmp_path / "a.json", tmp_path / "b.json"
    assert main(["verify", "--rep", str(rep), "--out", str(first)]) == main(["verify", "--rep", str(rep), "--out", str(second)])
    assert first.read_bytes() == second.read_bytes()


def test_verify_rejects_malformed_input(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert main(["verify", "--rep", str(bad)]) == 2
    assert "error:" in capsys.readouterr().err
    missing_matrix = tmp_path / "short.json"
    missing_matrix.write_text(json.dumps({"dim": 1, "generators": ["x", "y"], "matrices": {"x": [[[1, 0]]]}}))
    assert main(["verify", "--rep", str(missing_matrix)]) == 2
    assert main(["verify", "--rep", str(tmp_path / "absent.json")]) == 2


def test_verify_rejects_bad_tolerance(make_fixture, capsys):
    rep = make_fixture("tree", "--depth", "1")
    assert main(["verify", "--rep", str(rep), "--atol", "0", "--rtol", "0"]) == 2
    assert "Invalid tolerance" in capsys.readouterr().err


def test_verify_internal_error(make_fixture, capsys):
    rep = make_fixture("tree", "--depth", "1")
    with patch("fellcheck.commands.verify.run_verification", side_effect=RuntimeError("boom")):
        assert main(["verify", "--rep", str(rep)]) == 1
    assert "internal error: boom" in capsys.readouterr().err


def test_converge_single_chain(make_fixture, tmp_path):
    rep = make_fixture("tree", "--gens", "1", "--depth", "10")
    out = tmp_path / "errors.csv"
    assert main(["converge", "--rep", str(rep), "--word", "x", "--nmax", "8", "--out", str(out)]) == 0
    lines = out.read_text().splitlines()
    assert lines[0] == "n,error"
    rows = [line.split(",") for line in lines[1:]]
    assert [int(n) for n, _ in rows] == list(range(1, 9))
    assert [float(err) for _, err in rows] == pytest.approx([1 / n for n in range(1, 9)], abs=1e-12)


def test_converge_unit_word_is_exact(make_fixture, capsys):
    rep = make_fixture("tree", "--gens", "2", "--depth", "4")
    capsys.readouterr()
    assert main(["converge", "--rep", str(rep), "--nmax", "3"]) == 0
    errors = [float(line.split(",")[1]) for line in capsys.readouterr().out.splitlines()[1:]]
    assert len(errors) == 3
    assert max(errors) <= 1e-10


def test_converge_vanishing_word(make_fixture, capsys):
    rep = make_fixture("tree", "--gens", "2", "--depth", "4")
    assert main(["converge", "--rep", str(rep), "--word", "x^-1.y", "--nmax", "2"]) == 1
    assert "σ(t) = 0: t is not of the form μν⁻¹" in capsys.readouterr().err


def test_converge_input_errors(make_fixture):
    rep = make_fixture("tree", "--gens", "2", "--depth", "4")
    assert main(["converge", "--rep", str(rep), "--word", "z"]) == 2
    assert main(["converge", "--rep", str(rep), "--word", "x", "--nmax", "4"]) == 2


def test_converge_memory_cap(make_fixture, capsys):
    rep = make_fixture("tree", "--gens", "2", "--depth", "4")
    capsys.readouterr()
    with patch("fellcheck.approx.MEMORY_CAP", 1000):
        assert main(["converge", "--rep", str(rep), "--word", "x", "--nmax", "3"]) == 3
    captured = capsys.readouterr()
    assert captured.out == ""
    assert "FELL_MEMORY_CAP" in captured.err


def test_converge_out_of_memory(make_fixture, capsys):
    rep = make_fixture("tree", "--gens", "2", "--depth", "4")
    with patch("fellcheck.commands.converge.convergence_study",
               side_effect=MemoryError("Unable to allocate 32.0 MiB")):
        assert main(["converge", "--rep", str(rep), "--word", "x", "--nmax", "3"]) == 3
    assert "out of memory" in capsys.readouterr().err


def test_fiber_command(make_fixture, capsys):
    rep = make_fixture("tree", "--gens", "2", "--depth", "1")
    capsys.readouterr()
    assert main(["fiber", "--rep", str(rep), "--word", "x"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["word"] == "x"
    assert report["rank"] == 1
    assert report["stabilized"] is True


def test_random_command(tmp_path, capsys):
    env_path = tmp_path / "random.json"
    code = main(["random", "--dim", "3", "--seed", "0", "--out", str(env_path)])
    report = json.loads(capsys.readouterr().out)
    assert code == (0 if report["summary"]["failed"] == 0 else 1)
    assert report["max_product_length"] == 2
    env, _ = load_envelope(str(env_path))
    assert env.fixture.kind == "random"
    assert env.dim == 3


def test_envelope_round_trip(make_fixture):
    path = make_fixture("random", "--dim", "3", "--seed", "4")
    env, digest = load_envelope(str(path))
    assert dump_envelope(env) == path.read_text(encoding="utf-8")
    assert digest == hashlib.sha256(path.read_bytes()).hexdigest()


def test_metrics_out(make_fixture, tmp_path):
    rep = make_fixture("tree", "--depth", "1")
    metrics = tmp_path / "metrics.prom"
    assert main(["--metrics-out", str(metrics), "verify", "--rep", str(rep)]) == 0
    text = metrics.read_text()
    assert "fellcheck_checks_total" in text
    assert 'check="check_axioms"' in text


def test_argument_errors():
    with pytest.raises(SystemExit) as exc:
        main(["verify"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["--version"])
    assert exc.value.code == 0
