import json

import pytest

from markovmix.chain import load_chain
from markovmix.cli import main


def run(argv, capsys):
    code = main(argv)
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture
def files(tmp_path, capsys):
    paths = {}
    for name, argv in {
        "ex28": ["--kind", "example-2-8"],
        "t": ["--kind", "two-state", "--p", "0.25"],
        "iid": ["--kind", "iid", "--states", "3"],
        "rev": ["--kind", "random-reversible", "--states", "5", "--seed", "3"],
    }.items():
        path = tmp_path / f"{name}.json"
        assert main(["generate", *argv, "--out", str(path)]) == 0
        paths[name] = str(path)
    capsys.readouterr()
    return paths


def csv_rows(text):
    rows = [line.split(",") for line in text.splitlines() if line and not line.startswith("#")]
    assert rows[0] == ["lag", "alpha", "rho", "beta"]
    return rows[1:]


class TestCompute:
    def test_example(self, files, capsys):
        code, out, _ = run(["compute", "--chain", files["ex28"], "--max-lag", "4", "--max-doubling", "0",
                            "--format", "csv"], capsys)
        assert code == 0
        assert [float(r[2]) for r in csv_rows(out)] == pytest.approx([1, 0, 0, 0], abs=1e-12)

    def test_iid(self, files, capsys):
        code, out, _ = run(["compute", "--chain", files["iid"]], capsys)
        rows = csv_rows(out)
        assert code == 0 and len(rows) == 32
        assert all(abs(float(x)) <= 1e-15 for r in rows for x in r[1:])

    def test_two_state_digits(self, files, capsys):
        code, out, _ = run(["compute", "--chain", files["t"], "--max-lag", "8"], capsys)
        for r in csv_rows(out):
            n = int(r[0])
            assert float(r[2]) == pytest.approx(0.5 ** n, rel=1e-15)
            assert r[2] == format(float(r[2]), ".17g")

    def test_json_and_meta(self, files, capsys):
        code, out, _ = run(["compute", "--chain", files["t"], "--format", "json", "--max-lag", "3"], capsys)
        doc = json.loads(out)
        assert doc["meta"]["tool"].startswith("markovmix ")
        assert json.loads(doc["meta"]["config"])["max_lag"] == 3
        assert len(doc["meta"]["chain_sha256"]) == 64
        assert doc["lags"] == [1, 2, 3, 4, 8, 16, 32]

    def test_reproducible_bytes(self, files, capsys):
        _, a, _ = run(["compute", "--chain", files["rev"]], capsys)
        _, b, _ = run(["compute", "--chain", files["rev"]], capsys)
        assert a == b


class TestVerify:
    def test_power_law_reversible(self, files, capsys):
        code, out, _ = run(["verify", "--chain", files["rev"], "--check", "power-law"], capsys)
        assert code == 0 and "overall: PASS" in out

    def test_lattice_example(self, files, capsys):
        code, _, _ = run(["verify", "--chain", files["ex28"], "--check", "lattice"], capsys)
        assert code == 0

    def test_power_law_example(self, files, capsys):
        code, out, err = run(["verify", "--chain", files["ex28"], "--check", "power-law"], capsys)
        assert code == 1
        assert "n=2: rho=0, rho(1)^2=1" in out
        assert "n=2: rho=0, rho(1)^2=1" in err

    def test_dossier_example(self, files, capsys):
        code, out, _ = run(["verify", "--chain", files["ex28"], "--check", "R,A,B", "--format", "json"], capsys)
        doc = json.loads(out)
        c = doc["conditions"]
        assert not c["R1"]["holds"] and c["A1"]["holds"] and c["B4"]["holds"]
        assert doc["structure"]["reversible"] is False
        assert code == 0

    def test_full_reversible(self, files, capsys):
        code, out, _ = run(["verify", "--chain", files["rev"]], capsys)
        assert code == 0

    def test_unknown_check(self, files, capsys):
        code, _, err = run(["verify", "--chain", files["rev"], "--check", "bogus"], capsys)
        assert code == 2 and "bogus" in err


class TestErrors:
    def test_bad_row_sum(self, tmp_path, capsys):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"states": ["a", "b"], "transition": [[0.5, 0.6], [0.5, 0.5]]}))
        code, out, err = run(["compute", "--chain", str(path)], capsys)
        assert code == 2 and out == "" and "RowSumViolation" in err

    def test_missing_file(self, tmp_path, capsys):
        code, _, _ = run(["compute", "--chain", str(tmp_path / "nope.json")], capsys)
        assert code == 2

    def test_bad_parameter(self, capsys):
        code, out, err = run(["generate", "--kind", "two-state", "--p", "2"], capsys)
        assert code == 2 and out == "" and "BadParameter" in err

    def test_too_large(self, tmp_path, capsys):
        path = tmp_path / "big.json"
        assert main(["generate", "--kind", "iid", "--states", "30", "--out", str(path)]) == 0
        code, _, err = run(["compute", "--chain", str(path)], capsys)
        assert code == 3 and "StateSpaceTooLarge" in err

    def test_usage_error(self, capsys):
        assert main(["compute", "--max-lag", "x"]) == 2


class TestGenerateSimulate:
    def test_generate_twice(self, tmp_path):
        a, b = tmp_path / "a.json", tmp_path / "b.json"
        for p in (a, b):
            assert main(["generate", "--kind", "two-state", "--p", "0.25", "--out", str(p)]) == 0
        assert a.read_bytes() == b.read_bytes()

    def test_simulate_estimate(self, files, tmp_path, capsys):
        path = tmp_path / "path.txt"
        est = tmp_path / "est.json"
        assert main(["simulate", "--chain", files["t"], "-T", "200000", "--seed", "42", "--out", str(path),
                     "--estimate-out", str(est)]) == 0
        assert len(path.read_text().splitlines()) == 200_000
        assert load_chain(str(est)).transition[0, 1] == pytest.approx(0.25, abs=0.01)
        code, out, _ = run(["estimate", "--chain", files["t"], "--path", str(path)], capsys)
        assert code == 0 and json.loads(out) == json.loads(est.read_text())

    def test_report(self, files, capsys):
        code, out, _ = run(["report", "--chain", files["t"], "--max-lag", "8"], capsys)
        assert code == 0
        for section in ("== mixing profile ==", "== spectrum ==", "== conditions =="):
            assert section in out
        assert "slem: 0.5" in out
