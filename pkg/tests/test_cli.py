import json

import numpy as np
import pytest

from saim.cli import main
from saim.instances import QkpInstance, generate_qkp, load_file, to_json
from saim.model import IsingCoefficients
from saim.sampler import sample_equilibrium
from saim.validation import check_tv


def flipped_sampler(coeffs, beta, n_samples, burn_in, rng):
    """Samples the wrong sign of the Hamiltonian."""
    return sample_equilibrium(IsingCoefficients(-coeffs.J, -coeffs.h_field), beta, n_samples, burn_in, rng)


def test_tv_check_catches_sign_bug():
    good = check_tv(systems=2, n_samples=200_000, burn_in=1000)
    bad = check_tv(systems=2, n_samples=200_000, burn_in=1000, sampler=flipped_sampler)
    assert good.passed
    assert not bad.passed and bad.statistic > 0.1


@pytest.fixture
def data(tmp_path):
    d = tmp_path / "data"
    assert main(["generate", "--n", "10", "--seed", "3", "--count", "2", "--out", str(d)]) == 0
    return d


def test_generate_is_deterministic(tmp_path, data):
    again = tmp_path / "again"
    main(["generate", "--n", "10", "--seed", "3", "--count", "2", "--out", str(again)])
    for f in data.iterdir():
        assert (again / f.name).read_text() == f.read_text()
    assert load_file(data / "qkp_10_50_s3.json") == [generate_qkp(10, 0.5, 3)]


def test_generate_native_mkp(tmp_path):
    assert main(["generate", "--kind", "mkp", "--n", "8", "--m", "2", "--format", "native", "--with-opt", "--out", str(tmp_path)]) == 0
    (inst,) = load_file(next(tmp_path.iterdir()))
    assert inst.opt is not None and inst.opt < 0


def run_solve(data, out, *extra):
    args = ["solve", "--instances", str(data / "*.json"), "--runs", "20", "--mcs", "100", "--out", str(out), *extra]
    assert main(args) == 0
    return [json.loads(line) for line in (out / "records.jsonl").read_text().splitlines()]


def test_solve_outputs(tmp_path, data):
    records = run_solve(data, tmp_path / "r", "--replicates", "2")
    assert len(records) == 4
    assert [(r["instance"], r["replicate"]) for r in records] == sorted((r["instance"], r["replicate"]) for r in records)
    for r in records:
        assert r["format_version"] == 1 and r["stream"] == r["replicate"]
        assert r["opt_source"] == "oracle"
        assert r["n_spins"] > r["n_items"] == 10
        assert r["scale_objective"] > 0 and r["scale_constraints"] > 0
    traces = sorted((tmp_path / "r" / "traces").iterdir())
    assert len(traces) == 4
    first = json.loads(traces[0].read_text().splitlines()[0])
    assert first["lambda"] == [0.0] and set(first) >= {"cost", "sample_cost", "feasible"}
    summary = json.loads((tmp_path / "r" / "summary.json").read_text())
    assert {"median", "iqr"} <= set(summary["aggregate"]["best_accuracy"])


def test_solve_reruns_are_byte_identical(tmp_path, data):
    run_solve(data, tmp_path / "a")
    run_solve(data, tmp_path / "b", "--workers", "2")
    for name in ["records.jsonl", "summary.json"]:
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    for f in (tmp_path / "a" / "traces").iterdir():
        assert (tmp_path / "b" / "traces" / f.name).read_bytes() == f.read_bytes()


def test_penalty_mode_keeps_lambda_zero(tmp_path, data):
    records = run_solve(data, tmp_path / "p", "--mode", "penalty")
    assert all(r["config"]["eta"] == 0.0 for r in records)
    for f in (tmp_path / "p" / "traces").iterdir():
        assert all(json.loads(line)["lambda"] == [0.0] for line in f.read_text().splitlines())


def test_explicit_penalty_and_preset(tmp_path, data):
    records = run_solve(data, tmp_path / "q", "--preset", "mkp-paper", "--penalty", "3.5")
    assert all(r["penalty"] == 3.5 and r["config"]["beta_max"] == 50.0 for r in records)


def test_no_feasible_is_exit_zero(tmp_path):
    # capacity below every weight: only x = 0 is feasible, and a zero penalty never picks it
    inst = generate_qkp(6, 0.5, seed=1)
    tight = QkpInstance("tight", inst.W, inst.h, inst.A + 1, 1)
    (tmp_path / "t.json").write_text(to_json(tight))
    args = ["solve", "--instances", str(tmp_path / "t.json"), "--runs", "5", "--mcs", "50", "--penalty", "0", "--eta", "0", "--out", str(tmp_path / "o")]
    assert main(args) == 0
    (rec,) = [json.loads(line) for line in (tmp_path / "o" / "records.jsonl").read_text().splitlines()]
    assert rec["found_feasible"] is False and rec["best_accuracy"] is None


@pytest.mark.parametrize(
    "argv",
    [
        ["solve", "--instances", "/nonexistent/*.json", "--out", "x"],
        ["validate", "--checks", ""],
        ["validate", "--checks", "bogus"],
        ["solve", "--instances", "*.json", "--out", "x", "--runs", "0"],
    ],
)
def test_config_errors_exit_2(argv, tmp_path, monkeypatch, capsys):
    monkeypatch.chdir(tmp_path)
    (tmp_path / "a.json").write_text(to_json(generate_qkp(4, 0.5, 0)))
    assert main(argv) == 2
    assert "error:" in capsys.readouterr().err


def test_unreadable_instance(tmp_path, capsys):
    (tmp_path / "bad.json").write_text("{not json")
    assert main(["solve", "--instances", str(tmp_path / "bad.json"), "--out", str(tmp_path / "o")]) == 2


def test_oracle_limit(tmp_path, capsys):
    (tmp_path / "big.json").write_text(to_json(generate_qkp(30, 0.5, 0)))
    assert main(["oracle", str(tmp_path / "big.json")]) == 2
    assert "at most 25" in capsys.readouterr().err


def test_oracle_output(tmp_path, capsys):
    inst = generate_qkp(8, 0.5, 2)
    (tmp_path / "i.json").write_text(to_json(inst))
    assert main(["oracle", str(tmp_path / "i.json")]) == 0
    out = json.loads(capsys.readouterr().out)
    x = np.array(out["state"])
    assert inst.A @ x <= inst.b
    assert out["opt"] == -(inst.h @ x + 0.5 * x @ inst.W @ x)


def test_validate_subset(capsys):
    assert main(["validate", "--checks", "roundtrip,concavity"]) == 0
    lines = capsys.readouterr().out.splitlines()
    assert lines[0].startswith("PASS roundtrip") and lines[1].startswith("PASS concavity")
