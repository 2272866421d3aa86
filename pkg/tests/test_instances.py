import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from saim.instances import (
    MkpInstance,
    ParseError,
    QkpInstance,
    dump_mkp_orlib,
    dump_qkp,
    from_json,
    generate_mkp,
    generate_qkp,
    load_file,
    load_mkp_orlib,
    load_qkp,
    to_json,
    to_problem,
)
from saim.model import evaluate_f
from saim.oracle import exhaustive_solve

QKP_TOY = """toy
2
3 1
4

0
4
2 3
"""


def brute_max_value(inst):
    best = 0
    for bits in itertools.product([0, 1], repeat=inst.n):
        x = np.array(bits)
        if isinstance(inst, QkpInstance):
            if inst.A @ x > inst.b:
                continue
            value = inst.h @ x + sum(inst.W[i, j] for i in range(inst.n) for j in range(i + 1, inst.n) if x[i] and x[j])
        else:
            if np.any(inst.A @ x > inst.B):
                continue
            value = inst.h @ x
        best = max(best, value)
    return best


class TestMkpFormat:
    def test_crafted_text(self):
        (inst,) = load_mkp_orlib("1 2 1 10 5 3 4 2 6")
        assert inst.n == 2 and inst.m == 1
        assert inst.h.tolist() == [5, 3]
        assert inst.A.tolist() == [[4, 2]]
        assert inst.B.tolist() == [6]
        assert inst.opt == -10

    def test_zero_opt_is_unknown(self):
        (inst,) = load_mkp_orlib("1\n2 1 0\n5 3\n4 2\n6\n")
        assert inst.opt is None

    @pytest.mark.parametrize("text", ["", "   \n"])
    def test_empty(self, text):
        with pytest.raises(ParseError):
            load_mkp_orlib(text)

    def test_truncated_reports_position(self):
        with pytest.raises(ParseError) as err:
            load_mkp_orlib("1 2 1 10 5 3 4 2")
        assert err.value.position == 8

    def test_negative_weight(self):
        with pytest.raises(ParseError, match="weight"):
            load_mkp_orlib("1 2 1 10 5 3 -4 2 6")

    def test_count_mismatch(self):
        with pytest.raises(ParseError, match="trailing"):
            load_mkp_orlib("1 2 1 10 5 3 4 2 6 7")
        with pytest.raises(ParseError):
            load_mkp_orlib("2 2 1 10 5 3 4 2 6")

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 12), st.integers(1, 4), st.integers(1, 3))
    def test_round_trip(self, seed, n, m, count):
        insts = [generate_mkp(n, m, seed + k, name=f"mkp_{k + 1}") for k in range(count)]
        reparsed = load_mkp_orlib(dump_mkp_orlib(insts))
        assert reparsed == insts


class TestQkpFormat:
    def test_crafted(self):
        inst = load_qkp(QKP_TOY)
        assert inst.name == "toy"
        assert inst.W.tolist() == [[0, 4], [4, 0]]
        assert inst.h.tolist() == [3, 1]
        assert inst.A.tolist() == [2, 3]
        assert inst.b == 4

    def test_line_endings(self):
        assert load_qkp(QKP_TOY.replace("\n", "\r\n")) == load_qkp(QKP_TOY)

    def test_symmetric(self):
        inst = load_qkp(dump_qkp(generate_qkp(9, 0.4, seed=1)))
        np.testing.assert_array_equal(inst.W, inst.W.T)

    def test_truncated(self):
        with pytest.raises(ParseError, match="weight"):
            load_qkp(QKP_TOY.rsplit("3", 1)[0])

    def test_equality_constraint_rejected(self):
        with pytest.raises(ParseError, match="type"):
            load_qkp(QKP_TOY.replace("\n0\n", "\n1\n"))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.integers(2, 15), st.floats(0.05, 1.0))
    def test_round_trip(self, seed, n, density):
        inst = generate_qkp(n, density, seed, name="r")
        again = load_qkp(dump_qkp(inst))
        assert again == QkpInstance("r", inst.W, inst.h, inst.A, inst.b)


class TestCanonical:
    @pytest.mark.parametrize("inst", [generate_qkp(8, 0.5, seed=4), generate_mkp(6, 3, seed=2)])
    def test_round_trip(self, inst):
        text = to_json(inst)
        assert '"version": 1' in text
        assert from_json(text) == inst

    def test_opt_survives(self):
        inst = MkpInstance("t", [5, 3], [[4, 2]], [6], opt=-8.0)
        assert from_json(to_json(inst)).opt == -8.0

    def test_wrong_version(self):
        text = to_json(generate_mkp(3, 1, seed=0)).replace('"version": 1', '"version": 99')
        with pytest.raises(ParseError, match="version"):
            from_json(text)

    def test_load_file_sniffs(self, tmp_path):
        qkp = generate_qkp(5, 0.5, seed=0)
        mkp = generate_mkp(5, 2, seed=0)
        (tmp_path / "a.json").write_text(to_json(qkp))
        (tmp_path / "b.txt").write_text(dump_qkp(qkp))
        (tmp_path / "c.txt").write_text(dump_mkp_orlib([mkp]))
        assert load_file(tmp_path / "a.json") == [qkp]
        assert load_file(tmp_path / "b.txt")[0].W.tolist() == qkp.W.tolist()
        assert load_file(tmp_path / "c.txt")[0].A.tolist() == mkp.A.tolist()


class TestGenerators:
    def test_full_density(self):
        inst = generate_qkp(20, 1.0, seed=3)
        assert np.count_nonzero(np.triu(inst.W, 1)) == 20 * 19 // 2

    def test_deterministic(self):
        assert generate_qkp(30, 0.3, seed=5) == generate_qkp(30, 0.3, seed=5)
        assert generate_mkp(30, 5, seed=5) == generate_mkp(30, 5, seed=5)
        assert generate_qkp(30, 0.3, seed=5) != generate_qkp(30, 0.3, seed=6)

    @pytest.mark.parametrize("density", [0.25, 0.5, 0.75])
    def test_density_concentration(self, density):
        n = 200
        pairs = n * (n - 1) // 2
        frac = np.count_nonzero(np.triu(generate_qkp(n, density, seed=1).W, 1)) / pairs
        assert abs(frac - density) < 3 * np.sqrt(density * (1 - density) / pairs)

    def test_capacity_range(self):
        for seed in range(20):
            inst = generate_qkp(15, 0.5, seed)
            assert inst.A.max() <= inst.b <= inst.A.sum()

    def test_mkp_tightness(self):
        inst = generate_mkp(50, 5, seed=0, tightness=0.25)
        np.testing.assert_array_equal(inst.B, np.floor(0.25 * inst.A.sum(axis=1)))

    @pytest.mark.parametrize("kwargs", [dict(n=1, density=0.5), dict(n=5, density=0.0), dict(n=5, density=0.5, value_range=(5, 1))])
    def test_bad_arguments(self, kwargs):
        with pytest.raises(ValueError):
            generate_qkp(seed=0, **kwargs)


class TestToProblem:
    def test_mkp_toy(self):
        prob = to_problem(MkpInstance("t", [5, 3], [[4, 2]], [6]))
        np.testing.assert_array_equal(prob.W, 0)
        np.testing.assert_array_equal(prob.h, [-5, -3])
        assert evaluate_f(prob, [1, 1]) == -8

    def test_qkp_toy(self):
        prob = to_problem(load_qkp(QKP_TOY))
        assert evaluate_f(prob, [1, 1]) == -8

    def test_zero_vector_feasible(self):
        prob = to_problem(generate_mkp(6, 3, seed=1))
        assert np.all(prob.A @ np.zeros(6) <= prob.b)

    @pytest.mark.parametrize("seed", range(3))
    def test_preserves_optimum(self, seed):
        for inst in (generate_qkp(10, 0.6, seed), generate_mkp(10, 2, seed, weight_range=(1, 30))):
            assert exhaustive_solve(to_problem(inst)).value == -brute_max_value(inst)
