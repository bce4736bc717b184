import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from hqbenders.encoding import TEncoding, decode_t, t_range
from hqbenders.errors import ConfigError, DimensionError
from hqbenders.model import Cut, CutKind, MasterState, MilpInstance
from hqbenders.qubo import (
    PenaltyConfig,
    QuboMatrix,
    VariableLayout,
    auto_penalty,
    build_master_qubo,
    format_legend,
    format_qubo,
    parse_qubo,
    penalize_inequality,
    qubo_energy,
    verify_sample,
)
from hqbenders.samplers import solve_exhaustive
from hqbenders.subproblem import solve_dual

from conftest import all_bits, check_penalty_equivalence, random_master


def _energies(terms, names):
    """Evaluate an expanded quadratic on every assignment of ``names``."""
    out = []
    for bits in all_bits(len(names)):
        val = dict(zip(names, bits))
        e = terms.constant + sum(v * val[k] for k, v in terms.linear.items())
        e += sum(v * val[a] * val[b] for (a, b), v in terms.quadratic.items())
        out.append(e)
    return np.array(out)


def test_equality_penalty_table():
    terms = penalize_inequality({"x1": 1, "x2": 1}, 1, P=3.0, slack_width=0)
    assert _energies(terms, ["x1", "x2"]).tolist() == [3, 0, 0, 3]


def test_inequality_penalty_with_slack():
    terms = penalize_inequality({"x1": 1, "x2": 1}, 1, P=2.0, slack_width=1)
    e = _energies(terms, ["x1", "x2", ("s", 0)]).reshape(2, 2, 2)
    best = e.min(axis=2)
    assert best.tolist() == [[0, 0], [0, 2]]


def test_null_constraint():
    terms = penalize_inequality({"x1": 0}, 0, P=5.0, slack_width=0)
    assert terms.linear == {} and terms.quadratic == {} and terms.constant == 0


def test_energy_examples():
    q = QuboMatrix([[1, 0.5], [0.5, 2]])
    assert qubo_energy(q, [1, 1]) == 4
    assert qubo_energy(QuboMatrix(np.eye(3), offset=2.5), [0, 0, 0]) == 2.5
    with pytest.raises(DimensionError):
        qubo_energy(q, [1, 0, 1])


def test_asymmetric_input_is_symmetrized():
    rng = np.random.default_rng(0)
    Q = rng.normal(size=(5, 5))
    a, b = QuboMatrix(Q), QuboMatrix((Q + Q.T) / 2)
    for bits in all_bits(5):
        assert qubo_energy(a, bits) == pytest.approx(qubo_energy(b, bits))


def test_empty_master_paper(paper):
    qubo, layout = build_master_qubo(paper, MasterState(), TEncoding(4))
    assert qubo.N == 8 and qubo.offset == 0
    assert np.diag(qubo.Q).tolist() == [15, 10, -1, -2, -4, -8, -16, 1]
    assert not np.any(qubo.Q - np.diag(np.diag(qubo.Q)))
    rng = np.random.default_rng(1)
    for bits in rng.integers(0, 2, (20, 8)):
        t = decode_t(bits[2:], TEncoding(4))
        assert qubo_energy(qubo, bits) == -(paper.c @ bits[:2] + t)


def test_slack_sizing_example():
    # u.b = 5 and u.A = (1, 1)
    inst = MilpInstance.from_arrays([0, 0], [1], [[1, 1]], [[1]], [5])
    state = MasterState([Cut(CutKind.OPTIMALITY, [1.0])])
    qubo, layout = build_master_qubo(inst, state, TEncoding(1))
    assert [b.size for b in layout.slack_blocks] == [4]
    assert qubo.N == 9


def test_zero_objective_touches_only_w():
    inst = MilpInstance.from_arrays([0, 0], [1], [[1, 1]], [[1]], [5])
    qubo, _ = build_master_qubo(inst, MasterState(), TEncoding(2, 0, 1))
    nz = np.argwhere(qubo.Q)
    assert all(i == j and 2 <= i < 7 for i, j in nz)


def test_auto_penalty_examples(paper):
    assert auto_penalty(paper, MasterState(), TEncoding(4)) == 114
    zero = MilpInstance.from_arrays([0], [1], [[1]], [[1]], [1])
    # objective range is t_max - t_min = 1 - (-1)
    assert auto_penalty(zero, MasterState(), TEncoding(0)) == 4
    # halving the grid quadruples the weight per unit of range
    for enc in (TEncoding(2, 0, 0), TEncoding(2, 1, 0), TEncoding(2, 2, 1)):
        lo, hi = t_range(enc)
        assert auto_penalty(zero, MasterState(), enc) == 2 * (hi - lo) * 4**enc.m_frac


def test_penalty_config_validation():
    with pytest.raises(ConfigError):
        PenaltyConfig(mode="wild")
    with pytest.raises(ConfigError):
        PenaltyConfig(mode="fixed", fixed_value=0)
    with pytest.raises(ConfigError):
        PenaltyConfig(escalation_factor=1)


def _paper_state(paper):
    state = MasterState()
    state.add(Cut(CutKind.OPTIMALITY, solve_dual(paper, [1, 0]).u))
    return state


def test_verify_examples(paper):
    enc = TEncoding(4)
    empty, layout = build_master_qubo(paper, MasterState(), enc)
    layout0 = layout
    assert verify_sample(np.ones(8), layout0, paper, MasterState(), enc).feasible
    state = _paper_state(paper)
    _, layout = build_master_qubo(paper, state, enc)
    tight = layout.encode([1, 0], [1, 0, 0, 0, 1, 0])
    res = verify_sample(tight, layout, paper, state, enc)
    assert res.feasible and res.t == 17
    over = layout.encode([1, 0], [1, 1, 1, 1, 1, 0])
    res = verify_sample(over, layout, paper, state, enc)
    assert not res.feasible and res.violated == [(0, 14.0)]


def test_zero_residual_energy_and_monotone_penalty(paper):
    enc = TEncoding(4)
    state = _paper_state(paper)
    q1, layout = build_master_qubo(paper, state, enc)
    q2, _ = build_master_qubo(paper, state, enc, multiplier=10)
    feasible_seen = 0
    for bits in all_bits(q1.N):
        e1, e2 = qubo_energy(q1, bits), qubo_energy(q2, bits)
        x, w = layout.decode(bits)
        objective = -(paper.c @ x + decode_t(w, enc))
        if e1 == objective:
            feasible_seen += 1
            assert e2 == objective
        else:
            assert e1 > objective and e2 >= e1
    assert feasible_seen > 0


def test_layout_round_trip():
    layout = VariableLayout.build(3, 4, [2, 0, 3])
    assert layout.N == 12
    starts = [b.start for b in layout.blocks]
    assert starts == sorted(starts) and layout.blocks[-1].stop == 12
    x, w = np.array([1, 0, 1.0]), np.array([0, 1, 1, 0.0])
    got = layout.decode(layout.encode(x, w))
    assert np.array_equal(got[0], x) and np.array_equal(got[1], w)


def test_dump_round_trip_and_legend(paper):
    enc = TEncoding(4)
    qubo, layout = build_master_qubo(paper, _paper_state(paper), enc)
    text = format_qubo(qubo)
    assert text.splitlines()[0] == f"{qubo.N} {int(qubo.offset)}"
    back = parse_qubo(text)
    assert np.array_equal(back.Q, qubo.Q) and back.offset == qubo.offset
    legend = format_legend(layout, enc).splitlines()
    assert legend[2] == "2 w[0] weight=1" and legend[-1].endswith("s[0][5]")


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_penalty_equivalence_property(seed):
    assert check_penalty_equivalence(*random_master(np.random.default_rng(seed)))
