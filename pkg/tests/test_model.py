import json

import numpy as np
import pytest

from hqbenders.errors import DimensionError, ParseError, TooLarge
from hqbenders.model import (
    Cut,
    CutKind,
    MasterState,
    MilpInstance,
    Status,
    binary_points,
    brute_force_milp,
    check_feasible,
    evaluate_objective,
    parse_instance,
    rationalize,
    serialize_instance,
)

from conftest import random_milp


def test_paper_instance_shape(paper):
    assert (paper.n, paper.p, paper.m) == (2, 4, 9)
    assert paper.x_only_rows() == [4]
    assert paper.is_integral()


def test_minimal_document_parses():
    doc = {"n": 1, "p": 0, "m": 1, "A": [[1]], "G": [[]], "b": [1], "c": [1], "h": []}
    inst = parse_instance(json.dumps(doc))
    assert inst.G.shape == (1, 0)
    assert parse_instance(json.dumps({**doc, "G": []})) == inst


def test_row_count_mismatch(paper):
    doc = paper.to_dict()
    doc["A"] = doc["A"][:8]
    with pytest.raises(DimensionError):
        parse_instance(json.dumps(doc))


@pytest.mark.parametrize(
    "text, exc",
    [
        ("{not json", ParseError),
        ("[1, 2]", ParseError),
        ('{"n": 1}', ParseError),
        ('{"n": 1, "p": 0, "m": 1, "A": [[NaN]], "G": [[]], "b": [1], "c": [1], "h": []}', ValueError),
        ('{"n": 1, "p": 1, "m": 1, "A": [[1]], "G": [[1, 2]], "b": [1], "c": [1], "h": [1]}', DimensionError),
    ],
)
def test_parse_errors(text, exc):
    with pytest.raises(exc):
        parse_instance(text)


def test_instance_is_immutable(paper):
    with pytest.raises(ValueError):
        paper.A[0, 0] = 3.0


def test_round_trip_random():
    rng = np.random.default_rng(5)
    for _ in range(50):
        inst = random_milp(rng, p_min=0)
        assert parse_instance(serialize_instance(inst)) == inst


def test_objective_examples(paper):
    assert evaluate_objective(paper, [1, 0], [1, 1, 0, 0]) == 2
    assert evaluate_objective(paper, [1, 1], [1, 1, 0, 0]) == -8
    assert evaluate_objective(paper, [0, 0], [0, 0, 0, 0]) == 0
    with pytest.raises(DimensionError):
        evaluate_objective(paper, [1, 0, 0], [0, 0, 0, 0])


def test_check_feasible_examples(paper):
    assert check_feasible(paper, [1, 0], [1, 1, 0, 0], 1e-9).feasible
    res = check_feasible(paper, [0, 0], [0, 0, 0, 0], 1e-9)
    assert not res.feasible
    assert [(v.kind, v.index, v.amount) for v in res.violations] == [("row", 4, 1.0)]
    inst = MilpInstance.from_arrays([1, 1], [1], np.zeros((2, 2)), np.zeros((2, 1)), [1, 1])
    assert check_feasible(inst, [0, 0], [0]).feasible


def test_oracle_paper(paper):
    res = brute_force_milp(paper)
    assert res.status is Status.OPTIMAL
    assert res.x.tolist() == [1, 0]
    assert res.objective == pytest.approx(2, abs=1e-9)
    assert res.y.tolist() == pytest.approx([1, 1, 0, 0])


def test_oracle_small_cases():
    constant_row = MilpInstance.from_arrays([1], [1], [[0]], [[0]], [-1])
    assert brute_force_milp(constant_row).status is Status.INFEASIBLE
    single = MilpInstance(n=1, p=0, m=1, c=[5], h=[], A=[[1]], G=np.zeros((1, 0)), b=[1])
    res = brute_force_milp(single)
    assert (res.status, res.x.tolist(), res.objective) == (Status.OPTIMAL, [1], 5)
    big = MilpInstance.from_arrays(np.zeros(21), [1], np.zeros((1, 21)), [[1]], [1])
    with pytest.raises(TooLarge):
        brute_force_milp(big)


def test_oracle_beats_random_feasible_points():
    rng = np.random.default_rng(11)
    checked = 0
    for _ in range(60):
        inst = random_milp(rng)
        res = brute_force_milp(inst)
        if res.status is not Status.OPTIMAL:
            continue
        assert check_feasible(inst, res.x, res.y, 1e-6)
        for _ in range(30):
            x = rng.integers(0, 2, inst.n).astype(float)
            y = rng.uniform(0, 3, inst.p)
            if check_feasible(inst, x, y, 0):
                checked += 1
                assert res.objective >= evaluate_objective(inst, x, y) - 1e-6
    assert checked > 0


def test_binary_points_order():
    assert [p.tolist() for p in binary_points(2)] == [[0, 0], [0, 1], [1, 0], [1, 1]]


def test_cut_validation_and_dedup():
    with pytest.raises(ValueError):
        Cut(CutKind.OPTIMALITY, [-1.0, 0.0])
    with pytest.raises(ValueError):
        Cut(CutKind.FEASIBILITY, [0.0, 0.0])
    state = MasterState()
    assert state.add(Cut(CutKind.OPTIMALITY, [1.0, 2.0]))
    assert not state.add(Cut(CutKind.OPTIMALITY, [1.0, 2.0 + 1e-12]))
    assert state.add(Cut(CutKind.FEASIBILITY, [1.0, 2.0]))
    assert len(state.optimality_cuts) == len(state.feasibility_cuts) == 1


def test_rationalize():
    assert rationalize([0.5, 1 / 3, 2]) == 6
    assert rationalize([1, 2]) == 1
    assert rationalize([np.pi], max_denominator=100) is None
