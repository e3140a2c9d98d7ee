import math
from fractions import Fraction

import numpy as np
import pytest

from bszeta.graphzeta import (BudgetExceeded, DegreeTooSmall, Graph, RadiusViolation, bareiss_det,
                              complete_graph, cycle_graph, disjoint_union, divisor_walk_counts,
                              ihara_inv_bass, log_deriv_ihara, nb_det, nb_operator, nb_walk_counts,
                              petersen_graph, primitive_cycle_census, random_min_degree2_graph,
                              random_regular_graph, read_edge_list, tree_ball_fraction, write_edge_list)


def brute_closed_walks(g, m):
    """Count cyclically non-backtracking closed edge walks of length m by DFS."""
    de = g.directed_edges()
    out = {}
    for i, (u, v) in enumerate(de):
        out.setdefault(u, []).append(i)
    total = 0

    def rec(first, e, k):
        nonlocal total
        if k == m:
            if de[e][1] == de[first][0] and first != (e ^ 1):
                total += 1
            return
        for f in out[de[e][1]]:
            if f != (e ^ 1):
                rec(first, f, k + 1)

    for e in range(len(de)):
        rec(e, e, 1)
    return total


def test_graph_validation():
    with pytest.raises(ValueError, match="loop"):
        Graph(3, [(0, 0)])
    with pytest.raises(ValueError, match="multi-edge"):
        Graph(3, [(0, 1), (1, 0)])
    with pytest.raises(ValueError, match="range"):
        Graph(3, [(0, 3)])


def test_nb_operator_shapes():
    B = nb_operator(cycle_graph(3))
    assert B.shape == (6, 6)
    assert np.all(np.asarray(B.sum(axis=1)).ravel() == 1)
    B = nb_operator(complete_graph(4))
    assert B.shape == (12, 12)
    assert np.all(np.asarray(B.sum(axis=1)).ravel() == 2)


def test_nb_operator_no_reversal():
    g = petersen_graph()
    B = nb_operator(g).toarray()
    for k in range(g.m):
        assert B[2 * k, 2 * k + 1] == 0 and B[2 * k + 1, 2 * k] == 0


def test_degree_one_rejected():
    path = Graph(3, [(0, 1), (1, 2)])
    with pytest.raises(DegreeTooSmall):
        nb_operator(path)
    with pytest.raises(DegreeTooSmall):
        ihara_inv_bass(path, Fraction(1, 3))


def test_u_zero_gives_one():
    for g in (cycle_graph(5), complete_graph(4), petersen_graph()):
        assert ihara_inv_bass(g, 0) == 1
        assert nb_det(g, 0) == 1


@pytest.mark.parametrize("n", range(3, 9))
def test_cycles_closed_form(n):
    u = Fraction(1, 2)
    assert ihara_inv_bass(cycle_graph(n), u) == (1 - u ** n) ** 2
    assert nb_det(cycle_graph(n), u) == (1 - u ** n) ** 2


def test_c3_half():
    assert ihara_inv_bass(cycle_graph(3), Fraction(1, 2)) == Fraction(49, 64)


def test_bass_matches_primitive_product_c5():
    # prime cycles of C_5: two of length 5; product over them of (1 - u^5)
    census = primitive_cycle_census(cycle_graph(5), 15)
    assert census == [(5, 2)]
    u = Fraction(1, 3)
    prod = Fraction(1)
    for length, count in census:
        prod *= (1 - u ** length) ** count
    assert ihara_inv_bass(cycle_graph(5), u) == prod


def test_bareiss():
    assert bareiss_det([[2, 1], [1, 3]]) == 5
    assert bareiss_det([[0, 1], [1, 0]]) == -1
    assert bareiss_det([[1, 2], [2, 4]]) == 0
    rng = np.random.default_rng(0)
    M = rng.integers(-5, 6, size=(6, 6))
    assert bareiss_det(M.tolist()) == round(np.linalg.det(M))


def test_walk_counts_against_brute_force():
    for g in (complete_graph(4), petersen_graph(), random_min_degree2_graph(7, 4, seed=2)):
        counts = nb_walk_counts(g, 7)
        assert counts == [brute_closed_walks(g, m) for m in range(1, 8)]


def test_walk_counts_girth():
    g = cycle_graph(9)
    assert nb_walk_counts(g, 8) == [0] * 8
    assert nb_walk_counts(g, 9)[-1] == 18


def test_census_examples():
    assert primitive_cycle_census(cycle_graph(3), 3) == [(3, 2)]
    census = dict(primitive_cycle_census(complete_graph(4), 3))
    assert census[3] == 8


def test_petersen_census_and_divisor_sums():
    g = petersen_graph()
    census = primitive_cycle_census(g, 10)
    assert census == [(5, 24), (6, 20), (8, 30), (9, 40), (10, 120)]
    assert divisor_walk_counts(census, 10) == nb_walk_counts(g, 10)


def test_census_budget():
    with pytest.raises(BudgetExceeded):
        primitive_cycle_census(complete_graph(6), 10, budget=1000)


def test_log_deriv_matches_bass_derivative():
    g = petersen_graph()
    u = Fraction(1, 4)
    ld = log_deriv_ihara(g, u, 40)
    f = lambda x: math.log(float(ihara_inv_bass(g, Fraction(x).limit_denominator(10 ** 12))))
    h = 1e-6
    deriv = -(f(0.25 + h) - f(0.25 - h)) / (2 * h)
    assert float(ld.value) == pytest.approx(0.25 * deriv, rel=1e-6)
    assert ld.tail_bound < Fraction(1, 10 ** 8)


def test_log_deriv_tail_bound_holds():
    g = random_regular_graph(20, 3, seed=4)
    u = Fraction(1, 3)
    short, full = log_deriv_ihara(g, u, 8), log_deriv_ihara(g, u, 60)
    assert 0 <= full.value - short.value <= short.tail_bound


def test_radius_violation():
    with pytest.raises(RadiusViolation):
        log_deriv_ihara(complete_graph(4), Fraction(1, 2), 5)


def test_tree_ball_fraction_cycles():
    # the induced ball of radius R in C_n is a path iff n >= 2R + 2
    assert tree_ball_fraction(cycle_graph(8), 3) == 0.0
    assert tree_ball_fraction(cycle_graph(20), 3) == 0.0
    assert tree_ball_fraction(cycle_graph(7), 3) == 1.0
    assert tree_ball_fraction(cycle_graph(5), 3) == 1.0
    with pytest.raises(ValueError):
        tree_ball_fraction(cycle_graph(5), 0)


def test_tree_ball_fraction_petersen():
    g = petersen_graph()
    assert tree_ball_fraction(g, 1) == 0.0
    assert tree_ball_fraction(g, 2) == 1.0


def test_tree_ball_fraction_mixed():
    g = disjoint_union(cycle_graph(3), cycle_graph(12))
    assert tree_ball_fraction(g, 2) == pytest.approx(3 / 15)


def test_random_regular():
    g = random_regular_graph(30, 3, seed=7)
    assert g.degrees() == [3] * 30
    assert g.edges == random_regular_graph(30, 3, seed=7).edges
    assert g.edges != random_regular_graph(30, 3, seed=8).edges
    with pytest.raises(ValueError):
        random_regular_graph(5, 3, seed=1)


def test_random_min_degree2():
    g = random_min_degree2_graph(9, 5, seed=3)
    assert min(g.degrees()) >= 2 and g.is_connected() and g.m == 14


def test_edge_list_roundtrip(tmp_path):
    g = petersen_graph()
    write_edge_list(g, tmp_path / "p.txt")
    assert read_edge_list(tmp_path / "p.txt").edges == g.edges
    (tmp_path / "bad.txt").write_text("0 1\n1\n")
    with pytest.raises(ValueError, match="bad.txt:2"):
        read_edge_list(tmp_path / "bad.txt")
