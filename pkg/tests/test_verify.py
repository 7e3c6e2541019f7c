import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from beepsim.algorithms import make_program
from beepsim.engine import BCD_L, run
from beepsim.graph import make_complete, make_erdos_renyi, make_path, make_ring, make_star, square
from beepsim.kernels import simulate
from beepsim.verify import (
    ALPHA,
    ViolationKind,
    check_colouring,
    check_degrees,
    check_mis,
    check_output,
    check_two_hop_colouring,
    check_two_hop_mis,
    colouring_measure,
    f_potential,
    mis_survival_bound,
    trace_potentials,
)
from conftest import graphs


def kinds(vs):
    return [v.kind for v in vs]


def test_check_colouring_examples():
    k2 = make_complete(2)
    assert check_colouring(k2, [0, 1]) == []
    assert kinds(check_colouring(k2, [0, 0])) == [ViolationKind.EDGE_CONFLICT]
    assert kinds(check_colouring(k2, [0, 3], palette=2)) == [ViolationKind.OUT_OF_PALETTE]
    assert kinds(check_colouring(k2, [0, None])) == [ViolationKind.UNDECIDED]


def test_colouring_output_on_c5_is_clean():
    g = make_ring(5)
    for seed in range(200):
        assert check_colouring(g, simulate("colouring", g, seed).outputs) == []


def test_two_hop_colouring_checker():
    p3 = make_path(3)
    assert len(check_two_hop_colouring(p3, [0, 1, 0])) == 1
    assert check_two_hop_colouring(p3, [0, 1, 2]) == []
    g = make_ring(8)
    for seed in range(100):
        assert check_two_hop_colouring(g, simulate("two_hop_colouring", g, seed).outputs) == []


def test_check_mis_examples():
    k3 = make_complete(3)
    assert check_mis(k3, [True, False, False]) == []
    assert kinds(check_mis(k3, [False, False, False])) == [ViolationKind.NOT_MAXIMAL] * 3
    assert kinds(check_mis(k3, [True, True, False])) == [ViolationKind.NOT_INDEPENDENT]
    assert check_mis(make_path(5), [True, False, True, False, True]) == []


def test_check_two_hop_mis_examples():
    p5 = make_path(5)
    assert check_two_hop_mis(p5, [True, False, False, True, False]) == []
    assert kinds(check_two_hop_mis(p5, [True, False, True, False, False])) == [ViolationKind.NOT_INDEPENDENT]
    assert kinds(check_two_hop_mis(p5, [True, False, False, False, False])) == [ViolationKind.NOT_MAXIMAL] * 2


def test_check_degrees_examples():
    star = make_star(4)
    assert check_degrees(star, [4, 1, 1, 1, 1]) == []
    assert kinds(check_degrees(star, [3, 1, 1, 1, 1])) == [ViolationKind.WRONG_DEGREE]
    g = make_erdos_renyi(64, 0.2, 9)
    for seed in range(20):
        assert check_degrees(g, simulate("degree", g, seed).outputs) == []


@given(graphs(max_nodes=8), st.data())
def test_two_hop_checkers_equal_square_checks(g, data):
    n = g.node_count
    colours = data.draw(st.lists(st.integers(0, 3), min_size=n, max_size=n))
    member = data.draw(st.lists(st.booleans(), min_size=n, max_size=n))
    sq = square(g)
    assert check_two_hop_colouring(g, colours) == check_colouring(sq, colours)
    assert check_two_hop_mis(g, member) == check_mis(sq, member)
    # deterministic
    assert check_mis(g, member) == check_mis(g, member)


def test_check_output_dispatch():
    with pytest.raises(ValueError):
        check_output("nope", make_complete(1), [0])


# ---------------------------------------------------------------------------
# analysis quantities


def test_survival_bound_anchors():
    assert mis_survival_bound(0.5, 0.2, 0) == pytest.approx(ALPHA**2)
    assert ALPHA**2 == pytest.approx(1.0392, abs=1e-4)
    assert mis_survival_bound(0.5, 0.2, 2) == pytest.approx(1.0)
    n = 1024
    b = mis_survival_bound(0.5, n / 2, 76 * math.log2(n))
    assert b < n**-2


@pytest.mark.parametrize("p", [0.0, 0.6, -1.0])
def test_survival_bound_rejects_p(p):
    with pytest.raises(ValueError):
        mis_survival_bound(p, 1.0, 0)
    with pytest.raises(ValueError):
        colouring_measure(p, 1.0, 0)


def test_measure_and_f_anchors():
    assert colouring_measure(0.5, 0.5, 0) == pytest.approx(3.0)
    assert f_potential(1) == 4 and f_potential(2) == 6
    assert f_potential(2) - f_potential(1) == 2
    # linear between f(2) = 6 and f(4) = 8
    assert f_potential(3) == pytest.approx(7.0)
    assert colouring_measure(0.25, 0.0, 2) == pytest.approx(22.0)


@pytest.mark.parametrize("i", range(-5, 11))
def test_f_continuous_at_powers_of_two(i):
    q = 2.0**i
    assert abs(f_potential(q + 1e-9) - f_potential(q - 1e-9)) < 1e-6


@given(st.floats(1.0, 1e6))
def test_f_doubling_adds_two(q):
    assert f_potential(2 * q) - f_potential(q) == pytest.approx(2.0)


def test_potentials_on_triangle_first_phase():
    g = make_complete(3)
    rep = run(g, BCD_L, make_program("mis"), 1, trace=True)
    first = trace_potentials(rep, g)[0]
    assert all(pt.q == pytest.approx(1.0) and pt.d == 2 for pt in first)


def test_potentials_need_trace():
    g = make_complete(3)
    rep = run(g, BCD_L, make_program("mis"), 1)
    with pytest.raises(ValueError):
        trace_potentials(rep, g)


@given(graphs(max_nodes=9), st.integers(0, 2**32), st.sampled_from(["mis", "colouring", "two_hop_mis"]))
def test_potentials_match_matrix_recomputation(g, seed, name):
    f = make_program(name)
    rep = run(g, f.model, f, seed, trace=True)
    pots = trace_potentials(rep, g)
    A = np.zeros((g.node_count, g.node_count))
    for u, v in g.edges():
        A[u, v] = A[v, u] = 1
    for ph, row in zip(rep.trace, pots):
        alive = np.array(ph.contending, dtype=float)
        p = np.array([x if x is not None else 0.0 for x in ph.p]) * alive
        q = A @ p
        d = A @ alive
        for v in range(g.node_count):
            if not ph.contending[v]:
                assert row[v] is None
            else:
                assert row[v].q == pytest.approx(q[v]) and row[v].d == d[v]


def test_decided_nodes_leave_q():
    g = make_star(3)
    rep = run(g, BCD_L, make_program("mis"), 5, trace=True)
    pots = trace_potentials(rep, g)
    for ph, row in zip(rep.trace, pots):
        if ph.contending[0]:
            live_leaves = [v for v in (1, 2, 3) if ph.contending[v]]
            assert row[0].d == len(live_leaves)
