import itertools

import pytest
from hypothesis import given
from hypothesis import strategies as st

from beepsim.algorithms import make_program, mis_program
from beepsim.engine import (
    B_LCD,
    BCD_L,
    BCD_LCD,
    BEEP,
    BL,
    LISTEN,
    Action,
    ModelMismatch,
    ModelSpec,
    NodeProgram,
    Observation,
    ProgramFactory,
    coarsen,
    default_max_slots,
    observe,
    run,
)
from beepsim.graph import atlas_graphs, make_complete, make_empty, make_ring

MODELS = (BL, BCD_L, B_LCD, BCD_LCD)


def test_observe_examples():
    for m in MODELS:
        assert observe(LISTEN, 0, m) is Observation.SILENCE
    assert observe(LISTEN, 2, B_LCD) is Observation.HEARD_TWO_PLUS
    assert observe(BEEP, 1, BCD_L) is Observation.BEEPED_WITH_COLLISION
    assert observe(LISTEN, 3, BL) is Observation.HEARD_BEEP


@given(st.sampled_from([LISTEN, BEEP]), st.integers(0, 50), st.sampled_from(MODELS))
def test_coarsening_from_strongest_model(action, count, model):
    assert observe(action, count, model) is coarsen(observe(action, count, BCD_LCD), model)


@given(st.integers(0, 50))
def test_bl_loses_all_detail(count):
    assert observe(BEEP, count, BL) is Observation.BEEPED_BLIND
    assert observe(LISTEN, count, BL) is (Observation.SILENCE if count == 0 else Observation.HEARD_BEEP)


def test_model_names_and_parse():
    assert [m.name for m in MODELS] == ["BL", "BcdL", "BLcd", "BcdLcd"]
    assert ModelSpec.parse("B_cd·L_cd") == BCD_LCD
    assert ModelSpec.parse("bcdl") == BCD_L
    with pytest.raises(ValueError):
        ModelSpec.parse("XL")
    assert BCD_LCD.provides(BCD_L) and not BCD_L.provides(B_LCD)


class _Fixed(NodeProgram):
    """Beeps according to a fixed schedule and records what it saw."""

    def __init__(self, pattern):
        self.pattern = pattern
        self.seen = []

    def act(self, phase, slot):
        return BEEP if self.pattern else LISTEN

    def absorb(self, obs):
        self.seen.append(obs)

    def decision(self):
        return self.seen[0] if self.seen else None


def test_listener_silence_iff_no_beeping_neighbour_brute_force():
    for g in atlas_graphs(5):
        n = g.node_count
        for bits in itertools.product((False, True), repeat=n):
            progs = {}

            def build(rng, bits=bits):
                p = _Fixed(bits[rng.index])
                progs[rng.index] = p
                return p

            rep = run(g, BCD_LCD, ProgramFactory("fixed", BCD_LCD, 1, build), 0)
            assert rep.phases_elapsed == 1
            for v in range(n):
                obs = progs[v].seen[0]
                beeping = sum(bits[w] for w in g.adjacency[v])
                if not bits[v]:
                    assert (obs is Observation.SILENCE) == (beeping == 0)
                else:
                    # own beep never counts
                    assert (obs is Observation.BEEPED_ALONE) == (beeping == 0)


class _DecideZero(NodeProgram):
    def act(self, phase, slot):
        raise AssertionError("should never be scheduled")

    def decision(self):
        return 0


def test_immediately_decided_programs_run_zero_phases():
    f = ProgramFactory("zero", BL, 1, lambda rng: _DecideZero())
    rep = run(make_empty(4), BL, f, 1)
    assert rep.phases_elapsed == 0 and rep.slots_elapsed == 0
    assert rep.outputs == (0, 0, 0, 0)
    assert not rep.aborted


def test_determinism():
    g = make_ring(11)
    f = make_program("two_hop_colouring")
    assert run(g, BCD_LCD, f, 5, trace=True) == run(g, BCD_LCD, f, 5, trace=True)


def test_mis_on_k2_every_seed():
    f = mis_program()
    for seed in range(300):
        rep = run(make_complete(2), BCD_L, f, seed)
        assert sorted(rep.outputs) == [False, True]


def test_model_mismatch_and_bad_slots():
    f = mis_program()
    with pytest.raises(ModelMismatch):
        run(make_complete(2), BCD_LCD, f, 0)
    with pytest.raises(ValueError):
        run(make_complete(2), BCD_L, f, 0, slots_per_phase=3)
    with pytest.raises(ValueError):
        run(make_complete(2), BCD_L, f, 0, max_slots=0)


class _Never(NodeProgram):
    def act(self, phase, slot):
        return LISTEN

    def absorb(self, obs):
        pass


def test_abort_report_when_budget_runs_out():
    f = ProgramFactory("never", BL, 3, lambda rng: _Never())
    rep = run(make_ring(4), BL, f, 0, max_slots=10)
    assert rep.aborted
    # a phase that would overrun the budget never starts
    assert rep.slots_elapsed == 9 and rep.phases_elapsed == 3
    assert rep.outputs == (None,) * 4


def test_default_budget_formula():
    import math

    g = make_complete(16)
    expected = math.ceil(10 * (76 * 4 + 20 * 15 + 180 * math.log(16) + 100))
    assert default_max_slots(g) == expected


def test_decision_slot_and_trace_shapes():
    g = make_ring(6)
    rep = run(g, BCD_L, mis_program(), 3, trace=True)
    assert len(rep.trace) == rep.phases_elapsed
    assert all(len(ph.actions) == 2 for ph in rep.trace)
    for v, s in enumerate(rep.decision_slot):
        assert s is not None and 0 <= s < rep.slots_elapsed
        # MIS decides at the second slot of a phase
        assert s % 2 == 1


def test_lock_step_actions_precede_observations():
    # a node's slot-t observation must reflect every neighbour's slot-t action
    g = make_complete(3)
    rep = run(g, BCD_L, mis_program(), 8, trace=True)
    for ph in rep.trace:
        for acts, obs in zip(ph.actions, ph.observations):
            for v in range(3):
                if acts[v] is None:
                    continue
                cnt = sum(acts[w] == BEEP for w in g.adjacency[v])
                assert obs[v] is observe(acts[v], cnt, BCD_L)


def test_action_values():
    assert int(Action.BEEP) == 1 and int(Action.LISTEN) == 0
