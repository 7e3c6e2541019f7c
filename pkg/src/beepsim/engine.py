"""Lock-step slot engine for beeping networks.

Each slot the engine collects one action per node, counts beeping
neighbours and hands every node its observation under the chosen model.
Runs are pure functions of (graph, model, factory, seed, max_slots).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Callable, Optional

from .graph import Graph, max_degree
from .rng import NodeStream, derive_node_stream


class ModelMismatch(ValueError):
    """A program was built for, or run under, an incompatible model."""


class InvariantViolation(RuntimeError):
    """A node program reached a state its algorithm rules out."""


@dataclass(frozen=True)
class ModelSpec:
    beeper_cd: bool
    listener_cd: bool

    @property
    def name(self) -> str:
        return ("Bcd" if self.beeper_cd else "B") + ("Lcd" if self.listener_cd else "L")

    def __str__(self):
        return self.name

    def provides(self, other: "ModelSpec") -> bool:
        """True when every capability of ``other`` is available here."""
        return (self.beeper_cd or not other.beeper_cd) and (self.listener_cd or not other.listener_cd)

    @classmethod
    def parse(cls, text: str) -> "ModelSpec":
        key = text.replace("·", "").replace("_", "").replace(" ", "").lower()
        table = {"bl": BL, "bcdl": BCD_L, "blcd": B_LCD, "bcdlcd": BCD_LCD}
        if key not in table:
            raise ValueError(f"unknown model {text!r}; expected one of BL, BcdL, BLcd, BcdLcd")
        return table[key]


BL = ModelSpec(False, False)
BCD_L = ModelSpec(True, False)
B_LCD = ModelSpec(False, True)
BCD_LCD = ModelSpec(True, True)


class Action(enum.IntEnum):
    LISTEN = 0
    BEEP = 1


class Observation(enum.IntEnum):
    SILENCE = 0
    HEARD_BEEP = 1
    HEARD_ONE = 2
    HEARD_TWO_PLUS = 3
    BEEPED_BLIND = 4
    BEEPED_ALONE = 5
    BEEPED_WITH_COLLISION = 6

    @property
    def heard(self) -> bool:
        """A listener perceived at least one beep."""
        return 0 < self < 4

    @property
    def is_beeper(self) -> bool:
        return self >= Observation.BEEPED_BLIND


LISTEN, BEEP = Action.LISTEN, Action.BEEP
SILENCE = Observation.SILENCE
HEARD_BEEP = Observation.HEARD_BEEP
HEARD_ONE = Observation.HEARD_ONE
HEARD_TWO_PLUS = Observation.HEARD_TWO_PLUS
BEEPED_BLIND = Observation.BEEPED_BLIND
BEEPED_ALONE = Observation.BEEPED_ALONE
BEEPED_WITH_COLLISION = Observation.BEEPED_WITH_COLLISION


def observe(action: Action, beeping_neighbour_count: int, model: ModelSpec) -> Observation:
    """What a node perceives; its own beep is never part of the count."""
    c = beeping_neighbour_count
    if action == BEEP:
        if not model.beeper_cd:
            return BEEPED_BLIND
        return BEEPED_ALONE if c == 0 else BEEPED_WITH_COLLISION
    if c == 0:
        return SILENCE
    if not model.listener_cd:
        return HEARD_BEEP
    return HEARD_ONE if c == 1 else HEARD_TWO_PLUS


def coarsen(obs: Observation, model: ModelSpec) -> Observation:
    """Project an observation of the strongest model onto ``model``."""
    if obs.is_beeper:
        if not model.beeper_cd:
            return BEEPED_BLIND
        return obs
    if obs is SILENCE or model.listener_cd:
        return obs
    return HEARD_BEEP


# observation lookup: _OBS[model][action][min(count, 2)]
_OBS = {
    m: tuple(tuple(observe(a, c, m) for c in range(3)) for a in (LISTEN, BEEP))
    for m in (BL, BCD_L, B_LCD, BCD_LCD)
}


class NodeProgram:
    """Per-node state machine scheduled by :func:`run`.

    ``retired`` nodes have terminated locally: the engine stops asking them
    to act (they neither beep nor listen).  ``contending`` marks membership
    of the residual graph and only feeds traces.
    """

    slots_per_phase = 1
    retired = False
    contending = True

    def act(self, phase: int, slot: int) -> Action:
        raise NotImplementedError

    def absorb(self, obs: Observation) -> None:
        raise NotImplementedError

    def decision(self) -> Any:
        """``None`` while undecided, the output value afterwards."""
        return None

    def wants_termination_participation(self) -> bool:
        return False

    @property
    def beep_probability(self) -> Optional[Fraction]:
        return None


@dataclass(frozen=True)
class ProgramFactory:
    """Builds identical node programs, differing only in their random stream."""

    name: str
    model: ModelSpec
    slots_per_phase: int
    build: Callable[[NodeStream], NodeProgram] = field(repr=False)
    params: tuple = ()

    def __call__(self, rng: NodeStream) -> NodeProgram:
        return self.build(rng)


@dataclass(frozen=True)
class PhaseTrace:
    phase: int
    p: tuple[Optional[float], ...]
    contending: tuple[bool, ...]
    actions: tuple[tuple[Optional[Action], ...], ...]
    observations: tuple[tuple[Optional[Observation], ...], ...]


@dataclass(frozen=True)
class RunReport:
    phases_elapsed: int
    slots_elapsed: int
    slots_per_phase: int
    outputs: tuple
    decision_slot: tuple[Optional[int], ...]
    aborted: bool
    trace: Optional[tuple[PhaseTrace, ...]] = None

    @property
    def n(self) -> int:
        return len(self.outputs)


def default_max_slots(g: Graph) -> int:
    """Ten times the largest bound any acceptance check relies on."""
    n = max(g.node_count, 1)
    bound = 76 * math.log2(n) + 20 * max_degree(g) + 180 * math.log(n) + 100
    return int(math.ceil(10 * bound))


def run(
    g: Graph,
    model: ModelSpec,
    program_factory: ProgramFactory,
    master_seed: int,
    slots_per_phase: Optional[int] = None,
    max_slots: Optional[int] = None,
    trace: bool = False,
) -> RunReport:
    spp = program_factory.slots_per_phase if slots_per_phase is None else slots_per_phase
    if spp < 1:
        raise ValueError("slots_per_phase must be positive")
    if spp != program_factory.slots_per_phase:
        raise ValueError(
            f"{program_factory.name} uses {program_factory.slots_per_phase} slots per phase, not {spp}"
        )
    if model != program_factory.model:
        raise ModelMismatch(f"{program_factory.name} targets {program_factory.model}, run requested {model}")
    if max_slots is None:
        max_slots = default_max_slots(g)
    if max_slots < 1:
        raise ValueError("max_slots must be positive")

    n = g.node_count
    adj = g.adjacency
    progs = [program_factory(derive_node_stream(master_seed, v)) for v in range(n)]
    table = _OBS[model]
    decision_slot: list[Optional[int]] = [None] * n
    decided = [False] * n
    for v, prog in enumerate(progs):
        if prog.decision() is not None:
            decided[v] = True
    phases = 0
    slots = 0
    aborted = False
    traces: list[PhaseTrace] = []

    def finished() -> bool:
        return all(decided) and not any(p.wants_termination_participation() for p in progs)

    while not finished():
        if slots + spp > max_slots:
            aborted = True
            break
        live = [v for v in range(n) if not progs[v].retired]
        if trace:
            p_row = tuple(
                float(progs[v].beep_probability) if progs[v].beep_probability is not None else None
                for v in range(n)
            )
            cont_row = tuple(bool(progs[v].contending) and not progs[v].retired for v in range(n))
            act_rows, obs_rows = [], []
        for j in range(spp):
            acts = [progs[v].act(phases, j) for v in live]
            count = [0] * n
            for v, a in zip(live, acts):
                if a == BEEP:
                    for w in adj[v]:
                        count[w] += 1
            if trace:
                arow: list = [None] * n
                orow: list = [None] * n
            for v, a in zip(live, acts):
                c = count[v]
                obs = table[a][c if c < 2 else 2]
                prog = progs[v]
                prog.absorb(obs)
                if trace:
                    arow[v] = a
                    orow[v] = obs
                if not decided[v] and prog.decision() is not None:
                    decided[v] = True
                    decision_slot[v] = slots
            if trace:
                act_rows.append(tuple(arow))
                obs_rows.append(tuple(orow))
            slots += 1
        if trace:
            traces.append(PhaseTrace(phases, p_row, cont_row, tuple(act_rows), tuple(obs_rows)))
        phases += 1

    return RunReport(
        phases_elapsed=phases,
        slots_elapsed=slots,
        slots_per_phase=spp,
        outputs=tuple(p.decision() for p in progs),
        decision_slot=tuple(decision_slot),
        aborted=aborted,
        trace=tuple(traces) if trace else None,
    )
