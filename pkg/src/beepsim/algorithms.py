"""Node programs for colouring, 2-hop colouring, degree computation and MIS.

All programs are Las Vegas: the output is always valid, only the number
of phases is random.  Beep probabilities are exact (dyadic exponents, or
``1/m`` in the cycle variant).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .engine import (
    BCD_L,
    BCD_LCD,
    BEEP,
    BEEPED_ALONE,
    HEARD_TWO_PLUS,
    LISTEN,
    SILENCE,
    Action,
    InvariantViolation,
    ModelMismatch,
    ModelSpec,
    NodeProgram,
    Observation,
    ProgramFactory,
)
from .rng import NodeStream


@dataclass(frozen=True, slots=True)
class DyadicProbability:
    """``p = 2**-exponent`` with ``exponent >= 1`` (so ``p <= 1/2``)."""

    exponent: int = 1

    def __post_init__(self):
        if self.exponent < 1:
            raise ValueError("dyadic probability is capped at 1/2 (exponent >= 1)")

    @property
    def value(self) -> Fraction:
        return Fraction(1, 1 << self.exponent)

    def __float__(self):
        return 2.0 ** -self.exponent


HALF = DyadicProbability(1)


def update_probability(p: DyadicProbability, heard_activity: bool) -> DyadicProbability:
    """Halve on activity, otherwise double up to 1/2."""
    if heard_activity:
        return DyadicProbability(p.exponent + 1)
    if p.exponent == 1:
        return p
    return DyadicProbability(p.exponent - 1)


def _require(model: ModelSpec, needed: ModelSpec, name: str) -> None:
    if not model.provides(needed):
        raise ModelMismatch(f"{name} needs {needed} capabilities, got {model}")


class ColouringProgram(NodeProgram):
    """Colouring without knowledge; one slot per phase.

    The colour is the counter value of the phase holding the node's
    exclusive beep, i.e. that phase's index.
    """

    __slots__ = ("rng", "p", "colour", "counter", "retired", "contending")
    slots_per_phase = 1

    def __init__(self, rng: NodeStream):
        self.rng = rng
        self.p = HALF
        self.colour: Optional[int] = None
        self.counter = 0
        self.retired = False
        self.contending = True

    def act(self, phase, slot):
        return BEEP if self.rng.bernoulli_dyadic(self.p.exponent) else LISTEN

    def absorb(self, obs):
        if obs is BEEPED_ALONE:
            self.colour = self.counter
            self.retired = True
            self.contending = False
            return
        # beeping with collision counts as activity, like hearing a beep
        self.p = update_probability(self.p, obs is not SILENCE)
        self.counter += 1

    def decision(self):
        return self.colour

    @property
    def beep_probability(self):
        return self.p.value if self.contending else None


class KColouringProgram(NodeProgram):
    """(K+1)-colouring with a known bound K >= Delta; two slots per phase.

    Slot 0 is contention, slot 1 confirmation.  In the cycle variant the
    probability is reset to ``1/(2|available|)`` whenever the counter wraps
    to 0 and never adapted otherwise.
    """

    __slots__ = (
        "rng", "K", "cycle_variant", "p", "denominator", "colour", "counter",
        "available", "retired", "contending", "_slot", "_active", "_beeped", "_first",
    )
    slots_per_phase = 2

    def __init__(self, rng: NodeStream, K: int, cycle_variant: bool = False):
        self.rng = rng
        self.K = K
        self.cycle_variant = cycle_variant
        self.p = HALF
        self.denominator = 2 * (K + 1)
        self.colour: Optional[int] = None
        self.counter = 0
        self.available = set(range(K + 1))
        self.retired = False
        self.contending = True
        self._slot = 0
        self._active = False
        self._beeped = False
        self._first: Optional[Observation] = None

    def act(self, phase, slot):
        self._slot = slot
        if slot == 0:
            if self.cycle_variant and self.counter == 0:
                self.denominator = 2 * len(self.available)
            self._active = self.counter in self.available
            if self._active:
                if self.cycle_variant:
                    self._beeped = self.rng.bernoulli_inverse(self.denominator)
                else:
                    self._beeped = self.rng.bernoulli_dyadic(self.p.exponent)
            else:
                self._beeped = False
            return BEEP if self._beeped else LISTEN
        return BEEP if (self._beeped and self._first is BEEPED_ALONE) else LISTEN

    def absorb(self, obs):
        if self._slot == 0:
            self._first = obs
            return
        if self._beeped and self._first is BEEPED_ALONE:
            self.colour = self.counter
            self.retired = True
            self.contending = False
            return
        if self._active and not self.cycle_variant:
            self.p = update_probability(self.p, self._first is not SILENCE)
        if obs.heard:
            self.available.discard(self.counter)
            if not self.available:
                raise InvariantViolation(
                    f"palette of {self.K + 1} colours exhausted; K is below the maximum degree"
                )
        self.counter = (self.counter + 1) % (self.K + 1)

    def decision(self):
        return self.colour

    @property
    def beep_probability(self):
        if not self.contending:
            return None
        if self.cycle_variant:
            return Fraction(1, self.denominator)
        return self.p.value


class TwoHopColouringProgram(NodeProgram):
    """2-hop colouring in BcdLcd; four slots per phase.

    0: uncoloured nodes contend.  1: listeners that heard two or more beeps
    report; a lone beeper hearing no report takes the counter as colour.
    2: listeners that heard a slot-0 beep relay it; uncoloured nodes adapt p.
    3: uncoloured nodes beep; a coloured node hearing silence stops.
    """

    __slots__ = (
        "rng", "p", "colour", "counter", "retired", "contending",
        "_slot", "_beeped", "_alone", "_heard0", "_heard2",
    )
    slots_per_phase = 4

    def __init__(self, rng: NodeStream):
        self.rng = rng
        self.p = HALF
        self.colour: Optional[int] = None
        self.counter = 0
        self.retired = False
        self.contending = True
        self._slot = 0
        self._beeped = self._alone = False
        self._heard0: Optional[Observation] = None
        self._heard2 = False

    def act(self, phase, slot):
        self._slot = slot
        if slot == 0:
            self._beeped = self.colour is None and self.rng.bernoulli_dyadic(self.p.exponent)
            return BEEP if self._beeped else LISTEN
        if slot == 1:
            return BEEP if self._heard0 is HEARD_TWO_PLUS else LISTEN
        if slot == 2:
            return BEEP if (not self._beeped and self._heard0 is not SILENCE) else LISTEN
        return BEEP if self.colour is None else LISTEN

    def absorb(self, obs):
        s = self._slot
        if s == 0:
            self._alone = obs is BEEPED_ALONE
            self._heard0 = None if self._beeped else obs
        elif s == 1:
            if self._alone and obs is SILENCE:
                self.colour = self.counter
                self.contending = False
        elif s == 2:
            if self.colour is None:
                active = self._beeped or self._heard0 is not SILENCE or obs.heard
                self.p = update_probability(self.p, active)
        else:
            if self.colour is not None and obs is SILENCE:
                self.retired = True
            self.counter += 1

    def decision(self):
        return self.colour

    def wants_termination_participation(self):
        return self.colour is not None and not self.retired

    @property
    def beep_probability(self):
        return self.p.value if self.contending else None


class DegreeProgram(NodeProgram):
    """Degree computation in BcdLcd; five slots per phase.

    0: contend.  1: peripheral reports.  2: a 2-hop exclusive beeper
    confirms and every neighbour hearing it counts one more neighbour.
    3: relay and adapt p.  4: uncounted nodes beep; a counted node hearing
    silence outputs its count.
    """

    __slots__ = (
        "rng", "p", "counted", "degree_count", "result", "retired", "contending",
        "_slot", "_beeped", "_alone", "_heard0", "_confirm",
    )
    slots_per_phase = 5

    def __init__(self, rng: NodeStream):
        self.rng = rng
        self.p = HALF
        self.counted = False
        self.degree_count = 0
        self.result: Optional[int] = None
        self.retired = False
        self.contending = True
        self._slot = 0
        self._beeped = self._alone = self._confirm = False
        self._heard0: Optional[Observation] = None

    def act(self, phase, slot):
        self._slot = slot
        if slot == 0:
            self._confirm = False
            self._beeped = not self.counted and self.rng.bernoulli_dyadic(self.p.exponent)
            return BEEP if self._beeped else LISTEN
        if slot == 1:
            return BEEP if self._heard0 is HEARD_TWO_PLUS else LISTEN
        if slot == 2:
            return BEEP if self._confirm else LISTEN
        if slot == 3:
            return BEEP if (not self._beeped and self._heard0 is not SILENCE) else LISTEN
        return BEEP if not self.counted else LISTEN

    def absorb(self, obs):
        s = self._slot
        if s == 0:
            self._alone = obs is BEEPED_ALONE
            self._heard0 = None if self._beeped else obs
        elif s == 1:
            if self._alone and obs is SILENCE:
                self._confirm = True
                self.counted = True
                self.contending = False
        elif s == 2:
            # at most one neighbour confirms per phase
            if obs.heard:
                self.degree_count += 1
        elif s == 3:
            if not self.counted:
                active = self._beeped or self._heard0 is not SILENCE or obs.heard
                self.p = update_probability(self.p, active)
        else:
            if self.counted and obs is SILENCE:
                self.result = self.degree_count
                self.retired = True

    def decision(self):
        return self.result

    def wants_termination_participation(self):
        return self.counted and self.result is None

    @property
    def beep_probability(self):
        return self.p.value if self.contending else None


class MisProgram(NodeProgram):
    """MIS with exclusive beeps and a confirmation slot (two slots per phase)."""

    __slots__ = ("rng", "p", "status", "retired", "contending", "_slot", "_beeped", "_first")
    slots_per_phase = 2

    def __init__(self, rng: NodeStream):
        self.rng = rng
        self.p = HALF
        self.status: Optional[bool] = None
        self.retired = False
        self.contending = True
        self._slot = 0
        self._beeped = False
        self._first: Optional[Observation] = None

    def act(self, phase, slot):
        self._slot = slot
        if slot == 0:
            self._beeped = self.rng.bernoulli_dyadic(self.p.exponent)
            return BEEP if self._beeped else LISTEN
        return BEEP if (self._beeped and self._first is BEEPED_ALONE) else LISTEN

    def absorb(self, obs):
        if self._slot == 0:
            self._first = obs
            return
        if self._beeped and self._first is BEEPED_ALONE:
            self.status = True
        elif obs.heard:
            self.status = False
        if self.status is not None:
            self.retired = True
            self.contending = False
            return
        # survivors: own beep alone does not halve, a neighbour's beep does
        self.p = update_probability(self.p, self._first is not SILENCE)

    def decision(self):
        return self.status

    @property
    def beep_probability(self):
        return self.p.value if self.contending else None


class TwoHopMisProgram(NodeProgram):
    """MIS of the square graph in BcdLcd; four slots per phase.

    0: contenders beep.  1: listeners hearing two or more beeps report.
    2: a 2-hop exclusive beeper joins and beeps; every listener hearing it
    will relay, and contenders among them are eliminated.  3: relays beep;
    contenders hearing a relay are eliminated.  Decided nodes keep serving
    reports and relays until the whole network has decided.
    """

    __slots__ = (
        "rng", "p", "status", "contending", "_slot", "_beeped", "_alone",
        "_heard0", "_relay", "_join",
    )
    slots_per_phase = 4
    retired = False

    def __init__(self, rng: NodeStream):
        self.rng = rng
        self.p = HALF
        self.status: Optional[bool] = None
        self.contending = True
        self._slot = 0
        self._beeped = self._alone = self._relay = self._join = False
        self._heard0: Optional[Observation] = None

    def act(self, phase, slot):
        self._slot = slot
        if slot == 0:
            self._relay = self._join = False
            self._beeped = self.status is None and self.rng.bernoulli_dyadic(self.p.exponent)
            return BEEP if self._beeped else LISTEN
        if slot == 1:
            return BEEP if self._heard0 is HEARD_TWO_PLUS else LISTEN
        if slot == 2:
            return BEEP if self._join else LISTEN
        return BEEP if self._relay else LISTEN

    def absorb(self, obs):
        s = self._slot
        if s == 0:
            self._alone = obs is BEEPED_ALONE
            self._heard0 = None if self._beeped else obs
        elif s == 1:
            if self.status is None:
                if self._alone and obs is SILENCE:
                    self._join = True
                    self.status = True
                    self.contending = False
                else:
                    active = self._beeped or self._heard0 is not SILENCE or obs.heard
                    self.p = update_probability(self.p, active)
        elif s == 2:
            if obs.heard:
                self._relay = True
                if self.status is None:
                    self.status = False
                    self.contending = False
        else:
            if obs.heard and self.status is None:
                self.status = False
                self.contending = False

    def decision(self):
        return self.status

    @property
    def beep_probability(self):
        return self.p.value if self.contending else None


def colouring_program(model: ModelSpec = BCD_L) -> ProgramFactory:
    _require(model, BCD_L, "colouring")
    return ProgramFactory("colouring", model, 1, ColouringProgram)


def k_colouring_program(K: int, model: ModelSpec = BCD_L) -> ProgramFactory:
    _require(model, BCD_L, "k_colouring")
    if K < 1:
        raise ValueError("K must be a positive integer")
    return ProgramFactory("k_colouring", model, 2, lambda rng: KColouringProgram(rng, K), (("K", K),))


def k_colouring_cycle_variant_program(K: int, model: ModelSpec = BCD_L) -> ProgramFactory:
    _require(model, BCD_L, "k_colouring_cycle")
    if K < 1:
        raise ValueError("K must be a positive integer")
    return ProgramFactory(
        "k_colouring_cycle", model, 2, lambda rng: KColouringProgram(rng, K, True), (("K", K),)
    )


def two_hop_colouring_program(model: ModelSpec = BCD_LCD) -> ProgramFactory:
    _require(model, BCD_LCD, "two_hop_colouring")
    return ProgramFactory("two_hop_colouring", model, 4, TwoHopColouringProgram)


def degree_program(model: ModelSpec = BCD_LCD) -> ProgramFactory:
    _require(model, BCD_LCD, "degree")
    return ProgramFactory("degree", model, 5, DegreeProgram)


def mis_program(model: ModelSpec = BCD_L) -> ProgramFactory:
    _require(model, BCD_L, "mis")
    return ProgramFactory("mis", model, 2, MisProgram)


def two_hop_mis_program(model: ModelSpec = BCD_LCD) -> ProgramFactory:
    _require(model, BCD_LCD, "two_hop_mis")
    return ProgramFactory("two_hop_mis", model, 4, TwoHopMisProgram)


ALGORITHMS = (
    "colouring",
    "k_colouring",
    "k_colouring_cycle",
    "two_hop_colouring",
    "degree",
    "mis",
    "two_hop_mis",
)

NATIVE_MODEL = {
    "colouring": BCD_L,
    "k_colouring": BCD_L,
    "k_colouring_cycle": BCD_L,
    "two_hop_colouring": BCD_LCD,
    "degree": BCD_LCD,
    "mis": BCD_L,
    "two_hop_mis": BCD_LCD,
}


def make_program(name: str, model: Optional[ModelSpec] = None, K: Optional[int] = None) -> ProgramFactory:
    """Factory for algorithm ``name`` (``K`` only for the palette variants)."""
    if name not in NATIVE_MODEL:
        raise ValueError(f"unknown algorithm {name!r}; choose from {', '.join(ALGORITHMS)}")
    model = NATIVE_MODEL[name] if model is None else model
    if name in ("k_colouring", "k_colouring_cycle"):
        if K is None:
            raise ValueError(f"{name} needs K")
        maker = k_colouring_program if name == "k_colouring" else k_colouring_cycle_variant_program
        return maker(K, model)
    return {
        "colouring": colouring_program,
        "two_hop_colouring": two_hop_colouring_program,
        "degree": degree_program,
        "mis": mis_program,
        "two_hop_mis": two_hop_mis_program,
    }[name](model)
