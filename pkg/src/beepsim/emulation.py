"""Collision detection without collision-detection hardware.

Two families live here.  The fresh-coin detector flips new coins in every
sub-phase and is used for one-shot experiments.  The fixed-sequence
procedures give every node one random bit string for the whole
computation; :func:`transpile` builds on them to run any strong-model
program in plain BL.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Sequence, Union

import numpy as np
from scipy import sparse

from .engine import (
    BEEP,
    BEEPED_ALONE,
    BEEPED_BLIND,
    BEEPED_WITH_COLLISION,
    BL,
    HEARD_BEEP,
    HEARD_ONE,
    HEARD_TWO_PLUS,
    LISTEN,
    SILENCE,
    Action,
    ModelMismatch,
    ModelSpec,
    NodeProgram,
    Observation,
    ProgramFactory,
)
from .graph import Graph
from .rng import NodeStream, derive_node_stream

Number = Union[int, float, Fraction]


# ---------------------------------------------------------------------------
# choosing the number of sub-phases


@dataclass(frozen=True)
class PerNodePerStep:
    epsilon: Number


@dataclass(frozen=True)
class AllNodesPerStep:
    n: int
    epsilon: Number


@dataclass(frozen=True)
class WhpPerStep:
    n: int
    c: Number


@dataclass(frozen=True)
class PerNodeWholeRun:
    max_degree: int
    epsilon: Number


@dataclass(frozen=True)
class AllNodesWholeRun:
    n: int
    max_degree: int
    epsilon: Number


@dataclass(frozen=True)
class WhpWholeRun:
    n: int
    max_degree: int
    c: Number


KPolicy = Union[PerNodePerStep, AllNodesPerStep, WhpPerStep, PerNodeWholeRun, AllNodesWholeRun, WhpWholeRun]

POLICY_NAMES = {
    "per-node-per-step": PerNodePerStep,
    "all-nodes-per-step": AllNodesPerStep,
    "whp-per-step": WhpPerStep,
    "per-node-whole-run": PerNodeWholeRun,
    "all-nodes-whole-run": AllNodesWholeRun,
    "whp-whole-run": WhpWholeRun,
}


def _ceil_log2(x: Fraction) -> int:
    """Smallest j with 2**j >= x, exact for rationals."""
    j = x.numerator.bit_length() - x.denominator.bit_length()
    while Fraction(2) ** j < x:
        j += 1
    while Fraction(2) ** (j - 1) >= x:
        j -= 1
    return j


def _floor_log2(x: Fraction) -> int:
    """Largest j with 2**j <= x, exact for rationals."""
    j = x.numerator.bit_length() - x.denominator.bit_length()
    while Fraction(2) ** j > x:
        j -= 1
    while Fraction(2) ** (j + 1) <= x:
        j += 1
    return j


def _exact(x: Number) -> Optional[Fraction]:
    if isinstance(x, (int, Fraction)):
        return Fraction(x)
    if isinstance(x, float) and x.is_integer():
        return Fraction(int(x))
    return None


def _check_epsilon(eps: Number) -> Fraction:
    e = Fraction(eps)
    if not 0 < e < 1:
        raise ValueError(f"epsilon must lie in (0, 1), got {eps}")
    return e


def _check_count(x: int, what: str) -> int:
    if int(x) != x or x < 1:
        raise ValueError(f"{what} must be a positive integer, got {x}")
    return int(x)


def _check_c(c: Number) -> None:
    if not c > 2:
        raise ValueError(f"c must exceed 2, got {c}")


def _c_log_term(n: int, c: Number, delta: int, rounding) -> int:
    cf = _exact(c)
    if cf is not None and cf.denominator == 1:
        return rounding(Fraction(n ** int(cf) * delta))
    value = float(c) * math.log2(n) + math.log2(delta)
    return math.ceil(value) if rounding is _ceil_log2 else math.floor(value)


def choose_k(policy: KPolicy) -> int:
    """Sub-phases per emulated slot for a guarantee level (binary logs).

    Per-step policies round up; whole-run policies follow the printed
    formulas, which round up for a single node and down otherwise.  The
    result is never below 1.
    """
    if isinstance(policy, PerNodePerStep):
        k = _ceil_log2(1 / _check_epsilon(policy.epsilon))
    elif isinstance(policy, AllNodesPerStep):
        n = _check_count(policy.n, "n")
        k = _ceil_log2(n / _check_epsilon(policy.epsilon))
    elif isinstance(policy, WhpPerStep):
        n = _check_count(policy.n, "n")
        _check_c(policy.c)
        k = _c_log_term(n, policy.c, 1, _ceil_log2)
    elif isinstance(policy, PerNodeWholeRun):
        d = _check_count(policy.max_degree, "max_degree")
        k = _ceil_log2(d / _check_epsilon(policy.epsilon))
    elif isinstance(policy, AllNodesWholeRun):
        n = _check_count(policy.n, "n")
        d = _check_count(policy.max_degree, "max_degree")
        k = _floor_log2(n * d / _check_epsilon(policy.epsilon))
    elif isinstance(policy, WhpWholeRun):
        n = _check_count(policy.n, "n")
        d = _check_count(policy.max_degree, "max_degree")
        _check_c(policy.c)
        k = _c_log_term(n, policy.c, d, _floor_log2)
    else:
        raise TypeError(f"not a k policy: {policy!r}")
    return max(1, k)


def failure_bound(n: int, max_degree: int, k: int) -> float:
    """Union bound n*Delta / 2**(k+1) on some edge sharing a sequence."""
    return n * max_degree / 2.0 ** (k + 1)


# ---------------------------------------------------------------------------
# fresh-coin detector


def _adjacency_matrix(g: Graph) -> sparse.csr_matrix:
    indptr, indices = g.csr
    data = np.ones(indices.size, dtype=np.int32)
    return sparse.csr_matrix((data, indices, indptr), shape=(g.node_count, g.node_count))


@dataclass(frozen=True)
class CollisionBatch:
    flags: Optional[np.ndarray]  # (trials, n) bool
    truth: np.ndarray  # (n,) bool: a collision really touches the node
    signals: Optional[np.ndarray]  # (trials, wishers, 2k) bool beep pattern of each wisher
    wishers: np.ndarray  # node indices of the wishers


def collision_ground_truth(g: Graph, wishes: Sequence[bool]) -> np.ndarray:
    """Whether a collision occurs in each node's closed neighbourhood.

    A beeper collides when a neighbour also beeps; a listener when at least
    two neighbours beep.
    """
    w = np.asarray(wishes, dtype=bool)
    counts = _adjacency_matrix(g) @ w.astype(np.int32)
    return np.where(w, counts >= 1, counts >= 2)


def detect_collision_batch(
    g: Graph,
    wishes: Sequence[bool],
    k: int,
    trials: int,
    rng: np.random.Generator,
    *,
    flags: bool = True,
    signals: bool = False,
) -> CollisionBatch:
    """Run ``trials`` independent rounds of the fresh-coin detector.

    In each of the ``k`` sub-phases a wishing node flips a coin, beeps in
    the first slot on heads and in the second otherwise, and listens in the
    other slot.  Non-wishers listen to both slots.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if trials < 0:
        raise ValueError("trials must be non-negative")
    w = np.asarray(wishes, dtype=bool)
    if w.shape != (g.node_count,):
        raise ValueError("one wish per node required")
    wishers = np.flatnonzero(w)
    coins = rng.integers(0, 2, size=(trials, wishers.size, k), dtype=np.int8).astype(bool)
    out_flags = None
    if flags:
        A = _adjacency_matrix(g)
        n = g.node_count
        out_flags = np.zeros((trials, n), dtype=bool)
        wisher_mask = w
        for i in range(k):
            first = np.zeros((trials, n), dtype=bool)
            first[:, wishers] = coins[:, :, i]
            second = np.zeros((trials, n), dtype=bool)
            second[:, wishers] = ~coins[:, :, i]
            # (A @ X^T)^T counts beeping neighbours per trial
            heard1 = (A @ first.T.astype(np.int32)).T > 0
            heard2 = (A @ second.T.astype(np.int32)).T > 0
            beeper_hit = np.where(first, heard2, heard1)
            out_flags |= np.where(wisher_mask, beeper_hit, heard1 & heard2)
    sig = None
    if signals:
        sig = np.empty((trials, wishers.size, 2 * k), dtype=bool)
        sig[:, :, 0::2] = coins
        sig[:, :, 1::2] = ~coins
    return CollisionBatch(out_flags, collision_ground_truth(g, w), sig, wishers)


def detect_collision_round(
    g: Graph, wishes: Sequence[bool], k: int, rng: Union[np.random.Generator, int]
) -> list[bool]:
    """One fresh-coin detection round; returns each node's collision flag."""
    if not isinstance(rng, np.random.Generator):
        rng = np.random.default_rng(rng)
    batch = detect_collision_batch(g, wishes, k, 1, rng)
    return batch.flags[0].tolist()


# ---------------------------------------------------------------------------
# fixed-sequence procedures


def draw_sequence(rng: NodeStream, k: int) -> tuple[bool, ...]:
    """k fair bits, one per sub-phase, drawn once per node."""
    return tuple(rng.bit() for _ in range(k))


def sequence_seed_stream(sequence_seed: int, node_index: int) -> NodeStream:
    return derive_node_stream(sequence_seed, node_index)


def pack_sequence(bits: Sequence[bool]) -> int:
    """Bit i of the result is sub-phase i."""
    return sum(1 << i for i, b in enumerate(bits) if b)


class BcdProcedure:
    """Beep with collision detection over 2k BL slots.

    Sub-phase i beeps in its first slot when ``seq[i]`` is set and in the
    second otherwise, listening in the other one.
    """

    __slots__ = ("seq", "collision")

    def __init__(self, seq: Sequence[bool]):
        self.seq = seq
        self.collision = False

    def action(self, j: int) -> Action:
        first_half = j % 2 == 0
        return BEEP if first_half == bool(self.seq[j // 2]) else LISTEN

    def absorb(self, j: int, obs: Observation) -> None:
        if obs.heard:
            self.collision = True


class LcdProcedure:
    """Listen with collision detection: a sub-phase with beeps in both slots
    reveals two distinct beepers."""

    __slots__ = ("heard_any", "collision", "_first")

    def __init__(self):
        self.heard_any = False
        self.collision = False
        self._first = False

    def action(self, j: int) -> Action:
        return LISTEN

    def absorb(self, j: int, obs: Observation) -> None:
        h = obs.heard
        if j % 2 == 0:
            self._first = h
            return
        if h or self._first:
            self.heard_any = True
        if h and self._first:
            self.collision = True


def emulate_bcd(seq: Sequence[bool]) -> BcdProcedure:
    return BcdProcedure(seq)


def emulate_lcd(k: int) -> LcdProcedure:
    if k < 1:
        raise ValueError("k must be at least 1")
    return LcdProcedure()


def emulate_slot(
    g: Graph, sequences: Mapping[int, Sequence[bool]], k: int
) -> list[tuple[bool, bool]]:
    """Play one emulated slot where exactly the keys of ``sequences`` beep.

    Returns ``(heard_any, collision)`` for listeners and
    ``(True, collision)`` for beepers, computed by stepping through the 2k
    BL slots.
    """
    from .engine import observe

    procs: dict[int, Union[BcdProcedure, LcdProcedure]] = {}
    for v in range(g.node_count):
        procs[v] = BcdProcedure(sequences[v]) if v in sequences else LcdProcedure()
    for j in range(2 * k):
        acts = {v: p.action(j) for v, p in procs.items()}
        for v, p in procs.items():
            c = sum(1 for w in g.adjacency[v] if acts[w] == BEEP)
            p.absorb(j, observe(acts[v], c, BL))
    out = []
    for v in range(g.node_count):
        p = procs[v]
        if isinstance(p, BcdProcedure):
            out.append((True, p.collision))
        else:
            out.append((p.heard_any, p.collision))
    return out


def synthesize(intent: Action, proc, model: ModelSpec) -> Observation:
    """Strong-model observation reconstructed from an emulation procedure."""
    if intent == BEEP:
        if not model.beeper_cd:
            return BEEPED_BLIND
        return BEEPED_WITH_COLLISION if proc.collision else BEEPED_ALONE
    if not proc.heard_any:
        return SILENCE
    if not model.listener_cd:
        return HEARD_BEEP
    return HEARD_TWO_PLUS if proc.collision else HEARD_ONE


class TranspiledProgram(NodeProgram):
    """Runs a strong-model program in BL, 2k BL slots per original slot.

    Every original slot runs a full procedure, beep or listen, so all nodes
    stay aligned; the procedure is never cut short.
    """

    __slots__ = ("inner", "seq", "k", "model", "log", "_intent", "_proc", "_j", "_span")

    def __init__(self, inner: NodeProgram, seq: Sequence[bool], k: int, model: ModelSpec, log=None):
        self.inner = inner
        self.seq = seq
        self.k = k
        self.model = model
        self.log = log
        self._intent = LISTEN
        self._proc = None
        self._j = 0
        self._span = 2 * k

    @property
    def retired(self):
        return self.inner.retired

    @property
    def contending(self):
        return self.inner.contending

    @property
    def beep_probability(self):
        return self.inner.beep_probability

    def act(self, phase, slot):
        j = slot % self._span
        self._j = j
        if j == 0:
            self._intent = self.inner.act(phase, slot // self._span)
            self._proc = BcdProcedure(self.seq) if self._intent == BEEP else LcdProcedure()
        return self._proc.action(j)

    def absorb(self, obs):
        j = self._j
        self._proc.absorb(j, obs)
        if j == self._span - 1:
            synth = synthesize(self._intent, self._proc, self.model)
            if self.log is not None:
                self.log.append(synth)
            self.inner.absorb(synth)

    def decision(self):
        return self.inner.decision()

    def wants_termination_participation(self):
        return self.inner.wants_termination_participation()


def transpile(
    program: ProgramFactory,
    k: int,
    sequence_seed: int,
    *,
    sequences: Optional[Mapping[int, Sequence[bool]]] = None,
    logs: Optional[list] = None,
) -> ProgramFactory:
    """BL version of ``program`` using k sub-phases per original slot.

    Each node draws its bit sequence once, from the stream of its index
    under ``sequence_seed``, independently of the algorithm's own stream.
    ``sequences`` (keyed by node index) overrides the draw.  When ``logs``
    is a list, one list of synthesized observations per node is appended
    to it in node order.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if program.model == BL:
        raise ModelMismatch("program already runs in BL; nothing to emulate")
    target = program.model

    def build(rng: NodeStream) -> NodeProgram:
        if sequences is not None:
            seq = tuple(bool(b) for b in sequences[rng.index])
            if len(seq) != k:
                raise ValueError(f"sequence of node {rng.index} has length {len(seq)}, expected {k}")
        else:
            seq = draw_sequence(rng.sibling(sequence_seed), k)
        log = None
        if logs is not None:
            log = []
            logs.append(log)
        return TranspiledProgram(program(rng), seq, k, target, log)

    return ProgramFactory(
        f"{program.name}@BL(k={k})",
        BL,
        2 * k * program.slots_per_phase,
        build,
        program.params + (("k", k), ("emulated", program.name)),
    )
