"""Output checkers and the potential functions used in the running-time analysis."""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional, Sequence

from .engine import RunReport
from .graph import Graph, square

ALPHA = 2.0 ** (1.0 / 36.0)


class ViolationKind(enum.Enum):
    EDGE_CONFLICT = "EdgeConflict"
    NOT_MAXIMAL = "NotMaximal"
    NOT_INDEPENDENT = "NotIndependent"
    WRONG_DEGREE = "WrongDegree"
    OUT_OF_PALETTE = "OutOfPalette"
    UNDECIDED = "Undecided"


@dataclass(frozen=True)
class Violation:
    kind: ViolationKind
    witness: tuple

    def __str__(self):
        return f"{self.kind.value}{self.witness}"


def _undecided(values: Sequence) -> list[Violation]:
    return [Violation(ViolationKind.UNDECIDED, (v,)) for v, x in enumerate(values) if x is None]


def check_colouring(g: Graph, colours: Sequence[Optional[int]], palette: Optional[int] = None) -> list[Violation]:
    """EdgeConflict per monochromatic edge; OutOfPalette for colours outside 0..palette-1."""
    out = _undecided(colours)
    for u, v in g.edges():
        if colours[u] is not None and colours[u] == colours[v]:
            out.append(Violation(ViolationKind.EDGE_CONFLICT, (u, v)))
    if palette is not None:
        for v, c in enumerate(colours):
            if c is not None and not 0 <= c < palette:
                out.append(Violation(ViolationKind.OUT_OF_PALETTE, (v, c)))
    return out


def check_two_hop_colouring(g: Graph, colours: Sequence[Optional[int]], palette: Optional[int] = None) -> list[Violation]:
    return check_colouring(square(g), colours, palette)


def check_mis(g: Graph, membership: Sequence[Optional[bool]]) -> list[Violation]:
    out = _undecided(membership)
    for u, v in g.edges():
        if membership[u] and membership[v]:
            out.append(Violation(ViolationKind.NOT_INDEPENDENT, (u, v)))
    for v in range(g.node_count):
        if membership[v] is False and not any(membership[w] for w in g.adjacency[v]):
            out.append(Violation(ViolationKind.NOT_MAXIMAL, (v,)))
    return out


def check_two_hop_mis(g: Graph, membership: Sequence[Optional[bool]]) -> list[Violation]:
    return check_mis(square(g), membership)


def check_degrees(g: Graph, degrees: Sequence[Optional[int]]) -> list[Violation]:
    out = _undecided(degrees)
    for v, d in enumerate(degrees):
        if d is not None and d != g.degree(v):
            out.append(Violation(ViolationKind.WRONG_DEGREE, (v, d, g.degree(v))))
    return out


def check_output(algorithm: str, g: Graph, outputs: Sequence, K: Optional[int] = None) -> list[Violation]:
    """Dispatch to the checker matching ``algorithm``."""
    if algorithm == "colouring":
        return check_colouring(g, outputs)
    if algorithm in ("k_colouring", "k_colouring_cycle"):
        return check_colouring(g, outputs, palette=None if K is None else K + 1)
    if algorithm == "two_hop_colouring":
        return check_two_hop_colouring(g, outputs)
    if algorithm == "degree":
        return check_degrees(g, outputs)
    if algorithm == "mis":
        return check_mis(g, outputs)
    if algorithm == "two_hop_mis":
        return check_two_hop_mis(g, outputs)
    raise ValueError(f"no checker for {algorithm!r}")


def _check_p(p: float) -> None:
    if not 0.0 < p <= 0.5:
        raise ValueError(f"beep probability must lie in (0, 1/2], got {p}")


def mis_survival_bound(p: float, q: float, t: int) -> float:
    """Upper bound alpha**(t0 - t) on a node staying active for t more phases.

    ``t0 = 3*l(q) - 2*log2(p)`` with ``l(q) = max(log2(5q), 0)`` and
    ``alpha = 2**(1/36)``.
    """
    _check_p(p)
    if q < 0:
        raise ValueError("q must be non-negative")
    lq = max(math.log2(5 * q), 0.0) if q > 0 else 0.0
    t0 = 3 * lq - 2 * math.log2(p)
    return ALPHA ** (t0 - t)


def f_potential(q: float) -> float:
    """4q up to 1, then linear between f(2**i) = 2i + 4 and f(2**(i+1)) = 2i + 6."""
    if q < 0:
        raise ValueError("q must be non-negative")
    if q <= 1:
        return 4.0 * q
    i = math.floor(math.log2(q))
    # guard against log2 rounding just below an exact power of two
    if 2.0 ** (i + 1) <= q:
        i += 1
    lo = 2.0 ** i
    return 2 * i + 4 + 2 * (q - lo) / lo


def colouring_measure(p: float, q: float, d: int) -> float:
    """-log2(p) + f(q) + 10 d."""
    _check_p(p)
    if d < 0:
        raise ValueError("d must be non-negative")
    return -math.log2(p) + f_potential(q) + 10 * d


@dataclass(frozen=True)
class Potential:
    p: float
    q: float
    d: int


def trace_potentials(report: RunReport, g: Graph) -> list[list[Optional[Potential]]]:
    """Per phase and node, (p, q, residual degree) over the contending nodes.

    Non-contending nodes get ``None``; their p no longer enters any q.
    """
    if report.trace is None:
        raise ValueError("run was executed without tracing")
    out = []
    for ph in report.trace:
        row: list[Optional[Potential]] = []
        for v in range(g.node_count):
            if not ph.contending[v]:
                row.append(None)
                continue
            q = 0.0
            d = 0
            for w in g.adjacency[v]:
                if ph.contending[w]:
                    q += ph.p[w]
                    d += 1
            row.append(Potential(ph.p[v], q, d))
        out.append(row)
    return out
