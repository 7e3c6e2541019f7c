"""One entry point for running an algorithm, compiled or pure Python.

The compiled loops in ``_ckernels`` reproduce ``engine.run`` over the
node programs of ``algorithms`` draw for draw, so both backends return
identical reports.  The compiled module is picked at import when it was
built; setting ``BEEPSIM_PURE_PYTHON=1`` forces the fallback.
"""

from __future__ import annotations

import os
from typing import Mapping, Optional, Sequence

import numpy as np

from .algorithms import NATIVE_MODEL, make_program
from .emulation import pack_sequence, transpile
from .engine import BL, ModelMismatch, ModelSpec, RunReport, default_max_slots, run
from .graph import Graph
from .rng import MASK64

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

if os.environ.get("BEEPSIM_PURE_PYTHON", "") not in ("", "0"):
    _ckernels = None

BACKEND = "cython" if _ckernels is not None else "python"

_SLOTS = {
    "colouring": 1,
    "k_colouring": 2,
    "k_colouring_cycle": 2,
    "two_hop_colouring": 4,
    "degree": 5,
    "mis": 2,
    "two_hop_mis": 4,
}


def available_backends() -> tuple[str, ...]:
    return ("cython", "python") if _ckernels is not None else ("python",)


def emulated_max_slots(g: Graph, k: int) -> int:
    """Default slot budget of a BL run: the native budget stretched by 2k."""
    return default_max_slots(g) * 2 * k


def _check_model(name: str, model: Optional[ModelSpec]) -> ModelSpec:
    native = NATIVE_MODEL[name]
    if model is None:
        return native
    if not model.provides(native):
        raise ModelMismatch(f"{name} needs {native}, {model} lacks it")
    return model


def simulate(
    algorithm: str,
    g: Graph,
    master_seed: int,
    *,
    K: Optional[int] = None,
    model: Optional[ModelSpec] = None,
    emulate_k: Optional[int] = None,
    sequence_seed: int = 0,
    sequences: Optional[Mapping[int, Sequence[bool]]] = None,
    max_slots: Optional[int] = None,
    backend: Optional[str] = None,
    trace: bool = False,
) -> RunReport:
    """Run ``algorithm`` on ``g``; with ``emulate_k`` the run happens in BL.

    ``model`` defaults to the algorithm's native model.  Outputs follow
    ``engine.run``: colours and degrees as ints, MIS membership as bools,
    ``None`` for undecided nodes of an aborted run.  Traces are only
    recorded by the engine, so ``trace=True`` selects the Python backend.
    """
    if algorithm not in _SLOTS:
        raise ValueError(f"unknown algorithm {algorithm!r}")
    if algorithm in ("k_colouring", "k_colouring_cycle"):
        if K is None:
            raise ValueError(f"{algorithm} needs K")
        if K < 1:
            raise ValueError("K must be at least 1")
    model = _check_model(algorithm, model)
    if emulate_k is not None and emulate_k < 1:
        raise ValueError("k must be at least 1")
    if max_slots is None:
        max_slots = default_max_slots(g) if emulate_k is None else emulated_max_slots(g, emulate_k)
    if max_slots < 1:
        raise ValueError("max_slots must be positive")
    backend = backend or ("python" if trace else BACKEND)
    if backend not in ("cython", "python"):
        raise ValueError(f"unknown backend {backend!r}")
    if backend == "cython" and _ckernels is None:
        raise RuntimeError("compiled kernels are not available")
    if backend == "cython" and trace:
        raise ValueError("the compiled backend does not record traces")
    # packed sequences only hold 64 sub-phases
    if backend == "cython" and (emulate_k is None or emulate_k <= 64):
        return _simulate_compiled(algorithm, g, master_seed, K, emulate_k, sequence_seed, sequences, max_slots)
    factory = make_program(algorithm, model, K)
    run_model = model
    if emulate_k is not None:
        factory = transpile(factory, emulate_k, sequence_seed, sequences=sequences)
        run_model = BL
    return run(g, run_model, factory, master_seed, max_slots=max_slots, trace=trace)


def _simulate_compiled(algorithm, g, master_seed, K, k, sequence_seed, sequences, max_slots) -> RunReport:
    indptr, indices = g.csr
    seed = master_seed & MASK64
    seqs = None
    kk = 0
    if k is not None:
        kk = k
        if sequences is not None:
            rows = []
            for v in range(g.node_count):
                bits = tuple(bool(b) for b in sequences[v])
                if len(bits) != k:
                    raise ValueError(f"sequence of node {v} has length {len(bits)}, expected {k}")
                rows.append(pack_sequence(bits))
            seqs = np.array(rows, dtype=np.uint64)
        else:
            seqs = _ckernels.packed_sequences(sequence_seed & MASK64, g.node_count, k)
    args = (indptr, indices, seed, max_slots)
    if algorithm == "colouring":
        res = _ckernels.run_colouring(*args, seqs, kk)
    elif algorithm == "k_colouring":
        res = _ckernels.run_k_colouring(*args, K, False, seqs, kk)
    elif algorithm == "k_colouring_cycle":
        res = _ckernels.run_k_colouring(*args, K, True, seqs, kk)
    elif algorithm == "two_hop_colouring":
        res = _ckernels.run_two_hop_colouring(*args, seqs, kk)
    elif algorithm == "degree":
        res = _ckernels.run_degree(*args, seqs, kk)
    elif algorithm == "mis":
        res = _ckernels.run_mis(*args, seqs, kk)
    else:
        res = _ckernels.run_two_hop_mis(*args, seqs, kk)
    phases, slots, out, dslot, aborted = res
    if algorithm in ("mis", "two_hop_mis"):
        outputs = tuple(None if x < 0 else bool(x) for x in out.tolist())
    else:
        outputs = tuple(None if x < 0 else x for x in out.tolist())
    spp = _SLOTS[algorithm] * (2 * k if k is not None else 1)
    return RunReport(
        phases_elapsed=int(phases),
        slots_elapsed=int(slots),
        slots_per_phase=spp,
        outputs=outputs,
        decision_slot=tuple(None if x < 0 else x for x in dslot.tolist()),
        aborted=bool(aborted),
    )
