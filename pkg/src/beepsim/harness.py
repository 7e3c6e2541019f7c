"""Experiment runner: configuration, trials, statistics and output rows."""

from __future__ import annotations

import configparser
import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence, Union

import numpy as np

from . import graph as graphs
from .algorithms import ALGORITHMS, NATIVE_MODEL
from .emulation import POLICY_NAMES, choose_k, detect_collision_batch, failure_bound
from .engine import ModelMismatch, ModelSpec, RunReport
from .graph import Graph, WheelSpec, max_degree
from .kernels import simulate
from .rng import derive_seed
from .verify import ViolationKind, check_output

GRAPH_FAMILIES = ("ring", "complete", "star", "path", "empty", "er", "wheel", "file")
# second-level stream indices under a trial seed
_GRAPH_STREAM = 0
_SEQUENCE_STREAM = 1


class ConfigError(ValueError):
    """The experiment configuration is inconsistent or malformed."""


@dataclass
class ExperimentConfig:
    algorithm: str = "mis"
    graph: str = "er"
    n: int = 64
    p: Optional[float] = None
    degree: Optional[float] = None  # expected degree; sets p = degree / n
    graph_file: Optional[str] = None
    wheel_m: int = 2
    wheel_s: int = 4
    K: Optional[int] = None  # None: the graph's max degree
    model: Optional[str] = None
    emulate: bool = False
    k: Optional[int] = None  # explicit sub-phase count, else from k_policy
    k_policy: str = "whp-whole-run"
    epsilon: float = 0.01
    c: float = 3.0
    sequence_seed: Optional[int] = None  # None: derived per trial
    distinct_sequences: bool = False  # node v uses the bits of v instead of random draws
    trials: int = 10
    seed: int = 0
    max_slots: Optional[int] = None
    trace: bool = False
    out: Optional[str] = None
    format: str = "csv"
    workers: int = 1

    def validate(self) -> None:
        """Reject bad combinations before any run starts."""
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; choose from {', '.join(ALGORITHMS)}")
        if self.graph not in GRAPH_FAMILIES:
            raise ConfigError(f"unknown graph family {self.graph!r}; choose from {', '.join(GRAPH_FAMILIES)}")
        if self.graph == "file" and not self.graph_file:
            raise ConfigError("graph=file needs graph_file")
        if self.graph == "er":
            if self.p is None and self.degree is None:
                raise ConfigError("graph=er needs p or degree")
            if self.p is not None and not 0.0 <= self.p <= 1.0:
                raise ConfigError(f"p must lie in [0, 1], got {self.p}")
        if self.graph != "file" and self.graph != "wheel" and self.n < 1:
            raise ConfigError("n must be positive")
        if self.trials < 1:
            raise ConfigError("trials must be positive")
        if self.K is not None and self.K < 1:
            raise ConfigError("K must be at least 1")
        if self.format not in ("csv", "jsonl"):
            raise ConfigError(f"format must be csv or jsonl, not {self.format!r}")
        if self.trace and self.format != "jsonl":
            raise ConfigError("traces are only emitted in jsonl format")
        if self.workers < 1:
            raise ConfigError("workers must be positive")
        native = NATIVE_MODEL[self.algorithm]
        if self.model is not None:
            try:
                model = ModelSpec.parse(self.model)
            except ValueError as exc:
                raise ConfigError(str(exc)) from None
            if not model.provides(native):
                raise ConfigError(f"{self.algorithm} needs {native}; model {model} lacks collision detection it uses")
        if self.emulate:
            if self.k is not None and self.k < 1:
                raise ConfigError("k must be at least 1")
            if self.k is None and self.k_policy not in POLICY_NAMES:
                raise ConfigError(f"unknown k policy {self.k_policy!r}; choose from {', '.join(POLICY_NAMES)}")
            if not 0 < self.epsilon < 1:
                raise ConfigError("epsilon must lie in (0, 1)")
            if self.c <= 2:
                raise ConfigError("c must exceed 2")
        elif self.distinct_sequences:
            raise ConfigError("distinct_sequences only applies to emulated runs")
        if self.out is not None:
            parent = Path(self.out).resolve().parent
            if not parent.is_dir():
                raise ConfigError(f"output directory {parent} does not exist")


@dataclass
class TrialRow:
    trial: int
    seed: int
    n: int
    max_degree: int
    K: Optional[int]
    k: Optional[int]
    phases: int
    slots: int
    aborted: bool
    violations: int
    max_colour: Optional[int] = None
    palette_size: Optional[int] = None
    mis_size: Optional[int] = None
    cycles: Optional[int] = None
    trace: Optional[list] = field(default=None, repr=False)


CSV_FIELDS = [f.name for f in dataclasses.fields(TrialRow) if f.name != "trace"]


# ---------------------------------------------------------------------------
# configuration files


def _coerce(name: str, text: str):
    ftype = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}[name]
    text = text.strip()
    optional = "Optional" in str(ftype)
    if optional and text.lower() in ("", "none"):
        return None
    base = str(ftype).replace("Optional[", "").rstrip("]")
    try:
        if base == "bool":
            low = text.lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(text)
        if base == "int":
            return int(text, 0)
        if base == "float":
            return float(text)
    except ValueError:
        raise ConfigError(f"bad value for {name}: {text!r}") from None
    return text


def parse_config(text: str) -> dict:
    """Flat ``key = value`` lines; ``#`` starts a comment; dashes equal underscores."""
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string("[config]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    known = {f.name for f in dataclasses.fields(ExperimentConfig)}
    out = {}
    for key, value in parser["config"].items():
        name = key.strip().replace("-", "_")
        if name not in known:
            raise ConfigError(f"unknown config key {key!r}")
        out[name] = _coerce(name, value)
    return out


def load_config(path: Union[str, Path]) -> dict:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


# ---------------------------------------------------------------------------
# trials


def trial_seed(master_seed: int, trial: int) -> int:
    return derive_seed(master_seed, trial)


def build_graph(cfg: ExperimentConfig, seed: int) -> Graph:
    """The trial's graph; random families use a stream of the trial seed."""
    fam = cfg.graph
    if fam == "ring":
        return graphs.make_ring(cfg.n)
    if fam == "complete":
        return graphs.make_complete(cfg.n)
    if fam == "star":
        return graphs.make_star(cfg.n - 1)
    if fam == "path":
        return graphs.make_path(cfg.n)
    if fam == "empty":
        return graphs.make_empty(cfg.n)
    if fam == "er":
        p = cfg.p if cfg.p is not None else min(1.0, cfg.degree / cfg.n)
        return graphs.make_erdos_renyi(cfg.n, p, derive_seed(seed, _GRAPH_STREAM))
    if fam == "wheel":
        return graphs.make_wheel(WheelSpec(cfg.wheel_m, cfg.wheel_s))
    return graphs.load_edge_list(Path(cfg.graph_file).read_text())


def k_for(cfg: ExperimentConfig, g: Graph) -> int:
    """Explicit k, or the policy evaluated with the graph's exact n and Delta."""
    if cfg.k is not None:
        return cfg.k
    n = max(g.node_count, 1)
    d = max(max_degree(g), 1)
    cls = POLICY_NAMES[cfg.k_policy]
    kwargs = {}
    for f in dataclasses.fields(cls):
        kwargs[f.name] = {"n": n, "max_degree": d, "epsilon": cfg.epsilon, "c": cfg.c}[f.name]
    return choose_k(cls(**kwargs))


def index_sequences(n: int, k: int) -> dict[int, tuple[bool, ...]]:
    """Node v gets the k low bits of v: pairwise distinct when 2**k >= n."""
    if n > 1 << k:
        raise ConfigError(f"k={k} sub-phases cannot give {n} nodes distinct sequences")
    return {v: tuple(bool(v >> i & 1) for i in range(k)) for v in range(n)}


def _trace_rows(report: RunReport) -> list:
    out = []
    for ph in report.trace:
        out.append({
            "phase": ph.phase,
            "p": list(ph.p),
            "contending": [int(c) for c in ph.contending],
            "actions": [[None if a is None else int(a) for a in row] for row in ph.actions],
            "observations": [[None if o is None else o.name for o in row] for row in ph.observations],
        })
    return out


def row_from_report(cfg: ExperimentConfig, trial: int, seed: int, g: Graph, K: Optional[int],
                    k: Optional[int], report: RunReport) -> TrialRow:
    outs = report.outputs
    # undecided nodes of an aborted run show up in ``aborted``, not as violations
    viol = sum(v.kind is not ViolationKind.UNDECIDED for v in check_output(cfg.algorithm, g, outs, K))
    row = TrialRow(trial, seed, g.node_count, max_degree(g), K, k, report.phases_elapsed,
                   report.slots_elapsed, report.aborted, viol)
    if cfg.algorithm in ("colouring", "k_colouring", "k_colouring_cycle", "two_hop_colouring"):
        decided = [c for c in outs if c is not None]
        row.max_colour = max(decided) if decided else None
        row.palette_size = len(set(decided))
    if cfg.algorithm in ("mis", "two_hop_mis"):
        row.mis_size = sum(1 for x in outs if x)
    if cfg.algorithm in ("k_colouring", "k_colouring_cycle"):
        row.cycles = math.ceil(report.phases_elapsed / (K + 1))
    if report.trace is not None:
        row.trace = _trace_rows(report)
    return row


def run_trial(cfg: ExperimentConfig, trial: int) -> TrialRow:
    seed = trial_seed(cfg.seed, trial)
    g = build_graph(cfg, seed)
    K = None
    if cfg.algorithm in ("k_colouring", "k_colouring_cycle"):
        K = cfg.K if cfg.K is not None else max(max_degree(g), 1)
    k = k_for(cfg, g) if cfg.emulate else None
    seq_seed = cfg.sequence_seed if cfg.sequence_seed is not None else derive_seed(seed, _SEQUENCE_STREAM)
    model = ModelSpec.parse(cfg.model) if cfg.model else None
    sequences = None
    if cfg.emulate and cfg.distinct_sequences:
        sequences = index_sequences(g.node_count, k)
    report = simulate(cfg.algorithm, g, seed, K=K, model=model, emulate_k=k, sequence_seed=seq_seed,
                      sequences=sequences, max_slots=cfg.max_slots, trace=cfg.trace)
    return row_from_report(cfg, trial, seed, g, K, k, report)


def _run_chunk(args) -> list[TrialRow]:
    cfg, trials = args
    return [run_trial(cfg, t) for t in trials]


def run_experiment(cfg: ExperimentConfig, trials: Optional[Iterable[int]] = None) -> list[TrialRow]:
    """One row per trial, in trial order, reproducible from the master seed.

    ``trials`` selects a subset of trial indices; each trial only depends on
    its own index, so subsets reproduce the matching rows of a full run.
    """
    cfg.validate()
    if cfg.graph == "file":
        try:
            graphs.load_edge_list(Path(cfg.graph_file).read_text())
        except OSError as exc:
            raise ConfigError(f"cannot read graph file: {exc}") from None
    idx = list(range(cfg.trials)) if trials is None else list(trials)
    if cfg.workers == 1 or len(idx) < 2:
        return [run_trial(cfg, t) for t in idx]
    size = max(1, math.ceil(len(idx) / (4 * cfg.workers)))
    chunks = [(cfg, idx[i:i + size]) for i in range(0, len(idx), size)]
    with ProcessPoolExecutor(cfg.workers) as pool:
        # map keeps submission order, so rows merge in trial order
        parts = list(pool.map(_run_chunk, chunks))
    return [row for part in parts for row in part]


# ---------------------------------------------------------------------------
# statistics


@dataclass(frozen=True)
class Stats:
    min: float
    mean: float
    max: float
    q50: float
    q90: float
    q99: float


@dataclass(frozen=True)
class Summary:
    count: int
    aborted: int
    violations: int
    phases: Stats
    slots: Stats
    bound: Optional[float]
    exceedance: Optional[float]


def _stats(values: Sequence[float]) -> Stats:
    a = np.asarray(values, dtype=float)
    q = np.quantile(a, [0.5, 0.9, 0.99])
    return Stats(float(a.min()), float(a.mean()), float(a.max()), float(q[0]), float(q[1]), float(q[2]))


def summarize(rows: Sequence[TrialRow], bound: Union[None, float, Callable[[TrialRow], float]] = None) -> Summary:
    """Phase and slot statistics; ``exceedance`` is the fraction of rows with phases above ``bound``.

    ``bound`` is a number or a function of the row (for per-graph bounds).
    """
    if not rows:
        raise ValueError("cannot summarise an empty row list")
    exceed = None
    shown = None
    if bound is not None:
        limits = [bound(r) if callable(bound) else bound for r in rows]
        exceed = sum(r.phases > b for r, b in zip(rows, limits)) / len(rows)
        shown = float(max(limits))
    return Summary(
        count=len(rows),
        aborted=sum(r.aborted for r in rows),
        violations=sum(r.violations for r in rows),
        phases=_stats([r.phases for r in rows]),
        slots=_stats([r.slots for r in rows]),
        bound=shown,
        exceedance=exceed,
    )


def format_summary(s: Summary) -> str:
    lines = [f"trials={s.count} aborted={s.aborted} violations={s.violations}"]
    for name in ("phases", "slots"):
        st = getattr(s, name)
        lines.append(f"{name}: min={st.min:g} mean={st.mean:.2f} q50={st.q50:g} q90={st.q90:g} "
                     f"q99={st.q99:g} max={st.max:g}")
    if s.bound is not None:
        lines.append(f"bound={s.bound:.2f} exceedance={s.exceedance:g}")
    return "\n".join(lines)


# ---------------------------------------------------------------------------
# output


def write_rows(rows: Sequence[TrialRow], fmt: str = "csv", out=None) -> Optional[str]:
    """CSV (fixed header, empty cells for missing metrics) or JSONL.

    Writes to ``out`` (path or text stream); returns the text when ``out`` is None.
    """
    buf = io.StringIO()
    if fmt == "csv":
        w = csv.DictWriter(buf, fieldnames=CSV_FIELDS, lineterminator="\n")
        w.writeheader()
        for r in rows:
            d = dataclasses.asdict(r)
            d.pop("trace")
            w.writerow({k: ("" if v is None else int(v) if isinstance(v, bool) else v) for k, v in d.items()})
    elif fmt == "jsonl":
        for r in rows:
            d = dataclasses.asdict(r)
            if d["trace"] is None:
                d.pop("trace")
            buf.write(json.dumps(d, sort_keys=False) + "\n")
    else:
        raise ValueError(f"unknown format {fmt!r}")
    text = buf.getvalue()
    if out is None:
        return text
    if isinstance(out, (str, Path)):
        try:
            Path(out).write_text(text)
        except OSError as exc:
            raise ConfigError(f"cannot write {out}: {exc}") from None
    else:
        out.write(text)
    return None


# ---------------------------------------------------------------------------
# emulation experiments


def _chunks(total: int, size: int) -> Iterable[int]:
    while total > 0:
        step = min(size, total)
        yield step
        total -= step


@dataclass(frozen=True)
class MissRate:
    k: int
    trials: int
    misses: int
    false_positives: int

    @property
    def frequency(self) -> float:
        return self.misses / self.trials

    @property
    def expected(self) -> float:
        return 2.0 ** -self.k

    @property
    def sigma(self) -> float:
        q = self.expected
        return math.sqrt(q * (1 - q) / self.trials)


def missrate_experiment(k: int, trials: int, seed: int, *, wishers: int = 2, chunk: int = 1 << 17) -> MissRate:
    """Fresh-coin detection on K_2 with ``wishers`` (1 or 2) nodes wishing to beep.

    A miss is a trial where some node touched by a collision raised no
    flag; a false positive is a flag at a node no collision touches.
    """
    if k < 1:
        raise ValueError("k must be at least 1")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    if wishers not in (1, 2):
        raise ValueError("K_2 has one or two wishing nodes")
    g = graphs.make_complete(2)
    wishes = [True, wishers == 2]
    rng = np.random.default_rng(seed)
    misses = 0
    fp = 0
    for size in _chunks(trials, chunk):
        b = detect_collision_batch(g, wishes, k, size, rng)
        misses += int((~b.flags & b.truth).any(axis=1).sum())
        fp += int((b.flags & ~b.truth).sum())
    return MissRate(k, trials, misses, fp)


@dataclass(frozen=True)
class WheelResult:
    spec: WheelSpec
    t: int
    trials: int
    survivals: tuple[int, ...]  # per spoke

    @property
    def frequencies(self) -> tuple[float, ...]:
        return tuple(s / self.trials for s in self.survivals)

    @property
    def expected(self) -> float:
        return 2.0 ** -self.t

    @property
    def sigma(self) -> float:
        q = self.expected
        return math.sqrt(q * (1 - q) / self.trials)


def wheel_experiment(spec: WheelSpec, t: int, trials: int, seed: int, *, chunk: int = 1 << 16) -> WheelResult:
    """Survival of E_t per spoke: both ends beeped identically for t sub-phases.

    Every u_{is} wishes to beep and runs the fresh-coin detector; other
    nodes only listen.
    """
    if t < 0:
        raise ValueError("t must be non-negative")
    if t >= spec.s:
        raise ValueError(f"t={t} is outside the range t < s={spec.s} where the symmetry bound holds")
    if trials < 1:
        raise ValueError("trials must be at least 1")
    spokes = spec.spokes()
    if t == 0:
        return WheelResult(spec, t, trials, tuple(trials for _ in spokes))
    g = graphs.make_wheel(spec)
    wishes = [False] * g.node_count
    for v in spec.multiples():
        wishes[v] = True
    rng = np.random.default_rng(seed)
    counts = np.zeros(len(spokes), dtype=np.int64)
    pos = None
    for size in _chunks(trials, chunk):
        b = detect_collision_batch(g, wishes, t, size, rng, flags=False, signals=True)
        if pos is None:
            where = {int(v): i for i, v in enumerate(b.wishers)}
            pos = np.array([[where[a], where[c]] for a, c in spokes])
        same = (b.signals[:, pos[:, 0], :] == b.signals[:, pos[:, 1], :]).all(axis=2)
        counts += same.sum(axis=0)
    return WheelResult(spec, t, trials, tuple(int(c) for c in counts))


@dataclass(frozen=True)
class TranspileCheck:
    trials: int
    failures: int
    aborted: int
    k: int
    bound: float  # n * Delta / 2**(k+1) for the largest trial graph
    rows: tuple = ()

    @property
    def rate(self) -> float:
        return self.failures / self.trials


def transpile_failure_experiment(cfg: ExperimentConfig, policy: Optional[str] = None,
                                 trials: Optional[int] = None) -> TranspileCheck:
    """Count transpiled trials whose output has any violation."""
    cfg = dataclasses.replace(cfg, emulate=True)
    if policy is not None:
        cfg.k_policy = policy
        cfg.k = None
    if trials is not None:
        cfg.trials = trials
    rows = run_experiment(cfg)
    bound = max(failure_bound(max(r.n, 1), max(r.max_degree, 1), r.k) for r in rows)
    return TranspileCheck(
        trials=len(rows),
        failures=sum(r.violations > 0 for r in rows),
        aborted=sum(r.aborted for r in rows),
        k=max(r.k for r in rows),
        bound=bound,
        rows=tuple(rows),
    )


def config_from(values: dict) -> ExperimentConfig:
    try:
        return ExperimentConfig(**values)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


__all__ = [
    "ConfigError", "ExperimentConfig", "TrialRow", "CSV_FIELDS", "parse_config", "load_config",
    "run_experiment", "run_trial", "summarize", "Summary", "write_rows", "missrate_experiment",
    "wheel_experiment", "transpile_failure_experiment", "MissRate", "WheelResult", "TranspileCheck",
    "ModelMismatch", "format_summary", "index_sequences", "config_from", "trial_seed", "build_graph", "k_for",
]
