"""Ground-truth metric backends mapping (graph, directive assignment) to metrics.

Two backends: a deterministic synthetic cost model used for all desk-scale
experiments, and an adapter that drives an external compiler toolchain.
"""
from __future__ import annotations

import hashlib
import json
import os
import shutil
import statistics
import subprocess
import tempfile
import time
from dataclasses import dataclass, field

from .errors import (CompileError, CompileTimeoutError, ShapeError,
                     ToolchainMissingError)
from .irgraph import INSTRUCTION, Cdfg

DIRECTIVES = ("none", "size", "speed")
NONE, SIZE, SPEED = DIRECTIVES

# Per-opcode base cost, in abstract units.
BASE_COST = {
    "add": 1.0, "sub": 1.0, "icmp": 1.0, "alloca": 2.0, "load": 3.0,
    "store": 3.0, "call": 8.0, "mul": 4.0, "div": 10.0, "other": 1.0,
}

# Directive factor tables: (exec_time, code_size, energy). The speed/size
# factors pull the objectives in opposite directions so fronts stay
# non-degenerate.
FACTORS = {
    SPEED: (0.7, 1.4, 1.2),
    SIZE: (1.1, 0.8, 0.9),
    NONE: (1.0, 1.0, 1.0),
}

DEFAULT_LOWERING_TABLE = {
    "speed": ["mem2reg", "instcombine", "simplifycfg", "gvn", "licm",
              "loop-unroll", "inline", "slp-vectorizer"],
    "size": ["mem2reg", "instcombine", "simplifycfg", "dce", "globaldce",
             "strip-dead-prototypes"],
    "neutral": ["mem2reg", "simplifycfg"],
}

# Synthetic stand-ins for the canonical fixed optimization levels. O2 is a
# size-biased mix: `size` on even instruction positions, `none` on odd.
FIXED_LEVELS = ("O1", "O2", "O3")


@dataclass(frozen=True)
class Metrics:
    exec_time: float
    code_size: float
    energy: float

    def as_tuple(self) -> tuple[float, float, float]:
        return (self.exec_time, self.code_size, self.energy)


Assignment = tuple  # tuple[str, ...] over DIRECTIVES, one per instruction node


def check_assignment(graph: Cdfg, assignment) -> tuple[str, ...]:
    assignment = tuple(assignment)
    if len(assignment) != graph.n_instructions:
        raise ShapeError(
            f"assignment length {len(assignment)} != {graph.n_instructions} instruction nodes")
    for d in assignment:
        if d not in DIRECTIVES:
            raise ShapeError(f"unknown directive {d!r}")
    return assignment


def table_hash(table=None) -> str:
    """Digest stamped into DbRecords so provenance pins the cost tables."""
    payload = {"base": BASE_COST, "factors": FACTORS,
               "lowering": table or DEFAULT_LOWERING_TABLE}
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


def synth_evaluate(graph: Cdfg, assignment) -> Metrics:
    """Deterministic cost model: sum of base(op) * factor(directive) per node."""
    assignment = check_assignment(graph, assignment)
    t = s = e = 0.0
    for node, directive in zip((n for n in graph.nodes if n.kind == INSTRUCTION),
                               assignment):
        base = BASE_COST[node.opcode]
        ft, fs, fe = FACTORS[directive]
        t += base * ft
        s += base * fs
        e += base * fe
    return Metrics(t, s, e)


def fixed_level_assignment(level: str, graph: Cdfg) -> tuple[str, ...]:
    n = graph.n_instructions
    if level == "O1":
        return (NONE,) * n
    if level == "O2":
        return tuple(SIZE if i % 2 == 0 else NONE for i in range(n))
    if level == "O3":
        return (SPEED,) * n
    raise ShapeError(f"unknown fixed level {level!r}")


def energy_range(graph: Cdfg) -> tuple[float, float]:
    """Achievable synthetic energy extremes (all-size vs all-speed)."""
    n = graph.n_instructions
    lo = synth_evaluate(graph, (SIZE,) * n).energy
    hi = synth_evaluate(graph, (SPEED,) * n).energy
    return lo, hi


def lower_to_passes(assignment, graph: Cdfg, table=None) -> list[str]:
    """Majority directive selects one of the three documented pass pipelines.

    Ties break by priority size > speed > none; an empty assignment maps to
    the neutral pipeline.
    """
    table = table or DEFAULT_LOWERING_TABLE
    if not assignment:
        return list(table["neutral"])
    counts = {d: 0 for d in DIRECTIVES}
    for d in assignment:
        counts[d] += 1
    priority = {SIZE: 0, SPEED: 1, NONE: 2}
    winner = min(DIRECTIVES, key=lambda d: (-counts[d], priority[d]))
    pipeline = {SPEED: "speed", SIZE: "size", NONE: "neutral"}[winner]
    return list(table[pipeline])


class SyntheticEvaluator:
    """Pure-function backend over the cost tables; safe for concurrent use."""

    kind = "synthetic"

    def __init__(self):
        self.provenance_hash = table_hash()

    def evaluate(self, graph: Cdfg, assignment) -> Metrics:
        return synth_evaluate(graph, assignment)

    def fixed_level(self, level: str, graph: Cdfg) -> Metrics:
        return synth_evaluate(graph, fixed_level_assignment(level, graph))


@dataclass
class ToolchainConfig:
    """Paths and policy for the external backend.

    `optimizer` runs explicit pass lists (`opt`-style). When it is None the
    per-pipeline `compiler_flags` drive a single compiler invocation instead;
    both modes are recorded in provenance.
    """
    compiler: str = "clang"
    optimizer: str | None = None
    linker: str | None = None
    compiler_flags: dict = field(default_factory=lambda: {
        "speed": ["-O3"], "size": ["-Os"], "neutral": ["-O1"]})
    lowering_table: dict = field(default_factory=lambda: dict(DEFAULT_LOWERING_TABLE))
    workload_args: list = field(default_factory=list)
    runs: int = 5
    timeout_s: float = 60.0
    energy_tdp: float = 15.0     # watts-equivalent proxy constant
    energy_kappa: float = 1.0
    supports_attributes: bool = False


def _resolve(path: str) -> str:
    found = shutil.which(path) or (path if os.path.isfile(path) and os.access(path, os.X_OK) else None)
    if not found:
        raise ToolchainMissingError(f"toolchain binary not found: {path!r}")
    return found


def _run(cmd, timeout):
    try:
        proc = subprocess.run(cmd, capture_output=True, text=True, timeout=timeout)
    except subprocess.TimeoutExpired as exc:
        raise CompileTimeoutError(f"timed out after {timeout}s: {' '.join(cmd)}") from exc
    if proc.returncode != 0:
        raise CompileError(f"command failed: {' '.join(cmd)}\n{proc.stderr}")
    return proc


class ExternalEvaluator:
    """Compile-and-measure backend. Never falls back silently: every declared
    binary must resolve before any work starts."""

    kind = "external"

    def __init__(self, config: ToolchainConfig):
        self.config = config
        self.provenance_hash = table_hash(config.lowering_table)

    def _binaries(self):
        bins = [self.config.compiler]
        if self.config.optimizer:
            bins.append(self.config.optimizer)
        if self.config.linker:
            bins.append(self.config.linker)
        return [_resolve(b) for b in bins]

    def evaluate(self, source_path: str, assignment, graph: Cdfg) -> Metrics:
        cfg = self.config
        compiler = self._binaries()[0]
        passes = lower_to_passes(assignment, graph, cfg.lowering_table)
        pipeline = self._pipeline_name(assignment)
        with tempfile.TemporaryDirectory(prefix="phasefront-") as tmp:
            obj = os.path.join(tmp, "unit.o")
            exe = os.path.join(tmp, "unit.bin")
            if cfg.optimizer:
                optimizer = _resolve(cfg.optimizer)
                ll = os.path.join(tmp, "unit.ll")
                opt_ll = os.path.join(tmp, "unit.opt.ll")
                _run([compiler, "-S", "-emit-llvm", "-O0", "-Xclang",
                      "-disable-O0-optnone", source_path, "-o", ll], cfg.timeout_s)
                _run([optimizer, f"-passes={','.join(passes)}", ll, "-S", "-o", opt_ll],
                     cfg.timeout_s)
                _run([compiler, "-c", opt_ll, "-o", obj], cfg.timeout_s)
                _run([compiler, opt_ll, "-o", exe], cfg.timeout_s)
            else:
                flags = list(cfg.compiler_flags[pipeline])
                _run([compiler, "-c", *flags, source_path, "-o", obj], cfg.timeout_s)
                _run([compiler, *flags, source_path, "-o", exe], cfg.timeout_s)
            code_size = float(os.path.getsize(obj))
            exec_time = self._measure(exe, cfg)
        energy = cfg.energy_kappa * exec_time * cfg.energy_tdp
        return Metrics(exec_time, code_size, energy)

    def _pipeline_name(self, assignment) -> str:
        counts = {d: 0 for d in DIRECTIVES}
        for d in assignment:
            counts[d] += 1
        priority = {SIZE: 0, SPEED: 1, NONE: 2}
        winner = min(DIRECTIVES, key=lambda d: (-counts[d], priority[d]))
        return {SPEED: "speed", SIZE: "size", NONE: "neutral"}[winner]

    def _measure(self, exe, cfg) -> float:
        samples = []
        for _ in range(cfg.runs):
            start = time.perf_counter()
            _run([exe, *cfg.workload_args], cfg.timeout_s)
            samples.append(time.perf_counter() - start)
        return statistics.median(samples)

    def fixed_level(self, level: str, source_path: str, graph: Cdfg) -> Metrics:
        return self.evaluate(source_path, fixed_level_assignment(level, graph), graph)


def fixed_level_metrics(level: str, graph: Cdfg, backend=None) -> Metrics:
    """Metrics of the canonical pipeline for a fixed optimization level."""
    backend = backend or SyntheticEvaluator()
    if isinstance(backend, SyntheticEvaluator):
        return backend.fixed_level(level, graph)
    raise ToolchainMissingError(
        "fixed_level_metrics on an external backend needs a source path; "
        "use ExternalEvaluator.fixed_level directly")
