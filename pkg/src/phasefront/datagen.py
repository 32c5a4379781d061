"""Self-evolving record store: explore assignments, evaluate, append labels.

The store is an append-only line-delimited file (one JSON record per line)
with a schema-version header. Records are immutable once written; dedup is
by exact key, since the deterministic evaluator makes re-evaluation pointless.
"""
from __future__ import annotations

import itertools
import json
import logging
import os
from dataclasses import dataclass
from datetime import datetime, timezone

from . import numkernel as nk
from .errors import EvaluatorError, StoreIoError, UnknownGraphError
from .evaluator import DIRECTIVES, Metrics
from .irgraph import Cdfg, GraphMetadata

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
FORMAT_NAME = "phasefront-db"


@dataclass(frozen=True)
class DbRecord:
    graph_id: str
    assignment: tuple
    metrics: Metrics
    metadata: GraphMetadata
    lowering_hash: str
    evaluator_kind: str
    timestamp: str
    agent_tag: str = ""

    @property
    def key(self):
        return (self.graph_id, self.assignment, self.evaluator_kind, self.lowering_hash)

    def to_json(self) -> str:
        return json.dumps({
            "graph_id": self.graph_id,
            "assignment": list(self.assignment),
            "metrics": {"exec_time": self.metrics.exec_time,
                        "code_size": self.metrics.code_size,
                        "energy": self.metrics.energy},
            "metadata": {"n_input": self.metadata.n_input,
                         "n_intermediate": self.metadata.n_intermediate,
                         "n_output": self.metadata.n_output,
                         "n_edges": self.metadata.n_edges,
                         "n_mul": self.metadata.n_mul},
            "lowering_hash": self.lowering_hash,
            "evaluator_kind": self.evaluator_kind,
            "timestamp": self.timestamp,
            "agent_tag": self.agent_tag,
        }, sort_keys=True)

    @staticmethod
    def from_json(line: str) -> "DbRecord":
        d = json.loads(line)
        return DbRecord(
            graph_id=d["graph_id"],
            assignment=tuple(d["assignment"]),
            metrics=Metrics(**d["metrics"]),
            metadata=GraphMetadata(**d["metadata"]),
            lowering_hash=d["lowering_hash"],
            evaluator_kind=d["evaluator_kind"],
            timestamp=d["timestamp"],
            agent_tag=d.get("agent_tag", ""),
        )


class RecordStore:
    """Append-only store with exact-key dedup; one serialized writer."""

    def __init__(self, path, directives=DIRECTIVES):
        self.path = str(path)
        self.directives = tuple(directives)
        self._records: list[DbRecord] = []
        self._keys: set = set()
        if os.path.exists(self.path) and os.path.getsize(self.path) > 0:
            self._load()
        else:
            header = {"format": FORMAT_NAME, "schema_version": SCHEMA_VERSION,
                      "directives": list(self.directives)}
            try:
                with open(self.path, "w", encoding="utf-8") as fh:
                    fh.write(json.dumps(header, sort_keys=True) + "\n")
            except OSError as exc:
                raise StoreIoError(f"cannot create store {self.path}: {exc}") from exc

    def _load(self):
        try:
            with open(self.path, encoding="utf-8") as fh:
                lines = fh.read().splitlines()
        except OSError as exc:
            raise StoreIoError(f"cannot read store {self.path}: {exc}") from exc
        if not lines:
            raise StoreIoError(f"store {self.path} is empty (missing header)")
        header = json.loads(lines[0])
        if header.get("format") != FORMAT_NAME:
            raise StoreIoError(f"{self.path} is not a record store")
        if header.get("schema_version") != SCHEMA_VERSION:
            raise StoreIoError(
                f"store schema {header.get('schema_version')} != {SCHEMA_VERSION}")
        if tuple(header.get("directives", ())) != self.directives:
            raise StoreIoError(
                f"store directive set {header.get('directives')} does not match "
                f"configured {list(self.directives)}")
        for line in lines[1:]:
            if not line.strip():
                continue
            record = DbRecord.from_json(line)
            self._records.append(record)
            self._keys.add(record.key)

    def __len__(self) -> int:
        return len(self._records)

    def records(self) -> list[DbRecord]:
        return list(self._records)

    def graph_ids(self) -> set:
        return {r.graph_id for r in self._records}

    def append(self, record: DbRecord) -> bool:
        """Write one record unless its key already exists; True when written."""
        if record.key in self._keys:
            return False
        try:
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(record.to_json() + "\n")
        except OSError as exc:
            raise StoreIoError(f"cannot append to {self.path}: {exc}") from exc
        self._records.append(record)
        self._keys.add(record.key)
        return True


def random_policy(seed: int):
    """Uniform directive per node; the bootstrap explorer."""
    rng = nk.make_rng(seed, stream=31)

    def policy(graph: Cdfg, episode: int):
        return tuple(DIRECTIVES[i] for i in rng.integers(len(DIRECTIVES),
                                                         size=graph.n_instructions))
    return policy


def enumerating_policy():
    """Walks the full assignment space in lexicographic order (test oracle)."""
    def policy(graph: Cdfg, episode: int):
        space = len(DIRECTIVES) ** graph.n_instructions
        idx = episode % space if space else 0
        out = []
        for _ in range(graph.n_instructions):
            out.append(DIRECTIVES[idx % len(DIRECTIVES)])
            idx //= len(DIRECTIVES)
        return tuple(reversed(out))
    return policy


def agent_rollout_policy(agent, env_factory, energy_targets, seed: int = 0):
    """Explore with a trained agent's stochastic action selection."""
    rng = nk.make_rng(seed, stream=33)
    envs = {}

    def policy(graph: Cdfg, episode: int):
        gid = graph.source_hash
        if gid not in envs:
            envs[gid] = env_factory(gid)
        env = envs[gid]
        target = energy_targets[episode % len(energy_targets)]
        state = env.reset(target)
        done = env.horizon == 0
        while not done:
            if agent.kind == "dqn":
                action = agent.act(state.observation, rng)
            else:
                action, _, _ = agent.act(state.observation, rng)
            state, _, done = env.step(state, action)
        return state.assignment
    return policy


def now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="seconds")


def generate(graphs, episodes_per_graph: int, policy, evaluator,
             store: RecordStore, agent_tag: str = "", timestamp: str | None = None) -> int:
    """Run exploration episodes, evaluate each completed assignment, append
    deduplicated records. Returns the number of new rows."""
    stamp = timestamp or now_iso()
    appended = 0
    for graph in graphs:
        for episode in range(episodes_per_graph):
            assignment = tuple(policy(graph, episode))
            try:
                metrics = evaluator.evaluate(graph, assignment)
            except Exception as exc:
                raise EvaluatorError(f"evaluation failed: {exc}",
                                     assignment=assignment) from exc
            record = DbRecord(
                graph_id=graph.source_hash,
                assignment=assignment,
                metrics=metrics,
                metadata=graph.metadata,
                lowering_hash=evaluator.provenance_hash,
                evaluator_kind=evaluator.kind,
                timestamp=stamp,
                agent_tag=agent_tag,
            )
            if store.append(record):
                appended += 1
    return appended


def split(store: RecordStore, test_graph_ids):
    """Partition rows by graph id; reserved graphs never leak into training."""
    test_ids = set(test_graph_ids)
    known = store.graph_ids()
    missing = test_ids - known
    if missing:
        raise UnknownGraphError(f"graph ids not in store: {sorted(missing)}")
    train = [r for r in store.records() if r.graph_id not in test_ids]
    test = [r for r in store.records() if r.graph_id in test_ids]
    assert not ({r.graph_id for r in train} & {r.graph_id for r in test})
    if not train:
        log.warning("every graph reserved for test; training set is empty")
    return train, test


def exhaustive_assignments(graph: Cdfg):
    return itertools.product(DIRECTIVES, repeat=graph.n_instructions)
